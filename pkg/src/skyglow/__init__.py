"""skyglow: night-sky brightness class prediction from citizen-science
observations — ingestion, feature engineering, native tree-ensemble
learners, cross-validation, and ensemble blending, behind one CLI."""

__version__ = "0.1.0"

from . import dataset, ensemble, features, learners, synth, textfeat, validation

__all__ = ["dataset", "ensemble", "features", "learners", "synth",
           "textfeat", "validation", "__version__"]
