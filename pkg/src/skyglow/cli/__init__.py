"""Command-line layer: config parsing, SVG rendering, and the commands."""

from .commands import COMMANDS, dispatch
from .config import RunConfig, load_config, render_config
from .main import main

__all__ = ["COMMANDS", "RunConfig", "dispatch", "load_config",
           "render_config", "main"]
