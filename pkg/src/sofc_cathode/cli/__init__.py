"""Command-line front end: ``sofc-cathode <command> --config FILE``."""
from .commands import COMMANDS, CommandResult
from .config import RunConfig, load, loads
from .main import main

__all__ = ["COMMANDS", "CommandResult", "RunConfig", "load", "loads", "main"]
