"""Command-line front end and DOT rendering."""

from cmdesign.cli.commands import build_parser, execute_command
from cmdesign.cli.render import RenderLayout, to_dot

__all__ = ["build_parser", "execute_command", "RenderLayout", "to_dot"]
