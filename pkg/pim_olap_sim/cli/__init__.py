"""Command-line layer built on click."""

from pim_olap_sim.cli.app import cli

__all__ = ["cli"]
