"""Test package for the PIM OLAP simulator."""
