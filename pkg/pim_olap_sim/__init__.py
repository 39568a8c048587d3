"""PIM OLAP Sim - processing-in-memory filtering simulator and miniature column store."""

__version__ = "0.1.0"
