"""Block-level quasi-experimental designs for polling-place distance effects."""

__version__ = "0.1.0"
