"""critcycle — critical quantum metrology by cycling a bosonic mode to its critical point."""

__version__ = "0.1.0"
