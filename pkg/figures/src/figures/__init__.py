"""Figure rendering for the fdfsi experiment CSV outputs."""

__version__ = "0.1.0"
