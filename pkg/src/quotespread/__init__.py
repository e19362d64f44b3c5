"""Quote matching and spread analysis across offline and online corpora."""

__version__ = "0.1.0"
