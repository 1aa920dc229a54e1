"""EUREKA interestingness-first feature ranking."""

__version__ = "1.0.0"
