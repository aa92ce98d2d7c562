"""Semi-analytic solver for the fourth-order sector problem written as an operator sum."""

__version__ = "0.1.0"
