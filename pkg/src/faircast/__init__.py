"""Mobility-driven county case forecasting with a rank-correlation fairness audit."""

__version__ = "0.1.0"
