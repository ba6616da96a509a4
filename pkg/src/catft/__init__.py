"""Category-routed volatility forecasting with a Markov successor selector."""

__version__ = "0.1.0"
