"""Neural generative models for arbitrary-evidence posterior inference on discrete Bayesian networks."""

__version__ = "0.1.0"
