"""Turn-taking simulator with emergent-synchrony metrics."""

__version__ = "0.1.0"
