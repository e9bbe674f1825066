"""Two-stage probabilistic group testing."""

__version__ = "0.1.0"
