"""Real-time two-stage (detect, then box-prompted segment) vision pipeline toolkit."""

__version__ = "0.1.0"
