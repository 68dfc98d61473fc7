"""Rule-based link prediction with redundancy-aware confidence aggregation."""

__version__ = "0.1.0"
