"""Count-metric curvature estimation on cell complexes."""

__version__ = "0.1.0"
