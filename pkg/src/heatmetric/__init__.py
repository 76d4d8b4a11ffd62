"""Heat-flow metrics on Euclidean cones and the Heisenberg group."""

__version__ = "0.1.0"
