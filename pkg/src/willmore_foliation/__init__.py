"""Area-constrained Willmore foliations of asymptotically Schwarzschild 3-manifolds."""

__version__ = "0.1.0"
