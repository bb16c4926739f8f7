"""L2-SP ridge transfer learning: risk formulas, phase boundaries and
transfer-optimal source regularization, with a Monte Carlo harness."""

__version__ = "0.1.0"
