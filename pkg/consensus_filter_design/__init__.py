"""Design of convergence-acceleration filters for distributed average
consensus on large random graphs.
"""

__version__ = "1.0.0"
