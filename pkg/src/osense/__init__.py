"""Recover Heisenberg interaction graphs from a few eigenstates.

Pipeline: sector eigenstates -> operator covariance kernel -> sparse basis
-> entropy selection -> edge list.  See ``osense.pipeline.run``.
"""

__version__ = "0.1.0"
