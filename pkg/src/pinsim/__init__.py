"""pinsim: disordered pinning models on heavy-tailed renewal processes.

Desk-scale simulation and numerical analysis: exact partition-function
dynamic programming, homogeneous and continuum Psi series, free energy and
critical-curve estimation, weak-coupling ensembles, and alpha-stable
regenerative-set statistics.
"""

__version__ = "0.1.0"
