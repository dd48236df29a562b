"""Zero statistics of hyperbolic Gaussian analytic functions.

Simulation of the random Taylor series with hyperbolic-invariant zeros,
certified zero counting in centered disks, the exact Poisson-binomial law
of the count in the determinantal case, closed-form large-deviation rate
functions, and replicated tail / scaling / certificate experiments.
"""

__version__ = "0.1.0"
