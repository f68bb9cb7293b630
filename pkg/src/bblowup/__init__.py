"""Stability of self-similar wave-breaking profiles for the generalized b-equation.

Subpackages by concern: ``model`` (parameters, regime classification),
``exact`` (closed-form blowup profile, residual oracle), ``frames``
(similarity coordinates), ``helmholtz`` (``1 - alpha^2 d_xx`` and Sobolev
norms), ``dynamics`` (perturbation evolution), ``analysis`` (energy ledgers,
rate fits) and ``scenarios`` (runs, sweeps, persistence).
"""

__version__ = "0.1.0"
