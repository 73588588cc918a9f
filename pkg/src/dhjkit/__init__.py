"""Numerical toolkit for the diffusive Hamilton-Jacobi equation u_t - Δu = |∇u|^p.

Self-similar profiles, shooting classification, a method-of-lines solver and
empirical checkers for the Bernstein, Li-Yau and half-space estimates.
"""

from dhjkit.exponents import ExponentContext, Regime, make_context

__version__ = "0.1.0"

__all__ = ["ExponentContext", "Regime", "make_context", "__version__"]
