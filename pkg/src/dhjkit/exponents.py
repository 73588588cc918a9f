"""Derived exponents and constants attached to a given power p."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class Regime(str, enum.Enum):
    SUBQUADRATIC = "subquadratic"
    QUADRATIC = "quadratic"
    SUPERQUADRATIC = "superquadratic"


@dataclass(frozen=True)
class ExponentContext:
    """All p-dependent constants used across the package.

    ``beta`` is the scaling exponent 1/(p-1), ``gamma_ss`` the self-similar
    amplitude exponent (p-2)/(2(p-1)), ``c_p`` the amplitude of the stationary
    half-line solutions (``None`` when p = 2) and ``L_limit`` the limit of
    phi(y)/y^(beta+1) for the self-similar profiles.
    """

    p: float
    beta: float
    gamma_ss: float
    c_p: float | None
    L_limit: float
    regime: Regime

    @property
    def lambda_liminf(self) -> float:
        """Lower bound for liminf of phi'^(p-1)/y on backward profiles."""
        return 0.5 * min(1.0, self.beta)

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "beta": self.beta,
            "gamma_ss": self.gamma_ss,
            "c_p": self.c_p,
            "L_limit": self.L_limit,
            "regime": self.regime.value,
        }


def make_context(p: float) -> ExponentContext:
    p = float(p)
    if not math.isfinite(p) or p <= 1.0:
        raise ValueError(f"exponent p must be > 1, got {p!r}")
    beta = 1.0 / (p - 1.0)
    gamma_ss = (p - 2.0) / (2.0 * (p - 1.0))
    if p == 2.0:
        regime = Regime.QUADRATIC
        c_p = None
    else:
        regime = Regime.SUBQUADRATIC if p < 2.0 else Regime.SUPERQUADRATIC
        # beta^beta overflows for p very close to 1
        log_cp = beta * math.log(beta) - math.log(abs(1.0 - beta))
        c_p = math.exp(log_cp) if log_cp < 709.0 else math.inf
    L_limit = p ** (-beta) / (beta + 1.0)
    return ExponentContext(p=p, beta=beta, gamma_ss=gamma_ss, c_p=c_p, L_limit=L_limit, regime=regime)
