"""Explicit solutions of u_t - Δu = |∇u|^p with hand-coded derivatives.

Every family evaluates on arrays: ``x`` has shape (..., n) and ``t`` shape
(...) (broadcast against ``x[..., 0]``).  Points outside a family's validity
domain raise :class:`DomainError`; nothing is extrapolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from dhjkit.exponents import ExponentContext, make_context
from dhjkit.profile import BACKWARD, FORWARD, InsufficientRangeError, ProfileTrajectory, second_derivative


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceTimePoint:
    x: tuple[float, ...]
    t: float

    def as_dict(self) -> dict:
        return {"x": [float(v) for v in self.x], "t": float(self.t)}


@dataclass(frozen=True)
class Evaluation:
    u: np.ndarray
    grad_u: np.ndarray
    u_t: np.ndarray
    laplacian_u: np.ndarray

    @property
    def grad_norm(self) -> np.ndarray:
        return np.linalg.norm(self.grad_u, axis=-1)


def _prepare(x, t, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != n:
        raise DomainError(f"expected points of dimension {n}, got shape {x.shape}")
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], t.shape)
    x = np.broadcast_to(x, shape + (n,))
    t = np.broadcast_to(t, shape)
    return x, t


def _pow(a, q):
    return np.power(np.abs(a), q)


class ClosedFormSolution:
    """Base for the solution families.  Subclasses define ``n`` and ``_evaluate``."""

    family: ClassVar[str] = ""
    context: ExponentContext
    #: +1 for u_t - Δu = |∇u|^p, -1 for the absorbing form v_t - Δv + |∇v|^p = 0
    equation_sign: ClassVar[int] = 1

    @property
    def n(self) -> int:
        raise NotImplementedError

    @property
    def p(self) -> float:
        return self.context.p

    def _check(self, x, t):
        pass

    def evaluate(self, x, t) -> Evaluation:
        x, t = _prepare(x, t, self.n)
        self._check(x, t)
        return self._evaluate(x, t)

    def _evaluate(self, x, t) -> Evaluation:
        raise NotImplementedError

    def residual(self, x, t) -> np.ndarray:
        e = self.evaluate(x, t)
        return e.u_t - e.laplacian_u - self.equation_sign * _pow(e.grad_norm, self.p)

    def rescale(self, lam: float) -> "ClosedFormSolution":
        return Rescaled.of(self, lam)

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    def as_dict(self) -> dict[str, Any]:
        return {"family": self.family, "p": self.p, **self.params()}


def _half_space_check(x, t, strict=False):
    xn = x[..., -1]
    bad = xn <= 0 if strict else xn < 0
    if np.any(bad):
        raise DomainError("point outside the half-space x_n >= 0" if not strict else "point requires x_n > 0")


@dataclass(frozen=True)
class Constant(ClosedFormSolution):
    context: ExponentContext
    value: float
    dim: int = 1
    family: ClassVar[str] = "Constant"

    @property
    def n(self):
        return self.dim

    def _evaluate(self, x, t):
        z = np.zeros(t.shape)
        return Evaluation(z + self.value, np.zeros(x.shape), z.copy(), z.copy())

    def rescale(self, lam):
        _check_lambda(lam)
        return Constant(self.context, self.value * lam ** (self.context.beta - 1.0), self.dim)

    def params(self):
        return {"value": self.value, "n": self.dim}


@dataclass(frozen=True)
class TravelingWave(ClosedFormSolution):
    """u = |a|^p t + a.x"""

    context: ExponentContext
    a: tuple[float, ...]
    family: ClassVar[str] = "TravelingWave"

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in np.atleast_1d(self.a)))
        if not any(self.a):
            raise ValueError("TravelingWave needs a nonzero vector a")

    @property
    def n(self):
        return len(self.a)

    def _evaluate(self, x, t):
        a = np.asarray(self.a)
        speed = float(np.linalg.norm(a)) ** self.p
        u = speed * t + x @ a
        return Evaluation(u, np.broadcast_to(a, x.shape).copy(), np.full(t.shape, speed), np.zeros(t.shape))

    def rescale(self, lam):
        _check_lambda(lam)
        return TravelingWave(self.context, tuple(lam**self.context.beta * v for v in self.a))

    def params(self):
        return {"a": list(self.a)}


@dataclass(frozen=True)
class StationaryHalfLine(ClosedFormSolution):
    """One-dimensional stationary solutions in the half-space, depending on x_n.

    p > 2: u = c_p((x_n + a)^(1-beta) - a^(1-beta)), a >= 0.
    p < 2: u = c(p)(a^(1-beta) - (a + x_n)^(1-beta)), a > 0, c(p) = beta^beta/(beta-1).
    """

    context: ExponentContext
    a: float
    dim: int = 1
    family: ClassVar[str] = "StationaryHalfLine"

    def __post_init__(self):
        p = self.context.p
        if p == 2.0:
            raise ValueError("StationaryHalfLine is not defined for p = 2")
        if p > 2 and self.a < 0:
            raise ValueError("offset a must be >= 0 for p > 2")
        if p < 2 and self.a <= 0:
            raise ValueError("offset a must be > 0 for p < 2")

    @property
    def n(self):
        return self.dim

    def _check(self, x, t):
        _half_space_check(x, t, strict=self.a == 0)

    def _evaluate(self, x, t):
        beta = self.context.beta
        c = self.context.c_p
        w = x[..., -1] + self.a
        sign = 1.0 if self.context.p > 2 else -1.0
        # u = sign * c * (w^(1-beta) - a^(1-beta)); u' = c |1-beta| w^(-beta)
        u = sign * c * (w ** (1 - beta) - self.a ** (1 - beta))
        du = c * abs(1 - beta) * w ** (-beta)
        d2u = -beta * du / w
        grad = np.zeros(x.shape)
        grad[..., -1] = du
        return Evaluation(u, grad, np.zeros(t.shape), d2u)

    def rescale(self, lam):
        _check_lambda(lam)
        return StationaryHalfLine(self.context, self.a / lam, self.dim)

    def params(self):
        return {"a": self.a, "n": self.dim}


def _require_quadratic(ctx):
    if ctx.p != 2.0:
        raise ValueError(f"this family requires p = 2, got p = {ctx.p}")


@dataclass(frozen=True)
class QuadraticSinh(ClosedFormSolution):
    """u = log[1 + exp(a'.x' + (|a'|^2 + k^2) t) sinh(k x_n)], p = 2."""

    context: ExponentContext
    k: float
    drift: tuple[float, ...] = ()
    family: ClassVar[str] = "QuadraticSinh"

    def __post_init__(self):
        _require_quadratic(self.context)
        if not self.k > 0:
            raise ValueError("k must be positive")
        object.__setattr__(self, "drift", tuple(float(v) for v in self.drift))

    @property
    def n(self):
        return len(self.drift) + 1

    def _check(self, x, t):
        _half_space_check(x, t)

    def _evaluate(self, x, t):
        k = self.k
        a = np.asarray(self.drift)
        rate = float(a @ a) + k * k
        xp = x[..., :-1]
        xn = x[..., -1]
        expo = (xp @ a if a.size else 0.0) + rate * t
        # v = e^expo sinh(k xn) solves the heat equation; u = log(1 + v)
        e = np.exp(expo)
        sh = np.sinh(k * xn)
        v = e * sh
        one_v = 1.0 + v
        grad_v = np.empty(x.shape)
        if a.size:
            grad_v[..., :-1] = v[..., None] * a
        grad_v[..., -1] = e * k * np.cosh(k * xn)
        u = np.log1p(v)
        grad = grad_v / one_v[..., None]
        u_t = rate * v / one_v
        lap = rate * v / one_v - np.sum(grad_v**2, axis=-1) / one_v**2
        return Evaluation(u, grad, u_t, lap)

    def params(self):
        return {"k": self.k, "drift": list(self.drift)}


@dataclass(frozen=True)
class QuadraticLogLinear(ClosedFormSolution):
    """u = log(1 + k x_n), p = 2."""

    context: ExponentContext
    k: float
    dim: int = 1
    family: ClassVar[str] = "QuadraticLogLinear"

    def __post_init__(self):
        _require_quadratic(self.context)
        if not self.k > 0:
            raise ValueError("k must be positive")

    @property
    def n(self):
        return self.dim

    def _check(self, x, t):
        _half_space_check(x, t)

    def _evaluate(self, x, t):
        w = 1.0 + self.k * x[..., -1]
        grad = np.zeros(x.shape)
        grad[..., -1] = self.k / w
        return Evaluation(np.log(w), grad, np.zeros(t.shape), -((self.k / w) ** 2))

    def rescale(self, lam):
        _check_lambda(lam)
        return QuadraticLogLinear(self.context, self.k * lam, self.dim)

    def params(self):
        return {"k": self.k, "n": self.dim}


@dataclass(frozen=True)
class LogHeatKernel(ClosedFormSolution):
    """u = -(n/2) log t - |x|^2/(4t) on t > 0, p = 2."""

    context: ExponentContext
    dim: int = 1
    family: ClassVar[str] = "LogHeatKernel"

    def __post_init__(self):
        _require_quadratic(self.context)

    @property
    def n(self):
        return self.dim

    def _check(self, x, t):
        if np.any(t <= 0):
            raise DomainError("LogHeatKernel requires t > 0")

    def _evaluate(self, x, t):
        n = self.dim
        r2 = np.sum(x**2, axis=-1)
        u = -0.5 * n * np.log(t) - r2 / (4 * t)
        grad = -x / (2 * t[..., None])
        u_t = -0.5 * n / t + r2 / (4 * t**2)
        lap = -0.5 * n / t
        return Evaluation(u, grad, u_t, np.broadcast_to(lap, t.shape).copy())

    def params(self):
        return {"n": self.dim}


@dataclass(frozen=True)
class LinearOptimality(ClosedFormSolution):
    """u = x_1/eps + t/eps^p."""

    context: ExponentContext
    eps: float
    dim: int = 1
    family: ClassVar[str] = "LinearOptimality"

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    @property
    def n(self):
        return self.dim

    def _evaluate(self, x, t):
        slope = 1.0 / self.eps
        speed = self.eps ** (-self.p)
        grad = np.zeros(x.shape)
        grad[..., 0] = slope
        return Evaluation(slope * x[..., 0] + speed * t, grad, np.full(t.shape, speed), np.zeros(t.shape))

    def rescale(self, lam):
        # lands outside (0,1) for large lam, so fall back to the generic map there
        eps = self.eps * lam ** (-self.context.beta)
        if 0 < eps < 1:
            return LinearOptimality(self.context, eps, self.dim)
        return Rescaled.of(self, lam)

    def params(self):
        return {"eps": self.eps, "n": self.dim}


@dataclass(frozen=True)
class SelfSimilar(ClosedFormSolution):
    """Self-similar solution built on a sampled profile, depending on x_n.

    backward:  u = s^gamma phi(x_n/sqrt(s)),  s = t_blowup - t > 0, solves u_t - Δu = |∇u|^p.
    forward:   v = s^gamma phi(x_n/sqrt(s)),  s = t + t_shift > 0, solves v_t - Δv + |∇v|^p = 0.
    phi'' is never differentiated numerically; it comes from the profile equation.
    """

    profile: ProfileTrajectory
    dim: int = 1
    t_ref: float | None = None
    family: ClassVar[str] = "SelfSimilar"

    def __post_init__(self):
        if self.t_ref is None:
            object.__setattr__(self, "t_ref", 0.0 if self.profile.ode.sigma == BACKWARD else 1.0)

    @property
    def context(self):
        return self.profile.ode.context

    @property
    def direction(self) -> str:
        return self.profile.ode.direction

    @property
    def equation_sign(self):
        return 1 if self.profile.ode.sigma == BACKWARD else -1

    @property
    def n(self):
        return self.dim

    def _s(self, t):
        return self.t_ref - t if self.profile.ode.sigma == BACKWARD else t + self.t_ref

    def _check(self, x, t):
        _half_space_check(x, t)
        if np.any(self._s(t) <= 0):
            raise DomainError(f"{self.direction} self-similar solution undefined at these times")

    def _evaluate(self, x, t):
        ode = self.profile.ode
        g = ode.context.gamma_ss
        s = self._s(t)
        y = x[..., -1] / np.sqrt(s)
        try:
            phi, dphi = self.profile.interpolate(y)
        except InsufficientRangeError as exc:
            raise DomainError(str(exc)) from exc
        ddphi = second_derivative(ode, y, phi, dphi)
        u = s**g * phi
        grad = np.zeros(x.shape)
        grad[..., -1] = s ** (g - 0.5) * dphi
        lap = s ** (g - 1.0) * ddphi
        # d/ds of s^g phi(x/sqrt s) is s^(g-1) (g phi - y phi'/2)
        ds = s ** (g - 1.0) * (g * phi - 0.5 * y * dphi)
        u_t = -ds if ode.sigma == BACKWARD else ds
        return Evaluation(u, grad, u_t, lap)

    def params(self):
        return {
            "direction": self.direction,
            "alpha": self.profile.alpha,
            "y_max": self.profile.y_end,
            "n": self.dim,
            "t_ref": self.t_ref,
        }


@dataclass(frozen=True)
class Rescaled(ClosedFormSolution):
    """u_lam(x, t) = lam^(beta-1) u(lam x, lam^2 t)."""

    base: ClosedFormSolution
    lam: float
    family: ClassVar[str] = "Rescaled"

    @staticmethod
    def of(base: ClosedFormSolution, lam: float) -> ClosedFormSolution:
        _check_lambda(lam)
        if lam == 1.0:
            return base
        if isinstance(base, Rescaled):
            return Rescaled.of(base.base, base.lam * lam)
        return Rescaled(base, float(lam))

    @property
    def context(self):
        return self.base.context

    @property
    def equation_sign(self):
        return self.base.equation_sign

    @property
    def n(self):
        return self.base.n

    def evaluate(self, x, t):
        x, t = _prepare(x, t, self.n)
        lam = self.lam
        beta = self.context.beta
        e = self.base.evaluate(lam * x, lam * lam * t)
        return Evaluation(
            lam ** (beta - 1) * e.u,
            lam**beta * e.grad_u,
            lam ** (beta + 1) * e.u_t,
            lam ** (beta + 1) * e.laplacian_u,
        )

    def params(self):
        return {"lambda": self.lam, "base": self.base.as_dict()}


def _check_lambda(lam):
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"rescaling factor must be positive, got {lam!r}")


def evaluate(sol: ClosedFormSolution, pt: SpaceTimePoint) -> Evaluation:
    return sol.evaluate(np.asarray(pt.x, dtype=float), pt.t)


def residual(sol: ClosedFormSolution, pt: SpaceTimePoint) -> float:
    return float(sol.residual(np.asarray(pt.x, dtype=float), pt.t))


def rescale(sol: ClosedFormSolution, lam: float) -> ClosedFormSolution:
    return sol.rescale(lam)


def residual_scale(sol: ClosedFormSolution, x, t) -> np.ndarray:
    e = sol.evaluate(x, t)
    return 1.0 + np.abs(e.u_t) + np.abs(e.laplacian_u) + _pow(e.grad_norm, sol.p)


_FAMILY_KEYS = {
    "Constant": {"value", "n"},
    "TravelingWave": {"a"},
    "StationaryHalfLine": {"a", "n"},
    "QuadraticSinh": {"k", "drift"},
    "QuadraticLogLinear": {"k", "n"},
    "LogHeatKernel": {"n"},
    "LinearOptimality": {"eps", "n"},
    "SelfSimilar": {"direction", "alpha", "y_max", "n", "t_ref"},
}


def from_dict(spec: dict[str, Any]) -> ClosedFormSolution:
    """Build a family from ``{"family": ..., "p": ..., params...}``; unknown keys are rejected."""
    spec = dict(spec)
    try:
        family = spec.pop("family")
        p = spec.pop("p")
    except KeyError as exc:
        raise ValueError(f"solution description missing {exc.args[0]!r}") from None
    if family not in _FAMILY_KEYS:
        raise ValueError(f"unknown family {family!r}; expected one of {sorted(_FAMILY_KEYS)}")
    unknown = set(spec) - _FAMILY_KEYS[family]
    if unknown:
        raise ValueError(f"unknown keys for {family}: {sorted(unknown)}")
    ctx = make_context(p)
    n = int(spec.get("n", 1))
    if family == "Constant":
        return Constant(ctx, float(spec["value"]), n)
    if family == "TravelingWave":
        return TravelingWave(ctx, tuple(spec["a"]))
    if family == "StationaryHalfLine":
        return StationaryHalfLine(ctx, float(spec["a"]), n)
    if family == "QuadraticSinh":
        return QuadraticSinh(ctx, float(spec["k"]), tuple(spec.get("drift", ())))
    if family == "QuadraticLogLinear":
        return QuadraticLogLinear(ctx, float(spec["k"]), n)
    if family == "LogHeatKernel":
        return LogHeatKernel(ctx, n)
    if family == "LinearOptimality":
        return LinearOptimality(ctx, float(spec["eps"]), n)
    # SelfSimilar: integrate the profile on demand
    from dhjkit.profile import IntegratorControls, ProfileOde, integrate

    direction = spec.get("direction", "backward")
    if direction not in ("backward", "forward"):
        raise ValueError("direction must be 'backward' or 'forward'")
    sigma = BACKWARD if direction == "backward" else FORWARD
    controls = IntegratorControls(y_max=float(spec.get("y_max", 100.0)))
    traj = integrate(ProfileOde(ctx, sigma), float(spec["alpha"]), controls)
    return SelfSimilar(traj, n, spec.get("t_ref"))
