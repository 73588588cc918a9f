"""Shooting classification of backward and forward self-similar profiles."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from dhjkit.exponents import ExponentContext
from dhjkit.profile import (
    BACKWARD,
    FORWARD,
    EventKind,
    InsufficientRangeError,
    IntegratorControls,
    ProfileOde,
    ProfileTrajectory,
    Termination,
    integrate,
    psi_ratio,
)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_Y_MAX_CAP = 800.0


class ShootingError(RuntimeError):
    pass


class ForwardTag(str, enum.Enum):
    J1 = "J1"
    J2 = "J2"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class ForwardClass:
    tag: ForwardTag
    witness_y: float | None
    y_reached: float
    diagnostics: str = ""

    def as_dict(self) -> dict:
        return {"tag": self.tag.value, "witness_y": self.witness_y, "y_reached": self.y_reached}


@dataclass(frozen=True)
class CriticalAlphaResult:
    alpha_star: float
    bracket: tuple[float, float]
    iterations: int
    y_max_used: float
    visited: tuple[tuple[float, str], ...] = field(default=(), repr=False)

    def as_dict(self) -> dict:
        return {
            "alpha_star": self.alpha_star,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "y_max_used": self.y_max_used,
        }


def _require_superquadratic(ctx: ExponentContext):
    if not ctx.p > 2:
        raise ValueError(f"forward shooting requires p > 2, got p = {ctx.p}")


def backward_alpha0(ctx: ExponentContext) -> float:
    """Upper end of the slopes giving a global, increasing, convex-after-one-point backward profile."""
    eps = 0.5 - max(ctx.gamma_ss, 0.0)
    return (eps / 2.0) ** ctx.beta


def forward_alpha1(ctx: ExponentContext) -> float:
    """Explicit alpha_1 with (0, alpha_1) inside J1."""
    _require_superquadratic(ctx)
    p, beta, g = ctx.p, ctx.beta, ctx.gamma_ss
    eps = 1.0 / (2.0 * (p - 2.0))
    alpha2 = (1.0 + eps) ** (-p * beta)
    y1 = min(1.0, eps / (g * (1.0 + eps) + 1.0))
    return min(alpha2, (beta / 8.0 * y1 * (1.0 + eps) ** (-p)) ** beta)


@dataclass(frozen=True)
class BackwardShapeReport:
    p: float
    alpha: float
    alpha0: float
    phi_positive: bool
    phi_prime_positive: bool
    sign_changes: int
    r_bar: float | None
    psi_limit: float
    L_limit: float
    psi_rel_error: float
    psi_fit_exponent: float
    z_tail_min: float
    z_lambda: float
    energy_bound_ok: bool
    y_end: float
    termination: str

    @property
    def ok(self) -> bool:
        return (
            self.phi_positive
            and self.phi_prime_positive
            and self.sign_changes == 1
            and self.z_tail_min >= self.z_lambda
            and self.energy_bound_ok
            and self.termination == Termination.REACHED_Y_MAX.value
        )

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["ok"] = self.ok
        return d


def _sign_changes(values: np.ndarray) -> int:
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def energy_bound_holds(traj: ProfileTrajectory) -> bool:
    """(phi'^2 + phi^2) <= E(1) exp(y^2/2 + g y - 1/2 - g) for y >= 1, with g = max(0, 1 - gamma)."""
    gt = max(0.0, 1.0 - traj.ode.context.gamma_ss)
    mask = traj.y >= 1.0
    if not np.any(mask):
        return True
    y = traj.y[mask]
    energy = traj.phi_prime[mask] ** 2 + traj.phi[mask] ** 2
    log_c = math.log(energy[0]) - (0.5 * y[0] ** 2 + gt * y[0])
    log_bound = log_c + 0.5 * y**2 + gt * y
    return bool(np.all(np.log(energy) <= log_bound + 1e-9))


def backward_profile(
    ctx: ExponentContext, alpha: float, controls: IntegratorControls | None = None
) -> tuple[ProfileTrajectory, BackwardShapeReport]:
    a0 = backward_alpha0(ctx)
    if not 0 < alpha < a0:
        raise ValueError(f"alpha must lie in (0, {a0:.9g}) for p = {ctx.p}, got {alpha}")
    controls = controls or IntegratorControls()
    traj = integrate(ProfileOde(ctx, BACKWARD), alpha, controls)
    inner = traj.y > 0
    ups = traj.events_of(EventKind.PHI_PP_UPCROSS)
    psi = psi_ratio(traj)
    z = traj.phi_prime ** (ctx.p - 1.0)
    zmask = traj.y >= traj.y_end / 2
    z_tail = z[zmask] / traj.y[zmask]
    report = BackwardShapeReport(
        p=ctx.p,
        alpha=alpha,
        alpha0=a0,
        phi_positive=bool(np.all(traj.phi[inner] > 0)),
        phi_prime_positive=bool(np.all(traj.phi_prime[inner] > 0)),
        sign_changes=_sign_changes(traj.phi_pp),
        r_bar=ups[0].y if len(ups) == 1 else None,
        psi_limit=psi.limit,
        L_limit=ctx.L_limit,
        psi_rel_error=abs(psi.limit - ctx.L_limit) / ctx.L_limit,
        psi_fit_exponent=psi.fit_exponent,
        z_tail_min=float(np.min(z_tail)),
        z_lambda=ctx.lambda_liminf,
        energy_bound_ok=energy_bound_holds(traj),
        y_end=traj.y_end,
        termination=traj.termination.value,
    )
    return traj, report


_CLASSIFY_STOP = frozenset({EventKind.PHI_PP_NEGATIVE, EventKind.J2_THRESHOLD})


def classify_trajectory(traj: ProfileTrajectory) -> ForwardClass:
    first = traj.first_event(EventKind.PHI_PP_NEGATIVE, EventKind.J2_THRESHOLD, EventKind.BLOW_UP_GUARD)
    if traj.termination == Termination.STEP_UNDERFLOW and first is None:
        return ForwardClass(ForwardTag.UNDETERMINED, None, traj.y_end, traj.message)
    if first is None:
        return ForwardClass(ForwardTag.UNDETERMINED, None, traj.y_end)
    j1 = first.kind == EventKind.PHI_PP_NEGATIVE
    if any(e.y == first.y and (e.kind == EventKind.PHI_PP_NEGATIVE) != j1 for e in traj.events):
        log.warning("J1 and J2 events coincide at y=%g for alpha=%g; first event wins", first.y, traj.alpha)
    tag = ForwardTag.J1 if first.kind == EventKind.PHI_PP_NEGATIVE else ForwardTag.J2
    return ForwardClass(tag, first.y, traj.y_end)


def classify_forward(ctx: ExponentContext, alpha: float, controls: IntegratorControls | None = None) -> ForwardClass:
    _require_superquadratic(ctx)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    try:
        traj = integrate(ProfileOde(ctx, FORWARD), alpha, controls, stop_on=_CLASSIFY_STOP)
    except (ArithmeticError, ValueError) as exc:
        return ForwardClass(ForwardTag.UNDETERMINED, None, 0.0, f"integration failed: {exc}")
    return classify_trajectory(traj)


def _classify_with_retry(ctx, alpha, controls, y_cap):
    c = controls
    while True:
        cls = classify_forward(ctx, alpha, c)
        if cls.tag != ForwardTag.UNDETERMINED or c.y_max >= y_cap:
            return cls, c
        c = c.replace(y_max=min(2 * c.y_max, y_cap))


def critical_alpha(
    ctx: ExponentContext,
    tol: float = DEFAULT_TOL,
    controls: IntegratorControls | None = None,
    y_max_cap: float = DEFAULT_Y_MAX_CAP,
    hi_start: float = 1.0,
) -> CriticalAlphaResult:
    """Bisect between the explicit J1 slope and the first power of two classified J2."""
    _require_superquadratic(ctx)
    if not tol > 0:
        raise ValueError("tol must be positive")
    controls = controls or IntegratorControls()
    visited: list[tuple[float, str]] = []
    y_used = controls.y_max

    def probe(alpha):
        nonlocal y_used
        cls, c = _classify_with_retry(ctx, alpha, controls, y_max_cap)
        y_used = max(y_used, c.y_max)
        visited.append((alpha, cls.tag.value))
        if cls.tag == ForwardTag.UNDETERMINED:
            raise ShootingError(
                f"alpha={alpha!r} still undetermined at y_max={c.y_max:g} (cap {y_max_cap:g}) {cls.diagnostics}"
            )
        return cls.tag

    lo = forward_alpha1(ctx)
    if probe(lo) != ForwardTag.J1:
        raise ShootingError(f"explicit lower slope {lo!r} not classified J1")
    hi = hi_start
    while probe(hi) != ForwardTag.J2:
        lo = max(lo, hi)
        hi *= 2.0
        if hi > 2.0**40:
            raise ShootingError("no J2 slope found")
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        iterations += 1
        if probe(mid) == ForwardTag.J1:
            lo = mid
        else:
            hi = mid
    return CriticalAlphaResult(
        alpha_star=0.5 * (lo + hi),
        bracket=(lo, hi),
        iterations=iterations,
        y_max_used=y_used,
        visited=tuple(visited),
    )


def refine_bracket(ctx: ExponentContext, bracket, controls: IntegratorControls | None = None, tol: float = 0.0):
    """Continue bisection on ``bracket``; tol = 0 runs down to adjacent floats."""
    lo, hi = bracket
    controls = controls or IntegratorControls()
    n = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        cls, _ = _classify_with_retry(ctx, mid, controls, DEFAULT_Y_MAX_CAP)
        n += 1
        if cls.tag == ForwardTag.J1:
            lo = mid
        elif cls.tag == ForwardTag.J2:
            hi = mid
        else:
            break
    return lo, hi, n


@dataclass(frozen=True)
class CriticalProfileReport:
    p: float
    alpha: float
    bracket: tuple[float, float]
    horizon: float
    slack: float
    min_phi_minus_alpha_y: float
    min_lower_gap: float
    min_upper_gap: float
    min_phi_pp: float
    psi_at_horizon: float
    L_limit: float
    psi_rel_error: float
    mode: str

    @property
    def bounds_ok(self) -> bool:
        return (
            self.min_phi_minus_alpha_y >= -self.slack
            and self.min_lower_gap >= -self.slack
            and self.min_upper_gap >= -self.slack
            and self.min_phi_pp >= -self.slack
        )

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["bracket"] = list(self.bracket)
        d["bounds_ok"] = self.bounds_ok
        return d


def divergence_horizon(lo: ProfileTrajectory, hi: ProfileTrajectory, rel: float = 0.01) -> float:
    """Largest y up to which the two trajectories agree in phi' within ``rel``."""
    grid = np.intersect1d(np.round(lo.y, 12), np.round(hi.y, 12))
    _, d_lo = lo.interpolate(grid)
    _, d_hi = hi.interpolate(grid)
    bad = np.abs(d_lo - d_hi) > rel * np.maximum(np.abs(d_lo), np.abs(d_hi))
    if not np.any(bad):
        return float(grid[-1])
    first = int(np.argmax(bad))
    return float(grid[max(first - 1, 0)])


def critical_profile_report(
    ctx: ExponentContext,
    crit: CriticalAlphaResult,
    controls: IntegratorControls | None = None,
    slack: float = 1e-3,
    refine: bool = True,
) -> CriticalProfileReport:
    """Check the J3 bounds on the near-critical profile up to the bracket-divergence horizon.

    The critical trajectory is a separatrix: perturbations grow roughly like
    exp(y^2/4), so by default the bracket is first narrowed to adjacent floats.
    """
    _require_superquadratic(ctx)
    controls = controls or IntegratorControls(rel_tol=1e-13, abs_tol=1e-15, y_max=40.0)
    lo, hi = crit.bracket
    if refine:
        lo, hi, _ = refine_bracket(ctx, (lo, hi), controls)
    ode = ProfileOde(ctx, FORWARD)
    t_lo = integrate(ode, lo, controls)
    t_hi = integrate(ode, hi, controls)
    alpha = 0.5 * (lo + hi)
    mid = integrate(ode, alpha, controls)
    horizon = min(divergence_horizon(t_lo, t_hi), mid.y_end)
    mode = "Certified" if horizon >= 1.0 else "ReportOnly"

    m = mid.y <= horizon
    y, phi, dphi, ddphi = mid.y[m], mid.phi[m], mid.phi_prime[m], mid.phi_pp[m]
    band = y >= 1.0
    z = dphi[band] ** (ctx.p - 1.0)
    lower = z - 0.5 * ctx.beta * y[band]
    upper = (y[band] + 1.0) - z
    psi_h = float(phi[-1] / y[-1] ** (ctx.beta + 1.0))
    return CriticalProfileReport(
        p=ctx.p,
        alpha=alpha,
        bracket=(lo, hi),
        horizon=horizon,
        slack=slack,
        min_phi_minus_alpha_y=float(np.min(phi - alpha * y)),
        min_lower_gap=float(np.min(lower)) if lower.size else math.nan,
        min_upper_gap=float(np.min(upper)) if upper.size else math.nan,
        min_phi_pp=float(np.min(ddphi)),
        psi_at_horizon=psi_h,
        L_limit=ctx.L_limit,
        psi_rel_error=abs(psi_h - ctx.L_limit) / ctx.L_limit,
        mode=mode,
    )


@dataclass(frozen=True)
class OrderingReport:
    alpha_lo: float
    alpha_hi: float
    y_common: float
    samples: int
    ordered: bool
    min_phi_gap: float
    min_phi_prime_gap: float
    first_violation_y: float | None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def compare_profiles(
    ctx: ExponentContext, alpha_lo: float, alpha_hi: float, controls: IntegratorControls | None = None
) -> OrderingReport:
    """Check phi_hi > phi_lo and phi_hi' > phi_lo' on the shared sample grid, y > 0."""
    _require_superquadratic(ctx)
    if not 0 < alpha_lo < alpha_hi:
        raise ValueError("need 0 < alpha_lo < alpha_hi")
    ode = ProfileOde(ctx, FORWARD)
    lo = integrate(ode, alpha_lo, controls)
    hi = integrate(ode, alpha_hi, controls)
    y_common = min(lo.y_end, hi.y_end)
    grid = np.union1d(lo.y[lo.y <= y_common], hi.y[hi.y <= y_common])
    grid = grid[grid > 0]
    p_lo, d_lo = lo.interpolate(grid)
    p_hi, d_hi = hi.interpolate(grid)
    gap, dgap = p_hi - p_lo, d_hi - d_lo
    bad = (gap <= 0) | (dgap <= 0)
    return OrderingReport(
        alpha_lo=alpha_lo,
        alpha_hi=alpha_hi,
        y_common=y_common,
        samples=int(grid.size),
        ordered=not bool(np.any(bad)),
        min_phi_gap=float(np.min(gap)) if grid.size else math.nan,
        min_phi_prime_gap=float(np.min(dgap)) if grid.size else math.nan,
        first_violation_y=float(grid[np.argmax(bad)]) if np.any(bad) else None,
    )


def classification_sweep(
    ctx: ExponentContext, alphas, controls: IntegratorControls | None = None
) -> list[tuple[float, ForwardClass]]:
    return [(float(a), classify_forward(ctx, float(a), controls)) for a in alphas]


def has_inversion(tags: list[ForwardTag]) -> bool:
    """True when the sequence is not of the form J1...J1 (Undetermined...) J2...J2."""
    order = {ForwardTag.J1: 0, ForwardTag.UNDETERMINED: 1, ForwardTag.J2: 2}
    ranks = [order[t] for t in tags]
    return any(b < a for a, b in zip(ranks, ranks[1:]))


__all__ = [
    "ForwardTag",
    "ForwardClass",
    "CriticalAlphaResult",
    "ShootingError",
    "InsufficientRangeError",
    "backward_alpha0",
    "forward_alpha1",
    "backward_profile",
    "classify_forward",
    "critical_alpha",
    "critical_profile_report",
    "compare_profiles",
    "classification_sweep",
    "has_inversion",
    "divergence_horizon",
    "refine_bracket",
]
