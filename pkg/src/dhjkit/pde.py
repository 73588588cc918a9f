"""Method-of-lines solver for u_t = Δu + |∇u|^p in one space dimension.

Two geometries: an interval with Dirichlet data at both ends, or the radial
form u_t = u_rr + (n-1)/r u_r + |u_r|^p on [0, R] with symmetry at r = 0 and
Dirichlet data at r = R.  Second-order central differences in space,
classical RK4 in time with dt limited by the diffusive and transport scales.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from dhjkit.exponents import ExponentContext

CORNER_TOL = 1e-8


class PdeInputError(ValueError):
    pass


class InstabilityError(RuntimeError):
    pass


class Geometry(str, enum.Enum):
    LINE = "line"
    RADIAL = "radial"


@dataclass(frozen=True)
class Domain1D:
    x_lo: float
    x_hi: float
    geometry: Geometry = Geometry.LINE
    n: int = 1

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise PdeInputError("need x_lo < x_hi")
        if self.geometry == Geometry.RADIAL:
            if self.x_lo != 0:
                raise PdeInputError("radial geometry requires x_lo = 0")
            if self.n < 1:
                raise PdeInputError("radial dimension must be >= 1")

    @classmethod
    def radial(cls, radius: float, n: int) -> "Domain1D":
        return cls(0.0, radius, Geometry.RADIAL, n)


SYMMETRY = "symmetry"


@dataclass(frozen=True)
class BoundarySpec:
    """Per-end data: a callable g(t) (Dirichlet) or the string ``"symmetry"``."""

    left: Callable[[float], float] | str
    right: Callable[[float], float]

    @classmethod
    def dirichlet(cls, left, right) -> "BoundarySpec":
        return cls(_as_function(left), _as_function(right))

    @classmethod
    def symmetric(cls, right) -> "BoundarySpec":
        return cls(SYMMETRY, _as_function(right))


def _as_function(v):
    if callable(v):
        return v
    value = float(v)
    return lambda t: value


@dataclass(frozen=True)
class SolverControls:
    cfl: float = 0.4
    transport_cfl: float = 0.5
    grad_cap: float = 1e6
    growth_limit: float = 1e6

    def __post_init__(self):
        if not (self.cfl > 0 and self.transport_cfl > 0 and self.grad_cap > 0):
            raise PdeInputError("solver controls must be positive")


class RunStatus(str, enum.Enum):
    COMPLETED = "Completed"
    BLOW_UP_DETECTED = "BlowUpDetected"


@dataclass(frozen=True, eq=False)
class PdeRun:
    context: ExponentContext
    domain: Domain1D
    h: float
    x: np.ndarray
    times: np.ndarray
    fields: np.ndarray
    max_grad: np.ndarray
    dt_history: np.ndarray
    status: RunStatus
    blow_up_time: float | None = None
    dt_bound: float = field(default=math.nan)

    @property
    def p(self) -> float:
        return self.context.p

    def snapshot_csv(self, index: int) -> str:
        lines = ["x,u"]
        lines.extend(f"{xi!r},{ui!r}" for xi, ui in zip(self.x.tolist(), self.fields[index].tolist()))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "p": self.p,
            "geometry": self.domain.geometry.value,
            "n": self.domain.n,
            "x_lo": self.domain.x_lo,
            "x_hi": self.domain.x_hi,
            "h": self.h,
            "nodes": int(self.x.size),
            "snapshot_times": self.times.tolist(),
            "max_grad": self.max_grad.tolist(),
            "steps": int(self.dt_history.size),
            "dt_min": float(self.dt_history.min()) if self.dt_history.size else None,
            "dt_max": float(self.dt_history.max()) if self.dt_history.size else None,
            "status": self.status.value,
            "blow_up_time": self.blow_up_time,
        }


def _grid(domain: Domain1D, h: float) -> np.ndarray:
    cells = (domain.x_hi - domain.x_lo) / h
    m = round(cells)
    if m < 2 or abs(cells - m) > 1e-9 * max(1.0, cells):
        raise PdeInputError(f"h={h!r} does not divide [{domain.x_lo}, {domain.x_hi}] into an integer number of cells")
    return domain.x_lo + h * np.arange(m + 1)


def _derivatives(u, h, domain):
    """Central first and second differences; radial origin via the ghost value u[-1] = u[1]."""
    ux = np.zeros_like(u)
    lap = np.zeros_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    uxx = (u[2:] - 2 * u[1:-1] + u[:-2]) / (h * h)
    if domain.geometry == Geometry.RADIAL:
        r = h * np.arange(1, u.size - 1)
        lap[1:-1] = uxx + (domain.n - 1) / r * ux[1:-1]
        lap[0] = domain.n * 2.0 * (u[1] - u[0]) / (h * h)
    else:
        lap[1:-1] = uxx
    return ux, lap


def _spatial_operator(u, h, domain, p):
    ux, lap = _derivatives(u, h, domain)
    return lap + np.abs(ux) ** p, ux


def _diffusive_radius(domain: Domain1D) -> float:
    # Gershgorin bound on h^2 * (discrete Laplacian)
    if domain.geometry == Geometry.RADIAL:
        return 4.0 * max(1, domain.n)
    return 4.0


def solve(
    ctx: ExponentContext,
    domain: Domain1D,
    h: float,
    initial: Callable[[np.ndarray], np.ndarray],
    boundary: BoundarySpec,
    t_end: float,
    controls: SolverControls | None = None,
    snapshot_times=None,
    t_start: float = 0.0,
) -> PdeRun:
    c = controls or SolverControls()
    if not t_end > t_start:
        raise PdeInputError("t_end must exceed t_start")
    radial = domain.geometry == Geometry.RADIAL
    if radial and boundary.left != SYMMETRY:
        raise PdeInputError("radial geometry needs the symmetry condition at r = 0")
    if not radial and boundary.left == SYMMETRY:
        raise PdeInputError("symmetry condition only allowed at the radial origin")
    x = _grid(domain, h)
    u = np.asarray(initial(x), dtype=float).copy()
    if u.shape != x.shape:
        raise PdeInputError("initial data has the wrong shape")
    ends = [(-1, boundary.right)] + ([] if radial else [(0, boundary.left)])
    for idx, g in ends:
        if abs(u[idx] - g(t_start)) > CORNER_TOL * max(1.0, abs(u[idx])):
            raise PdeInputError(f"initial data incompatible with boundary data at x={x[idx]:g}")

    times = sorted({float(t_start), float(t_end), *(float(s) for s in (() if snapshot_times is None else snapshot_times))})
    if times[0] < t_start or times[-1] > t_end:
        raise PdeInputError("snapshot times must lie in [t_start, t_end]")

    p = ctx.p
    dt_diff = c.cfl * h * h * min(1.0, 4.0 / _diffusive_radius(domain))

    def apply_bc(v, t):
        v[-1] = boundary.right(t)
        if not radial:
            v[0] = boundary.left(t)
        return v

    def rate(v):
        f, _ = _spatial_operator(v, h, domain, p)
        f[-1] = 0.0
        if not radial:
            f[0] = 0.0
        return f

    fields = [u.copy()]
    _, ux0 = _spatial_operator(u, h, domain, p)
    max_grad = [float(np.max(np.abs(ux0)))]
    dts: list[float] = []
    t = float(t_start)
    status = RunStatus.COMPLETED
    blow_up = None
    scale0 = max(1.0, float(np.max(np.abs(u))))
    for target in times[1:]:
        while t < target - 1e-14 * max(1.0, abs(target)):
            _, ux = _spatial_operator(u, h, domain, p)
            g = float(np.max(np.abs(ux)))
            if g > c.grad_cap:
                status, blow_up = RunStatus.BLOW_UP_DETECTED, t
                break
            dt = dt_diff
            if g > 0:
                dt = min(dt, c.transport_cfl * h / (p * g ** (p - 1)))
            dt = min(dt, target - t)
            k1 = rate(u)
            k2 = rate(apply_bc(u + 0.5 * dt * k1, t + 0.5 * dt))
            k3 = rate(apply_bc(u + 0.5 * dt * k2, t + 0.5 * dt))
            k4 = rate(apply_bc(u + dt * k3, t + dt))
            u = apply_bc(u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), t + dt)
            t += dt
            dts.append(dt)
            size = float(np.max(np.abs(u)))
            if not math.isfinite(size) or size > c.growth_limit * scale0:
                raise InstabilityError(f"solution grew to {size:g} at t={t:g}")
        if status != RunStatus.COMPLETED:
            break
        t = target
        fields.append(u.copy())
        _, ux = _spatial_operator(u, h, domain, p)
        max_grad.append(float(np.max(np.abs(ux))))
    return PdeRun(
        context=ctx,
        domain=domain,
        h=h,
        x=x,
        times=np.asarray(times[: len(fields)]),
        fields=np.asarray(fields),
        max_grad=np.asarray(max_grad),
        dt_history=np.asarray(dts),
        status=status,
        blow_up_time=blow_up,
        dt_bound=dt_diff,
    )


def ut_field(run: PdeRun, index: int) -> tuple[np.ndarray, np.ndarray]:
    """u_t = discrete Laplacian + |discrete gradient|^p at interior nodes (and the radial origin)."""
    if not -len(run.times) <= index < len(run.times):
        raise IndexError(f"snapshot {index} does not exist")
    f, _ = _spatial_operator(run.fields[index], run.h, run.domain, run.p)
    lo = 0 if run.domain.geometry == Geometry.RADIAL else 1
    return run.x[lo:-1], f[lo:-1]


def gradient_field(run: PdeRun, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Central u_x inside, one-sided second-order differences at Dirichlet ends."""
    u = run.fields[index]
    h = run.h
    ux, _ = _derivatives(u, h, run.domain)
    ux[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    if run.domain.geometry == Geometry.LINE:
        ux[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    return run.x, ux


@dataclass(frozen=True)
class ComparisonReport:
    ordered: bool
    tolerance: float
    worst_violation: float
    worst_node: tuple[int, float, float] | None
    min_gap: float
    max_gap: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def comparison_probe(run_lo: PdeRun, run_hi: PdeRun) -> ComparisonReport:
    """Discrete comparison check: run_lo <= run_hi at every snapshot and node."""
    if run_lo.fields.shape != run_hi.fields.shape or not np.array_equal(run_lo.times, run_hi.times):
        raise PdeInputError("runs must share grid and snapshot times")
    if not np.allclose(run_lo.x, run_hi.x, rtol=0, atol=1e-14):
        raise PdeInputError("runs must share the spatial grid")
    gap = run_hi.fields - run_lo.fields
    scale = max(1.0, float(np.max(np.abs(run_lo.fields))), float(np.max(np.abs(run_hi.fields))))
    tol = 1e-8 * scale
    worst = float(np.min(gap))
    node = None
    if worst < -tol:
        k, i = np.unravel_index(int(np.argmin(gap)), gap.shape)
        node = (int(i), float(run_lo.x[i]), float(run_lo.times[k]))
    return ComparisonReport(
        ordered=worst >= -tol,
        tolerance=tol,
        worst_violation=min(worst, 0.0),
        worst_node=node,
        min_gap=worst,
        max_gap=float(np.max(gap)),
    )


def from_closed_form(sol, domain: Domain1D):
    """Initial and Dirichlet data sampled from a one-dimensional closed-form solution."""
    if sol.n != 1:
        raise PdeInputError("closed-form data must be one-dimensional")

    def initial_at(t0):
        return lambda x: sol.evaluate(np.asarray(x)[:, None], t0).u

    def value(xv):
        return lambda t: float(sol.evaluate(np.array([xv]), t).u)

    if domain.geometry == Geometry.RADIAL:
        boundary = BoundarySpec(SYMMETRY, value(domain.x_hi))
    else:
        boundary = BoundarySpec(value(domain.x_lo), value(domain.x_hi))
    return initial_at, boundary


def max_error(run: PdeRun, sol, index: int = -1) -> float:
    exact = sol.evaluate(run.x[:, None], run.times[index]).u
    return float(np.max(np.abs(run.fields[index] - exact)))


def solve_closed_form(sol, domain: Domain1D, h: float, t_end: float, t_start: float = 0.0, controls=None, snapshot_times=None):
    initial_at, boundary = from_closed_form(sol, domain)
    return solve(
        sol.context, domain, h, initial_at(t_start), boundary, t_end, controls, snapshot_times, t_start=t_start
    )


def observed_order(sol, domain: Domain1D, h: float, t_end: float, t_start: float = 0.0) -> tuple[float, float, float]:
    """(error at h, error at h/2, log2 ratio) against the exact solution at t_end."""
    e1 = max_error(solve_closed_form(sol, domain, h, t_end, t_start), sol)
    e2 = max_error(solve_closed_form(sol, domain, h / 2, t_end, t_start), sol)
    order = math.log2(e1 / e2) if e1 > 0 and e2 > 0 else math.nan
    return e1, e2, order
