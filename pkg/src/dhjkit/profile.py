"""Self-similar profile ODE  sigma*phi'' = y*phi'/2 - gamma*phi - |phi'|^p.

sigma = +1 gives the backward profile (ancient solutions, t < 0), sigma = -1
the forward profile of the absorbing equation.  Integration starts at y = 0
with phi(0) = 0, phi'(0) = alpha.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from dhjkit.exponents import ExponentContext

BACKWARD = 1
FORWARD = -1


class EventKind(str, enum.Enum):
    PHI_PP_NEGATIVE = "PhiPrimePrimeNegative"
    PHI_PP_UPCROSS = "PhiPrimePrimeUpcross"
    J2_THRESHOLD = "J2Threshold"
    BLOW_UP_GUARD = "BlowUpGuard"


class Termination(str, enum.Enum):
    REACHED_Y_MAX = "ReachedYMax"
    BLOW_UP_GUARD = "BlowUpGuard"
    STEP_UNDERFLOW = "StepUnderflow"
    STOPPED_ON_EVENT = "StoppedOnEvent"


class InsufficientRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileOde:
    context: ExponentContext
    sigma: int = BACKWARD

    def __post_init__(self):
        if self.sigma not in (BACKWARD, FORWARD):
            raise ValueError(f"sigma must be +1 or -1, got {self.sigma!r}")

    @property
    def p(self) -> float:
        return self.context.p

    @property
    def direction(self) -> str:
        return "backward" if self.sigma == BACKWARD else "forward"


@dataclass(frozen=True)
class IntegratorControls:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    y_max: float = 100.0
    phi_prime_cap: float = 1e8
    event_tol: float = 1e-10
    sample_spacing: float = 0.1

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "y_max", "phi_prime_cap", "event_tol", "sample_spacing"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rel_tol < 1e-13:
            raise ValueError("rel_tol must be >= 1e-13")

    def replace(self, **changes) -> "IntegratorControls":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return IntegratorControls(**values)


@dataclass(frozen=True)
class Event:
    kind: EventKind
    y: float


@dataclass(frozen=True, eq=False)
class ProfileTrajectory:
    ode: ProfileOde
    alpha: float
    y: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    phi_pp: np.ndarray
    events: tuple[Event, ...]
    termination: Termination
    message: str = ""
    _splines: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def y_end(self) -> float:
        return float(self.y[-1])

    def events_of(self, kind: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def first_event(self, *kinds: EventKind) -> Event | None:
        hits = [e for e in self.events if e.kind in kinds]
        return min(hits, key=lambda e: e.y) if hits else None

    def _spline(self, which: str) -> CubicHermiteSpline:
        if which not in self._splines:
            if which == "phi":
                spl = CubicHermiteSpline(self.y, self.phi, self.phi_prime)
            else:
                third = third_derivative(self.ode, self.y, self.phi, self.phi_prime, self.phi_pp)
                spl = CubicHermiteSpline(self.y, self.phi_prime, third)
            self._splines[which] = spl
        return self._splines[which]

    def interpolate(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Cubic Hermite values of (phi, phi') at ``y``; raises outside the sampled range."""
        y = np.asarray(y, dtype=float)
        if np.any(y < 0) or np.any(y > self.y_end * (1 + 1e-14)):
            raise InsufficientRangeError(
                f"trajectory covers y in [0, {self.y_end:g}], requested up to {float(np.max(y)):g}"
            )
        return self._spline("phi")(y), self._spline("phi_prime")(y)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("y,phi,phi_prime,phi_pp\n")
        for row in zip(self.y, self.phi, self.phi_prime, self.phi_pp):
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        for e in self.events:
            buf.write(f"# event,{e.kind.value},{e.y!r}\n")
        return buf.getvalue()


def _power(dp, p):
    # |phi'|^p as exp(p log|phi'|), zero at phi' = 0
    a = np.abs(dp)
    with np.errstate(divide="ignore"):
        return np.where(a > 0, np.exp(p * np.log(np.where(a > 0, a, 1.0))), 0.0)


def second_derivative(ode: ProfileOde, y, phi, phi_prime):
    """phi'' recovered algebraically from the profile equation."""
    g = ode.context.gamma_ss
    out = ode.sigma * (0.5 * np.asarray(y) * phi_prime - g * np.asarray(phi) - _power(phi_prime, ode.p))
    return float(out) if np.ndim(out) == 0 else out


def third_derivative(ode: ProfileOde, y, phi, phi_prime, phi_pp):
    g = ode.context.gamma_ss
    p = ode.p
    dp = np.asarray(phi_prime, dtype=float)
    a = np.abs(dp)
    with np.errstate(divide="ignore", invalid="ignore"):
        # d/dy |phi'|^p = p |phi'|^(p-2) phi' phi''
        dpow = np.where(a > 0, p * np.sign(dp) * np.exp((p - 1) * np.log(np.where(a > 0, a, 1.0))), 0.0)
    return ode.sigma * ((0.5 - g) * dp + 0.5 * np.asarray(y) * phi_pp - dpow * phi_pp)


def _event_deadband(phi_prime, p):
    return 1e-10 * (1.0 + abs(phi_prime) ** p)


def integrate(
    ode: ProfileOde,
    alpha: float,
    controls: IntegratorControls | None = None,
    stop_on: frozenset[EventKind] | set[EventKind] = frozenset(),
) -> ProfileTrajectory:
    """Integrate the profile equation from y = 0 with phi'(0) = alpha.

    Uses an embedded explicit Runge-Kutta pair of order 8(5,3) with dense
    output.  Events are located by root-finding on the dense output.  The
    blow-up guard always terminates; other events terminate only when listed
    in ``stop_on``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    c = controls or IntegratorControls()
    p = ode.p
    g = ode.context.gamma_ss
    sigma = ode.sigma

    def rhs(y, s):
        dp = s[1]
        a = abs(dp)
        pw = math.exp(p * math.log(a)) if a > 0 else 0.0
        return [dp, sigma * (0.5 * y * dp - g * s[0] - pw)]

    def ev_negative(y, s):
        return rhs(y, s)[1] + _event_deadband(s[1], p)

    ev_negative.direction = -1
    ev_negative.terminal = EventKind.PHI_PP_NEGATIVE in stop_on

    def ev_upcross(y, s):
        return rhs(y, s)[1] - _event_deadband(s[1], p)

    ev_upcross.direction = 1
    ev_upcross.terminal = EventKind.PHI_PP_UPCROSS in stop_on

    def ev_guard(y, s):
        return abs(s[1]) - c.phi_prime_cap

    ev_guard.direction = 1
    ev_guard.terminal = True

    kinds = [EventKind.PHI_PP_NEGATIVE, EventKind.PHI_PP_UPCROSS, EventKind.BLOW_UP_GUARD]
    funcs = [ev_negative, ev_upcross, ev_guard]
    if sigma == FORWARD:

        def ev_j2(y, s):
            a = abs(s[1])
            return (math.exp((p - 1) * math.log(a)) if a > 0 else 0.0) - (y + 1.0)

        ev_j2.direction = 1
        ev_j2.terminal = EventKind.J2_THRESHOLD in stop_on
        kinds.append(EventKind.J2_THRESHOLD)
        funcs.append(ev_j2)

    # a predicate already true at y = 0 produces no zero crossing
    initial_events = []
    if sigma == FORWARD and float(alpha) ** (p - 1) > 1.0:
        initial_events.append(Event(EventKind.J2_THRESHOLD, 0.0))
        if EventKind.J2_THRESHOLD in stop_on:
            phi_pp0 = second_derivative(ode, 0.0, 0.0, float(alpha))
            return ProfileTrajectory(
                ode=ode,
                alpha=float(alpha),
                y=np.zeros(1),
                phi=np.zeros(1),
                phi_prime=np.full(1, float(alpha)),
                phi_pp=np.full(1, phi_pp0),
                events=tuple(initial_events),
                termination=Termination.STOPPED_ON_EVENT,
            )

    sol = solve_ivp(
        rhs,
        (0.0, c.y_max),
        [0.0, float(alpha)],
        method="DOP853",
        rtol=c.rel_tol,
        atol=c.abs_tol,
        max_step=c.max_step,
        events=funcs,
        dense_output=True,
    )
    events = list(initial_events)
    for kind, ys in zip(kinds, sol.t_events):
        events.extend(Event(kind, float(v)) for v in ys)
    events.sort(key=lambda e: (e.y, e.kind.value))

    y_end = float(sol.t[-1])
    if sol.status == -1:
        termination = Termination.STEP_UNDERFLOW
    elif sol.status == 1:
        last = events[-1].kind if events else None
        termination = Termination.BLOW_UP_GUARD if last == EventKind.BLOW_UP_GUARD else Termination.STOPPED_ON_EVENT
    else:
        termination = Termination.REACHED_Y_MAX

    grid = np.arange(0.0, y_end, c.sample_spacing)
    ys = np.union1d(grid, sol.t)
    ys = ys[ys <= y_end]
    if sol.sol is not None and len(ys) > 1:
        states = sol.sol(ys)
        # exact step endpoints where available
        idx = np.searchsorted(ys, sol.t)
        states[:, idx] = sol.y
    else:
        states = sol.y
        ys = sol.t
    states[:, 0] = (0.0, float(alpha))
    phi, dphi = states[0].copy(), states[1].copy()
    phi_pp = np.asarray(second_derivative(ode, ys, phi, dphi), dtype=float).reshape(ys.shape)
    return ProfileTrajectory(
        ode=ode,
        alpha=float(alpha),
        y=ys,
        phi=phi,
        phi_prime=dphi,
        phi_pp=phi_pp,
        events=tuple(events),
        termination=termination,
        message=str(sol.message),
    )


@dataclass(frozen=True)
class PsiSeries:
    y: np.ndarray
    psi: np.ndarray
    limit: float
    fit_coeff: float
    fit_exponent: float
    fit_window: tuple[float, float]


def psi_ratio(traj: ProfileTrajectory, min_range: float = 10.0) -> PsiSeries:
    """phi/y^(beta+1) on y >= 1 plus a tail-limit estimate.

    The limit comes from a least-squares fit of psi = psi_inf + c*y^(-q) over
    the last decade of the trajectory.
    """
    if traj.y_end < min_range:
        raise InsufficientRangeError(f"trajectory reaches y={traj.y_end:g}, need y >= {min_range:g}")
    beta = traj.ode.context.beta
    mask = traj.y >= 1.0
    y = traj.y[mask]
    psi = traj.phi[mask] / y ** (beta + 1.0)

    lo = traj.y_end / 10.0
    tail = y >= lo
    yt, pt = y[tail], psi[tail]
    best = None
    for q in np.linspace(0.05, 6.0, 240):
        basis = np.column_stack([np.ones_like(yt), yt**-q])
        coef, *_ = np.linalg.lstsq(basis, pt, rcond=None)
        res = float(np.sum((basis @ coef - pt) ** 2))
        if best is None or res < best[0]:
            best = (res, q, coef)
    _, q, coef = best
    return PsiSeries(
        y=y,
        psi=psi,
        limit=float(coef[0]),
        fit_coeff=float(coef[1]),
        fit_exponent=float(q),
        fit_window=(float(lo), traj.y_end),
    )
