import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from dhjkit.closed_forms import (
    Constant,
    DomainError,
    LinearOptimality,
    LogHeatKernel,
    QuadraticLogLinear,
    QuadraticSinh,
    Rescaled,
    SelfSimilar,
    SpaceTimePoint,
    StationaryHalfLine,
    TravelingWave,
    evaluate,
    from_dict,
    rescale,
    residual,
    residual_scale,
)
from dhjkit.exponents import make_context
from dhjkit.profile import BACKWARD, FORWARD, IntegratorControls, ProfileOde, integrate

# symbolic oracle: u, grad u, u_t and Laplacian from sympy differentiation


def _oracle(expr, xs, t):
    grad = [sp.diff(expr, xi) for xi in xs]
    lap = sum(sp.diff(expr, xi, 2) for xi in xs)
    fns = [sp.lambdify((*xs, t), e, "numpy") for e in (expr, sp.diff(expr, t), lap, *grad)]

    def ev(x, tv):
        x = np.atleast_2d(x)
        tv = np.broadcast_to(tv, x.shape[:1]).astype(float)
        cols = [x[:, i] for i in range(x.shape[1])]
        vals = [np.broadcast_to(f(*cols, tv), tv.shape).astype(float) for f in fns]
        return vals[0], vals[1], vals[2], np.stack(vals[3:], axis=-1)

    return ev


def _symbols(n):
    return sp.symbols(f"x1:{n + 1}", real=True), sp.Symbol("t", real=True)


def _case(name):
    """(solution, sympy expression, symbols, point sampler)."""
    rng = np.random.default_rng(7)
    if name == "traveling":
        ctx = make_context(3.0)
        a = (0.7, -1.2)
        (x1, x2), t = _symbols(2)
        norm = sp.sqrt(sp.Rational(7, 10) ** 2 + sp.Rational(-12, 10) ** 2)
        expr = norm**3 * t + sp.Rational(7, 10) * x1 - sp.Rational(12, 10) * x2
        return TravelingWave(ctx, a), expr, (x1, x2), t, lambda m: (rng.uniform(-3, 3, (m, 2)), rng.uniform(-2, 2, m))
    if name == "stationary_p3":
        ctx = make_context(3.0)
        (x1,), t = _symbols(1)
        expr = sp.sqrt(2) * (sp.sqrt(x1 + 1) - 1)
        return StationaryHalfLine(ctx, 1.0), expr, (x1,), t, lambda m: (rng.uniform(0, 5, (m, 1)), rng.uniform(0, 1, m))
    if name == "stationary_p1.5":
        ctx = make_context(1.5)
        (x1,), t = _symbols(1)
        expr = 4 * (1 - 1 / (1 + x1))  # c(p) = beta^beta/(beta-1) = 4, 1-beta = -1
        return StationaryHalfLine(ctx, 1.0), expr, (x1,), t, lambda m: (rng.uniform(0, 5, (m, 1)), rng.uniform(0, 1, m))
    if name == "sinh":
        ctx = make_context(2.0)
        (x1, x2), t = _symbols(2)
        expr = sp.log(1 + sp.exp(sp.Rational(1, 2) * x1 + (sp.Rational(1, 4) + sp.Rational(9, 4)) * t) * sp.sinh(sp.Rational(3, 2) * x2))
        sol = QuadraticSinh(ctx, 1.5, (0.5,))
        return sol, expr, (x1, x2), t, lambda m: (np.column_stack([rng.uniform(-1, 1, m), rng.uniform(0, 2, m)]), rng.uniform(-1, 1, m))
    if name == "loglinear":
        ctx = make_context(2.0)
        (x1, x2), t = _symbols(2)
        expr = sp.log(1 + 2 * x2)
        sol = QuadraticLogLinear(ctx, 2.0, 2)
        return sol, expr, (x1, x2), t, lambda m: (np.column_stack([rng.uniform(-1, 1, m), rng.uniform(0, 3, m)]), rng.uniform(0, 1, m))
    if name == "heat":
        ctx = make_context(2.0)
        (x1, x2), t = _symbols(2)
        expr = -sp.log(t) - (x1**2 + x2**2) / (4 * t)
        return LogHeatKernel(ctx, 2), expr, (x1, x2), t, lambda m: (rng.uniform(-2, 2, (m, 2)), rng.uniform(0.05, 2, m))
    if name == "linear":
        ctx = make_context(3.0)
        (x1, x2), t = _symbols(2)
        expr = 10 * x1 + 1000 * t
        return LinearOptimality(ctx, 0.1, 2), expr, (x1, x2), t, lambda m: (rng.uniform(-2, 2, (m, 2)), rng.uniform(0, 1, m))
    raise KeyError(name)


CASES = ["traveling", "stationary_p3", "stationary_p1.5", "sinh", "loglinear", "heat", "linear"]


@pytest.mark.parametrize("name", CASES)
def test_matches_symbolic_oracle(name):
    sol, expr, xs, t, sample = _case(name)
    x, tv = sample(200)
    u, ut, lap, grad = _oracle(expr, xs, t)(x, tv)
    e = sol.evaluate(x, tv)
    scale = 1 + np.abs(u)
    assert np.max(np.abs(e.u - u) / scale) < 1e-12
    assert np.max(np.abs(e.u_t - ut) / (1 + np.abs(ut))) < 1e-12
    assert np.max(np.abs(e.laplacian_u - lap) / (1 + np.abs(lap))) < 1e-12
    assert np.max(np.abs(e.grad_u - grad) / (1 + np.abs(grad))) < 1e-12


@pytest.mark.parametrize("name", CASES)
def test_symbolic_residual_vanishes(name):
    sol, expr, xs, t, sample = _case(name)
    grad2 = sum(sp.diff(expr, xi) ** 2 for xi in xs)
    p = sol.p
    # evaluate the symbolic residual at a few points instead of relying on simplify
    res = sp.diff(expr, t) - sum(sp.diff(expr, xi, 2) for xi in xs) - sp.sqrt(grad2) ** sp.nsimplify(p)
    f = sp.lambdify((*xs, t), res, "numpy")
    x, tv = sample(50)
    vals = np.asarray(f(*[x[:, i] for i in range(x.shape[1])], tv), dtype=float)
    assert np.max(np.abs(vals)) < 1e-9


def test_explicit_formula_values(ctx3):
    e = evaluate(TravelingWave(ctx3, (1.0,)), SpaceTimePoint((0.0,), 1.0))
    assert (float(e.u), float(e.grad_u[0]), float(e.u_t)) == (1.0, 1.0, 1.0)
    assert float(StationaryHalfLine(ctx3, 0.0).evaluate(np.array([4.0]), 0.0).u) == pytest.approx(2 * math.sqrt(2), rel=1e-15)
    sinh = QuadraticSinh(make_context(2.0), 1.0, ())
    assert float(sinh.evaluate(np.array([0.0]), 3.7).u) == 0.0


def test_sinh_family_consistency():
    sol = QuadraticSinh(make_context(2.0), 1.0, ())
    x = np.linspace(0, 3, 31)
    t = np.linspace(-1, 1, 31)
    assert np.allclose(sol.evaluate(x[:, None], t).u, np.log(1 + np.exp(t) * np.sinh(x)), rtol=1e-14, atol=0)


def test_residual_examples(ctx2):
    assert abs(residual(LogHeatKernel(ctx2, 2), SpaceTimePoint((1.0, 1.0), 1.0))) <= 1e-12
    assert abs(residual(StationaryHalfLine(make_context(1.5), 1.0), SpaceTimePoint((2.0,), 0.0))) <= 1e-12
    assert residual(TravelingWave(make_context(3.0), (1.0, 2.0)), SpaceTimePoint((0.3, -0.1), 0.5)) == 0.0


def _profile_solutions():
    c3 = make_context(3.0)
    back = integrate(ProfileOde(c3, BACKWARD), 0.1, IntegratorControls(y_max=50))
    fwd = integrate(ProfileOde(c3, FORWARD), 0.05, IntegratorControls(y_max=20))
    return SelfSimilar(back, 2), SelfSimilar(fwd, 1)


def _all_variants():
    c3, c2, c15 = make_context(3.0), make_context(2.0), make_context(1.5)
    back, fwd = _profile_solutions()
    return [
        (Constant(c3, 5.0, 2), lambda r, m: (r.uniform(-2, 2, (m, 2)), r.uniform(-1, 1, m))),
        (TravelingWave(c3, (1.0, -0.5)), lambda r, m: (r.uniform(-2, 2, (m, 2)), r.uniform(-1, 1, m))),
        (StationaryHalfLine(c3, 0.5), lambda r, m: (r.uniform(0, 4, (m, 1)), r.uniform(-1, 1, m))),
        (StationaryHalfLine(c15, 0.5), lambda r, m: (r.uniform(0, 4, (m, 1)), r.uniform(-1, 1, m))),
        (QuadraticSinh(c2, 1.0, (0.3,)), lambda r, m: (np.column_stack([r.uniform(-1, 1, m), r.uniform(0, 2, m)]), r.uniform(-1, 1, m))),
        (QuadraticLogLinear(c2, 1.5, 1), lambda r, m: (r.uniform(0, 3, (m, 1)), r.uniform(-1, 1, m))),
        (LogHeatKernel(c2, 3), lambda r, m: (r.uniform(-2, 2, (m, 3)), r.uniform(0.01, 2, m))),
        (LinearOptimality(c3, 0.01, 1), lambda r, m: (r.uniform(-2, 2, (m, 1)), r.uniform(0, 1, m))),
        (back, lambda r, m: (np.column_stack([r.uniform(-1, 1, m), r.uniform(0, 3, m)]), r.uniform(-4, -0.01, m))),
        (fwd, lambda r, m: (r.uniform(0, 3, (m, 1)), r.uniform(0, 2, m))),
    ]


def test_residuals_on_random_points():
    rng = np.random.default_rng(2024)
    for sol, sample in _all_variants():
        x, t = sample(rng, 1000)
        r = np.abs(sol.residual(x, t)) / residual_scale(sol, x, t)
        assert np.max(r) <= 1e-9, sol.family


def test_self_similar_needs_coverage():
    back, _ = _profile_solutions()
    with pytest.raises(DomainError):
        back.evaluate(np.array([0.0, 60.0]), -1.0)
    with pytest.raises(DomainError):
        back.evaluate(np.array([0.0, 1.0]), 0.5)


def test_domain_violations(ctx2, ctx3):
    with pytest.raises(DomainError):
        LogHeatKernel(ctx2, 1).evaluate(np.array([0.0]), 0.0)
    with pytest.raises(DomainError):
        StationaryHalfLine(ctx3, 1.0).evaluate(np.array([-0.1]), 0.0)
    with pytest.raises(ValueError):
        StationaryHalfLine(ctx2, 1.0)
    with pytest.raises(ValueError):
        QuadraticSinh(ctx3, 1.0, ())
    with pytest.raises(ValueError):
        LinearOptimality(ctx3, 1.5)
    with pytest.raises(ValueError):
        StationaryHalfLine(make_context(1.5), 0.0)


def test_rescale_stationary_offset(ctx3):
    sol = StationaryHalfLine(ctx3, 1.0)
    out = rescale(sol, 2.0)
    assert isinstance(out, StationaryHalfLine) and out.a == 0.5
    x = np.linspace(0, 3, 50)[:, None]
    direct = 2.0 ** (ctx3.beta - 1) * sol.evaluate(2.0 * x, 0.0).u
    assert np.allclose(out.evaluate(x, 0.0).u, direct, rtol=1e-12, atol=1e-12)


def test_rescale_identity_and_generic(ctx3):
    sol = TravelingWave(ctx3, (1.0,))
    assert rescale(sol, 1.0) == sol
    r = Rescaled.of(QuadraticSinh(make_context(2.0), 1.0, ()), 3.0)
    assert isinstance(r, Rescaled)
    with pytest.raises(ValueError):
        rescale(sol, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.0, 2.0), st.floats(-1.0, 1.0))
def test_rescale_composition(l1, l2, x, t):
    for sol in (StationaryHalfLine(make_context(3.0), 1.0), QuadraticSinh(make_context(2.0), 1.0, ())):
        a = sol.rescale(l1).rescale(l2).evaluate(np.array([x]), t)
        b = sol.rescale(l1 * l2).evaluate(np.array([x]), t)
        assert abs(float(a.u) - float(b.u)) <= 1e-10 * (1 + abs(float(b.u)))
        assert abs(float(a.u_t) - float(b.u_t)) <= 1e-10 * (1 + abs(float(b.u_t)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0))
def test_rescaled_residual_vanishes(lam):
    rng = np.random.default_rng(1)
    for sol, sample in _all_variants()[:8]:
        out = sol.rescale(lam)
        x, t = sample(rng, 50)
        x, t = x / lam, t / lam**2
        r = np.abs(out.residual(x, t)) / residual_scale(out, x, t)
        assert np.max(r) <= 1e-9


def test_from_dict_roundtrip_and_rejection(ctx3):
    sol = from_dict({"family": "StationaryHalfLine", "p": 3, "a": 1.0})
    assert sol == StationaryHalfLine(ctx3, 1.0)
    assert from_dict(sol.as_dict()) == sol
    with pytest.raises(ValueError):
        from_dict({"family": "StationaryHalfLine", "p": 3, "a": 1.0, "bogus": 1})
    with pytest.raises(ValueError):
        from_dict({"family": "Nope", "p": 3})
    ss = from_dict({"family": "SelfSimilar", "p": 3, "direction": "backward", "alpha": 0.1, "y_max": 30})
    assert ss.direction == "backward" and ss.t_ref == 0.0
