"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import time
from pathlib import Path

import numpy as np
import pytest

from dhjkit import estimates as est
from dhjkit.cli import EXIT_OK, main
from dhjkit.closed_forms import LogHeatKernel, QuadraticSinh, SelfSimilar, StationaryHalfLine, TravelingWave, residual_scale
from dhjkit.exponents import make_context
from dhjkit.pde import Domain1D, observed_order
from dhjkit.profile import IntegratorControls
from dhjkit.shooting import (
    ForwardTag,
    backward_alpha0,
    backward_profile,
    classification_sweep,
    classify_forward,
    critical_alpha,
    critical_profile_report,
    forward_alpha1,
    has_inversion,
)
from test_closed_forms import _all_variants

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def report(capsys):
    def emit(number, ok, msg):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {msg}")
        assert ok, msg

    return emit


def test_criterion_01_closed_form_residuals(report):
    rng = np.random.default_rng(1)
    cases = [(sol, sample(rng, 1000)) for sol, sample in _all_variants()]
    start = time.perf_counter()
    worst = {}
    for sol, (x, t) in cases:
        r = np.abs(sol.residual(x, t)) / residual_scale(sol, x, t)
        key = f"{sol.family}(p={sol.p:g})"
        worst[key] = max(worst.get(key, 0.0), float(np.max(r)))
    elapsed = time.perf_counter() - start
    top = max(worst.values())
    report(1, top <= 1e-9 and elapsed < 1.0,
           f"{len(cases)} variants x 1000 points, max scaled residual {top:.2e} (tol 1e-9), {elapsed:.2f}s (< 1s)")


def test_criterion_02_backward_profiles(report):
    start = time.perf_counter()
    parts, ok = [], True
    for p in (2.5, 3.0, 4.0):
        ctx = make_context(p)
        traj, rep = backward_profile(ctx, 0.5 * backward_alpha0(ctx), IntegratorControls(y_max=200))
        positive = bool(np.all(traj.phi[1:] > 0) and np.all(traj.phi_prime[1:] > 0))
        good = positive and rep.sign_changes == 1 and rep.psi_rel_error <= 0.02
        ok &= good
        parts.append(f"p={p:g} sign_changes={rep.sign_changes} psi_err={rep.psi_rel_error:.2%}")
    elapsed = time.perf_counter() - start
    report(2, ok and elapsed < 5.0, "; ".join(parts) + f"; {elapsed:.2f}s (< 5s)")


def test_criterion_03_forward_shooting(report):
    start = time.perf_counter()
    parts, ok = [], True
    for p in (3.0, 4.0):
        ctx = make_context(p)
        a1 = forward_alpha1(ctx)
        lo_tag = classify_forward(ctx, a1 / 2).tag
        hi_tag = classify_forward(ctx, 2.0).tag
        crit = critical_alpha(ctx, 1e-6)
        lo, hi = crit.bracket
        tags = [c.tag for _, c in classification_sweep(ctx, np.geomspace(a1 / 2, 4.0, 50))]
        good = (
            lo_tag is ForwardTag.J1 and hi_tag is ForwardTag.J2
            and hi - lo <= 1e-6 and a1 <= lo and hi <= 1.0 and not has_inversion(tags)
        )
        ok &= good
        parts.append(f"p={p:g} alpha*={crit.alpha_star:.7f} width={hi - lo:.1e} inversion={has_inversion(tags)}")
    elapsed = time.perf_counter() - start
    report(3, ok and elapsed < 30.0, "; ".join(parts) + f"; {elapsed:.1f}s (< 30s)")


def test_criterion_04_critical_profile_bounds(report):
    ctx = make_context(3.0)
    rep = critical_profile_report(ctx, critical_alpha(ctx, 1e-6))
    ok = rep.bounds_ok and rep.psi_rel_error <= 0.05
    report(4, ok, f"horizon y={rep.horizon:.2f}, min gaps (phi-alpha y, lower, upper) = "
                  f"({rep.min_phi_minus_alpha_y:.1e}, {rep.min_lower_gap:.1e}, {rep.min_upper_gap:.1e}), "
                  f"psi err {rep.psi_rel_error:.2%} (<= 5%)")


def test_criterion_05_pde_convergence(report):
    cases = [
        ("TravelingWave p=3", TravelingWave(make_context(3.0), (1.0,)), Domain1D(0.0, 1.0), 0.1),
        ("QuadraticSinh p=2", QuadraticSinh(make_context(2.0), 1.0, ()), Domain1D(0.0, 2.0), 0.1),
        ("StationaryHalfLine p=3", StationaryHalfLine(make_context(3.0), 1.0), Domain1D(0.0, 1.0), 0.2),
    ]
    start = time.perf_counter()
    parts, ok = [], True
    for name, sol, dom, t_end in cases:
        e1, e2, order = observed_order(sol, dom, 1 / 64, t_end)
        ok &= bool(1.8 <= order <= 2.2)
        parts.append(f"{name} errors {e1:.1e}/{e2:.1e} order {order:.2f}")
    elapsed = time.perf_counter() - start
    report(5, ok and elapsed < 60.0, "; ".join(parts) + f"; {elapsed:.1f}s (< 60s)")


def test_criterion_06_li_yau_failure(report):
    parts, ok = [], True
    for n in (1, 2):
        rep = est.li_yau_failure_probe(make_context(1.5), n)
        d = rep.details
        ok &= d["max_ut_origin"] < 0 and d["initial_rel_error"] <= 0.1
        parts.append(f"n={n} max u_t(0,t)={d['max_ut_origin']:.3f} u_t(0,0)={d['ut_origin_initial']:.4f}")
    report(6, ok, "; ".join(parts))


def test_criterion_07_li_yau_heat_kernel(report):
    ctx = make_context(2.0)
    parts, ok = [], True
    for n in (1, 2, 3):
        for a in (0.5, 1.0):
            rep = est.li_yau_pointwise_ratio(LogHeatKernel(ctx, n), a=a, center=np.zeros(n), bound=n / 2 + 1e-6)
            ok &= rep.sup_ratio <= n / 2 + 1e-6
            parts.append(f"n={n},a={a:g}: {rep.sup_ratio:.6f}")
    report(7, ok, "sup ratios " + ", ".join(parts) + " (<= n/2 + 1e-6)")


def test_criterion_08_bernstein_optimality(report):
    rep = est.bernstein_optimality_linear(make_context(3.0), 1e-4)
    d = rep.details
    exact = d["grad"] == d["M_minus_u"] == 1e4
    ok = exact and rep.sup_ratio > 1e2
    report(8, ok, f"|grad u| = M-u = {d['grad']:g} (exact: {exact}), factor {rep.sup_ratio:.1f} (> 100)")


def test_criterion_09_li_yau_optimality(report):
    rep = est.li_yau_optimality_probe(make_context(3.0), 0.05, 0.99)
    d = rep.details
    ok = d["lambda"] > 1 and d["phi_pp"] < 0 < d["phi_prime"] and d["L"] > 0
    report(9, ok, f"lambda={d['lambda']:.4f} phi''={d['phi_pp']:.4f} phi'={d['phi_prime']:.4f} L={d['L']:.5f}")


def test_criterion_10_halfspace(report):
    ctx = make_context(3.0)
    traj, _ = backward_profile(ctx, 0.5 * backward_alpha0(ctx), IntegratorControls(y_max=220))
    rep = est.halfspace_growth_ratio(SelfSimilar(traj, 1, t_ref=0.0))
    d = rep.details
    ok = rep.verdict is est.Verdict.PASS and d["slope_rel_error"] <= 0.02 and d["amplitude_rel_error"] <= 0.05
    report(10, ok, f"scale spread {d['scale_spread']:.1e} (<= 0.2), slope err {d['slope_rel_error']:.2%}, "
                   f"amplitude err {d['amplitude_rel_error']:.2%}")


def test_criterion_11_ode_inequality(report):
    ric = est.ode_inequality_bound_check(2.0, 1.0, 0.0, "BlowUp", (0.0, 1.0), 10.0)
    riccati_err = abs(ric.details["min_normalized"] - 1.0)
    src = [
        est.ode_inequality_bound_check(2.0, 1.0, 4.0, "BlowUp", (0.0, 1.0), 1.0),
        est.ode_inequality_bound_check(2.0, 1.0, 4.0, "BlowUp", (0.0, 1.0), 3.0),
        est.ode_inequality_bound_check(3.0, 2.0, 1.0, "BlowUp", (0.0, 5.0), 3.0),
    ]
    fitted = [r.details["fitted_C"] for r in src]
    ok = riccati_err <= 1e-6 and abs(ric.sup_ratio - 1.0) <= 1e-6 and all(np.isfinite(fitted))
    report(11, ok, f"Riccati normalized error {riccati_err:.1e} (<= 1e-6); fitted C with A>0: "
                   + ", ".join(f"{c:.4f}" for c in fitted))


def test_criterion_12_determinism(report, tmp_path, capsys):
    jobs = [
        ["context", "--p", "3"],
        ["profile", "--backward", "--p", "3", "--alpha", "0.1"],
        ["profile", "--forward", "--p", "3", "--alpha", "0.5"],
        ["critical-alpha", "--p", "3"],
        ["pde", "--config", str(CONFIGS / "pde_traveling_wave.json")],
        ["verify", "--config", str(CONFIGS / "verify_estimates.json")],
        ["sweep", "--config", str(CONFIGS / "sweep_backward.json")],
    ]
    differ = []
    for k, argv in enumerate(jobs):
        blobs = []
        for rep in range(2):
            out = tmp_path / f"job{k}_{rep}.json"
            assert main(argv + ["--out", str(out), "--no-timestamp"]) == EXIT_OK
            blobs.append(sorted((f.name.replace(f"_{rep}", ""), f.read_bytes()) for f in tmp_path.glob(f"job{k}_{rep}*")))
        if blobs[0] != blobs[1]:
            differ.append(argv[0])
    capsys.readouterr()
    report(12, not differ, f"{len(jobs)} jobs re-run with --no-timestamp, differing outputs: {differ or 'none'}")
