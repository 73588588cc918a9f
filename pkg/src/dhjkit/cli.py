"""Batch command-line front end.

Every subcommand builds a JSON payload through a job function in ``JOBS``;
the golden-file runner reuses the same functions.  Outputs are deterministic
except for an optional ``generated_at`` field removed by ``--no-timestamp``.

Exit codes: 0 success, 1 usage error, 2 numeric job failure, 3 verification Fail.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import itertools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from dhjkit import __version__
from dhjkit import estimates as est
from dhjkit.closed_forms import SelfSimilar, from_dict
from dhjkit.exponents import make_context
from dhjkit.pde import (
    SYMMETRY,
    BoundarySpec,
    Domain1D,
    Geometry,
    SolverControls,
    from_closed_form,
    max_error,
    solve,
)
from dhjkit.profile import FORWARD, InsufficientRangeError, IntegratorControls, ProfileOde, integrate
from dhjkit.shooting import (
    ForwardTag,
    backward_alpha0,
    backward_profile,
    classify_forward,
    classify_trajectory,
    critical_alpha,
    forward_alpha1,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_FAIL = 0, 1, 2, 3


class UsageError(ValueError):
    pass


class NumericFailure(RuntimeError):
    pass


class JobResult:
    def __init__(self, payload: dict, code: int = EXIT_OK, files: dict[str, str] | None = None):
        self.payload = payload
        self.code = code
        self.files = files or {}


def take(cfg: dict, required: tuple[str, ...] = (), optional: tuple[str, ...] = (), where: str = "config") -> dict:
    if not isinstance(cfg, dict):
        raise UsageError(f"{where} must be a JSON object")
    unknown = set(cfg) - set(required) - set(optional)
    if unknown:
        raise UsageError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = [k for k in required if k not in cfg]
    if missing:
        raise UsageError(f"missing keys in {where}: {missing}")
    return cfg


def _number(cfg, key, default=None, positive=False):
    v = cfg.get(key, default)
    if v is None:
        return None
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise UsageError(f"{key} must be a number") from None
    if not math.isfinite(v) or (positive and v <= 0):
        raise UsageError(f"{key} must be {'positive and ' if positive else ''}finite")
    return v


# jobs


def job_context(params: dict) -> JobResult:
    take(params, ("p",), where="context")
    ctx = make_context(_number(params, "p"))
    return JobResult({"job": "context", "context": ctx.as_dict()})


def job_profile(params: dict) -> JobResult:
    take(params, ("p", "direction"), ("alpha", "alpha_fraction", "y_max"), where="profile")
    ctx = make_context(_number(params, "p"))
    direction = params["direction"]
    if direction not in ("backward", "forward"):
        raise UsageError("direction must be 'backward' or 'forward'")
    if ("alpha" in params) == ("alpha_fraction" in params):
        raise UsageError("give exactly one of alpha, alpha_fraction")
    if "alpha" in params:
        alpha = _number(params, "alpha", positive=True)
    else:
        alpha = _number(params, "alpha_fraction", positive=True) * backward_alpha0(ctx)
    y_max = _number(params, "y_max", 200.0 if direction == "backward" else 40.0, positive=True)
    controls = IntegratorControls(y_max=y_max)
    if direction == "backward":
        traj, report = backward_profile(ctx, alpha, controls)
        payload = {"job": "profile", "direction": direction, "p": ctx.p, "alpha": alpha, "report": report.as_dict()}
        code = EXIT_OK if report.ok else EXIT_NUMERIC
    else:
        traj = integrate(ProfileOde(ctx, FORWARD), alpha, controls)
        cls = classify_trajectory(traj)
        payload = {
            "job": "profile",
            "direction": direction,
            "p": ctx.p,
            "alpha": alpha,
            "classification": cls.as_dict(),
            "termination": traj.termination.value,
            "y_end": traj.y_end,
            "events": [[e.kind.value, e.y] for e in traj.events],
        }
        code = EXIT_OK
    return JobResult(payload, code, {"csv": traj.to_csv()})


def job_critical_alpha(params: dict) -> JobResult:
    take(params, ("p",), ("tol", "y_max"), where="critical-alpha")
    ctx = make_context(_number(params, "p"))
    tol = _number(params, "tol", 1e-6, positive=True)
    controls = IntegratorControls(y_max=_number(params, "y_max", 100.0, positive=True))
    res = critical_alpha(ctx, tol, controls)
    lo, hi = res.bracket
    retry = controls.replace(y_max=res.y_max_used)
    lo_tag = classify_forward(ctx, lo, retry).tag
    hi_tag = classify_forward(ctx, hi, retry).tag
    a1 = forward_alpha1(ctx)
    checks = {
        "alpha1": a1,
        "width": hi - lo,
        "width_ok": hi - lo <= tol,
        "lo_tag": lo_tag.value,
        "hi_tag": hi_tag.value,
        "inside_alpha1_1": a1 <= lo and hi <= 1.0,
    }
    payload = {"job": "critical-alpha", "p": ctx.p, **res.as_dict(), "checks": checks}
    ok = checks["width_ok"] and lo_tag == ForwardTag.J1 and hi_tag == ForwardTag.J2
    return JobResult(payload, EXIT_OK if ok else EXIT_NUMERIC)


def _initial_data(spec, ctx):
    kind = spec.get("kind") if isinstance(spec, dict) else None
    if kind == "gaussian":
        take(spec, ("kind",), ("amplitude", "width"), where="initial")
        amp = _number(spec, "amplitude", 1.0)
        w = _number(spec, "width", 1.0, positive=True)
        return lambda x: amp * np.exp(-((x / w) ** 2))
    if kind == "table":
        take(spec, ("kind", "x", "u"), where="initial")
        xs = np.asarray(spec["x"], dtype=float)
        us = np.asarray(spec["u"], dtype=float)
        if xs.ndim != 1 or xs.shape != us.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise UsageError("tabulated initial data needs increasing x and matching u")
        return lambda x: np.interp(x, xs, us)
    raise UsageError("initial.kind must be 'gaussian' or 'table'")


def _boundary_value(v, where):
    if v == SYMMETRY:
        return SYMMETRY
    try:
        return float(v)
    except (TypeError, ValueError):
        raise UsageError(f"boundary {where} must be a number or 'symmetry'") from None


def job_pde(cfg: dict) -> JobResult:
    take(
        cfg,
        ("p", "h", "t_end"),
        (
            "geometry", "x_lo", "x_hi", "n", "t_start", "snapshots", "solution",
            "initial", "boundary", "controls", "write_snapshots",
        ),
        where="pde config",
    )
    ctx = make_context(_number(cfg, "p"))
    geometry = Geometry(cfg.get("geometry", "line"))
    n = int(cfg.get("n", 1))
    x_lo = _number(cfg, "x_lo", 0.0)
    x_hi = _number(cfg, "x_hi", 1.0)
    domain = Domain1D(x_lo, x_hi, geometry, n)
    h = _number(cfg, "h", positive=True)
    t_start = _number(cfg, "t_start", 0.0)
    t_end = _number(cfg, "t_end")
    snaps = int(cfg.get("snapshots", 10))
    if snaps < 1:
        raise UsageError("snapshots must be >= 1")
    controls = SolverControls(**take(dict(cfg.get("controls", {})), (), ("cfl", "transport_cfl", "grad_cap", "growth_limit"), "controls"))
    sol = None
    if "solution" in cfg:
        if "initial" in cfg or "boundary" in cfg:
            raise UsageError("give either solution or initial/boundary data")
        sol = from_dict({"p": ctx.p, **cfg["solution"]})
        initial_at, boundary = from_closed_form(sol, domain)
        initial = initial_at(t_start)
    else:
        if "initial" not in cfg or "boundary" not in cfg:
            raise UsageError("need initial and boundary data (or a solution)")
        initial = _initial_data(cfg["initial"], ctx)
        b = take(dict(cfg["boundary"]), ("right",), ("left",), "boundary")
        left = _boundary_value(b.get("left", SYMMETRY if geometry == Geometry.RADIAL else 0.0), "left")
        right = _boundary_value(b["right"], "right")
        if right == SYMMETRY:
            raise UsageError("symmetry is only allowed on the left end")
        boundary = BoundarySpec.symmetric(right) if left == SYMMETRY else BoundarySpec.dirichlet(left, right)
    times = np.linspace(t_start, t_end, snaps + 1)
    run = solve(ctx, domain, h, initial, boundary, t_end, controls, times, t_start=t_start)
    payload: dict[str, Any] = {"job": "pde", "summary": run.summary()}
    if sol is not None:
        payload["max_error"] = [max_error(run, sol, k) for k in range(len(run.times))]
    files = {}
    if cfg.get("write_snapshots", False):
        files = {f"snap{k:03d}.csv": run.snapshot_csv(k) for k in range(len(run.times))}
    return JobResult(payload, EXIT_OK, files)


def _solution(spec, p=None):
    spec = dict(spec)
    if p is not None:
        spec.setdefault("p", p)
    return from_dict(spec)


_WINDOW = ("center", "R", "T")


def _window(c):
    out = {}
    if "center" in c:
        out["center"] = [float(v) for v in c["center"]]
    for k in ("R", "T"):
        if k in c:
            out[k] = _number(c, k, positive=True)
    return out


def run_check(check: dict) -> est.EstimateReport:
    """Dispatch one verification check record to its checker."""
    kind = check.get("checker")
    if kind == "bernstein":
        take(check, ("checker", "solution"), _WINDOW + ("level",), "bernstein check")
        return est.bernstein_ratio(_solution(check["solution"]), level=int(check.get("level", 1)), **_window(check))
    if kind == "li_yau_pointwise":
        take(check, ("checker", "solution", "a"), _WINDOW + ("level", "bound"), "li_yau_pointwise check")
        return est.li_yau_pointwise_ratio(
            _solution(check["solution"]),
            _number(check, "a"),
            level=int(check.get("level", 1)),
            bound=_number(check, "bound"),
            **_window(check),
        )
    if kind == "li_yau_two_point":
        take(check, ("checker", "solution"), _WINDOW, "li_yau_two_point check")
        return est.li_yau_two_point(_solution(check["solution"]), **_window(check))
    if kind == "scale_stability":
        take(check, ("checker", "inner", "solution"), _WINDOW + ("lambdas", "rel_tol", "a", "level"), "scale check")
        kw = _window(check)
        if "a" in check:
            kw["a"] = _number(check, "a")
        if "level" in check:
            kw["level"] = int(check["level"])
        if check["inner"] not in est.CHECKERS:
            raise UsageError(f"unknown inner checker {check['inner']!r}")
        return est.scale_stability(
            check["inner"],
            _solution(check["solution"]),
            tuple(float(v) for v in check.get("lambdas", (0.5, 1.0, 2.0))),
            _number(check, "rel_tol", 1e-6, positive=True),
            **kw,
        )
    if kind == "halfspace_growth":
        take(check, ("checker", "p"), ("alpha", "alpha_fraction", "y_max"), "halfspace check")
        ctx = make_context(_number(check, "p"))
        alpha = _number(check, "alpha") or _number(check, "alpha_fraction", 0.5) * backward_alpha0(ctx)
        traj, _ = backward_profile(ctx, alpha, IntegratorControls(y_max=_number(check, "y_max", 220.0)))
        return est.halfspace_growth_ratio(SelfSimilar(traj, 1, t_ref=0.0))
    if kind == "li_yau_failure":
        take(check, ("checker", "p", "n"), ("R_big", "h", "t_probe"), "li_yau_failure check")
        return est.li_yau_failure_probe(
            make_context(_number(check, "p")),
            int(check["n"]),
            R_big=_number(check, "R_big", 8.0, positive=True),
            h=_number(check, "h", 1 / 64, positive=True),
            t_probe=_number(check, "t_probe", 0.01, positive=True),
        )
    if kind == "li_yau_optimality":
        take(check, ("checker", "p", "alpha", "a"), ("y_max",), "li_yau_optimality check")
        return est.li_yau_optimality_probe(
            make_context(_number(check, "p")),
            _number(check, "alpha", positive=True),
            _number(check, "a"),
            IntegratorControls(y_max=_number(check, "y_max", 20.0, positive=True)),
        )
    if kind == "ode_inequality":
        take(check, ("checker", "gamma", "k", "A", "direction", "interval", "Y0"), ("y_cap",), "ode check")
        interval = check["interval"]
        if not (isinstance(interval, list) and len(interval) == 2):
            raise UsageError("interval must be [t0, t1]")
        return est.ode_inequality_bound_check(
            _number(check, "gamma"),
            _number(check, "k"),
            _number(check, "A"),
            check["direction"],
            (float(interval[0]), float(interval[1])),
            _number(check, "Y0"),
            y_cap=_number(check, "y_cap", 1e8, positive=True),
        )
    if kind == "bernstein_linear":
        take(check, ("checker", "p", "eps"), ("n", "min_factor"), "bernstein_linear check")
        return est.bernstein_optimality_linear(
            make_context(_number(check, "p")),
            _number(check, "eps", positive=True),
            int(check.get("n", 1)),
            min_factor=_number(check, "min_factor", 1e2),
        )
    if kind == "heat_kernel_gap":
        take(check, ("checker", "eps"), ("n",), "heat_kernel_gap check")
        return est.heat_kernel_gap(int(check.get("n", 1)), _number(check, "eps", positive=True))
    raise UsageError(f"unknown checker {kind!r}")


def job_verify(cfg: dict) -> JobResult:
    take(cfg, ("checks",), where="verify config")
    checks = cfg["checks"]
    if not isinstance(checks, list) or not checks:
        raise UsageError("checks must be a non-empty list")
    reports = [run_check(dict(c)).as_dict() for c in checks]
    failed = [r["estimate"] for r in reports if r["verdict"] == est.Verdict.FAIL.value]
    payload = {"job": "verify", "verdict": "Fail" if failed else "Pass", "failed": failed, "reports": reports}
    return JobResult(payload, EXIT_FAIL if failed else EXIT_OK)


SWEEPABLE = {"context": job_context, "profile": job_profile, "critical-alpha": job_critical_alpha}


def job_sweep(cfg: dict) -> JobResult:
    """Cartesian product of ``grid`` over ``base`` params; reports sorted by parameter tuple."""
    take(cfg, ("job", "grid"), ("base", "workers"), where="sweep config")
    name = cfg["job"]
    if name not in SWEEPABLE:
        raise UsageError(f"sweep job must be one of {sorted(SWEEPABLE)}")
    grid = cfg["grid"]
    if not isinstance(grid, dict) or not grid or not all(isinstance(v, list) and v for v in grid.values()):
        raise UsageError("grid must map parameter names to non-empty lists")
    keys = sorted(grid)
    combos = sorted(itertools.product(*(grid[k] for k in keys)))
    base = dict(cfg.get("base", {}))
    jobs = [{**base, **dict(zip(keys, combo))} for combo in combos]
    workers = int(cfg.get("workers", 1))

    def run(params):
        try:
            r = SWEEPABLE[name](params)
            return {"params": params, "exit_code": r.code, "result": r.payload}
        except (NumericFailure, RuntimeError, InsufficientRangeError) as exc:
            return {"params": params, "exit_code": EXIT_NUMERIC, "error": str(exc)}

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    code = max(r["exit_code"] for r in results)
    return JobResult({"job": "sweep", "sweep_job": name, "keys": keys, "results": results}, code)


JOBS: dict[str, Callable[[dict], JobResult]] = {
    "context": job_context,
    "profile": job_profile,
    "critical-alpha": job_critical_alpha,
    "pde": job_pde,
    "verify": job_verify,
    "sweep": job_sweep,
}


# output


def dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"


def _stamp(payload: dict, timestamp: bool) -> dict:
    out = {"version": __version__, **payload}
    if timestamp:
        out["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return out


def emit(result: JobResult, out: str | None, timestamp: bool, csv_suffix: str = ".csv") -> None:
    text = dumps(_stamp(result.payload, timestamp))
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    for name, content in result.files.items():
        target = path.with_suffix(csv_suffix) if name == "csv" else path.with_name(f"{path.stem}_{name}")
        target.write_text(content)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here (CSV files go alongside)")
    common.add_argument("--no-timestamp", action="store_true", help="omit generated_at for byte-identical output")

    parser = _Parser(prog="dhjkit", description="Profiles, shooting, PDE runs and estimate checks for u_t - Δu = |∇u|^p.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("context", parents=[common], help="exponents and regime for p")
    s.add_argument("--p", type=float, required=True)

    s = sub.add_parser("profile", parents=[common], help="integrate a self-similar profile")
    d = s.add_mutually_exclusive_group(required=True)
    d.add_argument("--backward", dest="direction", action="store_const", const="backward")
    d.add_argument("--forward", dest="direction", action="store_const", const="forward")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--y-max", type=float)

    s = sub.add_parser("critical-alpha", parents=[common], help="bisect for the critical forward slope")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--y-max", type=float)

    for name, text in (("pde", "run the 1D solver"), ("verify", "run estimate checks"), ("sweep", "fan out over a grid")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--config", required=True)

    s = sub.add_parser("golden", help="check or regenerate golden records")
    s.add_argument("--dir", default="tests/golden")
    s.add_argument("--update", action="store_true", help="rewrite expected values of self-generated records")
    return parser


def _params(args) -> dict:
    if args.command == "context":
        return {"p": args.p}
    if args.command == "profile":
        out = {"p": args.p, "direction": args.direction, "alpha": args.alpha}
    else:
        out = {"p": args.p, "tol": args.tol}
    if args.y_max is not None:
        out["y_max"] = args.y_max
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "golden":
            from dhjkit.golden import run_golden

            return run_golden(Path(args.dir), update=args.update)
        if args.command in ("pde", "verify", "sweep"):
            params = load_config(args.config)
        else:
            params = _params(args)
        result = JOBS[args.command](params)
        emit(result, args.out, not args.no_timestamp)
        return result.code
    except InsufficientRangeError as exc:
        print(f"dhjkit: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"dhjkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericFailure, RuntimeError, FloatingPointError) as exc:
        print(f"dhjkit: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
