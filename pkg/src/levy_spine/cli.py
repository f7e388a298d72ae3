"""Command-line front end.

Process configurations are JSON documents, for example::

    {"type": "mixture", "gaussian": 0.5, "path_drift": -1.0,
     "jumps": [{"side": "positive", "w": 1.0, "rho": 1.0}]}
    {"type": "stable", "alpha": 1.8, "k": 1.0, "theta": 0.05}

A mixture takes either ``drift`` (the coefficient of ``-i xi`` in the
exponent) or ``path_drift`` (the velocity between jumps), not both.

Exit status: 0 on success, 1 when a computation fails, 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import oracles, spectral
from .eigen import make_eigen
from .numerics import NumericsError
from .process import ExpComponent, ProcessSpec, ProcessSpecError, Stable, StableDrift, build_rogers
from .process import check_rogers, sample_half_plane
from .spine import spine_arrays
from .wiener_hopf import WienerHopfError

__all__ = ["ConfigError", "parse_config", "write_table", "run", "main"]


class ConfigError(ValueError):
    """Malformed or invalid configuration; ``problems`` lists ``(field, reason)`` pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {v}" for k, v in problems))


def _number(doc: dict, key: str, problems: list, default=None, positive=False, nonneg=False):
    if key not in doc:
        if default is None:
            problems.append((key, "missing"))
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        problems.append((key, f"must be a finite number, got {v!r}"))
        return default
    if positive and not v > 0:
        problems.append((key, f"must be > 0, got {v}"))
    if nonneg and v < 0:
        problems.append((key, f"must be >= 0, got {v}"))
    return float(v)


def parse_config(text: str) -> ProcessSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("<document>", f"not valid JSON: {exc}")]) from exc
    if not isinstance(doc, dict):
        raise ConfigError([("<document>", "top level must be an object")])
    problems: list[tuple[str, str]] = []
    kind = doc.get("type", "mixture")
    if kind == "mixture":
        allowed = {"type", "name", "gaussian", "drift", "path_drift", "killing", "jumps"}
        gaussian = _number(doc, "gaussian", problems, default=0.0, nonneg=True)
        killing = _number(doc, "killing", problems, default=0.0, nonneg=True)
        if "drift" in doc and "path_drift" in doc:
            problems.append(("drift", "give either drift or path_drift, not both"))
        use_path = "path_drift" in doc
        drift = _number(doc, "path_drift" if use_path else "drift", problems, default=0.0)
        jumps = []
        raw = doc.get("jumps", [])
        if not isinstance(raw, list):
            problems.append(("jumps", "must be a list"))
            raw = []
        for i, j in enumerate(raw):
            if not isinstance(j, dict):
                problems.append((f"jumps[{i}]", "must be an object"))
                continue
            side = j.get("side")
            if side not in ("positive", "negative"):
                problems.append((f"jumps[{i}].side", f"must be 'positive' or 'negative', got {side!r}"))
            sub: list = []
            w = _number(j, "w", sub, default=1.0, positive=True)
            rho = _number(j, "rho", sub, default=1.0, positive=True)
            problems += [(f"jumps[{i}].{k}", v) for k, v in sub]
            if side in ("positive", "negative") and not sub:
                jumps.append(ExpComponent(side, w, rho))
        if gaussian == 0 and not raw:
            problems.append(("gaussian", "deterministic process: need gaussian > 0 or at least one jump"))
    elif kind == "stable":
        allowed = {"type", "name", "alpha", "k", "theta", "b"}
        alpha = _number(doc, "alpha", problems)
        if alpha is not None and not 0 < alpha <= 2:
            problems.append(("alpha", f"must lie in (0, 2], got {alpha}"))
        k = _number(doc, "k", problems, default=1.0, positive=True)
        theta = _number(doc, "theta", problems, default=0.0)
        b = _number(doc, "b", problems, default=0.0)
        if alpha is not None and 0 < alpha <= 2:
            bound = min(math.pi / 2, (2 - alpha) / alpha * math.pi / 2)
            if abs(theta) > bound + 1e-15:
                problems.append(("theta", f"|theta| must not exceed {bound:.6g} for alpha={alpha}"))
    else:
        raise ConfigError([("type", f"must be 'mixture' or 'stable', got {kind!r}")])
    for key in sorted(set(doc) - allowed):
        problems.append((key, "unknown field"))
    if problems:
        raise ConfigError(problems)
    try:
        if kind == "stable":
            law = StableDrift(alpha, k, theta, b) if b else Stable(alpha, k, theta)
            return ProcessSpec(closed_form=law)
        if use_path:
            return ProcessSpec.from_path_drift(gaussian, drift, jumps, killing)
        return ProcessSpec(gaussian, drift, killing, tuple(jumps))
    except ProcessSpecError as exc:
        raise ConfigError([("<spec>", str(exc))]) from exc


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_table(rows: list[dict], fmt: str = "csv", destination=None, columns: list[str] | None = None) -> str:
    """Render rows as CSV (17 significant digits) or a JSON array; write to ``destination`` if given."""
    if fmt not in ("csv", "json"):
        raise ValueError("format must be 'csv' or 'json'")
    cols = columns or (list(rows[0].keys()) if rows else [])
    if rows and any(list(r.keys()) != cols for r in rows):
        raise ValueError("rows must share the same columns")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in cols])
        text = buf.getvalue()
    else:
        def plain(v):
            if isinstance(v, (np.floating, float)):
                return float(v) if math.isfinite(v) else str(float(v))
            if isinstance(v, np.integer):
                return int(v)
            if isinstance(v, np.bool_):
                return bool(v)
            return v
        text = json.dumps([{c: plain(r[c]) for c in cols} for r in rows], indent=1) + "\n"
    if destination is None:
        return text
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# ----- subcommands -------------------------------------------------------------------

def _radii(args) -> np.ndarray:
    if not (0 < args.rmin < args.rmax) or args.n < 1:
        raise _Usage("need 0 < rmin < rmax and n >= 1")
    return np.linspace(args.rmin, args.rmax, args.n) if args.n > 1 else np.array([args.rmin])


def _cmd_spine(spec, args):
    f = build_rogers(spec)
    arr = spine_arrays(f, _radii(args))
    return [dict(r=arr.r[i], re_zeta=arr.zeta[i].real, im_zeta=arr.zeta[i].imag,
                 **{"lambda": arr.lam[i]}, dzeta_abs=abs(arr.dzeta[i]), in_z=bool(arr.in_Z[i]))
            for i in range(arr.r.size)]


def _cmd_eigen(spec, args):
    f = build_rogers(spec)
    arr = spine_arrays(f, _radii(args))
    rows = []
    for i in range(arr.r.size):
        if not arr.in_Z[i]:
            continue
        e = make_eigen(f, arr.point(i))
        rows.append(dict(r=e.r, a=e.a, b=e.b, c_plus=e.c_plus, c_minus=e.c_minus,
                         norm_plus=e.norm_plus, norm_minus=e.norm_minus))
    return rows


def _result_row(res: spectral.SpectralResult, **coords):
    return dict(**coords, value=res.value, error_estimate=res.error_estimate,
                r_truncation=res.r_truncation, grid_size=res.grid_size, warnings=" | ".join(res.warnings))


def _cmd_heat(spec, args):
    f = build_rogers(spec)
    xs, ys = np.meshgrid(args.x, args.y, indexing="ij")
    res = spectral.heat_kernel_many(f, args.t, xs.ravel(), ys.ravel(), allow_small_t=args.allow_small_t)
    return [_result_row(r, t=args.t, x=x, y=y) for r, x, y in zip(res, xs.ravel(), ys.ravel())]


def _cmd_sup(spec, args):
    res = spectral.sup_cdf_many(build_rogers(spec), args.t, args.y, allow_small_t=args.allow_small_t)
    return [_result_row(r, t=args.t, y=y) for r, y in zip(res, args.y)]


def _cmd_inf(spec, args):
    res = spectral.inf_tail_many(build_rogers(spec), args.t, args.x, allow_small_t=args.allow_small_t)
    return [_result_row(r, t=args.t, x=x) for r, x in zip(res, args.x)]


def _cmd_check(spec, args):
    rep = spectral.check_assumptions(build_rogers(spec), params={"t": args.t, "delta": args.delta, "rho": args.rho})
    return [dict(formula=k, verdict=v, eps_estimate=rep.eps_estimate, growth_beta_fit=rep.growth_beta_fit,
                 beta_threshold=rep.beta_threshold, sup_arg_neg_side=rep.sup_arg_neg_side,
                 inf_arg_pos_side=rep.inf_arg_pos_side, notes=" | ".join(rep.notes))
            for k, v in rep.verdicts.items()]


@dataclass
class _Check:
    name: str
    value: float
    reference: float
    tolerance: float
    passed: bool

    def row(self):
        return dict(check=self.name, value=self.value, reference=self.reference,
                    abs_diff=abs(self.value - self.reference), tolerance=self.tolerance,
                    status="pass" if self.passed else "fail")


def _close(name, value, reference, tol, rel=False):
    diff = abs(value - reference) / (abs(reference) if rel else 1.0)
    return _Check(name, float(value), float(reference), tol, bool(diff <= tol))


def _recognise(spec: ProcessSpec) -> tuple[str, float]:
    """Which closed-form family a mixture config belongs to, if any."""
    if not spec.is_mixture or spec.killing:
        return "", 0.0
    d = spec.path_drift
    if not spec.jumps and spec.gaussian == 0.5:
        return "brownian", d
    if len(spec.jumps) == 1:
        j = spec.jumps[0]
        if j.side == "positive" and j.rho == 1.0 and abs(d + 1.0) < 1e-14:
            if spec.gaussian == 0 and j.w >= 1.0:
                return "risk", math.sqrt(j.w)
            if spec.gaussian == 0.5 and j.w == 1.0:
                return "bmexp", 0.0
    return "", 0.0


def _cmd_validate(spec, args):
    f = build_rogers(spec)
    checks: list[_Check] = []
    grid = (0.5, 1.0, 2.0)
    kind, param = _recognise(spec)
    report = check_rogers(f, sample_half_plane(1000, seed=args.seed))
    checks.append(_Check("rogers_inequality_min_ratio", report.min_re_ratio, 0.0, 1e-12, report.passed))
    if kind == "brownian":
        pts = (0.25, 0.5, 1.0, 2.0)
        xs, ys = (a.ravel() for a in np.meshgrid(pts, pts, indexing="ij"))
        for t in grid:
            res = spectral.heat_kernel_many(f, t, xs, ys)
            for r, x, y in zip(res, xs, ys):
                ref = oracles.brownian_drift_heat_kernel(param, t, x, y)
                checks.append(_close(f"heat t={t} x={x} y={y}", r.value, ref, 1e-4, rel=True))
    mc_kind = None
    if kind == "risk":
        for t in grid:
            for r, y in zip(spectral.sup_cdf_many(f, t, grid), grid):
                ref = oracles.risk_sup_cdf_R(param, t, y) if param != 1.0 else oracles.risk_sup_cdf(t, y)
                checks.append(_close(f"sup_cdf t={t} y={y}", r.value, ref, 1e-5))
        mc_kind = "sup"
    if kind == "bmexp":
        for t in grid:
            for r, x in zip(spectral.inf_tail_many(f, t, grid), grid):
                checks.append(_close(f"inf_tail t={t} x={x}", r.value, oracles.bm_exp_inf_tail(t, x), 1e-5))
        mc_kind = "inf"
    if mc_kind and args.mc_paths > 0:
        cfg = oracles.McConfig(args.mc_paths, int(round(args.mc_steps * max(grid))), max(grid),
                               seed=args.seed, horizons=grid)
        rec = oracles.simulate(spec, cfg)
        for t in grid:
            values = (spectral.sup_cdf_many(f, t, grid) if mc_kind == "sup" else spectral.inf_tail_many(f, t, grid))
            for r, level in zip(values, grid):
                sample = rec.sup[rec.row(t)] if mc_kind == "sup" else -rec.inf[rec.row(t)]
                est = oracles.empirical_cdf(sample, level)
                tol = 3 * est.std_error + 0.01
                checks.append(_close(f"monte_carlo {mc_kind} t={t} level={level}", est.estimate, r.value, tol))
    try:
        rhs, lhs, rel = spectral.laplace_identity(f, 1.0, 1.0, 1.0)
        checks.append(_Check("laplace_identity t=1 xi=1 eta=1", rhs, lhs, 1e-3, rel <= 1e-3))
    except spectral.AdmissibilityViolation:
        pass
    try:
        lhs, rhs, rel = spectral.pecherskii_check(f, 1.0, 1.0, 1.0)
        checks.append(_Check("pecherskii sigma=1 xi=1 eta=1", rhs, lhs, 1e-3, rel <= 1e-3))
    except spectral.AdmissibilityViolation:
        pass
    rows = [c.row() for c in checks]
    n_fail = sum(not c.passed for c in checks)
    print(f"validate: {len(checks) - n_fail} passed, {n_fail} failed (seed {args.seed})", file=sys.stderr)
    return rows, n_fail == 0


class _Usage(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON process configuration")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="levy-spine", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    for name in ("spine", "eigen"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--rmin", type=float, required=True)
        s.add_argument("--rmax", type=float, required=True)
        s.add_argument("--n", type=int, default=100)

    s = sub.add_parser("heat", parents=[common])
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--x", type=float, nargs="+", required=True)
    s.add_argument("--y", type=float, nargs="+", required=True)
    s.add_argument("--allow-small-t", action="store_true")

    s = sub.add_parser("sup-cdf", parents=[common])
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--y", type=float, nargs="+", required=True)
    s.add_argument("--allow-small-t", action="store_true")

    s = sub.add_parser("inf-tail", parents=[common])
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--x", type=float, nargs="+", required=True)
    s.add_argument("--allow-small-t", action="store_true")

    s = sub.add_parser("check", parents=[common])
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=0.2)
    s.add_argument("--rho", type=float, default=1.0)

    s = sub.add_parser("validate", parents=[common])
    s.add_argument("--mc-paths", type=int, default=100_000)
    s.add_argument("--mc-steps", type=float, default=10_000, help="Euler steps per unit time")
    s.add_argument("--seed", type=int, default=42)
    return p


_COMMANDS = {
    "spine": _cmd_spine,
    "eigen": _cmd_eigen,
    "heat": _cmd_heat,
    "sup-cdf": _cmd_sup,
    "inf-tail": _cmd_inf,
    "check": _cmd_check,
    "validate": _cmd_validate,
}


def _diagnostic(kind: str, exc: Exception, **extra) -> None:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc), **extra}), file=sys.stderr)


def run(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    try:
        with open(args.config, encoding="utf-8") as fh:
            spec = parse_config(fh.read())
    except OSError as exc:
        _diagnostic("usage", exc)
        return 2
    except ConfigError as exc:
        _diagnostic("schema-violation", exc, problems=[{"field": k, "reason": v} for k, v in exc.problems])
        return 2
    started = time.perf_counter()
    ok = True
    try:
        out = _COMMANDS[args.command](spec, args)
        if args.command == "validate":
            out, ok = out
    except (_Usage, spectral.InvalidArgument) as exc:
        _diagnostic("usage", exc)
        return 2
    except (spectral.SpectralError, NumericsError, WienerHopfError, oracles.OracleError, ArithmeticError,
            ValueError, RuntimeError) as exc:
        _diagnostic("computation", exc, command=args.command)
        return 1
    text = write_table(out, args.format)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            _diagnostic("io", exc)
            return 1
    else:
        sys.stdout.write(text)
    if args.command == "validate":
        print(f"elapsed {time.perf_counter() - started:.1f}s", file=sys.stderr)
    return 0 if ok else 1


def main() -> None:
    sys.exit(run())
