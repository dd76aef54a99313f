"""``subfinsler`` command line: kernel grids, constants and the verification suite.

Exit codes: 0 success, 1 evaluation or check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import fundsol
from .checks import run_checks
from .config import DEFAULTS, ConfigError, RunConfig, load_config
from .kernel import heat_kernel, profile_grid

__all__ = ["main", "build_parser", "dumps"]


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: insertion key order, shortest round-trip floats."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def _axis(spec, name):
    if isinstance(spec, dict):
        try:
            return list(np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"grid axis {name!r} needs start, stop, num: {exc}") from exc
    if isinstance(spec, (list, tuple)):
        try:
            return [float(v) for v in spec]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid axis {name!r} must be numeric") from exc
    raise ConfigError(f"grid axis {name!r} must be a list or {{start, stop, num}}")


def _write(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_kernel_grid(rc: RunConfig, out: str | None) -> int:
    sp = rc.space
    if sp.alpha != 1 or sp.p != 2:
        raise ConfigError("kernel-grid needs alpha = 1 and p = 2")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    failed = False
    points = rc.raw.get("points")
    if points is not None:
        if not isinstance(points, list):
            raise ConfigError("points must be a list of {z, sigma, t}")
        w.writerow([f"z{i}" for i in range(sp.m)] + [f"sigma{i}" for i in range(sp.k)]
                   + ["t", "value", "error_estimate", "status"])
        for pt in points:
            try:
                z = np.asarray(pt["z"], dtype=float).reshape(sp.m)
                s = np.asarray(pt["sigma"], dtype=float).reshape(sp.k)
                t = float(pt["t"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid point {pt!r}: {exc}") from exc
            coords = [_fmt(v) for v in z] + [_fmt(v) for v in s] + [_fmt(t)]
            try:
                if not t > 0:
                    raise ValueError("t must be positive")
                ev = heat_kernel(sp, z, s, t, rc.quadrature)
                w.writerow(coords + [_fmt(ev.value), _fmt(ev.abs_error_estimate), "ok"])
            except (ValueError, ArithmeticError) as exc:
                failed = True
                w.writerow(coords + ["", "", f"error: {exc}"])
    else:
        g = rc.raw["grid"]
        if not isinstance(g, dict):
            raise ConfigError("grid must be an object with axes r, s, t")
        r_ax, s_ax, t_ax = (_axis(g.get(a, []), a) for a in ("r", "s", "t"))
        w.writerow(["r", "s", "t", "value", "error_estimate", "status"])
        ratio = sp.measure_ratio
        for t in t_ax:
            for r in r_ax:
                for s in s_ax:
                    coords = [_fmt(r), _fmt(s), _fmt(t)]
                    try:
                        if not t > 0 or r < 0 or s < 0:
                            raise ValueError("need r, s >= 0 and t > 0")
                        v, e, _, _ = profile_grid(sp.m, sp.k, [r], [s], t, rc.quadrature)
                        w.writerow(coords + [_fmt(ratio * v[0, 0]), _fmt(ratio * e[0, 0]), "ok"])
                    except (ValueError, ArithmeticError) as exc:
                        failed = True
                        w.writerow(coords + ["", "", f"error: {exc}"])
    _write(buf.getvalue(), out)
    return 1 if failed else 0


def constants_report(rc: RunConfig) -> dict:
    sp = rc.space
    sigma_ap = fundsol.sigma_alpha_p_closed(sp) * rc.sigma_scale
    const = fundsol.c_alpha_p(sigma_ap, sp)
    q = sp.Q
    return {
        "m": sp.m, "k": sp.k, "alpha": sp.alpha, "p": sp.p,
        "Q": int(q) if float(q).is_integer() else q,
        "sigma_phi": sp.sigma_phi, "sigma_psi": sp.sigma_psi,
        "sigma_alpha_p": sigma_ap, "c_alpha_p": const.c_ap,
        "c12_gamma_route": fundsol.c12_closed_form(sp),
        "branch": const.branch,
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subfinsler",
                                 description="Sub-Finsler heat kernels and verification suite.")
    ap.add_argument("--print-defaults", action="store_true",
                    help="print the embedded default configuration and exit")
    sub = ap.add_subparsers(dest="command")
    g = sub.add_parser("kernel-grid", help="evaluate the heat kernel on a grid or point list")
    g.add_argument("--config")
    g.add_argument("--out")
    c = sub.add_parser("constants", help="print sigma_{alpha,p}, C_{alpha,p} and C_{1,2}")
    c.add_argument("--config")
    c.add_argument("--out")
    v = sub.add_parser("verify", help="run verification suites and write a JSON report")
    v.add_argument("--config")
    v.add_argument("--checks", help="'all', a comma-separated list, or '' for none")
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--out")
    v.add_argument("--timing", action="store_true",
                   help="record runtime_ms (otherwise null, keeping reports byte-identical)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.print_defaults:
        sys.stdout.write(dumps(DEFAULTS))
        return 0
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        rc = load_config(args.config)
        out = args.out or rc.raw["output"].get("path")
        if args.command == "kernel-grid":
            return cmd_kernel_grid(rc, out)
        if args.command == "constants":
            _write(dumps(constants_report(rc)), out)
            return 0
        if args.checks is not None:
            doc = dict(rc.raw, checks=args.checks)
            rc = RunConfig.from_dict(doc)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        report = run_checks(rc, jobs=args.jobs, timing=args.timing)
        _write(dumps(report), out)
        return 0 if report["pass"] else 1
    except ConfigError as exc:
        print(f"subfinsler: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
