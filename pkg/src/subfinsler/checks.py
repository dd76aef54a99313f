"""Verification suites run by ``subfinsler verify``.

Every suite returns a list of entries ``{name, residual, threshold, pass}``;
the runner adds ``runtime_ms`` and groups entries by suite.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fundsol, kernel, pdecheck, special, wulff
from .config import RunConfig
from .minkowski import sample_directions, verify_duality_identities

__all__ = ["SUITES", "run_checks"]


def _entry(name, residual, threshold, op="le", note=None):
    residual = float(residual)
    if op == "le":
        ok = residual <= threshold
    else:
        ok = residual >= threshold
    out = {"name": name, "residual": residual, "threshold": float(threshold), "pass": bool(ok)}
    if op != "le":
        out["comparison"] = "ge"
    if note:
        out["note"] = note
    return out


def _sample_points(handle, count, seed, lo=0.5, hi=2.0):
    min_coord = 1e-3 if handle.primal.kind == "pnorm" else 0.0
    d = sample_directions(handle.dim, count, seed=seed, min_coordinate=min_coord)
    radii = np.random.default_rng(seed + 1).uniform(lo, hi, count)
    return d * radii[:, None]


def _dual_threshold(handle):
    if handle.mode == "closed_form":
        return 1e-8
    return 10 * handle.solver.tolerance


def suite_duality(rc: RunConfig):
    out = []
    for label, h in (("phi", rc.space.phi), ("psi", rc.space.psi)):
        pts = _sample_points(h, rc.samples["duality_points"], rc.seed)
        rep = verify_duality_identities(h.primal, h, pts)
        out.append(_entry(f"{label}.{h.primal.kind}", rep.max_residual(), _dual_threshold(h)))
    return out


def suite_wulff(rc: RunConfig):
    out = []
    for label, h in (("phi", rc.space.phi), ("psi", rc.space.psi)):
        n = h.dim
        om, _ = wulff.wulff_ball_volume(h, "coarea_quadrature")
        sg, _ = wulff.wulff_sphere_measure(h, "surface_quadrature")
        out.append(_entry(f"{label}.sigma_equals_n_omega", abs(sg / (n * om) - 1), 1e-4))
        if n == 2:
            mf = wulff.minkowski_formula_volume(h, nodes=1024)
            out.append(_entry(f"{label}.minkowski_formula", abs(mf / om - 1), 1e-4))
    return out


def suite_special(rc: RunConfig):
    rng = np.random.default_rng(rc.seed)
    n = rc.samples["special_trials"]
    worst = {"kummer": 0.0, "bateman": 0.0, "gegenbauer": 0.0, "duplication": 0.0, "fs6": 0.0}
    for _ in range(n):
        a, b, c = rng.uniform(0.1, 3.0, 3)
        x = rng.uniform(-5.0, 0.9)
        if x == 0:
            continue
        ref = abs(special.hyp2f1(a=a, b=b, c=c, z=x).value)
        worst["kummer"] = max(worst["kummer"], special.verify_kummer(a, b, c, x) / ref)

        al, be = rng.uniform(0.1, 3.0, 2)
        cc = rng.uniform(0.2, 2.0)
        gp = cc + rng.uniform(0.2, 2.0)
        aa = rng.uniform(-3.0, 0.8)
        ref = abs(special.beta(cc, gp - cc).value * special.hyp2f1(a=al, b=be, c=gp, z=aa).value)
        worst["bateman"] = max(worst["bateman"],
                               special.verify_bateman(al, be, cc, gp, aa) / ref)

        mu = rng.uniform(0.5, 3.0)
        nu = rng.uniform(0.0, 2.0)
        alpha = rng.uniform(0.5, 2.0)
        beta_ = rng.uniform(0.0, 2.0)
        cf = special.gegenbauer_laplace_bessel(mu, nu, alpha, beta_).value
        qd = special.gegenbauer_laplace_bessel_quad(mu, nu, alpha, beta_).value
        worst["gegenbauer"] = max(worst["gegenbauer"], abs(cf - qd) / abs(cf))

        worst["duplication"] = max(worst["duplication"],
                                   special.verify_duplication(rng.uniform(0.05, 20.0)))
        worst["fs6"] = max(worst["fs6"], special.verify_fs6(rng.uniform(0.1, 3.0),
                                                            rng.uniform(0.1, 3.0),
                                                            rng.uniform(0.0, 5.0)))
    thresholds = {"kummer": 1e-9, "bateman": 1e-7, "gegenbauer": 1e-7, "duplication": 1e-12,
                  "fs6": 1e-12}
    return [_entry(f"{key}.trials_{n}", worst[key], thresholds[key]) for key in sorted(worst)]


def suite_kernel_mass(rc: RunConfig):
    sp = rc.space
    if sp.m + sp.k > 4:
        return [_entry("mass", 0.0, 1e-5, note="skipped: m + k > 4")]
    return [_entry(f"mass.t_{t!r}", abs(kernel.kernel_mass(sp, t, rc.quadrature) - 1), 1e-5)
            for t in (0.1, 1.0, 10.0)]


def suite_kernel_scaling(rc: RunConfig):
    sp = rc.space
    rng = np.random.default_rng(rc.seed)
    worst = {0.5: 0.0, 1.7: 0.0, 3.0: 0.0}
    for _ in range(rc.samples["scaling_points"]):
        z = rng.normal(size=sp.m)
        s = rng.normal(size=sp.k)
        t = rng.uniform(0.2, 3.0)
        base = kernel.heat_kernel(sp, z, s, t, rc.quadrature).value
        for lam in worst:
            (zl, sl), tl = kernel.dilation((z, s), t, lam)
            v = kernel.heat_kernel(sp, zl, sl, tl, rc.quadrature).value
            worst[lam] = max(worst[lam], abs(lam ** sp.Q * v - base) / base)
    return [_entry(f"homogeneity.lambda_{lam!r}", worst[lam], 1e-7) for lam in sorted(worst)]


def suite_pde(rc: RunConfig):
    sp = rc.space
    out = []
    st = pdecheck.StencilSpec(1e-4, 1e-4, richardson=True)
    for label, h in (("phi", sp.phi), ("psi", sp.psi)):
        pts = _sample_points(h, rc.samples["pde_points"], rc.seed, 0.5, 1.5)
        ts = np.random.default_rng(rc.seed + 2).uniform(0.5, 2.0, len(pts))
        heat = max(float(pdecheck.finsler_heat_residual(h, x, t, st)) for x, t in zip(pts, ts))
        ly = max(float(pdecheck.li_yau_residual(h, x, t, st)) for x, t in zip(pts, ts))
        out.append(_entry(f"{label}.finsler_heat", heat, 1e-5))
        out.append(_entry(f"{label}.li_yau", ly, 1e-5))
    rng = np.random.default_rng(rc.seed)
    steps = [0.04, 0.02, 0.01]
    kf = pdecheck.kernel_field(sp, rc.quadrature)
    uf = pdecheck.fundamental_field(sp)
    ok_kernel = []
    ok_fund = []
    for _ in range(rc.samples["pde_points"]):
        z = rng.normal(size=sp.m)
        z *= rng.uniform(0.6, 1.4) / np.linalg.norm(z)
        s = rng.normal(size=sp.k)
        s *= rng.uniform(0.2, 0.8) / np.linalg.norm(s)
        X = np.concatenate([z, s])
        t = rng.uniform(0.5, 2.0)
        ok_kernel.append(pdecheck.convergence_order(
            lambda hh: pdecheck.mixed_operator_residual(sp, kf, X, t,
                                                        pdecheck.StencilSpec(hh, hh)), steps)[0])
        ok_fund.append(pdecheck.convergence_order(
            lambda hh: pdecheck.mixed_operator_residual(sp, uf, X, None,
                                                        pdecheck.StencilSpec(hh, hh)), steps)[0])
    out.append(_entry("mixed_operator.kernel_order", min(ok_kernel), 1.5, op="ge"))
    out.append(_entry("mixed_operator.fundamental_order", min(ok_fund), 1.5, op="ge"))
    order, _ = pdecheck.convergence_order(
        lambda hh: pdecheck.profile_pde_residual(sp, 1.0, 0.5, 1.0, pdecheck.StencilSpec(hh, hh),
                                                 rc.quadrature), steps)
    out.append(_entry("profile.order", order, 1.5, op="ge"))
    return out


def _subordination_points(sp, count, seed):
    rng = np.random.default_rng(seed)
    pts = []
    for i in range(count):
        z = rng.normal(size=sp.m)
        s = rng.normal(size=sp.k)
        kind = i % 3
        if kind == 0:
            s = np.zeros(sp.k)
        elif kind == 1:
            z = z * 0.05 / float(sp.phi.dual_value(z))
        pts.append((z, s))
    return pts


def suite_subordination(rc: RunConfig):
    sp = rc.space
    if sp.alpha != 1 or sp.p != 2:
        return [_entry("subordination", 0.0, 1e-4, note="skipped: needs alpha = 1, p = 2")]
    worst = 0.0
    for z, s in _subordination_points(sp, rc.samples["subordination_points"], rc.seed):
        worst = max(worst, fundsol.subordination_check(sp, z, s, rc.quadrature)[2])
    return [_entry("relative_residual", worst, 1e-4)]


def suite_constants(rc: RunConfig):
    sp = rc.space
    route_gamma = fundsol.c12_closed_form(sp)
    sigma12 = fundsol.sigma_alpha_p_closed(fundsol._with(sp, 1.0, 2.0)) * rc.sigma_scale
    route_sigma = fundsol.c12_from_sigma(sp, sigma12)
    closed = fundsol.sigma_alpha_p_closed(sp) * rc.sigma_scale
    numeric = fundsol.sigma_alpha_p_numeric(sp)
    return [
        _entry("c12_two_routes", abs(route_gamma - route_sigma) / route_gamma, 1e-12),
        _entry("sigma_alpha_p_closed_vs_quadrature", abs(closed - numeric) / numeric, 1e-5),
    ]


def suite_gegenbauer(rc: RunConfig):
    sp = rc.space
    if sp.k < 2:
        return [_entry("pipeline", 0.0, 1e-6, note="skipped: the change of variables needs k >= 2")]
    z = np.zeros(sp.m)
    z[0] = 1.0
    out = []
    for sv in (0.0, 0.1, 0.5):
        s = np.zeros(sp.k)
        s[0] = sv
        res = fundsol.gegenbauer_pipeline_check(sp, z, s, rc.quadrature)
        worst = max(res[key] for key in res if "_vs_" in key)
        out.append(_entry(f"stages.psi0_{sv!r}", worst, 1e-6))
    return out


SUITES = {
    "constants_identity": suite_constants,
    "duality": suite_duality,
    "gegenbauer_pipeline": suite_gegenbauer,
    "kernel_mass": suite_kernel_mass,
    "kernel_scaling": suite_kernel_scaling,
    "pde_residuals": suite_pde,
    "special_identities": suite_special,
    "subordination": suite_subordination,
    "wulff": suite_wulff,
}


def _run_one(name, rc: RunConfig, timing: bool):
    t0 = time.perf_counter()
    try:
        entries = SUITES[name](rc)
    except Exception as exc:  # a failing suite must not abort the run
        entries = [{"name": "error", "residual": math.inf, "threshold": 0.0, "pass": False,
                    "note": f"{type(exc).__name__}: {exc}"}]
    elapsed = (time.perf_counter() - t0) * 1000.0
    for e in entries:
        e["runtime_ms"] = round(elapsed / len(entries), 3) if timing else None
    return name, entries


def run_checks(rc: RunConfig, jobs: int = 1, timing: bool = False) -> dict:
    """Run the configured suites; the report is ordered by suite name."""
    names = sorted(rc.checks)
    if jobs > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(lambda n: _run_one(n, rc, timing), names))
    else:
        results = dict(_run_one(n, rc, timing) for n in names)
    suites = {}
    for name in names:
        entries = [{key: e[key] for key in
                    ("name", "residual", "threshold", "pass", "runtime_ms", "comparison", "note")
                    if key in e} for e in results[name]]
        suites[name] = {"pass": all(e["pass"] for e in entries), "checks": entries}
    return {"suites": suites, "pass": all(s["pass"] for s in suites.values())}
