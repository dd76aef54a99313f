import csv
import io
import json
import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from subfinsler import cli
from subfinsler.config import DEFAULTS, ConfigError, RunConfig, merge, parse_norm
from subfinsler.estimators import FundamentalSolutionEstimator, HeatKernelEstimator


def run(tmp_path, capsys, args, config=None):
    argv = list(args)
    if config is not None:
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_m2k1(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, ["constants"], {"space": {"m": 2, "k": 1}})
    assert code == 0
    doc = json.loads(out)
    assert list(doc)[:4] == ["m", "k", "alpha", "p"]
    assert doc["Q"] == 4
    assert doc["sigma_alpha_p"] == pytest.approx(math.pi, rel=1e-14)
    assert doc["c_alpha_p"] == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert doc["branch"] == "p_ne_Q"


def test_constants_q_and_branch(tmp_path, capsys):
    _, out, _ = run(tmp_path, capsys, ["constants"], {"space": {"m": 1, "k": 1}})
    assert json.loads(out)["Q"] == 3
    _, out, _ = run(tmp_path, capsys, ["constants"], {"space": {"m": 1, "k": 1, "p": 3.0}})
    assert json.loads(out)["branch"] == "p_eq_Q"


def test_kernel_grid_single_row(tmp_path, capsys):
    cfg = {"space": {"m": 1, "k": 1}, "grid": {"r": [0.01], "s": [0.01], "t": [1.0]}}
    code, out, _ = run(tmp_path, capsys, ["kernel-grid"], cfg)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1
    assert float(rows[0]["value"]) > 0 and rows[0]["status"] == "ok"


def test_kernel_grid_empty(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, ["kernel-grid"], {"grid": {"r": [], "s": [], "t": []}})
    assert code == 0
    assert out == "r,s,t,value,error_estimate,status\n"


def test_kernel_grid_error_rows(tmp_path, capsys):
    cfg = {"grid": {"r": [1.0], "s": [0.0], "t": [1.0, -1.0]}}
    code, out, _ = run(tmp_path, capsys, ["kernel-grid"], cfg)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 1
    assert [r["status"] == "ok" for r in rows] == [True, False]


def test_kernel_grid_points_to_file(tmp_path, capsys):
    out_path = tmp_path / "g.csv"
    cfg = {"space": {"m": 2, "k": 1}, "points": [{"z": [1.0, 0.0], "sigma": [0.5], "t": 1.0}]}
    code, _, _ = run(tmp_path, capsys, ["kernel-grid", "--out", str(out_path)], cfg)
    rows = list(csv.DictReader(out_path.open()))
    assert code == 0
    assert list(rows[0])[:4] == ["z0", "z1", "sigma0", "t"]


def test_kernel_grid_deterministic(tmp_path, capsys):
    cfg = {"grid": {"r": {"start": 0.1, "stop": 1.0, "num": 3}, "s": [0.2], "t": [0.5]}}
    a = run(tmp_path, capsys, ["kernel-grid"], cfg)[1]
    b = run(tmp_path, capsys, ["kernel-grid"], cfg)[1]
    assert a == b


def test_invalid_norm_exit_2(tmp_path, capsys):
    code, _, err = run(tmp_path, capsys, ["constants"],
                       {"space": {"phi": {"kind": "hexagon"}}})
    assert code == 2 and "hexagon" in err


@pytest.mark.parametrize("cfg", [
    {"bogus": 1},
    {"space": {"m": 0}},
    {"space": {"m": 1.5}},
    {"checks": ["nope"]},
    {"space": {"phi": {"kind": "quadratic", "matrix": [[1, 0], [0, -1]]}}},
])
def test_config_errors(tmp_path, capsys, cfg):
    assert run(tmp_path, capsys, ["constants"], cfg)[0] == 2


def test_unreadable_config(tmp_path, capsys):
    assert cli.main(["constants", "--config", str(tmp_path / "missing.json")]) == 2


def test_usage_errors(capsys):
    assert cli.main([]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_print_defaults(capsys):
    assert cli.main(["--print-defaults"]) == 0
    assert json.loads(capsys.readouterr().out) == json.loads(json.dumps(DEFAULTS))


def test_verify_empty(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, ["verify", "--checks", ""])
    assert code == 0
    assert json.loads(out) == {"suites": {}, "pass": True}


def test_verify_fault_injection(tmp_path, capsys):
    cfg = {"fault_injection": {"sigma_alpha_p_scale": 1.01}}
    code, out, _ = run(tmp_path, capsys, ["verify", "--checks", "constants_identity"], cfg)
    doc = json.loads(out)
    assert code == 1
    assert doc["suites"]["constants_identity"]["pass"] is False


def test_verify_report_schema_and_determinism(tmp_path, capsys):
    args = ["verify", "--checks", "wulff,duality,constants_identity", "--jobs", "3"]
    code, a, _ = run(tmp_path, capsys, args)
    _, b, _ = run(tmp_path, capsys, args[:-2])
    assert code == 0 and a == b
    doc = json.loads(a)
    assert list(doc["suites"]) == ["constants_identity", "duality", "wulff"]
    for suite in doc["suites"].values():
        for e in suite["checks"]:
            assert {"name", "residual", "threshold", "pass", "runtime_ms"} <= set(e)
            assert e["runtime_ms"] is None


def test_verify_timing(tmp_path, capsys):
    _, out, _ = run(tmp_path, capsys, ["verify", "--checks", "duality", "--timing"])
    e = json.loads(out)["suites"]["duality"]["checks"][0]
    assert e["runtime_ms"] >= 0


def test_verify_gegenbauer_skipped_for_k1(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, ["verify", "--checks", "gegenbauer_pipeline"],
                       {"space": {"m": 2, "k": 1}})
    e = json.loads(out)["suites"]["gegenbauer_pipeline"]["checks"][0]
    assert code == 0 and "skipped" in e["note"]


def test_float_format_round_trips():
    x = 0.1 + 0.2
    assert json.loads(cli.dumps({"x": x}))["x"] == x
    assert cli.dumps({"x": math.inf}) == '{\n  "x": null\n}\n'


def test_merge_and_checks_parsing():
    assert merge({"a": {"b": 1, "c": 2}}, {"a": {"b": 3}}) == {"a": {"b": 3, "c": 2}}
    rc = RunConfig.from_dict({"checks": "wulff,duality"})
    assert rc.checks == ["duality", "wulff"]
    with pytest.raises(ConfigError):
        parse_norm({"kind": "pnorm"}, 2)
    with pytest.raises(ConfigError):
        parse_norm({"kind": "euclidean", "colour": 1}, 2)


def test_heat_kernel_estimator():
    est = HeatKernelEstimator(m=2, k=1, phi={"kind": "quadratic", "matrix": [[4, 0], [0, 1]]})
    with pytest.raises(NotFittedError):
        est.predict([[1.0, 0.0, 0.5, 1.0]])
    est = clone(est).fit()
    X = np.array([[1.0, 0.0, 0.5, 1.0], [0.2, 0.3, -0.1, 0.5]])
    y = est.predict(X)
    assert y.shape == (2,) and np.all(y > 0)
    assert np.all(est.errors_ < 1e-8 * y)
    with pytest.raises(ValueError):
        est.predict([[1.0, 0.0, 1.0]])


def test_fundamental_solution_estimator():
    est = FundamentalSolutionEstimator(m=2, k=1).fit()
    X = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.allclose(est.transform(X)[:, 0], [1.0, 2.0], rtol=1e-15)
    assert np.allclose(est.predict(X), [1 / (2 * math.pi), 1 / (8 * math.pi)], rtol=1e-14)
    assert est.get_params()["p"] == 2.0


@pytest.mark.slow
def test_verify_all_default(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, ["verify", "--checks", "all", "--jobs", "4"])
    doc = json.loads(out)
    assert code == 0 and doc["pass"] is True
    assert len(doc["suites"]) == 9
