"""Command-line runner: outputs, manifests, config errors, determinism."""

import json

import numpy as np
import pytest
import yaml

from ttsdiffusion.cli import main
from ttsdiffusion.io import read_csv

BASE = dict(schema=1, system=dict(eps=0.04, a=0.5, beta=[1.0, 0.6180339887498949]),
            perturbation="cosine-sum")


def write_cfg(tmp_path, extra=None, name="cfg.yaml", base=BASE):
    cfg = json.loads(json.dumps(base))
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def run(tmp_path, sub, extra=None, out="out", *args):
    cfg = write_cfg(tmp_path, extra)
    out = tmp_path / out
    code = main([sub, "--config", str(cfg), "--out", str(out), *args])
    return code, out


def check_hashes(out):
    man = json.loads((out / "manifest.json").read_text())
    h = man["config_hash"]
    assert len(h) == 64
    for name in man["files"]:
        path = out / name
        if name.endswith(".json"):
            assert json.loads(path.read_text())["config_hash"] == h
        else:
            assert path.read_text().splitlines()[0] == f"# config_hash={h}"
    return man


def test_simulate(tmp_path):
    code, out = run(tmp_path, "simulate", dict(simulate=dict(t_span=[0.0, 5.0], n_samples=51)))
    assert code == 0
    man = check_hashes(out)
    assert man["status"] == 0 and sorted(man["files"]) == ["trajectory.csv", "trajectory.json"]
    header, body = read_csv(out / "trajectory.csv")
    assert header == ["t", "phi_1", "phi_2", "phi_3", "I_1", "I_2", "I_3", "q", "p", "energy"]
    assert body.shape == (51, 10)
    assert np.ptp(body[:, -1]) <= 1e-9


def test_homoclinic(tmp_path):
    code, out = run(tmp_path, "homoclinic", dict(homoclinic=dict(variant="pi")))
    assert code == 0
    check_hashes(out)


def test_melnikov(tmp_path):
    code, out = run(tmp_path, "melnikov")
    assert code == 0
    check_hashes(out)
    res = json.loads((out / "melnikov.json").read_text())
    assert res["max_abs_diff"] <= 1e-10
    header, _ = read_csv(out / "melnikov.csv")
    assert header == ["omega", "A", "closed_form", "quadrature", "abs_diff", "transform"]


def test_ergodize(tmp_path, capsys):
    code, out = run(tmp_path, "ergodize", dict(ergodize=dict(k=3, probe_m=5)))
    assert code == 0
    check_hashes(out)
    res = json.loads((out / "ergodize.json").read_text())
    assert res["schedule_check"]["offsets_ok"] and res["schedule_check"]["spacing_ok"]
    header, body = read_csv(out / "epochs.csv")
    assert header == ["eta", "c_2", "c_3"] and body.shape == (3, 3)
    assert "etas" in capsys.readouterr().out


def test_condition_passes_at_small_eps(tmp_path):
    code, out = run(tmp_path, "condition",
                    dict(system=dict(eps=0.02), condition=dict(profile=True)))
    assert code == 0
    check_hashes(out)
    res = json.loads((out / "condition.json").read_text())
    assert res["passed"] is True
    header, body = read_csv(out / "condition_profile.csv")
    assert header == ["a2", "J", "argmax_a1"] and body.shape == (81, 3)


def test_condition_reports_failure_at_reference_eps(tmp_path):
    code, out = run(tmp_path, "condition", dict(condition=dict(profile=False)))
    assert code == 0
    res = json.loads((out / "condition.json").read_text())
    assert res["passed"] is False
    assert res["failure"]
    assert res["margins"]["i"] < 0 and res["margins"]["ii_b"] < 0
    assert res["params"]["delta2"] > res["params"]["delta3"]


def test_chain(tmp_path):
    code, out = run(tmp_path, "chain", dict(system=dict(eps=0.02), chain=dict(k_target=3)))
    assert code == 0
    check_hashes(out)
    res = json.loads((out / "chain.json").read_text())
    assert res["critical_point"]["interior"]
    assert res["run"]["T_d"] <= res["run"]["bound_Td"]
    assert (out / "trajectory.csv").exists()


def test_chain_failure_writes_error(tmp_path):
    # the condition fails at eps = 0.04, so the chain refuses
    code, out = run(tmp_path, "chain", dict(chain=dict(k_target=3)))
    assert code == 1
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "ConditionNotVerified"
    assert json.loads((out / "manifest.json").read_text())["status"] == 1


def test_sweep_two_points(tmp_path):
    code, out = run(tmp_path, "sweep", dict(sweep=dict(eps=[0.025, 0.02], k_first=3)))
    assert code == 0
    check_hashes(out)
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[1] == "eps,mu,a,k,T_d,bound_Td,slope_so_far,status"
    assert [ln.split(",")[-1] for ln in lines[2:]] == ["ok", "ok"]


def test_missing_field(tmp_path, capsys):
    base = dict(schema=1, system=dict(a=0.5, beta=[1.0, 0.6]))
    cfg = write_cfg(tmp_path, base=base)
    code = main(["melnikov", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "system.eps" in capsys.readouterr().err
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["field"] == "system.eps"


@pytest.mark.parametrize("extra,field", [(dict(system=dict(epsilon=0.1)), "system.epsilon"),
                                         (dict(bogus=1), "bogus"),
                                         (dict(schema=7), "schema")])
def test_bad_config(tmp_path, capsys, extra, field):
    code, _ = run(tmp_path, "melnikov", extra)
    assert code == 2
    assert field in capsys.readouterr().err


@pytest.mark.parametrize("sub,extra", [("melnikov", None),
                                       ("ergodize", dict(ergodize=dict(k=2, probe_m=5))),
                                       ("splitting", dict(splitting=dict(A2=[0.0], M=8)))])
def test_bit_identical(tmp_path, sub, extra):
    c1, o1 = run(tmp_path, sub, extra, "a")
    c2, o2 = run(tmp_path, sub, extra, "b")
    assert c1 == c2 == 0
    m1 = json.loads((o1 / "manifest.json").read_text())
    m2 = json.loads((o2 / "manifest.json").read_text())
    assert m1["files"] == m2["files"] and m1["config_hash"] == m2["config_hash"]
    for name in m1["files"]:
        assert (o1 / name).read_bytes() == (o2 / name).read_bytes()


def test_seed_changes_hash(tmp_path):
    _, o1 = run(tmp_path, "melnikov", None, "a", "--seed", "0")
    _, o2 = run(tmp_path, "melnikov", None, "b", "--seed", "1")
    h1 = json.loads((o1 / "manifest.json").read_text())["config_hash"]
    h2 = json.loads((o2 / "manifest.json").read_text())["config_hash"]
    assert h1 != h2
