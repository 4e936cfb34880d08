import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

import wslab
from wslab.cli import main
from wslab.config import ConfigError, load_config, parse_config
from wslab.experiments import summary_to_canonical_json
from wslab.measures import DiscreteMeasure
from wslab.norms import CostSpec, cost_to_json, euclidean, norm_to_json, one_norm
from wslab.service import create_app
from wslab.transport import instance_to_json


BASE = """
schema_version = 1
kind = "duality_gap"
seed = 11

[cost]
kind = "euclidean"
dim = 2
p = 2.0
"""

TINY_RUN = """
schema_version = 1
kind = "modulus_probe"
seed = 5

[cost]
kind = "euclidean"
dim = 2
p = 2.0

[params]
trials = 20
meta_atoms = 3
atoms_per_measure = 3
"""


# -------------------------------------------------------------------- parsing


def test_parse_minimal_config_fills_defaults():
    cfg = parse_config(BASE)
    assert cfg.kind == "duality_gap" and cfg.seed == 11
    assert cfg.schema_version == 1
    assert cfg.cost.p == 2.0 and cfg.cost.norm.kind == "euclidean"
    assert cfg.params["instances"] == 100
    assert cfg.params["max_atoms"] == 50
    assert cfg.params["p_values"] == [2.0, 2.5, 3.0]


def test_parse_norm_kinds():
    def with_cost(block):
        return f'schema_version = 1\nkind = "duality_gap"\nseed = 1\n{block}'

    cfg = parse_config(with_cost('[cost]\nkind = "one_norm"\ndim = 3\np = 2.5'))
    assert cfg.cost.norm.kind == "one_norm" and cfg.cost.norm.dim == 3

    cfg = parse_config(with_cost('[cost]\nkind = "p_norm"\ndim = 2\nexponent = 3.0\np = 2.0'))
    assert cfg.cost.norm.exponent == 3.0

    cfg = parse_config(with_cost('[cost]\nkind = "p_norm"\ndim = 2\nexponent = "inf"\np = 2.0'))
    assert cfg.cost.norm.exponent == math.inf

    cfg = parse_config(
        with_cost('[cost]\nkind = "weighted_p"\ndim = 2\nexponent = 2.0\nweights = [1.0, 2.0]\np = 2.0')
    )
    assert cfg.cost.norm.weights == (1.0, 2.0)

    cfg = parse_config(
        with_cost(
            '[cost]\nkind = "smoothed"\ndim = 2\nk = 10\np = 2.0\n'
            '[cost.base]\nkind = "one_norm"\ndim = 2'
        )
    )
    assert cfg.cost.norm.kind == "smoothed"
    assert cfg.cost.norm.base.kind == "one_norm"
    assert cfg.cost.norm.k == 10


@pytest.mark.parametrize(
    "mutation",
    [
        lambda t: t.replace("schema_version = 1", "schema_version = 2"),
        lambda t: t.replace("schema_version = 1\n", ""),
        lambda t: t.replace('kind = "duality_gap"', 'kind = "nonsense"'),
        lambda t: t.replace("seed = 11", "seed = true"),
        lambda t: t.replace("seed = 11", 'seed = "11"'),
        lambda t: t.replace("seed = 11\n", ""),
        lambda t: t.replace("[cost]\n", "[wrong]\n"),
        lambda t: t.replace("p = 2.0\n", ""),
        lambda t: t.replace('kind = "euclidean"', 'kind = "euclid"'),
        lambda t: t + '\n[params]\nbogus_key = 3\n',
        lambda t: t + '\n[params]\ngap_tol = -1e-8\n',
        lambda t: t + '\n[params]\ninstances = 0\n',
        lambda t: t + '\n[params]\ninstances = 2.5\n',
        lambda t: "stray_top_level = 1\n" + t,
        lambda t: t.replace("[cost]", "[cost"),  # TOML syntax error
    ],
)
def test_parse_config_rejects(mutation):
    with pytest.raises(ConfigError):
        parse_config(mutation(BASE))


def test_parse_rejects_bad_norm_tables():
    head = 'schema_version = 1\nkind = "duality_gap"\nseed = 1\n'
    with pytest.raises(ConfigError):
        parse_config(head + '[cost]\nkind = "p_norm"\ndim = 2\np = 2.0')  # no exponent
    with pytest.raises(ConfigError):
        parse_config(
            head + '[cost]\nkind = "weighted_p"\ndim = 3\nexponent = 2.0\nweights = [1.0]\np = 2.0'
        )
    with pytest.raises(ConfigError):
        parse_config(head + '[cost]\nkind = "smoothed"\ndim = 2\nk = 10\np = 2.0')  # no base
    with pytest.raises(ConfigError):
        parse_config(head + '[cost]\nkind = "euclidean"\ndim = 2\np = 0.5')  # p < 1


def test_parse_boas_and_modulus_guards():
    head = 'schema_version = 1\nkind = "boas_suite"\nseed = 1\n[cost]\nkind = "euclidean"\ndim = 2\np = 2.0\n'
    with pytest.raises(ConfigError):
        parse_config(head + "[params]\npresets = [[2.0, 2.0, 2.0, 3.0]]\n")  # q > r
    with pytest.raises(ConfigError):
        parse_config(head + "[params]\npresets = [[2.0, 2.0]]\n")
    with pytest.raises(ConfigError):
        parse_config(head + "[params]\npresets = [[1.0, 2.0, 2.0, 2.0]]\n")
    head_m = head.replace("boas_suite", "modulus_probe")
    with pytest.raises(ConfigError):
        parse_config(head_m + '[params]\npreset = "unknown"\n')
    head_x = head.replace("boas_suite", "maxpot_convergence")
    with pytest.raises(ConfigError):
        parse_config(head_x + "[params]\neps = 1.5\n")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")
    path = tmp_path / "ok.toml"
    path.write_text(BASE, encoding="utf-8")
    assert load_config(path).kind == "duality_gap"


def test_canonical_json_shape():
    text = summary_to_canonical_json({"b": 1, "a": [1.5, 2]})
    assert text == '{"a":[1.5,2],"b":1}\n'
    with pytest.raises(ValueError):
        summary_to_canonical_json({"x": float("nan")})


# ------------------------------------------------------------------------ CLI


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_cli_validate_ok(tmp_path):
    runner = CliRunner()
    cfg = _write(tmp_path, "c.toml", BASE)
    res = runner.invoke(main, ["validate", cfg])
    assert res.exit_code == 0, res.output
    assert "ok: kind=duality_gap seed=11" in res.output


def test_cli_validate_bad_config_exits_2(tmp_path):
    runner = CliRunner()
    cfg = _write(tmp_path, "c.toml", BASE.replace("schema_version = 1", "schema_version = 9"))
    res = runner.invoke(main, ["validate", cfg])
    assert res.exit_code == 2
    assert "schema_version" in res.output


def test_cli_missing_file_is_usage_error():
    runner = CliRunner()
    res = runner.invoke(main, ["run", "/nonexistent/x.toml"])
    assert res.exit_code == 2


def test_cli_run_writes_canonical_outputs(tmp_path):
    runner = CliRunner()
    cfg = _write(tmp_path, "c.toml", TINY_RUN)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    r1 = runner.invoke(main, ["run", cfg, "--out", str(out1)])
    assert r1.exit_code == 0, r1.output
    r2 = runner.invoke(main, ["run", cfg, "--out", str(out2)])
    assert r2.exit_code == 0

    s1 = (out1 / "summary.json").read_bytes()
    s2 = (out2 / "summary.json").read_bytes()
    assert s1 == s2  # byte-identical reruns
    summary = json.loads(s1)
    assert summary["kind"] == "modulus_probe" and summary["violations"] == 0
    assert s1.endswith(b"\n")
    assert b", " not in s1  # canonical separators
    assert (out1 / "details.csv").exists()


def test_cli_run_jobs_do_not_change_results(tmp_path):
    runner = CliRunner()
    text = TINY_RUN.replace('kind = "modulus_probe"', 'kind = "duality_gap"').replace(
        "[params]\ntrials = 20\nmeta_atoms = 3\natoms_per_measure = 3",
        "[params]\ninstances = 4\nmax_atoms = 6",
    )
    cfg = _write(tmp_path, "c.toml", text)
    outs = []
    for jobs, out in (("1", "j1"), ("3", "j3")):
        res = runner.invoke(main, ["run", cfg, "--out", str(tmp_path / out), "--jobs", jobs])
        assert res.exit_code == 0, res.output
        outs.append((tmp_path / out / "summary.json").read_bytes())
    assert outs[0] == outs[1]


def test_cli_run_reports_violations_with_exit_1(tmp_path):
    # an impossible bracket width forces slope_check violations
    text = """
schema_version = 1
kind = "slope_check"
seed = 3

[cost]
kind = "euclidean"
dim = 2
p = 2.0

[params]
functions = 1
atoms = 4
pairs_per_radius = 3
bracket_width = 1e-12
"""
    runner = CliRunner()
    cfg = _write(tmp_path, "c.toml", text)
    out = tmp_path / "out"
    res = runner.invoke(main, ["run", cfg, "--out", str(out)])
    assert res.exit_code == 1, res.output
    summary = json.loads((out / "summary.json").read_text())
    assert summary["violations"] > 0


def test_cli_respects_log_env(tmp_path):
    runner = CliRunner()
    cfg = _write(tmp_path, "c.toml", BASE)
    res = runner.invoke(main, ["validate", cfg], env={"WSLAB_LOG": "debug"})
    assert res.exit_code == 0


# -------------------------------------------------------------------- service


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_service_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["version"] == wslab.__version__


def test_service_norm_eval(client):
    payload = {"norm": norm_to_json(one_norm(2)), "points": [[3.0, 4.0], [1.0, 0.0]]}
    body = client.post("/norms/eval", json=payload).json()
    assert body["values"] == [7.0, 1.0]
    payload["dual"] = True
    body = client.post("/norms/eval", json=payload).json()
    assert body["values"] == [4.0, 1.0]


def test_service_duality_map(client):
    payload = {
        "cost": cost_to_json(CostSpec(norm=euclidean(2), p=2.0)),
        "covectors": [[3.0, 4.0]],
    }
    resp = client.post("/norms/duality_map", json=payload)
    assert resp.status_code == 200
    assert np.allclose(resp.json()["vectors"], [[3.0, 4.0]])


def test_service_transport_solve(client):
    mu = DiscreteMeasure.dirac([0.0, 0.0])
    nu = DiscreteMeasure.dirac([2.0, 0.0])
    inst = instance_to_json(mu, nu, CostSpec(norm=euclidean(2), p=2.0))
    body = client.post("/transport/solve", json={"instance": inst}).json()
    assert body["wp"] == pytest.approx(2.0)
    assert body["plan"] == [[1.0]]
    assert body["phi"] is not None and body["psi"] is not None
    body = client.post(
        "/transport/solve", json={"instance": inst, "potentials": False}
    ).json()
    assert body["phi"] is None

    bad = instance_to_json(mu, DiscreteMeasure.dirac([1.0]), CostSpec(norm=euclidean(2), p=2.0))
    assert client.post("/transport/solve", json={"instance": bad}).status_code == 400


def test_service_validate_and_run(client):
    ok = client.post("/experiments/validate", json={"config_toml": BASE}).json()
    assert ok == {"valid": True, "kind": "duality_gap", "seed": 11}
    resp = client.post(
        "/experiments/validate", json={"config_toml": "schema_version = 7"}
    )
    assert resp.status_code == 400
    assert "schema_version" in resp.json()["detail"]

    run = client.post("/experiments/run", json={"config_toml": TINY_RUN, "jobs": 1}).json()
    assert run["violations"] == 0
    assert run["summary"]["kind"] == "modulus_probe"
    assert "details.csv" in run["files"]
