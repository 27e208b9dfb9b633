import contextlib
import io as pyio
import json
import os

import numpy as np
import pytest

from kacgm.cli import run_cli

SMALL_CFG = {
    "grid": {"hidden": [0], "grid_size": [5], "learning_rates": [0.3],
             "l1": [0.001], "multiplicative": [False], "epochs": 60,
             "batch_size": 0},
    "forest": {"n_trees": 30, "max_depth": 5},
    "permutations": 49,
}


def run(*argv):
    out, err = pyio.StringIO(), pyio.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = run_cli(list(argv))
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Generated data plus trained models shared by the command tests."""
    ws = tmp_path_factory.mktemp("cli")
    p = lambda *parts: str(ws.joinpath(*parts))
    with open(p("cfg.json"), "w") as fh:
        json.dump(SMALL_CFG, fh)

    code, out, _ = run("generate", "--dataset", "chain3_linear", "--n", "250",
                       "--seed", "5", "--out", p("data.csv"),
                       "--graph-out", p("graph.json"))
    assert code == 0 and "250 rows" in out
    code, _, err = run("train", "--graph", p("graph.json"), "--data",
                       p("data.csv"), "--out", p("model.json"), "--seed", "1",
                       "--config", p("cfg.json"))
    assert code == 0, err

    code, _, _ = run("generate", "--dataset", "chain4_linear", "--n", "250",
                     "--seed", "7", "--mixed", "--out", p("mixed.csv"),
                     "--graph-out", p("mixed-graph.json"))
    assert code == 0
    code, _, err = run("train", "--graph", p("mixed-graph.json"), "--data",
                       p("mixed.csv"), "--out", p("mixed-model.json"),
                       "--seed", "1", "--config", p("cfg.json"))
    assert code == 0, err
    return p


def test_generate_reproducible(workspace, tmp_path):
    p = workspace
    out2 = str(tmp_path / "again.csv")
    code, _, _ = run("generate", "--dataset", "chain3_linear", "--n", "250",
                     "--seed", "5", "--out", out2)
    assert code == 0
    assert open(p("data.csv"), "rb").read() == open(out2, "rb").read()


def test_generate_sensitivity(tmp_path):
    out = str(tmp_path / "sens.csv")
    code, msg, _ = run("generate", "--dataset", "sensitivity", "--alpha",
                       "0.5", "--n", "100", "--out", out)
    assert code == 0 and "100 rows" in msg
    code, _, err = run("generate", "--dataset", "sensitivity", "--mixed",
                       "--n", "50", "--out", out)
    assert code == 1
    assert json.loads(err.strip())["error"] == "config"


def test_train_echoes_selection(workspace, tmp_path):
    p = workspace
    code, out, _ = run("train", "--graph", p("graph.json"), "--data",
                       p("data.csv"), "--out", str(tmp_path / "m.json"),
                       "--seed", "1", "--config", p("cfg.json"), "--kaam")
    assert code == 0
    assert "root (no mechanism search)" in out
    assert "winner of" in out
    assert "wrote" in out


def test_falsify_writes_report(workspace, tmp_path):
    p = workspace
    rp = str(tmp_path / "report.json")
    code, _, err = run("falsify", "--model", p("model.json"), "--data",
                       p("data.csv"), "--out", rp, "--seed", "2",
                       "--config", p("cfg.json"))
    assert code == 0
    assert "mmd_obs=" in err and "rf_acc_obs=" in err
    rep = json.load(open(rp))
    assert "node_tests" in rep and "mmd_obs" in rep and "dhsic_pvalue" in rep


def test_sample_and_intervene(workspace, tmp_path):
    p = workspace
    sp = str(tmp_path / "s.csv")
    code, _, _ = run("sample", "--model", p("model.json"), "--n", "50",
                     "--seed", "3", "--out", sp)
    assert code == 0
    ip = str(tmp_path / "si.csv")
    code, _, _ = run("intervene", "--model", p("model.json"), "--n", "50",
                     "--seed", "3", "--do", "x1=0.5", "--out", ip)
    assert code == 0
    lines = open(ip).read().splitlines()
    hdr = lines[0].split(",")
    x1 = [float(line.split(",")[hdr.index("x1")]) for line in lines[1:]]
    assert all(v == 0.5 for v in x1)
    # x2 responds to the clamp: differs from the plain sample
    s_lines = open(sp).read().splitlines()
    x2s = [line.split(",")[hdr.index("x2")] for line in s_lines[1:]]
    x2i = [line.split(",")[hdr.index("x2")] for line in lines[1:]]
    assert x2s != x2i
    code, _, err = run("intervene", "--model", p("model.json"), "--n", "5",
                       "--out", str(tmp_path / "x.csv"))
    assert code == 2 and "--do" in err


def test_usage_errors_are_json(workspace, tmp_path):
    p = workspace
    code, _, err = run("sample", "--model", p("model.json"), "--n", "0",
                       "--out", str(tmp_path / "x.csv"))
    assert code == 2
    line = err.strip()
    assert "\n" not in line
    assert json.loads(line)["error"] == "usage"
    code, _, _ = run("frobnicate")
    assert code == 2
    # click path validation failures surface as usage errors too
    code, _, _ = run("falsify", "--model", str(tmp_path / "nope.json"),
                     "--data", p("data.csv"))
    assert code == 2


def test_counterfactual_gate_and_override(workspace, tmp_path):
    p = workspace
    cf = str(tmp_path / "cf.csv")
    code, _, err = run("counterfactual", "--model", p("mixed-model.json"),
                       "--data", p("mixed.csv"), "--do", "x1=0.0",
                       "--seed", "4", "--out", cf)
    assert code == 1
    doc = json.loads(err.strip())
    assert doc["error"] == "identifiability"
    assert "x3" in doc["offenders"]

    code, out, _ = run("counterfactual", "--model", p("mixed-model.json"),
                       "--data", p("mixed.csv"), "--do", "x1=0.0",
                       "--override", "--seed", "4", "--out", cf)
    assert code == 0
    assert "point_valued=False" in out
    probs = json.load(open(cf + ".probs.json"))
    assert "x3" in probs
    assert len(probs["x3"]) == 250 and len(probs["x3"][0]) == 3


def test_counterfactual_point_valued(workspace, tmp_path):
    p = workspace
    cf = str(tmp_path / "cf2.csv")
    code, out, _ = run("counterfactual", "--model", p("model.json"),
                       "--data", p("data.csv"), "--do", "x1=0.0",
                       "--seed", "4", "--out", cf)
    assert code == 0 and "point_valued=True" in out
    assert not os.path.exists(cf + ".probs.json")
    lines = open(cf).read().splitlines()
    hdr = lines[0].split(",")
    x1 = [float(line.split(",")[hdr.index("x1")]) for line in lines[1:]]
    assert all(v == 0.0 for v in x1)


def test_simplify_stages_and_formula(workspace, tmp_path):
    p = workspace
    prefix = str(tmp_path / "simp")
    code, out, _ = run("simplify", "--model", p("model.json"), "--data",
                       p("data.csv"), "--out-prefix", prefix, "--seed", "6",
                       "--config", p("cfg.json"))
    assert code == 0
    assert os.path.exists(prefix + ".raw.model.json")
    assert os.path.exists(prefix + ".raw.report.json")
    assert os.path.exists(prefix + ".summary.json")
    assert "accepted" in out or "rejected" in out
    summary = json.load(open(prefix + ".summary.json"))
    stages = [s["stage"] for s in summary["stages"]]
    assert stages[0] == "raw" and "pruned" in stages

    final = [s["stage"] for s in summary["stages"] if s["accepted"]][-1]
    if final == "symbolic":
        code, out, _ = run("formula", "--model", prefix + ".symbolic.model.json")
        assert code == 0
        assert "x2 =" in out and "x3 =" in out
        code, _, err = run("formula", "--model", prefix + ".symbolic.model.json",
                           "--node", "x1")
        assert code == 1  # roots have no formula
    # a spline-stage model has no formulas at all
    code, _, err = run("formula", "--model", p("model.json"), "--node", "x2")
    assert code == 1
    assert "simplify" in json.loads(err.strip())["message"]


def test_pdp_ate_and_prp(workspace):
    p = workspace
    code, out, _ = run("pdp", "--model", p("model.json"), "--node", "x2",
                       "--parent", "x1", "--from", "-0.5", "--to", "0.5")
    assert code == 0
    doc = json.loads(out)
    assert "grid" in doc and "delta" in doc
    assert doc["ate_from"] == -0.5 and doc["ate_to"] == 0.5
    # the mechanism is close to linear with slope 10 in raw units
    assert isinstance(doc["ate"], float)

    code, _, err = run("pdp", "--model", p("model.json"), "--node", "x2",
                       "--parent", "x1", "--from", "-0.5")
    assert code == 2  # --from without --to

    code, out, _ = run("prp", "--model", p("model.json"), "--node", "x3",
                       "--data", p("data.csv"), "--row", "2")
    assert code == 0
    doc = json.loads(out)
    assert "contributions" in doc and "x2" in doc["contributions"]
    code, _, err = run("prp", "--model", p("model.json"), "--node", "x3",
                       "--data", p("data.csv"), "--row", "9999")
    assert code == 1
    assert json.loads(err.strip())["error"] == "config"


def test_benchmark_command(workspace, tmp_path):
    p = workspace
    out_path = str(tmp_path / "bench.json")
    code, out, err = run("benchmark", "--dataset", "chain3_linear",
                         "--n", "40", "--seeds", "0:2", "--variant", "true",
                         "--int-samples", "40", "--out", out_path)
    assert code == 0, err
    doc = json.load(open(out_path))
    assert len(doc["cells"]) == 2
    assert doc["cells"][0]["variant"] == "true"
    assert "aggregate" in doc
    assert "rf_acc_obs" in out  # the text table
    code, _, err = run("benchmark", "--dataset", "chain3_linear", "--n", "40",
                       "--rounded")
    assert code == 2  # --rounded needs --mixed
    assert json.loads(err.strip())["error"] == "usage"


def test_unknown_config_key(workspace, tmp_path):
    p = workspace
    bad = str(tmp_path / "bad.json")
    with open(bad, "w") as fh:
        json.dump({"grdi": {}}, fh)
    code, _, err = run("falsify", "--model", p("model.json"), "--data",
                       p("data.csv"), "--config", bad)
    assert code == 1
    assert json.loads(err.strip())["error"] == "config"
