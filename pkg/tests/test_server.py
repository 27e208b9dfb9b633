import json
import os

import jsonschema
import numpy as np
import pytest
from fastapi.testclient import TestClient

import kacgm
from kacgm import io
from kacgm.interpret import ate_from_pdp, pdp
from kacgm.server import ServerConfig, create_app

SCHEMA_DIR = os.path.join(os.path.dirname(kacgm.__file__), "schemas")


def schema(name):
    with open(os.path.join(SCHEMA_DIR, name)) as fh:
        return json.load(fh)


def check(response, schema_name):
    jsonschema.validate(response.json(), schema(schema_name))
    return response.json()


@pytest.fixture(scope="module")
def env(mixed_trained, tmp_path_factory):
    model, raw, handle = mixed_trained
    eval_csv = str(tmp_path_factory.mktemp("server") / "eval.csv")
    io.write_csv(eval_csv, handle.graph, {k: v[:200] for k, v in raw.items()})
    config = ServerConfig(max_n=5000, row_cap=50, eval_data_path=eval_csv,
                          n_permutations=19)
    client = TestClient(create_app(model, config), raise_server_exceptions=False)
    factual = {
        name: (float(raw[name][3])
               if handle.graph.node(name).kind == "continuous"
               else int(raw[name][3]))
        for name in handle.graph.names
    }
    return {"client": client, "model": model, "handle": handle,
            "eval_csv": eval_csv, "factual": factual}


@pytest.fixture(scope="module")
def bare_client(mixed_trained):
    model, _, _ = mixed_trained
    return TestClient(create_app(model, ServerConfig()),
                      raise_server_exceptions=False)


def test_healthz(env):
    r = env["client"].get("/healthz")
    assert r.status_code == 200
    doc = check(r, "healthz.json")
    assert doc["status"] == "ok"  # liveness probe stays envelope-free
    float(r.headers["X-Compute-Ms"])  # timing lives in a header, not the body


def test_model_endpoint(env):
    r = env["client"].get("/api/model")
    assert r.status_code == 200
    doc = check(r, "model.json")["payload"]
    assert doc["kinds"]["x3"] == "categorical"
    assert doc["levels"]["x3"] == 3
    assert ["x1", "x2"] in doc["graph"]["edges"] or ("x1", "x2") in [
        tuple(e) for e in doc["graph"]["edges"]]
    assert doc["diagnostics"] is not None and "mmd_obs" in doc["diagnostics"]
    # eager diagnostics keep the body stable across calls
    assert env["client"].get("/api/model").content == r.content


def test_sample_deterministic_and_capped(env):
    client = env["client"]
    r1 = client.post("/api/sample", json={"n": 500, "seed": 7})
    r2 = client.post("/api/sample", json={"n": 500, "seed": 7})
    assert r1.status_code == 200
    assert r1.content == r2.content
    payload = check(r1, "sample.json")["payload"]
    assert payload["row_count"] == 50  # raw rows capped
    assert all(len(v) == 50 for v in payload["rows"].values())
    # histograms summarize every sampled row, not just the capped ones
    assert sum(payload["histograms"]["x1"]["counts"]) == 500
    assert all(len(h["counts"]) <= 64 for h in payload["histograms"].values())
    # categorical histogram is per level
    assert len(payload["histograms"]["x3"]["counts"]) == 3


def test_sample_derived_seed(env):
    client = env["client"]
    a = client.post("/api/sample", json={"n": 500})
    b = client.post("/api/sample", json={"n": 500})
    assert a.content == b.content  # derived seed is a payload hash
    c = client.post("/api/sample", json={"n": 501})
    assert c.json()["seed"] != a.json()["seed"]
    # explicit request ids echo back
    r = client.post("/api/sample", json={"n": 10, "request_id": "abc-1"})
    assert r.json()["request_id"] == "abc-1"


def test_sample_interventions(env):
    r = env["client"].post(
        "/api/sample", json={"n": 100, "seed": 1, "interventions": {"x1": 0.25}})
    assert r.status_code == 200
    payload = check(r, "sample.json")["payload"]
    assert all(v == 0.25 for v in payload["rows"]["x1"])
    assert payload["interventions"] == {"x1": 0.25}


def test_sample_caps_and_malformed(env):
    client = env["client"]
    r = client.post("/api/sample", json={"n": 5001})
    assert r.status_code == 413
    err = check(r, "error.json")
    assert err["error"] == "over-cap" and err["max_n"] == 5000
    assert client.post("/api/sample", json={"n": 0}).status_code == 400
    assert client.post("/api/sample", json={}).status_code == 400
    assert client.post("/api/sample", json={"n": "ten"}).status_code == 400
    assert client.post("/api/sample", json={"n": True}).status_code == 400
    r = client.post("/api/sample", content=b"{oops",
                    headers={"content-type": "application/json"})
    assert r.status_code == 400
    check(r, "error.json")


def test_unknown_node_is_404(env):
    client = env["client"]
    r = client.post("/api/sample", json={"n": 10, "interventions": {"zz": 1}})
    assert r.status_code == 404
    assert check(r, "error.json")["error"] == "unknown-node"
    assert client.get("/api/pdp",
                      params={"node": "zz", "parent": "x1"}).status_code == 404


def test_counterfactual_gate(env):
    client, factual = env["client"], env["factual"]
    r = client.post("/api/counterfactual",
                    json={"factual_row": factual, "interventions": {"x1": 0.0}})
    assert r.status_code == 409
    err = check(r, "error.json")
    assert err["error"] == "identifiability"
    assert err["offenders"] == ["x3"]


def test_counterfactual_override(env):
    client, factual = env["client"], env["factual"]
    r = client.post("/api/counterfactual",
                    json={"factual_row": factual, "interventions": {"x1": 0.0},
                          "override": True, "seed": 3})
    assert r.status_code == 200
    payload = check(r, "counterfactual.json")["payload"]
    assert payload["point_valued"] is False
    assert abs(sum(payload["category_probs"]["x3"]) - 1.0) < 1e-9
    assert payload["row"]["x1"] == 0.0
    # byte-determinism holds for the override path too
    r2 = client.post("/api/counterfactual",
                     json={"factual_row": factual, "interventions": {"x1": 0.0},
                           "override": True, "seed": 3})
    assert r2.content == r.content


def test_counterfactual_point_valued(env):
    client, factual = env["client"], env["factual"]
    r = client.post("/api/counterfactual",
                    json={"factual_row": factual, "interventions": {"x4": 1.0},
                          "seed": 3})
    assert r.status_code == 200
    payload = check(r, "counterfactual.json")["payload"]
    assert payload["point_valued"] is True
    for name in ("x1", "x2", "x3"):  # x4 is the sink: everything else factual
        assert payload["row"][name] == factual[name]
    assert payload["row"]["x4"] == 1.0

    bad = dict(factual)
    bad.pop("x2")
    r = client.post("/api/counterfactual",
                    json={"factual_row": bad, "interventions": {"x4": 1.0}})
    assert r.status_code == 400


def test_pdp_and_ate_share_the_core(env):
    client = env["client"]
    r = client.get("/api/pdp", params={"node": "x2", "parent": "x1",
                                       "points": 41})
    assert r.status_code == 200
    payload = check(r, "pdp.json")["payload"]
    eval_cols = io.read_csv(env["eval_csv"], env["handle"].graph)
    curve = pdp(env["model"], "x2", "x1", data=eval_cols, n_points=41)
    assert np.array_equal(payload["delta"], curve.delta)
    assert np.array_equal(payload["grid"], curve.grid)

    r = client.post("/api/ate", json={"node": "x2", "parent": "x1",
                                      "from": -0.5, "to": 0.5})
    assert r.status_code == 200
    payload = check(r, "ate.json")["payload"]
    assert payload["ate"] == ate_from_pdp(curve, -0.5, 0.5)

    assert client.get("/api/pdp", params={"node": "x2", "parent": "x1",
                                          "points": 1}).status_code == 400
    assert client.get("/api/pdp", params={"node": "x2", "parent": "x1",
                                          "points": "many"}).status_code == 400


def test_prp_get_and_post(env):
    client, factual = env["client"], env["factual"]
    r = client.get("/api/prp", params={"node": "x4", "row": 5})
    assert r.status_code == 200
    payload = check(r, "prp.json")["payload"]
    assert "contributions" in payload and "intercept" in payload
    r2 = client.post("/api/prp", json={"node": "x4", "row": factual})
    assert r2.status_code == 200
    check(r2, "prp.json")
    assert client.get("/api/prp",
                      params={"node": "x4", "row": 10 ** 6}).status_code == 400


def test_diagnostics_endpoint(env):
    r = env["client"].get("/api/diagnostics")
    assert r.status_code == 200
    payload = check(r, "diagnostics.json")["payload"]
    assert "mmd_obs" in payload and "node_tests" in payload


def test_server_without_eval_data(bare_client):
    assert bare_client.get("/api/diagnostics").status_code == 404
    assert bare_client.get("/api/prp",
                           params={"node": "x4", "row": 0}).status_code == 404
    assert bare_client.get("/api/model").json()["payload"]["diagnostics"] is None
    # additive-mechanism pdp needs no data
    assert bare_client.get("/api/pdp",
                           params={"node": "x2", "parent": "x1"}).status_code == 200


def test_cors_headers(mixed_trained):
    model, _, _ = mixed_trained
    app = create_app(model, ServerConfig(cors_origins=("http://localhost:5173",)))
    client = TestClient(app, raise_server_exceptions=False)
    r = client.get("/healthz", headers={"Origin": "http://localhost:5173"})
    assert r.headers.get("access-control-allow-origin") == "http://localhost:5173"


def test_server_config_validation(tmp_path):
    from kacgm.errors import ConfigError
    with pytest.raises(ConfigError):
        ServerConfig(max_n=0)
    with pytest.raises(ConfigError):
        ServerConfig(row_cap=0)
