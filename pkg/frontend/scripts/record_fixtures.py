"""Record golden HTTP fixtures for the explorer's snapshot tests.

Drives the real service in-process (ASGI test client, byte-identical bodies)
against three models — a trained chain, a mixed-type chain with a ternary
node, and a hand-built logistic risk model — and saves every response as
``{"status": ..., "body": "<exact body text>"}`` under ``test/fixtures/``.

Run from the repository root after installing the Python package:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import os
import tempfile

import numpy as np
from fastapi.testclient import TestClient

from kacgm import dgp, io
from kacgm import symbolic as sb
from kacgm.graph import CausalGraph, NodeSpec
from kacgm.rng import stream
from kacgm.scm import (EMPIRICAL, UNIFORM, HyperGrid, KacgmModel, Mechanism,
                       NoiseModel, Standardizer, train_model)
from kacgm.server import ServerConfig, create_app

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "..", "test", "fixtures")

QUICK_GRID = HyperGrid(hidden=(0,), grid_size=(5,), learning_rates=(0.3,),
                       l1=(0.001,), multiplicative=(False,), epochs=80,
                       batch_size=0)
DEEP_GRID = HyperGrid(hidden=(2,), grid_size=(5,), learning_rates=(0.1,),
                      l1=(0.001,), multiplicative=(False,), epochs=60,
                      batch_size=0)


def make_risk_model():
    """Logistic mechanism with fixed quadratic coefficients per parent."""
    graph = CausalGraph(
        nodes=(
            NodeSpec("age", "continuous"),
            NodeSpec("bmi", "continuous"),
            NodeSpec("systolic", "continuous"),
            NodeSpec("diabetes", "categorical", levels=2),
            NodeSpec("ischemia", "categorical", levels=2),
        ),
        edges=(("age", "ischemia"), ("bmi", "ischemia"),
               ("systolic", "ischemia"), ("diabetes", "ischemia")),
    )
    standardizer = Standardizer(
        {"age": (60.0, 10.0), "bmi": (27.5, 5.0), "systolic": (120.0, 20.0)}
    )

    def quad(c, lin):
        b = lin / (2.0 * c)
        return sb.SymbolicAtom("quadratic", 1.0, b, c, -c * b * b)

    layer = sb.SymbolicLayer(
        [[quad(0.055, 0.173)],
         [quad(0.031, 0.114)],
         [quad(0.046, 0.155)],
         [sb.SymbolicAtom("constant", 1.0, 0.0, 0.0, -1.871)],
         [sb.SymbolicAtom("linear", 1.0, 0.0, 0.743, 0.0)]],
        ["sum"],
    )
    mech = sb.SymbolicMechanism(
        ("age", "bmi", "systolic", "diabetes=0", "diabetes=1"),
        [layer], head="sigmoid",
    )
    mechanisms = {
        "age": Mechanism("age", "continuous", (), ()),
        "bmi": Mechanism("bmi", "continuous", (), ()),
        "systolic": Mechanism("systolic", "continuous", (), ()),
        "diabetes": Mechanism("diabetes", "categorical", (), (),
                              root_probs=np.array([0.7, 0.3]), levels=2),
        "ischemia": Mechanism(
            "ischemia", "categorical",
            ("age", "bmi", "systolic", "diabetes"),
            ("age", "bmi", "systolic", "diabetes=0", "diabetes=1"),
            symbolic=mech, levels=2),
    }
    noise = {name: NoiseModel(EMPIRICAL, samples=np.zeros(1))
             for name in ("age", "bmi", "systolic")}
    noise["diabetes"] = NoiseModel(UNIFORM)
    noise["ischemia"] = NoiseModel(UNIFORM)
    return KacgmModel(graph=graph, standardizer=standardizer,
                      mechanisms=mechanisms, noise=noise, stage="symbolic",
                      metadata={"noise_kind": EMPIRICAL})


def make_edgeless_model():
    """Two independent nodes: exercises the no-arrows graph rendering."""
    graph = CausalGraph(
        nodes=(NodeSpec("a", "continuous"), NodeSpec("b", "continuous")),
        edges=(),
    )
    rng = stream(42, "edgeless")
    columns = {"a": rng.normal(0.0, 1.0, 200), "b": rng.normal(2.0, 0.5, 200)}
    return train_model(graph, columns, QUICK_GRID, seed=1)


def save(name, response):
    path = os.path.join(FIXTURE_DIR, name + ".json")
    document = {"status": response.status_code,
                "body": response.content.decode("utf-8")}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=1)
        fh.write("\n")
    print("%-24s status=%d bytes=%d" % (name, response.status_code,
                                        len(response.content)))


def main():
    os.makedirs(FIXTURE_DIR, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix="explorer-fixtures-")

    # --- chain model with evaluation data ------------------------------
    raw, handle = dgp.generate(dgp.DgpSpec("chain3_linear", n=400, seed=11))
    chain_model = train_model(handle.graph, raw, QUICK_GRID, seed=3)
    heldout, _ = dgp.generate(dgp.DgpSpec("chain3_linear", n=200, seed=12))
    eval_path = os.path.join(tmp, "chain3_eval.csv")
    io.write_csv(eval_path, handle.graph, heldout)
    chain = TestClient(create_app(
        chain_model,
        ServerConfig(eval_data_path=eval_path, n_permutations=19,
                     diagnostics_seed=0),
    ))

    save("healthz", chain.get("/healthz"))
    save("model_chain3", chain.get("/api/model"))
    save("diagnostics_chain3", chain.get("/api/diagnostics"))

    base_req = {"n": 400, "seed": 11}
    save("sample_base", chain.post("/api/sample", json=base_req))
    save("sample_base_repeat", chain.post("/api/sample", json=base_req))
    for tag, value in (("lo", -1.0), ("mid", 0.0), ("hi", 1.0)):
        save("sample_do_" + tag,
             chain.post("/api/sample",
                        json={"n": 400, "seed": 11,
                              "interventions": {"x1": value}}))

    factual = {name: float(raw[name][0]) for name in handle.graph.names}
    save("cf_point",
         chain.post("/api/counterfactual",
                    json={"factual_row": factual, "seed": 11,
                          "interventions": {"x2": 0.5}}))

    save("pdp_21", chain.get("/api/pdp",
                             params={"node": "x2", "parent": "x1",
                                     "points": 21}))
    save("ate", chain.post("/api/ate",
                           json={"node": "x2", "parent": "x1",
                                 "from": -1.0, "to": 1.0}))
    save("ate_zero", chain.post("/api/ate",
                                json={"node": "x2", "parent": "x1",
                                      "from": 0.5, "to": 0.5}))
    save("err_unknown_node", chain.get("/api/pdp",
                                       params={"node": "zzz",
                                               "parent": "x1"}))
    save("err_over_cap", chain.post("/api/sample",
                                    json={"n": 10_000_000, "seed": 1}))

    # --- deep (non-additive) mechanism: decomposition refused ----------
    deep_model = train_model(handle.graph, raw, DEEP_GRID, seed=3)
    deep = TestClient(create_app(deep_model, ServerConfig()))
    save("prp_unsupported",
         deep.post("/api/prp", json={"node": "x2", "row": factual}))

    # --- mixed-type chain: categorical histograms and the 409 gate -----
    mixed_raw, mixed_handle = dgp.generate(
        dgp.DgpSpec("chain4_linear", n=300, seed=5, mixed=True))
    mixed_model = train_model(mixed_handle.graph, mixed_raw, QUICK_GRID,
                              seed=7)
    mixed = TestClient(create_app(mixed_model, ServerConfig()))
    save("model_mixed", mixed.get("/api/model"))
    save("sample_mixed", mixed.post("/api/sample", json={"n": 300, "seed": 5}))
    mixed_factual = {
        name: (int(mixed_raw[name][0])
               if mixed_handle.graph.node(name).kind == "categorical"
               else float(mixed_raw[name][0]))
        for name in mixed_handle.graph.names
    }
    blocked_req = {"factual_row": mixed_factual, "seed": 5,
                   "interventions": {"x1": 0.0}}
    save("cf_blocked", mixed.post("/api/counterfactual", json=blocked_req))
    save("cf_override", mixed.post("/api/counterfactual",
                                   json=dict(blocked_req, override=True)))

    # --- hand-built logistic risk model ---------------------------------
    risk = TestClient(create_app(make_risk_model(), ServerConfig()))
    save("model_cardio", risk.get("/api/model"))
    save("prp_cardio",
         risk.post("/api/prp",
                   json={"node": "ischemia",
                         "row": {"age": 70.0, "bmi": 32.5,
                                 "systolic": 140.0, "diabetes": 1}}))

    # --- edgeless graph --------------------------------------------------
    edgeless = TestClient(create_app(make_edgeless_model(), ServerConfig()))
    save("model_edgeless", edgeless.get("/api/model"))


if __name__ == "__main__":
    main()
