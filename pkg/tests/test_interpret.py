import json

import numpy as np
import pytest

from kacgm import dgp, kan
from kacgm.errors import (ConfigError, InputDomainError,
                          UnsupportedDecompositionError)
from kacgm.interpret import (ate_from_pdp, pdp, prp, select_simplest,
                             simplify_pipeline, symbolic_substitute)
from kacgm.queries import sample_observational


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


def test_select_simplest():
    flat = kan.build_network(("a", "b"), hidden_width=0, seed=0)
    deep = kan.build_network(("a", "b"), hidden_width=3, seed=0)
    # tied within one SE of the best: fewer hidden layers wins
    assert select_simplest([(deep, 1.00, 0.05), (flat, 1.04, 0.05)]) is flat
    # clearly better score wins regardless of size
    assert select_simplest([(deep, 1.00, 0.01), (flat, 1.50, 0.01)]) is deep
    with pytest.raises(ConfigError):
        select_simplest([])


def test_ischemia_reference_probability(ischemia_model):
    # all continuous parents at their means, diabetes at level 0: only the
    # intercept edge fires and the risk is sigmoid(-1.871)
    row = {"age": 60.0, "bmi": 27.5, "systolic": 120.0, "diabetes": 0}
    decomp = prp(ischemia_model, "ischemia", row)
    assert decomp.total == pytest.approx(-1.871, abs=1e-12)
    assert _sigmoid(decomp.total) == pytest.approx(0.1334, abs=5e-5)
    for v in decomp.contributions.values():
        assert v == pytest.approx(0.0, abs=1e-12)


def test_ischemia_prp_contributions(ischemia_model):
    # one standard deviation above the mean on each continuous input plus
    # diabetes=1 reproduces the published per-parent loadings exactly
    row = {"age": 70.0, "bmi": 32.5, "systolic": 140.0, "diabetes": 1}
    decomp = prp(ischemia_model, "ischemia", row, row_id=17)
    assert decomp.contributions["age"] == pytest.approx(0.055 + 0.173, abs=1e-12)
    assert decomp.contributions["bmi"] == pytest.approx(0.031 + 0.114, abs=1e-12)
    assert decomp.contributions["systolic"] == pytest.approx(0.046 + 0.155, abs=1e-12)
    assert decomp.contributions["diabetes"] == pytest.approx(0.743, abs=1e-12)
    assert decomp.intercept == pytest.approx(-1.871, abs=1e-12)
    want_total = -1.871 + 0.228 + 0.145 + 0.201 + 0.743
    assert decomp.total == pytest.approx(want_total, abs=1e-12)
    # contributions + intercept reassemble the head input
    assert decomp.total == pytest.approx(
        decomp.intercept + sum(decomp.contributions.values()), abs=1e-12)
    doc = decomp.to_dict()
    json.dumps(doc)
    assert doc["row_id"] == 17


def test_prp_validation(ischemia_model, chain3_trained):
    with pytest.raises(ConfigError):
        prp(ischemia_model, "ischemia", {"age": 60.0})  # missing parents
    model, raw, _ = chain3_trained
    deep = kan.build_network(("x1",), hidden_width=2, seed=0)
    mechs = dict(model.mechanisms)
    from dataclasses import replace
    mechs["x2"] = replace(mechs["x2"], network=deep, symbolic=None)
    hidden = model.with_stage("raw", mechs, model.noise)
    with pytest.raises(UnsupportedDecompositionError):
        prp(hidden, "x2", {"x1": 0.0})


def test_pdp_additive_edge_curve(ischemia_model):
    curve = pdp(ischemia_model, "ischemia", "age")
    # default grid spans mean +/- 2 sd with the reference at the midpoint
    assert curve.grid[0] == pytest.approx(40.0)
    assert curve.grid[-1] == pytest.approx(80.0)
    mid = (curve.grid.size - 1) // 2
    assert curve.delta[mid] == pytest.approx(0.0, abs=1e-12)
    # the curve is the age edge itself: 0.055 z^2 + 0.173 z on the logit
    z = (curve.grid - 60.0) / 10.0
    assert np.max(np.abs(curve.delta - (0.055 * z ** 2 + 0.173 * z))) < 1e-12
    assert "reference" in curve.baseline
    doc = curve.to_dict()
    json.dumps(doc)
    assert doc["node"] == "ischemia" and doc["parent"] == "age"


def test_pdp_validation(ischemia_model):
    with pytest.raises(ConfigError):
        pdp(ischemia_model, "ischemia", "smoking")
    with pytest.raises(ConfigError):
        pdp(ischemia_model, "ischemia", "diabetes")  # categorical parent
    with pytest.raises(ConfigError):
        pdp(ischemia_model, "ischemia", "age", grid=[1.0])
    with pytest.raises(ConfigError):
        pdp(ischemia_model, "ischemia", "age", grid=[2.0, 1.0])


def test_pdp_averages_over_data_for_hidden_nets(chain3_trained):
    model, raw, _ = chain3_trained
    from dataclasses import replace
    deep = kan.build_network(("x1",), hidden_width=2, grid_size=5, seed=1)
    mechs = dict(model.mechanisms)
    mechs["x2"] = replace(mechs["x2"], network=deep, symbolic=None)
    hidden = model.with_stage("raw", mechs, model.noise)
    with pytest.raises(ConfigError):
        pdp(hidden, "x2", "x1")  # non-additive without data
    curve = pdp(hidden, "x2", "x1", data=raw, n_points=11)
    assert curve.delta.shape == (11,)
    assert curve.delta[5] == pytest.approx(0.0, abs=1e-12)  # at the reference


def test_ate_from_pdp(ischemia_model):
    curve = pdp(ischemia_model, "ischemia", "age")
    # logit difference between age 70 and age 60
    assert ate_from_pdp(curve, 60.0, 70.0) == pytest.approx(0.228, abs=1e-9)
    assert ate_from_pdp(curve, 70.0, 60.0) == pytest.approx(-0.228, abs=1e-9)
    with pytest.raises(InputDomainError):
        ate_from_pdp(curve, 60.0, 200.0)


def test_symbolic_substitute_on_spline_model(chain3_trained):
    model, raw, _ = chain3_trained
    symbolic, report = symbolic_substitute(model, "x2")
    assert report["node"] == "x2"
    assert all(e["r2"] > 0.99 for e in report["edges"])
    # substituted mechanism tracks the spline closely on the data range
    # r2 >= 0.99 over the grid leaves ~10% residual std pointwise
    X = model.standardizer.apply(raw)["x1"][:, None]
    spline_out = kan.network_forward(model.mechanisms["x2"].network, X)
    resid = symbolic.forward(X) - spline_out
    assert np.sqrt(np.mean(resid ** 2)) < 0.15 * np.std(spline_out)
    with pytest.raises(ConfigError):
        symbolic_substitute(model, "x2", n_points=5)
    with pytest.raises(ConfigError):
        symbolic_substitute(model, "x1")  # root has no mechanism


def test_symbolic_substitute_fixed_point(ischemia_model):
    # refitting an already-analytic mechanism reproduces it, including the
    # constant intercept edge whose value lives entirely in d
    symbolic, report = symbolic_substitute(ischemia_model, "ischemia")
    assert not report["warnings"]
    old = ischemia_model.mechanisms["ischemia"].symbolic
    Z = np.linspace(-3.0, 3.0, 101)
    for q in range(old.layers[0].in_dim):
        before = old.layers[0].atoms[q][0](Z)
        after = symbolic.layers[0].atoms[q][0](Z)
        assert np.max(np.abs(before - after)) < 1e-6, q
    kinds = [row[0].kind for row in symbolic.layers[0].atoms]
    assert kinds == ["quadratic", "quadratic", "quadratic", "constant", "linear"]


def test_simplify_pipeline_zero_threshold(chain3_trained):
    model, raw, _ = chain3_trained
    result = simplify_pipeline(model, raw, prune_threshold=0.0,
                               n_permutations=49, seed=0)
    names = [s.name for s in result.stages]
    assert names[:2] == ["raw", "pruned"]
    assert result.stages[0].accepted  # the baseline is always kept
    # zero threshold removes nothing, so the pruned stage reproduces the
    # baseline metrics bit for bit and must be accepted
    prune_details = result.stages[1].details
    assert all(d["removed_edges"] == 0 for d in prune_details.values())
    assert result.stages[1].report.mmd_obs == result.stages[0].report.mmd_obs
    assert result.stages[1].accepted
    assert result.final.stage == result.accepted_names[-1]
    for stage in result.stages:
        assert stage.model.stage == stage.name


def test_simplify_pipeline_rejects_on_tight_margins(chain3_trained):
    model, raw, _ = chain3_trained
    # impossible margins: any nonzero MMD fails, so pruning is rejected and
    # the pipeline stops with the raw model as the final stage
    result = simplify_pipeline(model, raw, prune_threshold=0.0,
                               margins=(-1.0, -1.0), n_permutations=49, seed=0)
    assert [s.name for s in result.stages] == ["raw", "pruned"]
    assert not result.stages[1].accepted
    assert result.accepted_names == ("raw",)
    assert result.final is result.stages[0].model


def test_simplified_model_still_samples(chain3_trained):
    model, raw, _ = chain3_trained
    result = simplify_pipeline(model, raw, n_permutations=49, seed=0)
    batch = sample_observational(result.final, 50, seed=1)
    for name in model.graph.names:
        assert np.all(np.isfinite(batch.columns[name]))
