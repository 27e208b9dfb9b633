"""Release acceptance gates, one test per criterion.

Every test checks a single end-to-end guarantee at a pinned tolerance and
records one PASS/FAIL line that :func:`conftest.pytest_terminal_summary`
prints after the run.  The four benchmark-scale checks are marked ``slow``
but still run by default; together they dominate the suite's wall time
(roughly forty minutes on one laptop core).

Reference values fall into three groups: statistics recomputed here from
their direct formulas (kernel scores, finite differences, chi-square
counts), closed-form consequences of the data-generating equations
(counterfactuals, identifiability), and published aggregate numbers the
trained models must stay within.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from conftest import ACCEPTANCE_LINES, TINY_GRID, make_ischemia_model
from kacgm import benchmark, dgp, interpret, kan
from kacgm import symbolic as sb
from kacgm.errors import IdentifiabilityError
from kacgm.graph import CausalGraph, NodeSpec
from kacgm.kernels import dhsic, hsic, mmd2
from kacgm.queries import (Intervention, counterfactual,
                           counterfactual_identifiable, sample_categorical)
from kacgm.rng import stream
from kacgm.scm import HyperGrid, residuals_std, train_model

TEN_SEEDS = tuple(range(10))


def _fmt(value):
    if isinstance(value, float):
        return "%.4g" % value
    return str(value)


@contextmanager
def gate(label):
    """Record one PASS/FAIL summary line for the enclosed assertions."""
    info = {}
    try:
        yield info
    except BaseException:
        detail = "  ".join("%s=%s" % (k, _fmt(v)) for k, v in info.items())
        ACCEPTANCE_LINES.append("FAIL  %-44s %s" % (label, detail))
        raise
    detail = "  ".join("%s=%s" % (k, _fmt(v)) for k, v in info.items())
    ACCEPTANCE_LINES.append("PASS  %-44s %s" % (label, detail))


# --- 1: analytic gradients vs central finite differences ----------------------

def _loss_ref(net, X, y, l1):
    """The training loss recomputed from its definition (no backward pass)."""
    v = kan.network_logits(net, X)
    if net.head == "identity":
        r = v - np.asarray(y, dtype=float).reshape(v.shape[0], -1)
        data = float(np.mean(np.sum(r ** 2, axis=1)))
    elif net.head == "sigmoid":
        p = 1.0 / (1.0 + np.exp(-v[:, 0]))
        yy = np.asarray(y, dtype=float).reshape(-1)
        data = float(-np.mean(yy * np.log(p + 1e-12)
                              + (1.0 - yy) * np.log(1.0 - p + 1e-12)))
    else:
        e = np.exp(v - v.max(axis=1, keepdims=True))
        p = e / e.sum(axis=1, keepdims=True)
        idx = np.asarray(y, dtype=int)
        data = float(-np.mean(np.log(p[np.arange(len(idx)), idx] + 1e-12)))
    pen = 0.0
    for layer in net.layers:
        pen += float(np.sum(np.abs(layer.w_s) * np.mean(np.abs(layer.coeffs), axis=2))
                     + np.sum(np.abs(layer.w_b)))
    return data + l1 * pen


def _fd_grads(net, X, y, l1):
    """Central finite differences of :func:`_loss_ref` in every parameter."""
    out = []
    for layer in net.layers:
        g = {}
        for key in ("coeffs", "w_b", "w_s"):
            arr = getattr(layer, key)
            fd = np.zeros_like(arr)
            flat, fdf = arr.ravel(), fd.ravel()
            for i in range(flat.size):
                v = flat[i]
                h = 1e-6 * max(1.0, abs(v))
                flat[i] = v + h
                lp = _loss_ref(net, X, y, l1)
                flat[i] = v - h
                lm = _loss_ref(net, X, y, l1)
                flat[i] = v
                fdf[i] = (lp - lm) / (2.0 * h)
            g[key] = fd
        out.append(g)
    return out


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(90210)
    heads = [("identity", 1), ("identity", 2), ("sigmoid", 1), ("softmax", 0)]
    with gate("gradients match finite differences") as info:
        t0 = time.time()
        worst = 0.0
        for trial in range(100):
            in_dim = int(rng.integers(1, 4))
            hidden = int(rng.choice([0, 0, 2, 3]))
            head, out_dim = heads[int(rng.integers(0, len(heads)))]
            if head == "softmax":
                out_dim = int(rng.integers(2, 4))
            mult = bool(hidden and rng.random() < 0.3)
            l1 = float(rng.choice([0.0, 0.003]))
            net = kan.build_network(
                tuple("z%d" % i for i in range(in_dim)),
                hidden_width=hidden, out_dim=out_dim, head=head,
                grid_size=int(rng.integers(3, 6)), seed=trial,
                multiplicative=mult,
            )
            X = rng.uniform(-2.0, 2.0, size=(7, in_dim))
            if head == "identity":
                y = rng.normal(size=(7, out_dim))
            elif head == "sigmoid":
                y = rng.integers(0, 2, size=7).astype(float)
            else:
                y = rng.integers(0, out_dim, size=7)
            _, analytic = kan.param_gradients(net, X, y, l1)
            numeric = _fd_grads(net, X, y, l1)
            for ga, gn in zip(analytic, numeric):
                for key in ("coeffs", "w_b", "w_s"):
                    scale = np.maximum(1.0, np.maximum(np.abs(ga[key]),
                                                       np.abs(gn[key])))
                    rel = np.abs(ga[key] - gn[key]) / scale
                    worst = max(worst, float(rel.max()))
                    assert float(rel.max()) <= 1e-4
        elapsed = time.time() - t0
        info["networks"] = 100
        info["worst_rel"] = worst
        info["secs"] = elapsed
        assert elapsed < 60.0


# --- 2: exact data reconstruction at every simplification stage ---------------

def test_reconstruction_identity_across_stages():
    with gate("reconstruction identity across stages") as info:
        worst = 0.0
        for spec_id in ("chain3_nonlinear", "simpson_symprod"):
            raw, handle = dgp.generate(dgp.DgpSpec(spec_id, n=250, seed=17))
            model = train_model(handle.graph, raw, TINY_GRID, seed=4)
            # wide-open margins force all three stages to materialize
            result = interpret.simplify_pipeline(
                model, raw, margins=(1e9, 1e9), seed=0, n_permutations=19)
            assert [s.name for s in result.stages] == ["raw", "pruned", "symbolic"]
            std = model.standardizer.apply(raw)
            for stage in result.stages:
                res = residuals_std(stage.model, std)
                for node, u in res.items():
                    ghat = stage.model.mechanisms[node].ghat(stage.model.graph, std)
                    dev = float(np.max(np.abs(ghat + u - std[node])))
                    worst = max(worst, dev)
                    assert dev <= 1e-12
        info["datasets"] = 2
        info["max_dev"] = worst


# --- 3: kernel statistics vs direct-formula implementations -------------------

def _median_bw_ref(rows):
    dists = [math.dist(tuple(a), tuple(b))
             for i, a in enumerate(rows) for b in rows[i + 1:]]
    med = float(np.median(dists))
    return med if med > 0 else 1.0


def _gram_ref(A, B, bw):
    K = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            K[i, j] = math.exp(-float(np.sum((a - b) ** 2)) / (2.0 * bw * bw))
    return K


def _mmd2_ref(X, Y):
    bw = _median_bw_ref(list(X) + list(Y))
    return (_gram_ref(X, X, bw).mean() + _gram_ref(Y, Y, bw).mean()
            - 2.0 * _gram_ref(X, Y, bw).mean())


def _hsic_ref(X, Y):
    n = len(X)
    K = _gram_ref(X, X, _median_bw_ref(list(X)))
    L = _gram_ref(Y, Y, _median_bw_ref(list(Y)))
    H = np.eye(n) - 1.0 / n
    return float(np.trace(K @ H @ L @ H)) / n ** 2


def _dhsic_ref(variables):
    n = len(variables[0])
    grams = [_gram_ref(V, V, _median_bw_ref(list(V))) for V in variables]
    joint = np.ones((n, n))
    prod_of_means = 1.0
    row_means = np.ones(n)
    for K in grams:
        joint = joint * K
        prod_of_means *= K.sum() / n ** 2
        row_means = row_means * (K.sum(axis=1) / n)
    return float(joint.sum() / n ** 2 + prod_of_means
                 - 2.0 * row_means.sum() / n)


def test_kernel_statistics_match_direct_formulas():
    rng = np.random.default_rng(424242)
    with gate("kernel statistics match direct formulas") as info:
        worst = 0.0
        checked = 0
        for n in (2, 3, 5, 8):
            for d in (1, 2, 3):
                X = rng.normal(size=(n, d))
                Y = 1.5 * rng.normal(size=(n, d)) + 0.3
                Z = rng.uniform(-1.0, 1.0, size=(n, d))
                devs = (
                    abs(mmd2(X, Y) - _mmd2_ref(X, Y)),
                    abs(mmd2(X, Z) - _mmd2_ref(X, Z)),
                    abs(hsic(X, Y) - _hsic_ref(X, Y)),
                    abs(dhsic([X, Y]) - _hsic_ref(X, Y)),
                    abs(dhsic([X, Y, Z]) - _dhsic_ref([X, Y, Z])),
                )
                for dev in devs:
                    worst = max(worst, float(dev))
                    assert dev <= 1e-10
                checked += len(devs)
        # degenerate sample: constant block exercises the bandwidth floor
        C = np.zeros((4, 2))
        Y4 = rng.normal(size=(4, 2))
        assert abs(hsic(C, Y4) - _hsic_ref(C, Y4)) <= 1e-10
        assert abs(mmd2(C, Y4) - _mmd2_ref(C, Y4)) <= 1e-10
        checked += 2
        info["fixtures"] = checked
        info["max_dev"] = worst


# --- 4: do(x = factual) reproduces the factual rows ----------------------------

@pytest.fixture(scope="module")
def continuous_models():
    out = {}
    for i, spec_id in enumerate(dgp.DGP_IDS):
        raw, handle = dgp.generate(dgp.DgpSpec(spec_id, n=200, seed=300 + i))
        out[spec_id] = (train_model(handle.graph, raw, TINY_GRID, seed=6),
                        raw, handle)
    return out


def test_noop_counterfactuals_reproduce_factuals(continuous_models):
    with gate("no-op counterfactuals reproduce factuals") as info:
        worst = 0.0
        checks = 0
        for spec_id, (model, raw, _) in continuous_models.items():
            graph = model.graph
            for node in graph.names:
                desc = graph.descendants([node])
                for r in (0, 57, 123):
                    factual = {k: np.asarray(v[r:r + 1]) for k, v in raw.items()}
                    iv = Intervention({node: float(raw[node][r])})
                    res = counterfactual(model, factual, iv, seed=13)
                    assert res.point_valued
                    for name in graph.names:
                        dev = abs(float(res.rows.columns[name][0])
                                  - float(raw[name][r]))
                        worst = max(worst, dev)
                        assert dev <= 1e-9
                        if name not in desc:
                            # untouched ancestry must be bit-identical
                            assert res.rows.columns[name][0] == raw[name][r]
                    checks += 1
        info["queries"] = checks
        info["max_dev"] = worst


# --- 5: inverse-CDF categorical sampler vs direct draws ------------------------

def test_inverse_cdf_matches_direct_sampling():
    rng = np.random.default_rng(5150)
    n = 10_000
    with gate("inverse-CDF categorical sampling") as info:
        min_p = 1.0
        for trial in range(20):
            k = int(rng.integers(2, 7))
            probs = rng.dirichlet(np.ones(k)) + 0.02
            probs /= probs.sum()
            via_cdf = sample_categorical(np.tile(probs, (n, 1)),
                                         stream(900 + trial, "cdf"))
            direct = stream(901 + trial, "direct").choice(k, size=n, p=probs)
            table = np.stack([np.bincount(via_cdf, minlength=k),
                              np.bincount(direct, minlength=k)])
            p = chi2_contingency(table)[1]
            min_p = min(min_p, p)
            assert p > 0.01
        info["vectors"] = 20
        info["min_p"] = min_p


# --- 6: categorical descendants gate point-valued counterfactuals --------------

@pytest.fixture(scope="module")
def mixed_models():
    out = {}
    for i, spec_id in enumerate(dgp.DGP_IDS):
        raw, handle = dgp.generate(
            dgp.DgpSpec(spec_id, n=150, seed=500 + i, mixed=True))
        out[spec_id] = (train_model(handle.graph, raw, TINY_GRID, seed=8),
                        raw, handle)
    return out


def test_identifiability_gate_on_mixed_graphs(mixed_models):
    with gate("identifiability gate on mixed graphs") as info:
        rejected = 0
        pointed = 0
        for spec_id, (model, raw, _) in mixed_models.items():
            graph = model.graph
            factual = {k: v[:3] for k, v in raw.items()}
            for node in graph.names:
                has_cat_desc = any(graph.node(d).kind == "categorical"
                                   for d in graph.descendants([node]))
                ok, offenders = counterfactual_identifiable(graph, [node])
                assert ok == (not has_cat_desc)
                value = (1 if graph.node(node).kind == "categorical"
                         else float(raw[node][0]))
                iv = Intervention({node: value})
                if has_cat_desc:
                    assert offenders == ("x3",)
                    with pytest.raises(IdentifiabilityError):
                        counterfactual(model, factual, iv, seed=2)
                    res = counterfactual(model, factual, iv, override=True, seed=2)
                    assert not res.point_valued
                    probs = res.category_probs["x3"]
                    assert probs.shape == (3, 3)
                    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
                    rejected += 1
                else:
                    res = counterfactual(model, factual, iv, seed=2)
                    assert res.point_valued
                    assert not res.category_probs
                    pointed += 1
        assert rejected and pointed
        info["rejected"] = rejected
        info["point_valued"] = pointed


# --- 7: continuous benchmark fidelity ------------------------------------------

@pytest.mark.slow
def test_continuous_benchmark_fidelity():
    with gate("continuous benchmark fidelity") as info:
        t0 = time.time()
        cells = benchmark.run_benchmark(
            benchmark.kacgm_factory(), seeds=TEN_SEEDS, variant="kan")
        cells += benchmark.run_benchmark(
            benchmark.kaam_factory(), seeds=TEN_SEEDS, variant="kaam")
        elapsed = time.time() - t0
        rows = {r["variant"]: r for r in benchmark.aggregate(cells, by=("variant",))}
        for variant in ("kan", "kaam"):
            row = rows[variant]
            assert row["cells"] == 110
            info["%s_rf" % variant] = row["rf_acc_obs"]
            info["%s_mmd" % variant] = row["mmd_obs"]
            info["%s_mae" % variant] = row["mae_cf"]
            assert row["rf_acc_obs"] <= 0.60
            assert row["mmd_obs"] <= 5e-2
            assert row["mae_cf"] <= 0.15
        info["secs"] = elapsed
        assert elapsed < 1800.0


# --- 8: native categorical handling vs rounding a continuous fit ---------------

@pytest.mark.slow
def test_native_categoricals_beat_rounding():
    with gate("native categoricals beat rounding") as info:
        native = benchmark.run_benchmark(
            benchmark.kacgm_factory(), seeds=TEN_SEEDS, mixed=True,
            variant="native")
        rounded = benchmark.run_benchmark(
            benchmark.rounded_factory(), seeds=TEN_SEEDS, mixed=True,
            variant="rounded")
        agg = {r["variant"]: r
               for r in benchmark.aggregate(native + rounded, by=("variant",))}
        nat = agg["native"]["rf_acc_int_mean"]
        rnd = agg["rounded"]["rf_acc_int_mean"]
        info["native_rf_int"] = nat
        info["rounded_rf_int"] = rnd
        assert nat <= rnd + 0.02
        by_cell = {(c.spec_id, c.seed): c.rf_acc_int_mean for c in rounded}
        wins = sum(c.rf_acc_int_mean < by_cell[(c.spec_id, c.seed)]
                   for c in native)
        info["wins"] = "%d/%d" % (wins, len(native))
        assert wins > len(native) / 2


# --- 9: entangled noise shows up in the residual diagnostics -------------------

@pytest.mark.slow
def test_unidentifiable_noise_is_detected():
    alphas = (0.0, 0.25, 0.5, 0.75, 1.0)
    with gate("unidentifiable-noise detection") as info:
        runs = {}
        for alpha in alphas:
            for seed in TEN_SEEDS:
                runs[(alpha, seed)] = benchmark.sensitivity_run(alpha, seed)
        hsic_up = sum(runs[(1.0, s)]["hsic_u3"] > runs[(0.0, s)]["hsic_u3"]
                      for s in TEN_SEEDS)
        mmd_up = sum(runs[(1.0, s)]["mmd_obs"] > runs[(0.0, s)]["mmd_obs"]
                     for s in TEN_SEEDS)
        info["hsic_up"] = "%d/10" % hsic_up
        info["mmd_up"] = "%d/10" % mmd_up
        assert hsic_up >= 9
        assert mmd_up >= 8


# --- 10: observational fit degrades monotonically with sample size -------------

@pytest.mark.slow
def test_mmd_grows_as_samples_shrink():
    with gate("MMD grows as samples shrink") as info:
        cells = benchmark.run_benchmark(
            benchmark.kacgm_factory(), n_values=(1000, 100, 10), seeds=(0,),
            interventions=())
        med = {n: float(np.median([c.mmd_obs for c in cells if c.n == n]))
               for n in (1000, 100, 10)}
        info["mmd_n1000"] = med[1000]
        info["mmd_n100"] = med[100]
        info["mmd_n10"] = med[10]
        assert med[10] > med[100] > med[1000]


# --- 11: staged simplification on a polynomial ground truth --------------------

# stiff single-candidate fit, trained long enough to converge the splines
# onto the generating polynomials (fewer epochs leave a smooth bend that a
# sinusoid atom chases)
POLY_GRID = HyperGrid(hidden=(0,), grid_size=(3,), learning_rates=(0.3,),
                      l1=(0.001,), multiplicative=(False,), epochs=8000,
                      batch_size=0)

POLYNOMIAL_KINDS = {"constant", "linear", "quadratic", "cubic"}


def _polynomial_scm(n, seed):
    """Chain with quadratic and linear mechanisms plus one inert edge.

    The root is uniform so the child splines are constrained across their
    whole grids instead of wandering in sparse gaussian tails.
    """
    graph = CausalGraph(
        nodes=(NodeSpec("x1", "continuous"), NodeSpec("x2", "continuous"),
               NodeSpec("x3", "continuous")),
        edges=(("x1", "x2"), ("x2", "x3"), ("x1", "x3")),
    )
    x1 = stream(seed, "u", "x1").uniform(-2.0, 2.0, n)
    z1 = (x1 - x1.mean()) / x1.std()
    x2 = 1.2 * z1 ** 2 - 0.8 * z1 + 0.4 * stream(seed, "u", "x2").normal(0.0, 1.0, n)
    z2 = (x2 - x2.mean()) / x2.std()
    # x1 -> x3 is declared in the graph but carries no signal: prune bait
    x3 = 0.9 * z2 + 0.3 * stream(seed, "u", "x3").normal(0.0, 1.0, n)
    return graph, {"x1": x1, "x2": x2, "x3": x3}


def test_simplification_gating_on_polynomial_scm():
    with gate("simplification gating on polynomial SCM") as info:
        graph, cols = _polynomial_scm(800, seed=23)
        model = train_model(graph, cols, POLY_GRID, seed=5)
        result = interpret.simplify_pipeline(model, cols, prune_threshold=0.05,
                                             seed=3, n_permutations=49)
        assert [s.name for s in result.stages] == ["raw", "pruned", "symbolic"]
        raw_stage, pruned_stage, sym_stage = result.stages
        assert pruned_stage.accepted and sym_stage.accepted
        # the inert x1 -> x3 edge is the only thing pruning may remove
        assert pruned_stage.details["x3"]["removed_edges"] == 1
        assert pruned_stage.details["x2"]["removed_edges"] == 0

        raw_mmd = float(raw_stage.report.mmd_obs)
        pruned_mmd = float(pruned_stage.report.mmd_obs)
        info["mmd_shift"] = abs(pruned_mmd - raw_mmd) / raw_mmd
        assert abs(pruned_mmd - raw_mmd) < 0.2 * raw_mmd

        min_r2 = 1.0
        for node, rep in sym_stage.details.items():
            for edge in rep["edges"]:
                assert edge["kind"] in POLYNOMIAL_KINDS
                assert edge["r2"] >= 0.99
                min_r2 = min(min_r2, edge["r2"])
        info["min_edge_r2"] = min_r2

        final = result.final
        worst = 0.0
        for node in ("x2", "x3"):
            mech = final.mechanism(node).symbolic
            text = sb.render_formula(mech, decimals=10)
            parsed = sb.parse_formula(text, mech.input_names)
            grid = np.linspace(-3.0, 3.0, 301)
            X = np.column_stack([grid] * len(mech.input_names))
            dev = float(np.max(np.abs(parsed(X) - mech.forward(X))))
            worst = max(worst, dev)
            assert dev <= 1e-3
        info["formula_dev"] = worst


# --- 12: hand-built logistic risk model reproduces its coefficients ------------

def test_logistic_risk_model_reproduction():
    with gate("logistic risk-model reproduction") as info:
        model = make_ischemia_model()
        baseline = {"age": 60.0, "bmi": 27.5, "systolic": 120.0, "diabetes": 0}
        base = interpret.prp(model, "ischemia", baseline)
        assert abs(base.total - (-1.871)) <= 1e-12
        assert all(abs(v) <= 1e-12 for v in base.contributions.values())
        prob = 1.0 / (1.0 + math.exp(-base.total))
        info["baseline_prob"] = prob
        assert abs(prob - 0.1334) <= 5e-5

        # the mechanism's own forward pass agrees with the decomposition
        mech = model.mechanism("ischemia").symbolic
        row = np.array([[0.0, 0.0, 0.0, 1.0, 0.0]])
        assert abs(float(mech.forward(row)[0, 0]) - prob) <= 1e-12

        # +/- one standard deviation pins each published coefficient
        hi = interpret.prp(model, "ischemia",
                           {"age": 70.0, "bmi": 32.5, "systolic": 140.0,
                            "diabetes": 1})
        lo = interpret.prp(model, "ischemia",
                           {"age": 50.0, "bmi": 22.5, "systolic": 100.0,
                            "diabetes": 0})
        published = {"age": (0.055, 0.173), "bmi": (0.031, 0.114),
                     "systolic": (0.046, 0.155)}
        for name, (quad, lin) in published.items():
            up, dn = hi.contributions[name], lo.contributions[name]
            assert abs((up + dn) / 2.0 - quad) <= 1e-12
            assert abs((up - dn) / 2.0 - lin) <= 1e-12
        assert abs(hi.contributions["diabetes"] - 0.743) <= 1e-12
        assert abs(lo.contributions["diabetes"]) <= 1e-12
        assert abs(hi.intercept - (-1.871)) <= 1e-12
        info["coefficients"] = 8
