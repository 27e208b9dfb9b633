"""Model simplification and audit products.

Covers the path from a trained model to something a person can read:
preferring shallow candidates when scores are statistically tied, pruning
low-importance edges, substituting analytic atoms for the surviving spline
edges (with falsification gating between stages), and the per-mechanism
audit products — partial dependence curves, treatment effects read off
them, per-parent decompositions of a logit, and closed-form formula text.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import kan
from .data import encoded_width, n_rows, validate_columns
from .diagnostics import falsify
from .errors import (
    ConfigError,
    InputDomainError,
    UnsupportedDecompositionError,
)
from .rng import substream_seed
from .scm import refit_noise
from .symbolic import SymbolicLayer, SymbolicMechanism, fit_symbolic_edge, zero_atom

#: stage acceptance margins: relative MMD growth, absolute RF accuracy growth
DEFAULT_MARGINS = (0.20, 0.03)

DEFAULT_PRUNE_THRESHOLD = 0.01


def select_simplest(candidates):
    """Pick the simplest network whose score is statistically tied with the best.

    ``candidates`` holds ``(network, score, standard_error)`` triples with
    lower scores better.  Everything within one standard error of the best
    score is considered tied; ties go to fewer hidden layers, then fewer
    parameters.
    """
    if not candidates:
        raise ConfigError("select_simplest needs at least one candidate")
    triples = [(net, float(score), float(se)) for net, score, se in candidates]
    best_score, best_se = min(((s, se) for _, s, se in triples),
                              key=lambda t: t[0])
    cutoff = best_score + best_se
    eligible = [(net, s) for net, s, _ in triples if s <= cutoff]
    chosen, _ = min(
        eligible,
        key=lambda ns: (ns[0].n_hidden_layers, ns[0].n_params()),
    )
    return chosen


# --- input encoding ----------------------------------------------------------

def _encoded_inputs(model, node, columns):
    """Matrix matching a mechanism's input labels: standardized + one-hot."""
    mech = model.mechanism(node)
    std = model.standardizer.apply(columns)
    cols = []
    for label in mech.input_labels:
        if "=" in label:
            name, level = label.rsplit("=", 1)
            cols.append((np.asarray(columns[name]) == int(level)).astype(float))
        else:
            cols.append(np.asarray(std[label], dtype=float))
    return np.column_stack(cols) if cols else np.empty((n_rows(columns), 0))


def _predictor_logits(predictor, X):
    if isinstance(predictor, SymbolicMechanism):
        return predictor.logits(X)
    return kan.network_logits(predictor, X)


def _edge_value(predictor, q, z):
    """Evaluate a zero-hidden-layer predictor's edge q -> output 0."""
    z = np.asarray(z, dtype=float)
    if isinstance(predictor, SymbolicMechanism):
        return predictor.layers[0].atoms[q][0](z)
    return kan.edge_eval(predictor.layers[0].edge(q, 0), z)


def _is_additive(predictor):
    kinds = [k for layer in predictor.layers for k in layer.node_kinds]
    return (predictor.n_hidden_layers == 0 and predictor.out_dim == 1
            and "product" not in kinds)


# --- partial dependence -------------------------------------------------------

@dataclass(frozen=True)
class PdpCurve:
    """Contribution of one parent to a node's output (or logit)."""

    node: str
    parent: str
    grid: np.ndarray
    delta: np.ndarray
    baseline: str

    def to_dict(self):
        return {
            "node": self.node,
            "parent": self.parent,
            "grid": [float(v) for v in self.grid],
            "delta": [float(v) for v in self.delta],
            "baseline": self.baseline,
        }


def _default_grid(model, parent, n_points):
    m = model.standardizer.mean(parent)
    s = model.standardizer.std(parent)
    return np.linspace(m - 2.0 * s, m + 2.0 * s, n_points)


def pdp(model, node, parent, grid=None, data=None, n_points=41, ref=None):
    """Partial dependence of ``node``'s output on one continuous parent.

    For additive mechanisms the curve is the parent's own edge contribution;
    for deeper networks it is the average output change over ``data`` when
    the parent column is set to each grid value.  Values are relative to the
    reference point (the grid midpoint unless ``ref`` is given), on the
    pre-head scale (the logit for sigmoid/softmax heads).
    """
    mech = model.mechanism(node)
    if parent not in mech.parents:
        raise ConfigError("%r is not a parent of %r" % (parent, node))
    if model.graph.node(parent).kind != "continuous":
        raise ConfigError("partial dependence requires a continuous parent")
    predictor = mech.predictor()
    if predictor is None:
        raise ConfigError("node %r has no fitted mechanism" % (node,))
    if predictor.out_dim != 1:
        raise ConfigError("partial dependence requires a single-output head")

    if grid is None:
        grid = _default_grid(model, parent, n_points)
    else:
        grid = np.asarray(grid, dtype=float).ravel()
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ConfigError("grid must be strictly increasing")
    if ref is None:
        ref = 0.5 * (grid[0] + grid[-1])
    m = model.standardizer.mean(parent)
    s = model.standardizer.std(parent)
    ref_std = (float(ref) - m) / s
    grid_std = (grid - m) / s

    if _is_additive(predictor):
        q = mech.input_labels.index(parent)
        delta = _edge_value(predictor, q, grid_std) - _edge_value(predictor, q, ref_std)
    else:
        if data is None:
            raise ConfigError(
                "partial dependence on a non-additive mechanism needs data"
            )
        X = _encoded_inputs(model, node, validate_columns(model.graph, data))
        q = mech.input_labels.index(parent)
        base = X.copy()
        base[:, q] = ref_std
        ref_out = _predictor_logits(predictor, base)[:, 0]
        delta = np.empty(grid.size)
        for i, v in enumerate(grid_std):
            base[:, q] = v
            delta[i] = float(np.mean(_predictor_logits(predictor, base)[:, 0] - ref_out))

    return PdpCurve(
        node=node, parent=parent, grid=grid, delta=np.asarray(delta, dtype=float),
        baseline="reference %s = %.6g (raw units)" % (parent, float(ref)),
    )


def ate_from_pdp(curve, from_value, to_value):
    """Average treatment effect read off a partial dependence curve."""
    lo, hi = float(curve.grid[0]), float(curve.grid[-1])
    for v in (from_value, to_value):
        if not lo <= float(v) <= hi:
            raise InputDomainError(
                "value %r outside the curve grid [%g, %g]" % (v, lo, hi)
            )
    d_to = float(np.interp(float(to_value), curve.grid, curve.delta))
    d_from = float(np.interp(float(from_value), curve.grid, curve.delta))
    return d_to - d_from


# --- per-parent decomposition --------------------------------------------------

@dataclass(frozen=True)
class PrpDecomposition:
    """Additive split of a mechanism's head input across its parents."""

    node: str
    row_id: object
    contributions: dict
    intercept: float
    total: float

    def to_dict(self):
        return {
            "node": self.node,
            "row_id": self.row_id,
            "contributions": {k: float(v) for k, v in self.contributions.items()},
            "intercept": float(self.intercept),
            "total": float(self.total),
        }


def prp(model, node, row, row_id=None):
    """Per-parent contribution to the node's head input for one row.

    Contributions are relative to the reference point (all continuous
    parents at their mean, categorical encodings zeroed); they and the
    intercept sum exactly to the pre-head activation.  Only additive
    mechanisms decompose this way.
    """
    mech = model.mechanism(node)
    predictor = mech.predictor()
    if predictor is None:
        raise ConfigError("node %r has no fitted mechanism" % (node,))
    if not _is_additive(predictor):
        raise UnsupportedDecompositionError(
            "mechanism for %r is not additive; per-parent decomposition "
            "is defined only for zero-hidden-layer sum networks" % (node,)
        )
    missing = [p for p in mech.parents if p not in row]
    if missing:
        raise ConfigError("row is missing parents: %s" % (", ".join(missing),))

    contributions = {}
    intercept = 0.0
    total = 0.0
    for q, label in enumerate(mech.input_labels):
        if "=" in label:
            name, level = label.rsplit("=", 1)
            z = 1.0 if int(row[name]) == int(level) else 0.0
        else:
            name = label
            z = model.standardizer.apply_value(name, float(row[name]))
        at_row = float(_edge_value(predictor, q, z))
        at_ref = float(_edge_value(predictor, q, 0.0))
        contributions[name] = contributions.get(name, 0.0) + (at_row - at_ref)
        intercept += at_ref
        total += at_row
    return PrpDecomposition(
        node=node,
        row_id=row_id,
        contributions=contributions,
        intercept=float(intercept),
        total=float(total),
    )


# --- symbolic substitution -----------------------------------------------------

def _edge_sample_range(predictor, li, q):
    if isinstance(predictor, SymbolicMechanism):
        return (-3.0, 3.0)
    grid = predictor.layers[li].grids[q]
    return (grid.lo, grid.hi)


def symbolic_substitute(model, node, n_points=256, kinds=None):
    """Replace every surviving spline edge of a mechanism with an atom.

    Returns the symbolic mechanism plus a per-edge r2 report; edges fitting
    worse than r2 = 0.5 are flagged with a warning in the report rather
    than rejected.
    """
    mech = model.mechanism(node)
    predictor = mech.predictor()
    if predictor is None:
        raise ConfigError("node %r has no mechanism to substitute" % (node,))
    if n_points < 10:
        raise ConfigError("need at least 10 sample points per edge")

    layers = []
    edges = []
    warnings = []
    for li, layer in enumerate(predictor.layers):
        atoms = []
        for q in range(layer.in_dim):
            row = []
            for r in range(layer.out_dim):
                lo, hi = _edge_sample_range(predictor, li, q)
                z = np.linspace(lo, hi, n_points)
                if isinstance(predictor, SymbolicMechanism):
                    y = layer.atoms[q][r](z)
                    # constant atoms carry their value in d, so an edge is
                    # dead only when both scale and offset vanish
                    old = layer.atoms[q][r]
                    dead = old.c == 0.0 and old.d == 0.0
                else:
                    edge = layer.edge(q, r)
                    dead = edge.w_b == 0.0 and edge.w_s == 0.0
                    y = kan.edge_eval(edge, z)
                if dead:
                    atom = zero_atom()
                else:
                    atom = fit_symbolic_edge(z, y, kinds=kinds)
                row.append(atom)
                edges.append({"layer": li, "in": q, "out": r,
                              "kind": atom.kind, "r2": float(atom.r2)})
                if not dead and atom.r2 < 0.5:
                    warnings.append(
                        "edge (%d, %d, %d) fit poorly: %s r2=%.3f"
                        % (li, q, r, atom.kind, atom.r2)
                    )
            atoms.append(row)
        layers.append(SymbolicLayer(atoms, layer.node_kinds))
    symbolic = SymbolicMechanism(mech.input_labels, layers, head=predictor.head)
    report = {"node": node, "edges": edges, "warnings": warnings}
    return symbolic, report


# --- staged simplification -----------------------------------------------------

@dataclass
class StageResult:
    name: str
    model: object
    report: object             # diagnostics.TestReport
    accepted: bool
    details: dict = field(default_factory=dict)


@dataclass
class SimplifyResult:
    stages: list

    @property
    def final(self):
        accepted = [s for s in self.stages if s.accepted]
        return accepted[-1].model

    @property
    def accepted_names(self):
        return tuple(s.name for s in self.stages if s.accepted)


def _stage_metrics(report):
    return float(report.mmd_obs), float(report.rf_acc_obs)


def _within_margins(report, baseline, margins):
    mmd, rf = _stage_metrics(report)
    mmd0, rf0 = baseline
    rel, absolute = margins
    return mmd <= mmd0 * (1.0 + rel) and rf <= rf0 + absolute


def simplify_pipeline(model, data, prune_threshold=DEFAULT_PRUNE_THRESHOLD,
                      margins=DEFAULT_MARGINS, seed=0, n_permutations=199):
    """Prune, then substitute symbolically, gating each stage on diagnostics.

    Each stage (the raw baseline included) refits the noise models on
    ``data`` and re-runs falsification with the same seed, so metric changes
    reflect the mechanisms alone.  A stage is kept only when neither the
    observational MMD nor the two-sample classifier accuracy degrades beyond
    ``margins`` relative to the last accepted stage; the first rejected
    stage stops the pipeline.
    """
    data = validate_columns(model.graph, data)
    fseed = substream_seed(seed, "falsify")

    model = model.with_stage(model.stage, model.mechanisms,
                             refit_noise(model, data))
    raw_report = falsify(model, data, n_permutations=n_permutations, seed=fseed)
    stages = [StageResult("raw", model, raw_report, accepted=True)]
    baseline = _stage_metrics(raw_report)

    # stage 1: prune low-importance edges, refit noise, revalidate
    pruned_mechs = {}
    prune_details = {}
    for name in model.graph.topological_order():
        mech = model.mechanism(name)
        if mech.is_root or mech.network is None:
            pruned_mechs[name] = mech
            continue
        X = _encoded_inputs(model, name, data)
        net, preport = kan.prune(mech.network, prune_threshold, X)
        pruned_mechs[name] = replace(mech, network=net, symbolic=None)
        prune_details[name] = {
            "removed_edges": len(preport.removed_edges),
            "removed_nodes": len(preport.removed_nodes),
            "max_output_deviation": preport.max_output_deviation,
        }
    pruned = model.with_stage("pruned", pruned_mechs, model.noise)
    pruned = model.with_stage("pruned", pruned_mechs, refit_noise(pruned, data))
    pruned_report = falsify(pruned, data, n_permutations=n_permutations, seed=fseed)
    ok = _within_margins(pruned_report, baseline, margins)
    stages.append(StageResult("pruned", pruned, pruned_report, accepted=ok,
                              details=prune_details))
    if not ok:
        return SimplifyResult(stages)
    baseline = _stage_metrics(pruned_report)

    # stage 2: symbolic substitution on the pruned model
    sym_mechs = {}
    sym_details = {}
    for name in pruned.graph.topological_order():
        mech = pruned.mechanism(name)
        if mech.is_root or mech.predictor() is None:
            sym_mechs[name] = mech
            continue
        symbolic, sreport = symbolic_substitute(pruned, name)
        sym_mechs[name] = replace(mech, symbolic=symbolic)
        sym_details[name] = sreport
    sym = pruned.with_stage("symbolic", sym_mechs, pruned.noise)
    sym = pruned.with_stage("symbolic", sym_mechs, refit_noise(sym, data))
    sym_report = falsify(sym, data, n_permutations=n_permutations, seed=fseed)
    ok = _within_margins(sym_report, baseline, margins)
    stages.append(StageResult("symbolic", sym, sym_report, accepted=ok,
                              details=sym_details))
    return SimplifyResult(stages)
