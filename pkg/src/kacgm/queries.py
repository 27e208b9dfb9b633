"""Observational, interventional and counterfactual queries on a model.

Sampling propagates noise through mechanisms in topological order; an
intervention clamps its nodes and leaves everything else untouched.  Every
node consumes its own named random stream, so intervening on one node never
shifts the draws of another — an empty intervention is bit-identical to
observational sampling, and non-descendants of the intervention set keep
their observational distribution exactly.

Counterfactuals follow abduction–action–prediction: residual noise is read
off the factual rows, intervened nodes are clamped, and descendants are
re-evaluated reusing the abducted noise.  Point values exist only when every
strict descendant of the intervention set is continuous; otherwise the call
must opt in to receive per-row category probability vectors instead.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import SampleBatch, n_rows, validate_columns
from .errors import ConfigError, IdentifiabilityError, InputDomainError
from .graph import CATEGORICAL, CONTINUOUS
from .rng import stream


@dataclass(frozen=True)
class Intervention:
    """do() assignment: node name -> clamped value.

    Continuous values are raw units by default; ``standardized=True`` reads
    them as standardized units instead.  Categorical values are level
    indices either way.
    """

    assignments: dict
    standardized: bool = False

    def __post_init__(self):
        if not isinstance(self.assignments, dict):
            raise ConfigError("assignments must be a dict of node -> value")

    @property
    def nodes(self):
        return tuple(self.assignments)

    def is_empty(self):
        return not self.assignments

    def validate(self, graph):
        for name, value in self.assignments.items():
            if name not in graph.names:
                raise ConfigError("intervention on unknown node %r" % (name,))
            spec = graph.node(name)
            if spec.kind == CATEGORICAL:
                iv = int(value)
                if iv != value or not 0 <= iv < spec.levels:
                    raise InputDomainError(
                        "intervention on %r needs a level index in [0, %d)"
                        % (name, spec.levels)
                    )
            elif not np.isfinite(float(value)):
                raise InputDomainError("intervention on %r must be finite" % (name,))


def categorical_inverse_cdf(probs, u):
    """min{k : u <= F(k)} for the CDF F of a probability vector."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0:
        raise InputDomainError("probability vector must be 1-d and non-empty")
    if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
        raise InputDomainError("probabilities must be nonnegative and sum to 1")
    if not 0.0 < u < 1.0:
        raise InputDomainError("u must lie in (0, 1)")
    cdf = np.cumsum(probs)
    return int(np.searchsorted(cdf, u, side="left"))


def sample_categorical(probs, rng):
    """One inverse-CDF level draw per row of a probability matrix."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.uniform(0.0, 1.0, size=probs.shape[0])
    idx = (u[:, None] > cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1).astype(np.int64)


def _std_assignment(model, name, value, standardized):
    spec = model.graph.node(name)
    if spec.kind == CATEGORICAL:
        return int(value)
    if standardized:
        return float(value)
    return model.standardizer.apply_value(name, float(value))


def _raw_assignment(model, name, value, standardized):
    spec = model.graph.node(name)
    if spec.kind == CATEGORICAL:
        return int(value)
    if standardized:
        return model.standardizer.invert_value(name, float(value))
    return float(value)


def _sample(model, intervention, n, seed):
    graph = model.graph
    std_cols = {}
    raw_cols = {}
    for name in graph.topological_order():
        spec = graph.node(name)
        if name in intervention.assignments:
            value = intervention.assignments[name]
            if spec.kind == CATEGORICAL:
                level = int(value)
                std_cols[name] = np.full(n, level, dtype=np.int64)
                raw_cols[name] = std_cols[name]
            else:
                std_cols[name] = np.full(
                    n, _std_assignment(model, name, value, intervention.standardized)
                )
                raw_cols[name] = np.full(
                    n, _raw_assignment(model, name, value, intervention.standardized)
                )
            continue
        mech = model.mechanisms[name]
        rng = stream(seed, "noise", name)
        if spec.kind == CONTINUOUS:
            ghat = mech.ghat(graph, std_cols, n=n)
            u = model.noise[name].draw(n, rng)
            std_cols[name] = ghat + u
            raw_cols[name] = model.standardizer.invert({name: std_cols[name]})[name]
        else:
            probs = mech.category_probs(graph, std_cols, n=n)
            std_cols[name] = sample_categorical(probs, rng)
            raw_cols[name] = std_cols[name]
    return raw_cols


def sample_observational(model, n, seed=0):
    """Draw n rows from the learned observational distribution (raw units)."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    raw = _sample(model, Intervention({}), n, seed)
    return SampleBatch(model.graph, raw, provenance=("observational",))


def sample_interventional(model, intervention, n, seed=0):
    """Draw n rows under do(intervention); raw units."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    intervention.validate(model.graph)
    raw = _sample(model, intervention, n, seed)
    return SampleBatch(model.graph, raw, provenance=("interventional", intervention))


def counterfactual_identifiable(graph, intervention_nodes):
    """Point values exist iff no strict descendant of the set is categorical."""
    if isinstance(intervention_nodes, Intervention):
        intervention_nodes = intervention_nodes.nodes
    desc = graph.descendants(intervention_nodes)
    offenders = tuple(
        name for name in graph.names
        if name in desc and graph.node(name).kind == CATEGORICAL
    )
    return not offenders, offenders


@dataclass
class CfResult:
    """Counterfactual rows plus the abducted noise that produced them."""

    rows: SampleBatch
    point_valued: bool
    abducted_noise: dict
    category_probs: dict = field(default_factory=dict)


def counterfactual(model, factual, intervention, override=False, seed=0):
    """Abduction-action-prediction counterfactual of factual rows.

    ``factual`` is a full set of raw-unit columns (or a SampleBatch).  When
    the intervention has categorical descendants, point values do not exist;
    with ``override=True`` those nodes are reported as per-row probability
    vectors (a seeded draw fills the output column so downstream mechanisms
    can still propagate), otherwise the call fails.
    """
    if isinstance(factual, SampleBatch):
        factual = factual.columns
    graph = model.graph
    columns = validate_columns(graph, factual)
    n = n_rows(columns)
    intervention.validate(graph)

    identifiable, offenders = counterfactual_identifiable(graph, intervention.nodes)
    if not identifiable and not override:
        raise IdentifiabilityError(
            "point-valued counterfactuals are not identifiable: categorical "
            "descendant(s) %s of the intervention set; pass override=True to "
            "receive probability vectors for them" % (", ".join(offenders),),
            offenders=offenders,
        )

    std_factual = model.standardizer.apply(columns)
    noise = {}
    for name in model.continuous_nodes():
        mech = model.mechanisms[name]
        noise[name] = np.asarray(std_factual[name], float) - mech.ghat(graph, std_factual)

    descendants = graph.descendants(intervention.nodes)
    std_cf = {}
    raw_cf = {}
    category_probs = {}
    for name in graph.topological_order():
        spec = graph.node(name)
        if name in intervention.assignments:
            value = intervention.assignments[name]
            if spec.kind == CATEGORICAL:
                std_cf[name] = np.full(n, int(value), dtype=np.int64)
                raw_cf[name] = std_cf[name]
            else:
                std_cf[name] = np.full(
                    n, _std_assignment(model, name, value, intervention.standardized)
                )
                raw_cf[name] = np.full(
                    n, _raw_assignment(model, name, value, intervention.standardized)
                )
        elif name not in descendants:
            std_cf[name] = std_factual[name]
            raw_cf[name] = columns[name]  # bit-equal to the factual column
        elif spec.kind == CONTINUOUS:
            mech = model.mechanisms[name]
            std_cf[name] = mech.ghat(graph, std_cf) + noise[name]
            raw_cf[name] = model.standardizer.invert({name: std_cf[name]})[name]
        else:
            mech = model.mechanisms[name]
            probs = mech.category_probs(graph, std_cf)
            category_probs[name] = probs
            std_cf[name] = sample_categorical(probs, stream(seed, "cf", name))
            raw_cf[name] = std_cf[name]

    batch = SampleBatch(graph, raw_cf, provenance=("counterfactual", intervention))
    return CfResult(
        rows=batch,
        point_valued=identifiable,
        abducted_noise=noise,
        category_probs=category_probs,
    )
