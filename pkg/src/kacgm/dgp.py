"""Ground-truth synthetic data generators and their oracles.

Eleven benchmark graphs combining linear and nonlinear structural
equations, all with standard Gaussian exogenous noise.  Each generated
column is standardized (with the batch's own mean/std) before it feeds the
next equation; the batch standardizers are recorded in a handle so the true
SCM stays exact for that batch.  The handle answers interventional and
counterfactual queries by inverting each mechanism for its noise, which
makes it the reference against which trained models are scored.

A mixed-type twin of every graph replaces x3 with a ternary draw whose
probability vector depends on the standardized continuous value, and a
separate three-variable family with a nonadditivity knob ``alpha`` supports
sensitivity analysis of the additive-noise assumption.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import n_rows, validate_columns
from .errors import ConfigError, InputDomainError
from .graph import CausalGraph, NodeSpec
from .queries import sample_categorical
from .rng import stream, substream_seed

DGP_IDS = (
    "chain3_linear",
    "chain3_nonlinear",
    "chain4_linear",
    "chain5_linear",
    "collider_linear",
    "fork_linear",
    "fork_nonlinear",
    "simpson_nonlinear",
    "simpson_symprod",
    "triangle_linear",
    "triangle_nonlinear",
)

#: ternary regime probabilities for the mixed-type variant of x3
_TERNARY_LOW = np.array([0.8, 0.1, 0.1])   # standardized x3 < -1
_TERNARY_MID = np.array([0.1, 0.8, 0.1])   # -1 <= x3 <= 1 (boundaries inclusive)
_TERNARY_HIGH = np.array([0.1, 0.1, 0.8])  # standardized x3 > 1


@dataclass(frozen=True)
class DgpSpec:
    id: str
    n: int
    seed: int = 0
    mixed: bool = False

    def __post_init__(self):
        if self.id not in DGP_IDS:
            raise ConfigError("unknown dataset id %r" % (self.id,))
        if self.n < 1:
            raise ConfigError("n must be positive")


@dataclass(frozen=True)
class SensitivityConfig:
    alpha: float
    n: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.n < 1:
            raise ConfigError("n must be positive")


@dataclass(frozen=True)
class _Equation:
    """One structural equation: raw value from standardized parents + noise."""

    node: str
    parents: tuple
    fn: object                    # fn(std_parent_cols, u) -> raw column
    inv: object                   # inv(std_parent_cols, raw column) -> u, or None
    text: str


def _eqs_chain3_linear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",), lambda p, u: 10.0 * p["x1"] - u,
                  lambda p, x: 10.0 * p["x1"] - x, "x2 = 10*x1 - u2"),
        _Equation("x3", ("x2",), lambda p, u: 0.25 * p["x2"] + 2.0 * u,
                  lambda p, x: (x - 0.25 * p["x2"]) / 2.0, "x3 = 0.25*x2 + 2*u3"),
    ]


def _eqs_chain3_nonlinear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",), lambda p, u: np.exp(0.5 * p["x1"]) + 0.25 * u,
                  lambda p, x: (x - np.exp(0.5 * p["x1"])) / 0.25,
                  "x2 = exp(0.5*x1) + 0.25*u2"),
        _Equation("x3", ("x2",), lambda p, u: (p["x2"] - 5.0) ** 3 / 15.0 + u,
                  lambda p, x: x - (p["x2"] - 5.0) ** 3 / 15.0,
                  "x3 = (x2 - 5)^3/15 + u3"),
    ]


def _eqs_chain4_linear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",), lambda p, u: 5.0 * p["x1"] - u,
                  lambda p, x: 5.0 * p["x1"] - x, "x2 = 5*x1 - u2"),
        _Equation("x3", ("x2",), lambda p, u: -0.5 * p["x2"] - 1.5 * u,
                  lambda p, x: (-0.5 * p["x2"] - x) / 1.5,
                  "x3 = -0.5*x2 - 1.5*u3"),
        _Equation("x4", ("x3",), lambda p, u: p["x3"] + u,
                  lambda p, x: x - p["x3"], "x4 = x3 + u4"),
    ]


def _eqs_chain5_linear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",), lambda p, u: 10.0 * p["x1"] - u,
                  lambda p, x: 10.0 * p["x1"] - x, "x2 = 10*x1 - u2"),
        _Equation("x3", ("x2",), lambda p, u: 0.25 * p["x2"] + 2.0 * u,
                  lambda p, x: (x - 0.25 * p["x2"]) / 2.0, "x3 = 0.25*x2 + 2*u3"),
        _Equation("x4", ("x3",), lambda p, u: p["x3"] + u,
                  lambda p, x: x - p["x3"], "x4 = x3 + u4"),
        _Equation("x5", ("x4",), lambda p, u: -p["x4"] + u,
                  lambda p, x: x + p["x4"], "x5 = -x4 + u5"),
    ]


def _eqs_collider_linear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", (), lambda p, u: 2.0 - u, lambda p, x: 2.0 - x, "x2 = 2 - u2"),
        _Equation("x3", ("x1", "x2"),
                  lambda p, u: 0.25 * p["x2"] - 0.5 * p["x1"] + 0.5 * u,
                  lambda p, x: (x - 0.25 * p["x2"] + 0.5 * p["x1"]) / 0.5,
                  "x3 = 0.25*x2 - 0.5*x1 + 0.5*u3"),
    ]


def _eqs_fork_linear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", (), lambda p, u: 2.0 - u, lambda p, x: 2.0 - x, "x2 = 2 - u2"),
        _Equation("x3", ("x1", "x2"),
                  lambda p, u: 0.25 * p["x2"] - 1.5 * p["x1"] + 0.5 * u,
                  lambda p, x: (x - 0.25 * p["x2"] + 1.5 * p["x1"]) / 0.5,
                  "x3 = 0.25*x2 - 1.5*x1 + 0.5*u3"),
        _Equation("x4", ("x3",), lambda p, u: p["x3"] + 0.25 * u,
                  lambda p, x: (x - p["x3"]) / 0.25, "x4 = x3 + 0.25*u4"),
    ]


def _eqs_fork_nonlinear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", (), lambda p, u: u, lambda p, x: x, "x2 = u2"),
        _Equation("x3", ("x1", "x2"),
                  lambda p, u: 4.0 / (1.0 + np.exp(-p["x1"] - p["x2"]))
                  - p["x2"] ** 2 + 0.5 * u,
                  lambda p, x: (x - 4.0 / (1.0 + np.exp(-p["x1"] - p["x2"]))
                                + p["x2"] ** 2) / 0.5,
                  "x3 = 4/(1 + exp(-x1 - x2)) - x2^2 + 0.5*u3"),
        _Equation("x4", ("x3",),
                  lambda p, u: 20.0 / (1.0 + np.exp(0.5 * p["x3"] ** 2 - p["x3"])) + u,
                  lambda p, x: x - 20.0 / (1.0 + np.exp(0.5 * p["x3"] ** 2 - p["x3"])),
                  "x4 = 20/(1 + exp(0.5*x3^2 - x3)) + u4"),
    ]


def _inv_tanh_noise(p, x):
    arg = x - (np.tanh(2.0 * p["x2"]) + 1.5 * p["x1"] - 1.0)
    if np.any(np.abs(arg) >= 1.0):
        raise InputDomainError(
            "cannot invert tanh noise: residual outside (-1, 1)"
        )
    return np.arctanh(arg)


def _eqs_simpson_nonlinear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",),
                  lambda p, u: np.logaddexp(0.0, 1.0 - p["x1"]) + np.sqrt(3.0 / 20.0) * u,
                  lambda p, x: (x - np.logaddexp(0.0, 1.0 - p["x1"])) / np.sqrt(3.0 / 20.0),
                  "x2 = log(1 + exp(1 - x1)) + sqrt(3/20)*u2"),
        _Equation("x3", ("x1", "x2"),
                  lambda p, u: np.tanh(2.0 * p["x2"]) + 1.5 * p["x1"] - 1.0 + np.tanh(u),
                  _inv_tanh_noise,
                  "x3 = tanh(2*x2) + 1.5*x1 - 1 + tanh(u3)"),
        _Equation("x4", ("x3",),
                  lambda p, u: (p["x3"] - 4.0) / 5.0 + 3.0 + u / np.sqrt(10.0),
                  lambda p, x: (x - (p["x3"] - 4.0) / 5.0 - 3.0) * np.sqrt(10.0),
                  "x4 = (x3 - 4)/5 + 3 + u4/sqrt(10)"),
    ]


def _eqs_simpson_symprod():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",),
                  lambda p, u: 2.0 * np.tanh(2.0 * p["x1"]) + u / np.sqrt(10.0),
                  lambda p, x: (x - 2.0 * np.tanh(2.0 * p["x1"])) * np.sqrt(10.0),
                  "x2 = 2*tanh(2*x1) + u2/sqrt(10)"),
        _Equation("x3", ("x1", "x2"),
                  lambda p, u: 0.5 * p["x1"] * p["x2"] + u / np.sqrt(2.0),
                  lambda p, x: (x - 0.5 * p["x1"] * p["x2"]) * np.sqrt(2.0),
                  "x3 = 0.5*x1*x2 + u3/sqrt(2)"),
        _Equation("x4", ("x1",),
                  lambda p, u: np.tanh(1.5 * p["x1"]) + np.sqrt(3.0 / 10.0) * u,
                  lambda p, x: (x - np.tanh(1.5 * p["x1"])) / np.sqrt(3.0 / 10.0),
                  "x4 = tanh(1.5*x1) + sqrt(3/10)*u4"),
    ]


def _eqs_triangle_linear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",), lambda p, u: 10.0 * p["x1"] - u,
                  lambda p, x: 10.0 * p["x1"] - x, "x2 = 10*x1 - u2"),
        _Equation("x3", ("x1", "x2"),
                  lambda p, u: 0.5 * p["x2"] + p["x1"] + u,
                  lambda p, x: x - 0.5 * p["x2"] - p["x1"],
                  "x3 = 0.5*x2 + x1 + u3"),
    ]


def _eqs_triangle_nonlinear():
    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",), lambda p, u: 2.0 * p["x1"] ** 2 + u,
                  lambda p, x: x - 2.0 * p["x1"] ** 2, "x2 = 2*x1^2 + u2"),
        _Equation("x3", ("x1", "x2"),
                  lambda p, u: 20.0 / (1.0 + np.exp(-p["x2"] ** 2 + p["x1"])) + u,
                  lambda p, x: x - 20.0 / (1.0 + np.exp(-p["x2"] ** 2 + p["x1"])),
                  "x3 = 20/(1 + exp(-x2^2 + x1)) + u3"),
    ]


_EQUATIONS = {
    "chain3_linear": _eqs_chain3_linear,
    "chain3_nonlinear": _eqs_chain3_nonlinear,
    "chain4_linear": _eqs_chain4_linear,
    "chain5_linear": _eqs_chain5_linear,
    "collider_linear": _eqs_collider_linear,
    "fork_linear": _eqs_fork_linear,
    "fork_nonlinear": _eqs_fork_nonlinear,
    "simpson_nonlinear": _eqs_simpson_nonlinear,
    "simpson_symprod": _eqs_simpson_symprod,
    "triangle_linear": _eqs_triangle_linear,
    "triangle_nonlinear": _eqs_triangle_nonlinear,
}


def equations(dgp_id):
    if dgp_id not in _EQUATIONS:
        raise ConfigError("unknown dataset id %r" % (dgp_id,))
    return _EQUATIONS[dgp_id]()


def mechanism_text(dgp_id):
    """The structural equation strings, keyed by node."""
    return {eq.node: eq.text for eq in equations(dgp_id)}


def dgp_graph(dgp_id, mixed=False):
    eqs = equations(dgp_id)
    nodes = []
    for eq in eqs:
        if mixed and eq.node == "x3":
            nodes.append(NodeSpec("x3", "categorical", levels=3))
        else:
            nodes.append(NodeSpec(eq.node, "continuous"))
    edges = []
    for eq in eqs:
        edges.extend((p, eq.node) for p in eq.parents)
    return CausalGraph(nodes=tuple(nodes), edges=tuple(edges))


def discretize_x3(values, seed):
    """Ternary draw from the regime probability vectors of standardized x3."""
    values = np.asarray(values, dtype=float)
    probs = np.tile(_TERNARY_MID, (values.size, 1))
    probs[values < -1.0] = _TERNARY_LOW
    probs[values > 1.0] = _TERNARY_HIGH
    return sample_categorical(probs, stream(seed, "discretize"))


def _standardize_column(values, stats):
    m, s = stats
    return (values - m) / s


def _run(eqs, n, seed, mixed, frozen_stats=None, frozen_latent=None,
         standardize=True, noise=None, intervention=None, stats_out=None,
         latent_out=None):
    """Shared propagation engine for generation and oracle queries.

    ``frozen_stats``/``frozen_latent`` reuse a previous batch's
    standardizers (None recomputes from the current batch, as in fresh
    generation).  ``noise`` supplies noise columns explicitly; ``intervention``
    clamps nodes at handle-standardized values.
    """
    assignments = {}
    if intervention is not None:
        assignments = intervention.assignments
    raw = {}
    std = {}
    for eq in eqs:
        if eq.node in assignments:
            value = assignments[eq.node]
            if mixed and eq.node == "x3":
                raw[eq.node] = np.full(n, int(value), dtype=np.int64)
                stats = (frozen_stats or {})[eq.node]
                std[eq.node] = _standardize_column(raw[eq.node].astype(float), stats)
            else:
                stats = (frozen_stats or {}).get(eq.node, (0.0, 1.0))
                if intervention.standardized:
                    vs = float(value)
                    raw[eq.node] = np.full(n, vs * stats[1] + stats[0])
                else:
                    vs = _standardize_column(float(value), stats)
                    raw[eq.node] = np.full(n, float(value))
                std[eq.node] = np.full(n, vs)
            continue
        if noise is not None:
            u = np.asarray(noise[eq.node], dtype=float)
        else:
            u = stream(seed, "u", eq.node).normal(0.0, 1.0, n)
        parents = {p: std[p] for p in eq.parents}
        value = eq.fn(parents, u)
        if mixed and eq.node == "x3":
            if standardize:
                latent_stats = (frozen_latent
                                or (float(value.mean()), float(value.std())))
                if latent_out is not None and frozen_latent is None:
                    latent_out.append(latent_stats)
                value_std = _standardize_column(value, latent_stats)
            else:
                value_std = value
            ternary = discretize_x3(value_std, substream_seed(seed, "ternary"))
            raw[eq.node] = ternary
            value = ternary.astype(float)
        else:
            raw[eq.node] = value
        if standardize:
            if frozen_stats is not None:
                stats = frozen_stats[eq.node]
            else:
                stats = (float(value.mean()), float(value.std()))
                if stats[1] == 0.0:
                    stats = (stats[0], 1.0)
            if stats_out is not None and frozen_stats is None:
                stats_out[eq.node] = stats
            std[eq.node] = _standardize_column(value, stats)
        else:
            std[eq.node] = value
            if stats_out is not None and frozen_stats is None:
                stats_out[eq.node] = (0.0, 1.0)
    return raw, std


class TrueScmHandle:
    """Oracle access to a generated batch's exact structural causal model.

    Records the equations and the batch standardizers so interventional
    samples and counterfactuals can be computed in closed form for the same
    units the dataset was emitted in.
    """

    def __init__(self, eqs, graph, n, seed, mixed, stats, latent_stats=None):
        self.eqs = list(eqs)
        self.graph = graph
        self.n = n
        self.seed = seed
        self.mixed = mixed
        self.stats = dict(stats)
        self.latent_stats = latent_stats
        self.mechanism_text = {eq.node: eq.text for eq in self.eqs}

    @property
    def names(self):
        return tuple(eq.node for eq in self.eqs)

    def standardize(self, columns):
        return {
            name: _standardize_column(np.asarray(col, dtype=float), self.stats[name])
            for name, col in columns.items()
        }

    def sample(self, n=None, seed=None):
        """Observational rows from the frozen SCM (original batch for the
        generating (n, seed))."""
        n = self.n if n is None else n
        seed = self.seed if seed is None else seed
        raw, _ = _run(self.eqs, n, seed, self.mixed,
                      frozen_stats=self.stats, frozen_latent=self.latent_stats)
        return raw

    def sample_interventional(self, intervention, n, seed):
        intervention.validate(self.graph)
        raw, _ = _run(self.eqs, n, seed, self.mixed,
                      frozen_stats=self.stats, frozen_latent=self.latent_stats,
                      intervention=intervention)
        return raw

    def abduct(self, columns):
        """Recover the exogenous noise behind raw-unit rows exactly."""
        if self.mixed:
            raise InputDomainError(
                "noise abduction is undefined for the mixed variant"
            )
        columns = validate_columns(self.graph, columns)
        std = self.standardize(columns)
        noise = {}
        for eq in self.eqs:
            if eq.inv is None:
                raise InputDomainError(
                    "mechanism for %s is not invertible in its noise" % (eq.node,)
                )
            parents = {p: std[p] for p in eq.parents}
            noise[eq.node] = eq.inv(parents, np.asarray(columns[eq.node], dtype=float))
        return noise

    def true_counterfactual(self, factual, intervention):
        """Closed-form counterfactual rows for factual raw-unit rows."""
        intervention.validate(self.graph)
        noise = self.abduct(factual)
        n = n_rows(validate_columns(self.graph, factual))
        raw, _ = _run(self.eqs, n, self.seed, self.mixed,
                      frozen_stats=self.stats, noise=noise,
                      intervention=intervention)
        return raw


def generate(spec):
    """Generate a dataset and its oracle handle."""
    eqs = equations(spec.id)
    stats = {}
    latent = []
    raw, _ = _run(eqs, spec.n, spec.seed, spec.mixed, stats_out=stats,
                  latent_out=latent)
    handle = TrueScmHandle(
        eqs, dgp_graph(spec.id, spec.mixed), spec.n, spec.seed, spec.mixed,
        stats, latent_stats=(latent[0] if latent else None),
    )
    return raw, handle


def propagate(dgp_id, noise, standardize=True):
    """Evaluate a generator on explicit noise columns (testing hook)."""
    eqs = equations(dgp_id)
    n = len(np.asarray(noise[eqs[0].node]))
    raw, _ = _run(eqs, n, 0, False, standardize=standardize, noise=noise)
    return raw


# --- sensitivity family -----------------------------------------------------

def _sensitivity_eqs(alpha):
    def x3_fn(p, u):
        return (0.4 * p["x1"] + 0.1 * p["x1"] ** 2 + 0.7 * p["x2"]
                - p["x2"] ** 2 / 2.0 + p["x2"] ** 3 / 8.0
                - alpha * p["x2"] * np.tanh(u + 1.0) / 2.0 + u / 2.0)

    def x3_inv(p, x):
        base = (0.4 * p["x1"] + 0.1 * p["x1"] ** 2 + 0.7 * p["x2"]
                - p["x2"] ** 2 / 2.0 + p["x2"] ** 3 / 8.0)
        return (x - base) * 2.0

    return [
        _Equation("x1", (), lambda p, u: u, lambda p, x: x, "x1 = u1"),
        _Equation("x2", ("x1",),
                  lambda p, u: p["x1"] / 2.0 + 0.1 * p["x1"] ** 2 + 0.6 * u,
                  lambda p, x: (x - p["x1"] / 2.0 - 0.1 * p["x1"] ** 2) / 0.6,
                  "x2 = x1/2 + 0.1*x1^2 + 0.6*u2"),
        _Equation("x3", ("x1", "x2"), x3_fn,
                  x3_inv if alpha == 0.0 else None,
                  "x3 = 0.4*x1 + 0.1*x1^2 + 0.7*x2 - x2^2/2 + x2^3/8"
                  " - alpha*x2*tanh(u3 + 1)/2 + u3/2"),
    ]


def sensitivity_graph():
    return CausalGraph(
        nodes=(NodeSpec("x1", "continuous"), NodeSpec("x2", "continuous"),
               NodeSpec("x3", "continuous")),
        edges=(("x1", "x2"), ("x1", "x3"), ("x2", "x3")),
    )


def sensitivity_generate(cfg):
    """Three-variable DGP whose noise enters nonadditively for alpha > 0.

    Unlike the benchmark graphs, the printed equations propagate raw values
    (coefficients are already scaled for roughly unit-variance columns), so
    no inter-node standardization is applied.
    """
    eqs = _sensitivity_eqs(cfg.alpha)
    raw, _ = _run(eqs, cfg.n, cfg.seed, False, standardize=False)
    stats = {eq.node: (0.0, 1.0) for eq in eqs}
    handle = TrueScmHandle(eqs, sensitivity_graph(), cfg.n, cfg.seed, False, stats)
    return raw, handle
