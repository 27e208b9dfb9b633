"""Structural causal models with KAN mechanisms.

Each non-root node gets a network mapping its (encoded) parents to either a
conditional mean (continuous, additive-noise form ``x = g(pa) + u``) or to
category logits.  Roots carry the trivial mechanism ``g = 0`` (continuous)
or an empirical level distribution (categorical).  All mechanisms operate
in standardized space; the fitted :class:`Standardizer` converts at the
boundary.

Hyperparameters are selected per node: every grid point is trained on a
50/50 split, scored by validation MSE / log-loss during training, and the
grid winner is the candidate whose generated child column is hardest to
tell from the real one for a random-forest two-sample test (ties within
one standard error resolved toward simpler networks).
"""

import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kan
from .data import encode_matrix, encoded_input_names, n_rows, validate_columns
from .errors import ConfigError, DegenerateDataError, DivergenceError, ShapeError
from .forest import RfConfig, c2st_rf
from .graph import CATEGORICAL, CONTINUOUS
from .rng import stream, substream_seed

EMPIRICAL = "empirical"
KDE = "kde"
UNIFORM = "uniform"  # implicit U(0,1) noise of categorical nodes


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine scaling for continuous nodes (population std)."""

    stats: dict

    def mean(self, name):
        return self.stats[name][0]

    def std(self, name):
        return self.stats[name][1]

    def apply(self, columns):
        out = {}
        for name, col in columns.items():
            if name in self.stats:
                m, s = self.stats[name]
                out[name] = (np.asarray(col, dtype=float) - m) / s
            else:
                out[name] = np.asarray(col)
        return out

    def invert(self, columns):
        out = {}
        for name, col in columns.items():
            if name in self.stats:
                m, s = self.stats[name]
                out[name] = np.asarray(col, dtype=float) * s + m
            else:
                out[name] = np.asarray(col)
        return out

    def apply_value(self, name, value):
        if name not in self.stats:
            return value
        m, s = self.stats[name]
        return (float(value) - m) / s

    def invert_value(self, name, value):
        if name not in self.stats:
            return value
        m, s = self.stats[name]
        return float(value) * s + m


def fit_standardizer(graph, columns):
    """Population mean/std per continuous column; constant columns fail."""
    stats = {}
    for node in graph.nodes:
        if node.kind != CONTINUOUS:
            continue
        col = np.asarray(columns[node.name], dtype=float)
        m = float(col.mean())
        s = float(col.std())
        if not s > 0:
            raise DegenerateDataError(
                "column %r is constant; cannot standardize" % (node.name,)
            )
        stats[node.name] = (m, s)
    return Standardizer(stats=stats)


@dataclass
class NoiseModel:
    """Exogenous-noise distribution for one continuous node.

    ``empirical`` resamples the stored residuals with replacement; ``kde``
    adds a Gaussian kick with the Silverman bandwidth
    ``1.06 * std * n^(-1/5)`` on top of the resample.
    """

    kind: str
    samples: np.ndarray = None
    bandwidth: float = 0.0

    def __post_init__(self):
        if self.kind not in (EMPIRICAL, KDE, UNIFORM):
            raise ConfigError("unknown noise model kind %r" % (self.kind,))
        if self.kind == UNIFORM:
            self.samples = np.empty(0)
            return
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ShapeError("noise model needs a non-empty residual vector")

    def draw(self, n, rng):
        if self.kind == UNIFORM:
            return rng.uniform(0.0, 1.0, size=n)
        idx = rng.integers(0, self.samples.size, size=n)
        values = self.samples[idx]
        if self.kind == KDE:
            values = values + rng.normal(0.0, self.bandwidth, size=n)
        return values


def silverman_bandwidth(samples):
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 2:
        raise ShapeError("bandwidth needs at least two samples")
    return float(1.06 * samples.std() * n ** (-0.2))


def estimate_noise(residuals, kind=EMPIRICAL):
    residuals = np.asarray(residuals, dtype=float)
    bw = silverman_bandwidth(residuals) if kind == KDE else 0.0
    return NoiseModel(kind=kind, samples=residuals.copy(), bandwidth=bw)


@dataclass
class Mechanism:
    """Structural equation for one node, in standardized space."""

    node: str
    kind: str  # continuous | categorical
    parents: tuple
    input_labels: tuple
    network: object = None        # KanNetwork, None for roots
    symbolic: object = None       # SymbolicMechanism once extracted
    root_probs: np.ndarray = None  # categorical roots
    levels: int = 0

    @property
    def is_root(self):
        return not self.parents

    def predictor(self):
        return self.symbolic if self.symbolic is not None else self.network

    def _forward(self, X):
        if self.symbolic is not None:
            return self.symbolic.forward(X)
        return kan.network_forward(self.network, X)

    def ghat(self, graph, std_columns, n=None):
        """Conditional mean contribution g(pa) for a continuous node."""
        if self.kind != CONTINUOUS:
            raise ConfigError("ghat is defined for continuous nodes only")
        if self.is_root:
            return np.zeros(n_rows(std_columns) if n is None else n)
        X = encode_matrix(graph, std_columns, self.parents)
        return self._forward(X).ravel()

    def category_probs(self, graph, std_columns, n=None):
        """Conditional level probabilities for a categorical node."""
        if self.kind != CATEGORICAL:
            raise ConfigError("category_probs is defined for categorical nodes only")
        if self.is_root:
            return np.tile(self.root_probs, (n_rows(std_columns) if n is None else n, 1))
        X = encode_matrix(graph, std_columns, self.parents)
        out = self._forward(X)
        if out.shape[1] == 1:  # sigmoid head, two levels
            p1 = out.ravel()
            return np.column_stack([1.0 - p1, p1])
        return out


@dataclass(frozen=True)
class HyperPoint:
    hidden: int
    grid_size: int
    learning_rate: float
    l1: float
    multiplicative: bool


@dataclass(frozen=True)
class HyperGrid:
    """Hyperparameter axes searched per node.

    The learning-rate axis carries a repeated value by default; enumeration
    drops the duplicate (with a warning) so each candidate is trained once.
    ``epochs`` and ``batch_size`` apply to every candidate.
    """

    hidden: tuple = (0, 5)
    grid_size: tuple = (1, 5, 10)
    learning_rates: tuple = (1e-3, 1e-3, 1e-4)
    l1: tuple = (0.1, 0.01, 0.001)
    multiplicative: tuple = (False, True)
    epochs: int = 800
    batch_size: int = 0

    def points(self):
        lrs = []
        for lr in self.learning_rates:
            if lr in lrs:
                warnings.warn(
                    "hyper-grid lists learning rate %g twice; deduplicating" % lr,
                    RuntimeWarning,
                )
            else:
                lrs.append(lr)
        out = []
        for h, g, lr, l1, mult in itertools.product(
            self.hidden, self.grid_size, lrs, self.l1, self.multiplicative
        ):
            out.append(HyperPoint(h, g, lr, l1, mult))
        return out

    def kaam(self):
        """Restriction to additive models: no hidden layer, no products."""
        return replace(self, hidden=(0,), multiplicative=(False,))


#: light forest used inside hyperparameter selection (the reported metrics
#: use the full RfConfig defaults; selection only needs a ranking signal)
SELECTION_FOREST = RfConfig(n_trees=50, max_depth=6)


def _input_grid_ranges(labels, X):
    """Grid range per network input: data min/max widened by 10%."""
    ranges = {}
    for j, label in enumerate(labels):
        lo = float(X[:, j].min())
        hi = float(X[:, j].max())
        span = hi - lo
        if span <= 0:
            lo, hi = lo - 0.5, hi + 0.5
        else:
            lo, hi = lo - 0.05 * span, hi + 0.05 * span
        ranges[label] = (lo, hi)
    return ranges


def _build_candidate(labels, X, point, kind, levels, seed):
    if kind == CONTINUOUS:
        head, out_dim = "identity", 1
    elif levels == 2:
        head, out_dim = "sigmoid", 1
    else:
        head, out_dim = "softmax", levels
    return kan.build_network(
        labels,
        hidden_width=point.hidden,
        out_dim=out_dim,
        head=head,
        input_ranges=_input_grid_ranges(labels, X),
        grid_size=point.grid_size,
        seed=seed,
        multiplicative=point.multiplicative,
    )


def _validation_score(net, X, y, kind):
    out = kan.network_forward(net, X)
    if kind == CONTINUOUS:
        return float(np.mean((out.ravel() - np.asarray(y, float)) ** 2))
    y = np.asarray(y, dtype=int)
    if net.head == "sigmoid":
        p = out.ravel()
        probs = np.where(y == 1, p, 1.0 - p)
    else:
        probs = out[np.arange(y.size), y]
    return float(-np.mean(np.log(probs + 1e-12)))


def _sample_levels(probs, rng):
    """Vectorized inverse-CDF draw of one level per row."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.uniform(0.0, 1.0, size=probs.shape[0])
    idx = (u[:, None] > cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def _generate_child(net, kind, X, train_residuals, rng):
    out = kan.network_forward(net, X)
    if kind == CONTINUOUS:
        draw = train_residuals[rng.integers(0, train_residuals.size, X.shape[0])]
        return out.ravel() + draw
    if net.head == "sigmoid":
        p1 = out.ravel()
        probs = np.column_stack([1.0 - p1, p1])
    else:
        probs = out
    return _sample_levels(probs, rng)


@dataclass
class CandidateScore:
    point: HyperPoint
    validation: float
    accuracy: float
    hidden_layers: int
    n_params: int

    def to_dict(self):
        return {
            "hidden": self.point.hidden,
            "grid_size": self.point.grid_size,
            "learning_rate": self.point.learning_rate,
            "l1": self.point.l1,
            "multiplicative": self.point.multiplicative,
            "validation": self.validation,
            "accuracy": self.accuracy,
            "n_params": self.n_params,
        }


def _effective_points(points, in_dim):
    """Drop grid points whose realized architecture duplicates an earlier one.

    With a single encoded input and no hidden layer the multiplicative flag
    has no effect, so such pairs train the same network twice.
    """
    seen = set()
    out = []
    for p in points:
        mult = p.multiplicative and (p.hidden > 0 or in_dim >= 2)
        key = (p.hidden, p.grid_size, p.learning_rate, p.l1, mult)
        if key in seen:
            continue
        seen.add(key)
        out.append(p)
    return out


def _train_with_backoff(net, X, y, cfg, max_halvings=6):
    """Train, halving the step size whenever gradient descent diverges.

    Full-batch descent at an aggressive learning rate occasionally overflows
    on an unlucky draw.  Each retry restarts from the same initial network
    with half the previous step, so well-behaved fits are untouched and the
    recovery is deterministic.  Re-raises once the halvings are exhausted.
    """
    lr = cfg.learning_rate
    for attempt in range(max_halvings + 1):
        try:
            return kan.train(net, X, y, replace(cfg, learning_rate=lr))
        except DivergenceError:
            if attempt == max_halvings:
                raise
            lr *= 0.5


def fit_mechanism(graph, std_columns, node, hyper_grid=None, seed=0,
                  selection_forest=None):
    """Fit one node's structural equation, selecting hyperparameters.

    ``std_columns`` must already be standardized.  Returns
    ``(mechanism, report)`` where the report lists every candidate's
    validation score and two-sample accuracy.  Candidates whose descent
    diverges are retrained at a reduced step via :func:`_train_with_backoff`.
    """
    grid = hyper_grid or HyperGrid()
    spec = graph.node(node)
    parents = graph.parents(node)
    n = n_rows(std_columns)

    if not parents:
        if spec.kind == CONTINUOUS:
            mech = Mechanism(node=node, kind=CONTINUOUS, parents=(), input_labels=())
        else:
            counts = np.bincount(np.asarray(std_columns[node], int), minlength=spec.levels)
            mech = Mechanism(
                node=node, kind=CATEGORICAL, parents=(), input_labels=(),
                root_probs=counts / counts.sum(), levels=spec.levels,
            )
        return mech, {"node": node, "root": True, "candidates": []}

    labels = encoded_input_names(graph, parents)
    X = encode_matrix(graph, std_columns, parents)
    y = np.asarray(std_columns[node])

    perm = stream(seed, "split", node).permutation(n)
    half = n // 2
    tr, va = perm[:half], perm[half:]

    covariate_names = [m for m in graph.names if m != node]
    cov = encode_matrix(graph, {k: v[va] for k, v in std_columns.items()},
                        covariate_names)

    def child_block(values):
        if spec.kind == CONTINUOUS:
            return np.asarray(values, float)[:, None]
        onehot = np.zeros((len(values), spec.levels))
        onehot[np.arange(len(values)), np.asarray(values, int)] = 1.0
        return onehot

    real = np.hstack([child_block(y[va]), cov])
    sel_forest = selection_forest or SELECTION_FOREST

    points = _effective_points(grid.points(), len(labels))
    scored = []
    trained_nets = []
    for i, point in enumerate(points):
        net = _build_candidate(labels, X[tr], point, spec.kind, spec.levels,
                               substream_seed(seed, "init", node, i))
        cfg = kan.TrainConfig(
            learning_rate=point.learning_rate,
            epochs=grid.epochs,
            l1_strength=point.l1,
            batch_size=grid.batch_size,
            seed=substream_seed(seed, "train", node, i),
        )
        trained, _ = _train_with_backoff(net, X[tr], y[tr], cfg)
        val = _validation_score(trained, X[va], y[va], spec.kind)
        if len(points) == 1:
            acc = 0.5  # sole candidate: no selection test needed
        else:
            if spec.kind == CONTINUOUS:
                resid = y[tr] - kan.network_forward(trained, X[tr]).ravel()
            else:
                resid = None
            gen = _generate_child(trained, spec.kind, X[va], resid,
                                  stream(seed, "select-noise", node, i))
            fake = np.hstack([child_block(gen), cov])
            acc = c2st_rf(real, fake, sel_forest,
                          seed=substream_seed(seed, "select-c2st", node, i))
        scored.append(CandidateScore(point, val, acc, trained.n_hidden_layers,
                                     trained.n_params()))
        trained_nets.append(trained)

    winner = min(range(len(scored)),
                 key=lambda i: (scored[i].accuracy, scored[i].validation, i))

    point = scored[winner].point
    final_net = _build_candidate(labels, X, point, spec.kind, spec.levels,
                                 substream_seed(seed, "final-init", node))
    final_cfg = kan.TrainConfig(
        learning_rate=point.learning_rate,
        epochs=grid.epochs,
        l1_strength=point.l1,
        batch_size=grid.batch_size,
        seed=substream_seed(seed, "final-train", node),
    )
    final, _ = _train_with_backoff(final_net, X, y, final_cfg)

    mech = Mechanism(
        node=node, kind=spec.kind, parents=tuple(parents), input_labels=labels,
        network=final, levels=spec.levels,
    )
    report = {
        "node": node,
        "root": False,
        "winner": scored[winner].to_dict(),
        "candidates": [s.to_dict() for s in scored],
    }
    return mech, report


@dataclass
class KacgmModel:
    """A trained causal generative model over a typed DAG."""

    graph: object
    standardizer: Standardizer
    mechanisms: dict
    noise: dict
    stage: str = "raw"
    metadata: dict = field(default_factory=dict)

    def continuous_nodes(self):
        return tuple(n.name for n in self.graph.nodes if n.kind == CONTINUOUS)

    def categorical_nodes(self):
        return tuple(n.name for n in self.graph.nodes if n.kind == CATEGORICAL)

    def mechanism(self, node):
        return self.mechanisms[node]

    def with_stage(self, stage, mechanisms, noise, extra_metadata=None):
        meta = dict(self.metadata)
        meta.update(extra_metadata or {})
        return KacgmModel(
            graph=self.graph,
            standardizer=self.standardizer,
            mechanisms=mechanisms,
            noise=noise,
            stage=stage,
            metadata=meta,
        )


def residuals_std(model, std_columns):
    """Residuals u = x - g(pa) per continuous node, standardized space."""
    out = {}
    for name in model.continuous_nodes():
        mech = model.mechanisms[name]
        ghat = mech.ghat(model.graph, std_columns)
        out[name] = np.asarray(std_columns[name], float) - ghat
    return out


def obtain_residuals(model, columns):
    """Abduct exogenous noise for every continuous node from raw-unit data."""
    columns = validate_columns(model.graph, columns)
    return residuals_std(model, model.standardizer.apply(columns))


def refit_noise(model, columns, kind=None):
    """Recompute residuals and noise models for the model's current mechanisms."""
    kind = kind or model.metadata.get("noise_kind", EMPIRICAL)
    res = obtain_residuals(model, columns)
    noise = {name: estimate_noise(res[name], kind) for name in res}
    for name in model.categorical_nodes():
        noise[name] = NoiseModel(kind=UNIFORM)
    return noise


def train_model(graph, columns, hyper_grid=None, seed=0, noise_kind=EMPIRICAL,
                selection_forest=None):
    """Fit mechanisms node-by-node and package the generative model."""
    columns = validate_columns(graph, columns)
    n = n_rows(columns)
    if n < 10:
        raise DegenerateDataError("need at least 10 rows to fit a model")
    standardizer = fit_standardizer(graph, columns)
    std_cols = standardizer.apply(columns)

    mechanisms = {}
    reports = []
    for node in graph.topological_order():
        mech, report = fit_mechanism(
            graph, std_cols, node, hyper_grid=hyper_grid,
            seed=substream_seed(seed, "mechanism", node),
            selection_forest=selection_forest,
        )
        mechanisms[node] = mech
        reports.append(report)

    model = KacgmModel(
        graph=graph,
        standardizer=standardizer,
        mechanisms={name: mechanisms[name] for name in graph.topological_order()},
        noise={},
        stage="raw",
        metadata={
            "seed": int(seed),
            "n_rows": int(n),
            "noise_kind": noise_kind,
            "selection": reports,
        },
    )
    res = residuals_std(model, std_cols)
    noise = {name: estimate_noise(res[name], noise_kind) for name in res}
    for name in model.categorical_nodes():
        noise[name] = NoiseModel(kind=UNIFORM)
    model.noise = noise
    return model
