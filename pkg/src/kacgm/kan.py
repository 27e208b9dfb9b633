"""Kolmogorov-Arnold networks built from learnable spline edges.

Every edge computes ``phi(z) = w_b * b(z) + w_s * sum_i c_i * B_i(z)`` with
the fixed baseline ``b(z) = z * sigmoid(z)`` and a uniform B-spline basis on
the edge's grid; inputs are clamped to the grid before evaluation.  A layer
holds an ``in_dim x out_dim`` grid of such edges, each output node either
sums or multiplies its incoming activations, and a network stacks layers
under an identity / sigmoid / softmax head.

Gradients are computed analytically (no autodiff dependency) so training is
bit-reproducible and the finite-difference check in the test-suite can pin
them down.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, InputDomainError, ShapeError
from .rng import stream
from .splines import SplineGrid, bspline_basis, silu, silu_prime

HEADS = ("identity", "sigmoid", "softmax")
NODE_KINDS = ("sum", "product")


@dataclass
class SplineEdge:
    """Standalone view of one learnable edge."""

    grid: SplineGrid
    coeffs: np.ndarray
    w_b: float = 1.0
    w_s: float = 1.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.grid.n_basis,):
            raise ShapeError(
                "edge on a grid with %d basis functions needs %d coefficients, got %s"
                % (self.grid.n_basis, self.grid.n_basis, self.coeffs.shape)
            )


def edge_eval(edge, z):
    """Evaluate one edge at ``z`` (scalar or array), clamping to the grid."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InputDomainError("edge evaluation requires finite inputs")
    zc = np.clip(z, edge.grid.lo, edge.grid.hi)
    basis = bspline_basis(zc, edge.grid)
    return edge.w_b * silu(zc) + edge.w_s * (basis @ edge.coeffs)


def linear_edge(grid, slope, intercept=0.0):
    """Edge that computes exactly ``slope * z + intercept`` on its grid.

    Uses the knot-average (Greville) representation of linear functions in
    the B-spline basis; exact for any degree >= 1.
    """
    coeffs = slope * grid.greville() + intercept
    return SplineEdge(grid=grid, coeffs=coeffs, w_b=0.0, w_s=1.0)


class KanLayer:
    """One layer of spline edges.

    Within a layer all input grids share ``(intervals, degree)`` so basis
    evaluation can be stacked; grids may differ in their ``[lo, hi]`` range.
    """

    def __init__(self, grids, coeffs, w_b, w_s, node_kinds):
        self.grids = tuple(grids)
        self.coeffs = np.array(coeffs, dtype=float)
        self.w_b = np.array(w_b, dtype=float)
        self.w_s = np.array(w_s, dtype=float)
        self.node_kinds = tuple(node_kinds)
        if not self.grids:
            raise ConfigError("layer needs at least one input")
        g0 = self.grids[0]
        for g in self.grids:
            if (g.intervals, g.degree) != (g0.intervals, g0.degree):
                raise ConfigError("grids within a layer must share intervals/degree")
        in_dim, out_dim = self.w_b.shape
        if len(self.grids) != in_dim:
            raise ShapeError("need one grid per input")
        if self.coeffs.shape != (in_dim, out_dim, g0.n_basis):
            raise ShapeError(
                "coeffs shape %s does not match (in=%d, out=%d, basis=%d)"
                % (self.coeffs.shape, in_dim, out_dim, g0.n_basis)
            )
        if self.w_s.shape != (in_dim, out_dim):
            raise ShapeError("w_s shape mismatch")
        if len(self.node_kinds) != out_dim:
            raise ShapeError("need one node kind per output")
        for kind in self.node_kinds:
            if kind not in NODE_KINDS:
                raise ConfigError("unknown node kind %r" % (kind,))

    @property
    def in_dim(self):
        return self.w_b.shape[0]

    @property
    def out_dim(self):
        return self.w_b.shape[1]

    @property
    def degree(self):
        return self.grids[0].degree

    def edge(self, q, r):
        """Return a copy of the edge from input ``q`` to output ``r``."""
        return SplineEdge(
            grid=self.grids[q],
            coeffs=self.coeffs[q, r].copy(),
            w_b=float(self.w_b[q, r]),
            w_s=float(self.w_s[q, r]),
        )

    def _knot_table(self):
        return np.stack([g.knots() for g in self.grids])

    def _bounds(self):
        lo = np.array([g.lo for g in self.grids])
        hi = np.array([g.hi for g in self.grids])
        return lo, hi

    def to_dict(self):
        return {
            "grids": [
                {"lo": g.lo, "hi": g.hi, "intervals": g.intervals,
                 "degree": g.degree}
                for g in self.grids
            ],
            "coeffs": self.coeffs.tolist(),
            "w_b": self.w_b.tolist(),
            "w_s": self.w_s.tolist(),
            "node_kinds": list(self.node_kinds),
        }

    @classmethod
    def from_dict(cls, d):
        grids = [
            SplineGrid(lo=float(g["lo"]), hi=float(g["hi"]),
                       intervals=int(g["intervals"]), degree=int(g["degree"]))
            for g in d["grids"]
        ]
        return cls(grids=grids, coeffs=d["coeffs"], w_b=d["w_b"],
                   w_s=d["w_s"], node_kinds=d["node_kinds"])


class _LayerCache:
    __slots__ = (
        "zc", "inside", "basis", "dbasis", "base", "dbase", "spline",
        "act", "loo", "out",
    )


def _layer_forward(layer, Z, want_cache):
    """Evaluate a layer on a batch ``Z`` of shape (B, in_dim)."""
    lo, hi = layer._bounds()
    zc = np.clip(Z, lo, hi)
    knots = layer._knot_table()
    degree = layer.degree
    step = np.array([g.step for g in layer.grids])

    z = zc[:, :, None]
    b = ((z >= knots[None, :, :-1]) & (z < knots[None, :, 1:])).astype(float)
    at_hi = zc == hi
    last = b.shape[-1] - degree
    if np.any(at_hi):
        b[..., last - 1] = np.where(at_hi, 1.0, b[..., last - 1])
        b[..., last] = np.where(at_hi, 0.0, b[..., last])
    below = None
    for d in range(1, degree + 1):
        t = knots[None]
        left = (z - t[..., : -d - 1]) / (t[..., d:-1] - t[..., : -d - 1])
        right = (t[..., d + 1 :] - z) / (t[..., d + 1 :] - t[..., 1:-d])
        if d == degree:
            below = b
        b = left * b[..., :-1] + right * b[..., 1:]
    basis = b
    inside = (Z >= lo) & (Z <= hi)

    base = silu(zc)
    spline = np.einsum("bqi,qri->bqr", basis, layer.coeffs)
    act = layer.w_b[None] * base[:, :, None] + layer.w_s[None] * spline

    kinds = np.array([k == "product" for k in layer.node_kinds])
    if kinds.any():
        out = np.empty((Z.shape[0], layer.out_dim))
        loo = np.empty_like(act)
        sums = act.sum(axis=1)
        prefix = np.ones_like(act)
        np.cumprod(act[:, :-1, :], axis=1, out=prefix[:, 1:, :])
        suffix = np.ones_like(act)
        if act.shape[1] > 1:
            rev = np.cumprod(act[:, ::-1, :][:, :-1, :], axis=1)[:, ::-1, :]
            suffix[:, :-1, :] = rev
        loo[:] = prefix * suffix
        prods = prefix[:, -1, :] * act[:, -1, :]
        out[:, ~kinds] = sums[:, ~kinds]
        out[:, kinds] = prods[:, kinds]
    else:
        out = act.sum(axis=1)
        loo = None

    if not want_cache:
        return out, None
    cache = _LayerCache()
    cache.zc = zc
    cache.inside = inside
    cache.basis = basis
    cache.dbasis = np.where(
        inside[:, :, None], (below[..., :-1] - below[..., 1:]) / step[None, :, None], 0.0
    )
    cache.base = base
    cache.dbase = np.where(inside, silu_prime(zc), 0.0)
    cache.spline = spline
    cache.act = act
    cache.loo = loo
    cache.out = out
    return out, cache


def _layer_backward(layer, cache, dout):
    """Backprop ``dL/dout`` through one layer.

    Returns ``(dZ, grads)`` where grads has keys coeffs / w_b / w_s.
    """
    kinds = np.array([k == "product" for k in layer.node_kinds])
    if kinds.any():
        dact = np.where(kinds[None, None, :], dout[:, None, :] * cache.loo,
                        dout[:, None, :])
    else:
        dact = np.broadcast_to(dout[:, None, :], cache.act.shape)

    dw_b = np.einsum("bqr,bq->qr", dact, cache.base)
    dw_s = np.einsum("bqr,bqr->qr", dact, cache.spline)
    dcoeffs = np.einsum("bqr,bqi->qri", dact, cache.basis) * layer.w_s[:, :, None]

    dspline_dz = np.einsum("bqi,qri->bqr", cache.dbasis, layer.coeffs)
    dact_dz = layer.w_b[None] * cache.dbase[:, :, None] + layer.w_s[None] * dspline_dz
    dZ = np.einsum("bqr,bqr->bq", dact, dact_dz)
    return dZ, {"coeffs": dcoeffs, "w_b": dw_b, "w_s": dw_s}


class KanNetwork:
    """Stack of KAN layers under an output head."""

    def __init__(self, input_names, layers, head="identity"):
        self.input_names = tuple(input_names)
        self.layers = list(layers)
        self.head = head
        if head not in HEADS:
            raise ConfigError("unknown head %r" % (head,))
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        if self.layers[0].in_dim != len(self.input_names):
            raise ShapeError("first layer arity must match input names")
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError("layer dimensions do not chain")
        if head == "sigmoid" and self.out_dim != 1:
            raise ConfigError("sigmoid head needs a single output")
        if head == "softmax" and self.out_dim < 2:
            raise ConfigError("softmax head needs at least two outputs")

    @property
    def in_dim(self):
        return len(self.input_names)

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    @property
    def n_hidden_layers(self):
        return len(self.layers) - 1

    def n_params(self):
        total = 0
        for layer in self.layers:
            total += layer.coeffs.size + layer.w_b.size + layer.w_s.size
        return total

    def copy(self):
        return copy.deepcopy(self)

    def to_dict(self):
        return {
            "input_names": list(self.input_names),
            "layers": [layer.to_dict() for layer in self.layers],
            "head": self.head,
        }

    @classmethod
    def from_dict(cls, d):
        layers = [KanLayer.from_dict(x) for x in d["layers"]]
        return cls(input_names=d["input_names"], layers=layers, head=d["head"])

    def _check_input(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ShapeError(
                "expected (n, %d) inputs, got %s" % (self.in_dim, X.shape)
            )
        if not np.all(np.isfinite(X)):
            raise InputDomainError("network inputs must be finite")
        return X


def _apply_head(head, v):
    if head == "identity":
        return v
    if head == "sigmoid":
        return 1.0 / (1.0 + np.exp(-v))
    shifted = v - v.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def network_logits(net, X, want_caches=False):
    X = net._check_input(X)
    caches = [] if want_caches else None
    h = X
    for layer in net.layers:
        if h.shape[1] != layer.in_dim:
            raise ShapeError("activation width does not match layer arity")
        h, cache = _layer_forward(layer, h, want_caches)
        if want_caches:
            caches.append(cache)
    return (h, caches) if want_caches else h


def network_forward(net, X):
    """Post-head network output for a batch (rows of inputs)."""
    return _apply_head(net.head, network_logits(net, X))


def _loss_kind(net):
    return "squared" if net.head == "identity" else "cross_entropy"


def _loss_and_dv(net, v, y):
    n = v.shape[0]
    if net.head == "identity":
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape != v.shape:
            raise ShapeError("target shape %s does not match output %s"
                             % (y.shape, v.shape))
        resid = v - y
        loss = float(np.mean(np.sum(resid ** 2, axis=1)))
        return loss, 2.0 * resid / n
    if net.head == "sigmoid":
        y = np.asarray(y, dtype=float).reshape(-1, 1)
        if y.shape[0] != n:
            raise ShapeError("target length mismatch")
        p = 1.0 / (1.0 + np.exp(-v))
        eps = 1e-12
        loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
        return loss, (p - y) / n
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n:
        raise ShapeError("softmax targets must be 1-d category indices")
    y = y.astype(int)
    if y.min() < 0 or y.max() >= v.shape[1]:
        raise InputDomainError("category index out of range")
    p = _apply_head("softmax", v)
    loss = float(-np.mean(np.log(p[np.arange(n), y] + 1e-12)))
    dv = p.copy()
    dv[np.arange(n), y] -= 1.0
    return loss, dv / n


def l1_penalty(net):
    """Sum over edges of ``|w_s| * mean|coeffs| + |w_b|``."""
    total = 0.0
    for layer in net.layers:
        mean_abs = np.mean(np.abs(layer.coeffs), axis=2)
        total += float(np.sum(np.abs(layer.w_s) * mean_abs) + np.sum(np.abs(layer.w_b)))
    return total


def _l1_grads(net, strength):
    grads = []
    for layer in net.layers:
        nb = layer.coeffs.shape[2]
        mean_abs = np.mean(np.abs(layer.coeffs), axis=2)
        grads.append({
            "coeffs": strength * np.abs(layer.w_s)[:, :, None] * np.sign(layer.coeffs) / nb,
            "w_b": strength * np.sign(layer.w_b),
            "w_s": strength * np.sign(layer.w_s) * mean_abs,
        })
    return grads


def param_gradients(net, X, y, l1_strength=0.0):
    """Analytic gradients of the (regularized) loss for a batch.

    The data term is mean squared error for identity heads and mean
    cross-entropy for logistic heads; ``l1_strength`` adds the edge-level
    L1 penalty.  Returns ``(loss, grads)`` with one dict of arrays
    (``coeffs``, ``w_b``, ``w_s``) per layer, shapes matching the layer.
    """
    v, caches = network_logits(net, X, want_caches=True)
    loss, dv = _loss_and_dv(net, v, y)
    grads = [None] * len(net.layers)
    dout = dv
    for idx in range(len(net.layers) - 1, -1, -1):
        dout, g = _layer_backward(net.layers[idx], caches[idx], dout)
        grads[idx] = g
    if l1_strength > 0.0:
        loss += l1_strength * l1_penalty(net)
        for g, lg in zip(grads, _l1_grads(net, l1_strength)):
            for key in g:
                g[key] = g[key] + lg[key]
    return loss, grads


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 500
    l1_strength: float = 0.0
    batch_size: int = 0  # 0 means full batch
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning rate must be positive")
        if int(self.epochs) < 1:
            raise ConfigError("epochs must be >= 1")
        if self.l1_strength < 0:
            raise ConfigError("l1 strength must be >= 0")
        if int(self.batch_size) < 0:
            raise ConfigError("batch size must be >= 0")


def train(net, X, y, cfg):
    """Plain gradient descent with a fixed learning rate.

    Returns ``(trained_net, loss_trace)``; the input network is left
    untouched.  The trace records one loss value per epoch (full-batch loss
    when ``batch_size`` is 0, otherwise the mean of the minibatch losses).
    A non-finite loss aborts with :class:`DivergenceError` naming the epoch.
    """
    net = net.copy()
    X = net._check_input(X)
    n = X.shape[0]
    if np.asarray(y).shape[0] != n:
        raise ShapeError("targets must have one row per input row")
    rng = stream(cfg.seed, "train-shuffle")
    batch = int(cfg.batch_size)
    full = batch == 0 or batch >= n
    y_arr = np.asarray(y)
    trace = []
    # Overflow on a diverging step is expected right before the finite-loss
    # check fires, so silence the elementwise warnings inside the loop.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(int(cfg.epochs)):
            if full:
                loss, grads = param_gradients(net, X, y_arr, cfg.l1_strength)
                _sgd_step(net, grads, cfg.learning_rate)
                epoch_loss = loss
            else:
                order = rng.permutation(n)
                losses = []
                for start in range(0, n, batch):
                    idx = order[start : start + batch]
                    loss, grads = param_gradients(net, X[idx], y_arr[idx], cfg.l1_strength)
                    _sgd_step(net, grads, cfg.learning_rate)
                    losses.append(loss)
                epoch_loss = float(np.mean(losses))
            if not np.isfinite(epoch_loss):
                raise DivergenceError("training diverged at epoch %d" % epoch)
            trace.append(epoch_loss)
    return net, trace


def _sgd_step(net, grads, lr):
    for layer, g in zip(net.layers, grads):
        layer.coeffs -= lr * g["coeffs"]
        layer.w_b -= lr * g["w_b"]
        layer.w_s -= lr * g["w_s"]


def edge_importance(net, X):
    """Per-edge importance: population std of the edge activation over X.

    Returns one ``(in_dim, out_dim)`` array per layer.
    """
    X = net._check_input(X)
    scores = []
    h = X
    for layer in net.layers:
        out, cache = _layer_forward(layer, h, True)
        scores.append(cache.act.std(axis=0))
        h = out
    return scores


@dataclass
class PruneReport:
    removed_edges: list = field(default_factory=list)  # (layer, q, r, score)
    removed_nodes: list = field(default_factory=list)  # (layer, node index)
    max_output_deviation: float = 0.0


def prune(net, threshold, X):
    """Zero out edges whose importance falls below ``threshold``.

    Hidden nodes left with no live incoming or no live outgoing edges are
    deleted from the network.  ``threshold = 0`` returns an identical copy
    (importance scores are non-negative).  The report records the observed
    maximum output deviation on ``X``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    before = network_forward(net, X)
    result = net.copy()
    report = PruneReport()
    scores = edge_importance(result, X)
    live = []
    for li, (layer, sc) in enumerate(zip(result.layers, scores)):
        alive = sc >= threshold
        drop = ~alive
        if np.any(drop):
            qs, rs = np.nonzero(drop)
            for q, r in zip(qs, rs):
                report.removed_edges.append((li, int(q), int(r), float(sc[q, r])))
            layer.coeffs[drop] = 0.0
            layer.w_b[drop] = 0.0
            layer.w_s[drop] = 0.0
        live.append(alive)

    # iteratively delete dead hidden nodes (never the network's in/outputs)
    changed = True
    while changed:
        changed = False
        for li in range(len(result.layers) - 1):
            lower = result.layers[li]
            upper = result.layers[li + 1]
            incoming = live[li]
            outgoing = live[li + 1]
            width = lower.out_dim
            if width <= 1:
                continue
            dead = [
                j
                for j in range(width)
                if not incoming[:, j].any() or not outgoing[j, :].any()
            ]
            if not dead:
                continue
            keep = [j for j in range(width) if j not in dead]
            if not keep:
                keep = [dead.pop()]  # keep one placeholder node
            if not dead:
                continue
            for j in dead:
                report.removed_nodes.append((li, int(j)))
            result.layers[li] = KanLayer(
                grids=lower.grids,
                coeffs=lower.coeffs[:, keep, :],
                w_b=lower.w_b[:, keep],
                w_s=lower.w_s[:, keep],
                node_kinds=[lower.node_kinds[j] for j in keep],
            )
            result.layers[li + 1] = KanLayer(
                grids=[upper.grids[j] for j in keep],
                coeffs=upper.coeffs[keep, :, :],
                w_b=upper.w_b[keep, :],
                w_s=upper.w_s[keep, :],
                node_kinds=upper.node_kinds,
            )
            live[li] = incoming[:, keep]
            live[li + 1] = outgoing[keep, :]
            changed = True

    after = network_forward(result, X)
    report.max_output_deviation = float(np.max(np.abs(after - before), initial=0.0))
    return result, report


def build_network(
    input_names,
    hidden_width=0,
    out_dim=1,
    head="identity",
    input_ranges=None,
    grid_size=5,
    degree=3,
    seed=0,
    multiplicative=False,
    hidden_range=(-8.0, 8.0),
):
    """Construct a network with standard initialization.

    ``input_ranges`` maps each input to its grid ``(lo, hi)``; hidden-layer
    edges use ``hidden_range``.  Coefficients start at N(0, 0.1/sqrt(n_basis))
    and both edge weights start at 1, so a fresh network is close to a sum
    of silu baselines.
    """
    input_names = tuple(input_names)
    if not input_names:
        raise ConfigError("network needs at least one input")
    if input_ranges is None:
        input_ranges = {name: (-3.0, 3.0) for name in input_names}
    rng = stream(seed, "init")
    first_grids = [
        SplineGrid(lo=float(input_ranges[name][0]), hi=float(input_ranges[name][1]),
                   intervals=grid_size, degree=degree)
        for name in input_names
    ]

    def init_layer(grids, in_dim, width, kinds):
        nb = grids[0].n_basis
        coeffs = rng.normal(0.0, 0.1 / np.sqrt(nb), size=(in_dim, width, nb))
        return KanLayer(
            grids=grids,
            coeffs=coeffs,
            w_b=np.ones((in_dim, width)),
            w_s=np.ones((in_dim, width)),
            node_kinds=kinds,
        )

    layers = []
    if hidden_width and hidden_width > 0:
        kinds = [
            "product" if (multiplicative and j % 2 == 1) else "sum"
            for j in range(hidden_width)
        ]
        layers.append(init_layer(first_grids, len(input_names), hidden_width, kinds))
        hidden_grids = [
            SplineGrid(lo=float(hidden_range[0]), hi=float(hidden_range[1]),
                       intervals=grid_size, degree=degree)
            for _ in range(hidden_width)
        ]
        layers.append(init_layer(hidden_grids, hidden_width, out_dim, ["sum"] * out_dim))
    else:
        kind = "product" if (multiplicative and len(input_names) >= 2) else "sum"
        layers.append(init_layer(first_grids, len(input_names), out_dim, [kind] * out_dim))
    return KanNetwork(input_names=input_names, layers=layers, head=head)


