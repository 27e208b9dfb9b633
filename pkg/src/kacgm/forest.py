"""Random-forest classifier two-sample test (C2ST).

The forest is implemented here directly -- bootstrap-resampled trees, Gini
impurity, axis-aligned thresholds, per-node feature subsampling -- so the
accuracy-based two-sample test has no hidden library behavior and is
bit-reproducible from a seed.  Features are quantile-binned once per fit
(exact midpoints when a feature has fewer distinct values than bins) and
trees grow one depth level at a time with histogram splits, which keeps
the test cheap enough to run inside hyperparameter selection.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .rng import stream


@dataclass(frozen=True)
class RfConfig:
    n_trees: int = 100
    max_depth: int = 8
    min_leaf: int = 5
    feature_fraction: float = None  # None means sqrt(D)/D
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ConfigError("forest sizes must be positive")
        if self.feature_fraction is not None and not 0.0 < self.feature_fraction <= 1.0:
            raise ConfigError("feature fraction must lie in (0, 1]")


def _bin_features(X, max_bins=64):
    """Quantile-bin each feature; candidate thresholds are midpoints.

    Codes count the cut values strictly below the entry, so the training
    decision ``code <= c`` is identical to ``x <= cuts[c]`` on raw values.
    """
    n, d = X.shape
    codes = np.empty((n, d), dtype=np.int32)
    cuts = []
    probs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
    for f in range(d):
        col = X[:, f]
        levels = np.unique(col)
        if levels.size > max_bins:
            levels = np.unique(np.quantile(col, probs))
        mid = 0.5 * (levels[1:] + levels[:-1])
        codes[:, f] = np.searchsorted(mid, col, side="left")
        cuts.append(mid)
    return codes, cuts


class _FlatTree:
    __slots__ = ("feature", "threshold", "left", "right", "prob")

    def __init__(self):
        self.feature = [0]
        self.threshold = [0.0]
        self.left = [-1]
        self.right = [-1]
        self.prob = [0.5]

    def seal(self):
        self.feature = np.asarray(self.feature, dtype=np.int32)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=np.int32)
        self.right = np.asarray(self.right, dtype=np.int32)
        self.prob = np.asarray(self.prob, dtype=float)
        return self

    def predict_proba(self, X):
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            rows = np.nonzero(inner)[0]
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return self.prob[node]


def _grow_tree(codes, y, cfg, n_features, rng, cuts):
    """Grow one tree level-by-level with histogram split finding."""
    n, d = codes.shape
    nb = np.array([c.size + 1 for c in cuts])
    tree = _FlatTree()
    tree.prob[0] = float(y.mean())
    tree.feature[0] = -1

    slot_node = np.array([0])            # tree node id per active slot
    row_slot = np.zeros(n, dtype=np.int64)
    active = np.arange(n)

    for depth in range(cfg.max_depth):
        s = slot_node.size
        if s == 0 or active.size == 0:
            break
        ya = y[active]
        cnt = np.bincount(row_slot, minlength=s).astype(float)
        pos = np.bincount(row_slot, weights=ya, minlength=s)
        growable = (cnt >= 2 * cfg.min_leaf) & (pos > 0) & (pos < cnt)
        with np.errstate(invalid="ignore"):
            parent = 1.0 - (pos / cnt) ** 2 - ((cnt - pos) / cnt) ** 2

        # per-slot feature subsets, sampled in one shot
        ranks = np.argsort(rng.random((s, d)), axis=1)
        sampled = np.zeros((s, d), dtype=bool)
        np.put_along_axis(sampled, ranks[:, :n_features], True, axis=1)

        best_score = np.full(s, np.inf)
        best_feat = np.full(s, -1)
        best_cut = np.zeros(s, dtype=np.int64)
        for f in range(d):
            m = int(nb[f])
            if m < 2:
                continue
            key = row_slot * m + codes[active, f]
            hist_n = np.bincount(key, minlength=s * m).reshape(s, m).astype(float)
            hist_p = np.bincount(key, weights=ya, minlength=s * m).reshape(s, m)
            ln = np.cumsum(hist_n, axis=1)[:, :-1]
            lp = np.cumsum(hist_p, axis=1)[:, :-1]
            rn = cnt[:, None] - ln
            rp = pos[:, None] - lp
            valid = (ln >= cfg.min_leaf) & (rn >= cfg.min_leaf)
            valid &= growable[:, None] & sampled[:, f][:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                gl = 1.0 - (lp / ln) ** 2 - ((ln - lp) / ln) ** 2
                gr = 1.0 - (rp / rn) ** 2 - ((rn - rp) / rn) ** 2
                score = (ln * gl + rn * gr) / cnt[:, None]
            score[~valid] = np.inf
            k = np.argmin(score, axis=1)
            sc = score[np.arange(s), k]
            better = sc < best_score
            best_score = np.where(better, sc, best_score)
            best_feat = np.where(better, f, best_feat)
            best_cut = np.where(better, k, best_cut)

        split = (best_feat >= 0) & (parent - best_score > 1e-12)
        if not split.any():
            break

        # allocate children, write split decisions into the flat arrays
        child_slot_node = []
        new_slot_of = np.full(s, -1)
        for j in np.nonzero(split)[0]:
            nid = slot_node[j]
            f = int(best_feat[j])
            tree.feature[nid] = f
            tree.threshold[nid] = float(cuts[f][int(best_cut[j])])
            for _ in range(2):
                child_slot_node.append(len(tree.feature))
                tree.feature.append(-1)
                tree.threshold.append(0.0)
                tree.left.append(-1)
                tree.right.append(-1)
                tree.prob.append(0.5)
            tree.left[nid] = child_slot_node[-2]
            tree.right[nid] = child_slot_node[-1]
            new_slot_of[j] = len(child_slot_node) - 2

        keep = split[row_slot]
        rows = active[keep]
        old = row_slot[keep]
        goes_right = codes[rows, best_feat[old]] > best_cut[old]
        row_slot = new_slot_of[old] + goes_right
        active = rows
        slot_node = np.asarray(child_slot_node)

        # leaf probabilities for the new frontier
        s_new = slot_node.size
        cnt_new = np.bincount(row_slot, minlength=s_new)
        pos_new = np.bincount(row_slot, weights=y[active], minlength=s_new)
        with np.errstate(invalid="ignore"):
            p = np.where(cnt_new > 0, pos_new / np.maximum(cnt_new, 1), 0.5)
        for j, nid in enumerate(slot_node):
            tree.prob[nid] = float(p[j])
    return tree.seal()


class RandomForest:
    """Binary classifier; predicts the mean leaf frequency across trees."""

    def __init__(self, config=None):
        self.config = config or RfConfig()
        self.trees = []
        self._cuts = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ShapeError("X must be (n, d) with matching 1-d labels")
        if not np.isin(y, (0, 1)).all():
            raise ShapeError("labels must be 0/1")
        cfg = self.config
        d = X.shape[1]
        if cfg.feature_fraction is not None:
            n_features = max(1, int(round(cfg.feature_fraction * d)))
        else:
            n_features = max(1, int(round(np.sqrt(d))))
        n = X.shape[0]
        codes, cuts = _bin_features(X)
        yf = y.astype(float)
        self._cuts = cuts
        self.trees = []
        for t in range(cfg.n_trees):
            rng = stream(cfg.seed, "tree", t)
            boot = rng.integers(0, n, size=n)
            self.trees.append(_grow_tree(codes[boot], yf[boot], cfg, n_features, rng, cuts))
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        probs = np.zeros(X.shape[0])
        for tree in self.trees:
            probs += tree.predict_proba(X)
        return probs / len(self.trees)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)


def _stratified_split(n_real, n_synth, test_fraction, rng):
    def split(n):
        order = rng.permutation(n)
        cut = int(round(n * (1.0 - test_fraction)))
        cut = min(max(cut, 1), n - 1)
        return order[:cut], order[cut:]

    tr_r, te_r = split(n_real)
    tr_s, te_s = split(n_synth)
    return tr_r, te_r, tr_s, te_s


def c2st_rf(real, synthetic, config=None, seed=None):
    """Classifier two-sample test accuracy (real=1, synthetic=0).

    Both inputs are plain feature matrices (categoricals already one-hot
    encoded).  Rows are pooled, split 70/30 stratified by label, a forest
    is trained on the 70% and the held-out accuracy is returned.  Values
    near 0.5 mean the samples are indistinguishable to the forest.
    """
    real = np.asarray(real, dtype=float)
    synthetic = np.asarray(synthetic, dtype=float)
    if real.ndim != 2 or synthetic.ndim != 2 or real.shape[1] != synthetic.shape[1]:
        raise ShapeError("both samples must be matrices with equal width")
    if real.shape[0] < 4 or synthetic.shape[0] < 4:
        raise ShapeError("need at least four rows per sample")
    cfg = config or RfConfig()
    if seed is not None:
        cfg = RfConfig(cfg.n_trees, cfg.max_depth, cfg.min_leaf,
                       cfg.feature_fraction, seed)
    rng = stream(cfg.seed, "c2st-split")
    tr_r, te_r, tr_s, te_s = _stratified_split(real.shape[0], synthetic.shape[0], 0.3, rng)
    X_train = np.vstack([real[tr_r], synthetic[tr_s]])
    y_train = np.concatenate([np.ones(len(tr_r), int), np.zeros(len(tr_s), int)])
    X_test = np.vstack([real[te_r], synthetic[te_s]])
    y_test = np.concatenate([np.ones(len(te_r), int), np.zeros(len(te_s), int)])
    forest = RandomForest(cfg).fit(X_train, y_train)
    return float((forest.predict(X_test) == y_test).mean())
