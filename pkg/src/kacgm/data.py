"""Column-major tabular data keyed to a causal graph's node schema.

Continuous columns are float arrays; categorical columns hold integer level
indices.  Construction validates finiteness and level ranges so every batch
seen downstream is well-formed.
"""

import numpy as np

from .errors import InputDomainError, ShapeError
from .graph import CATEGORICAL, CONTINUOUS


def validate_columns(graph, columns, require_all=True):
    """Validate a ``{name: array}`` mapping against the graph schema.

    Returns a new dict with normalized dtypes (float64 / int64), all columns
    sharing one length.
    """
    out = {}
    n = None
    for name in columns:
        if name not in graph:
            raise ShapeError("column %r is not a graph node" % (name,))
    for node in graph.nodes:
        if node.name not in columns:
            if require_all:
                raise ShapeError("missing column %r" % (node.name,))
            continue
        raw = np.asarray(columns[node.name])
        if raw.ndim != 1:
            raise ShapeError("column %r must be one-dimensional" % (node.name,))
        if n is None:
            n = raw.shape[0]
        elif raw.shape[0] != n:
            raise ShapeError("column %r has length %d, expected %d"
                             % (node.name, raw.shape[0], n))
        if node.kind == CONTINUOUS:
            col = raw.astype(float)
            if not np.all(np.isfinite(col)):
                raise InputDomainError("column %r contains non-finite values" % (node.name,))
        else:
            col = np.asarray(raw)
            as_int = col.astype(np.int64)
            if not np.array_equal(as_int, col.astype(float)):
                raise InputDomainError(
                    "categorical column %r must hold integer level indices" % (node.name,)
                )
            col = as_int
            if col.size and (col.min() < 0 or col.max() >= node.levels):
                raise InputDomainError(
                    "categorical column %r has levels outside [0, %d)"
                    % (node.name, node.levels)
                )
        out[node.name] = col
    return out


def n_rows(columns):
    for col in columns.values():
        return int(np.asarray(col).shape[0])
    return 0


def take_rows(columns, idx):
    return {name: np.asarray(col)[idx] for name, col in columns.items()}


def encoded_width(graph, names):
    """Width of the one-hot encoded design matrix for the given nodes."""
    total = 0
    for name in names:
        node = graph.node(name)
        total += node.levels if node.kind == CATEGORICAL else 1
    return total


def encode_matrix(graph, columns, names):
    """Stack the named columns into a matrix, one-hot encoding categoricals."""
    n = n_rows(columns)
    blocks = []
    for name in names:
        node = graph.node(name)
        col = np.asarray(columns[name])
        if node.kind == CONTINUOUS:
            blocks.append(col.astype(float)[:, None])
        else:
            onehot = np.zeros((n, node.levels))
            onehot[np.arange(n), col.astype(int)] = 1.0
            blocks.append(onehot)
    if not blocks:
        return np.zeros((n, 0))
    return np.concatenate(blocks, axis=1)


def encoded_input_names(graph, names):
    """Network input labels matching :func:`encode_matrix` column order."""
    labels = []
    for name in names:
        node = graph.node(name)
        if node.kind == CONTINUOUS:
            labels.append(name)
        else:
            labels.extend("%s=%d" % (name, k) for k in range(node.levels))
    return tuple(labels)


class SampleBatch:
    """Rows produced by a sampling query, tagged with their provenance."""

    def __init__(self, graph, columns, provenance):
        self.graph = graph
        self.columns = validate_columns(graph, columns)
        self.provenance = tuple(provenance)

    @property
    def n(self):
        return n_rows(self.columns)

    def matrix(self, names=None):
        return encode_matrix(self.graph, self.columns, names or self.graph.names)

    def take(self, idx):
        return SampleBatch(self.graph, take_rows(self.columns, idx), self.provenance)
