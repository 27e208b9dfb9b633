"""Artifact plumbing: CSV datasets and canonical JSON documents.

Model and report files are canonical JSON — sorted keys, compact
separators, shortest-round-trip float repr — so identical objects always
serialize to identical bytes.  Every write goes through a temp file in the
target directory followed by an atomic rename.  Model documents carry a
version field and a content fingerprint that is checked on load.
"""

import csv
import hashlib
import json
import os
import tempfile

import numpy as np

from .errors import ConfigError, ModelFileError, ParseError
from .graph import CausalGraph
from .kan import KanNetwork
from .scm import KacgmModel, Mechanism, NoiseModel, Standardizer, UNIFORM
from .symbolic import SymbolicMechanism

MODEL_FILE_VERSION = 1


# --- atomic writes ------------------------------------------------------------

def atomic_write_text(path, text):
    """Write-temp-then-rename so readers never observe partial files."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonify(value):
    """Coerce numpy containers/scalars so json.dumps succeeds."""
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def canonical_json(document):
    """Byte-stable JSON text for a document (sorted keys, repr floats)."""
    return json.dumps(_jsonify(document), sort_keys=True,
                      separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False)


def write_json(path, document):
    atomic_write_text(path, canonical_json(document) + "\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# --- CSV datasets ----------------------------------------------------------------

def _format_cell(value, kind):
    if kind == "categorical":
        return "%d" % int(value)
    return "%.17g" % float(value)


def write_csv(path, graph, columns):
    """Comma-separated dataset with 17-significant-digit continuous cells."""
    names = list(graph.names)
    n = len(np.asarray(columns[names[0]]))
    lines = [",".join(names)]
    kinds = [graph.node(name).kind for name in names]
    arrays = [np.asarray(columns[name]) for name in names]
    for i in range(n):
        lines.append(",".join(
            _format_cell(arr[i], kind) for arr, kind in zip(arrays, kinds)
        ))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path, graph):
    """Parse a dataset, validating each cell against the graph's node kinds."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=0, column="")
        header = [h.strip() for h in header]
        missing = set(graph.names) - set(header)
        if missing:
            raise ParseError(
                "missing columns: %s" % ", ".join(sorted(missing)),
                row=0, column=sorted(missing)[0],
            )
        extra = set(header) - set(graph.names)
        if extra:
            raise ParseError(
                "unknown columns: %s" % ", ".join(sorted(extra)),
                row=0, column=sorted(extra)[0],
            )
        index = {name: header.index(name) for name in graph.names}
        cells = {name: [] for name in graph.names}
        for r, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ParseError(
                    "expected %d cells, found %d" % (len(header), len(row)),
                    row=r, column=header[min(len(row), len(header) - 1)],
                )
            for name in graph.names:
                raw = row[index[name]].strip()
                if raw == "":
                    raise ParseError("missing value", row=r, column=name)
                spec = graph.node(name)
                if spec.kind == "categorical":
                    try:
                        value = int(raw)
                    except ValueError:
                        raise ParseError(
                            "expected an integer level, got %r" % (raw,),
                            row=r, column=name,
                        )
                    if not 0 <= value < spec.levels:
                        raise ParseError(
                            "level %d out of range for %d levels" % (value, spec.levels),
                            row=r, column=name,
                        )
                    cells[name].append(value)
                else:
                    try:
                        value = float(raw)
                    except ValueError:
                        raise ParseError(
                            "expected a number, got %r" % (raw,),
                            row=r, column=name,
                        )
                    if not np.isfinite(value):
                        raise ParseError(
                            "non-finite value %r" % (raw,), row=r, column=name,
                        )
                    cells[name].append(value)
    out = {}
    for name in graph.names:
        kind = graph.node(name).kind
        dtype = np.int64 if kind == "categorical" else float
        out[name] = np.asarray(cells[name], dtype=dtype)
    return out


# --- graph files ------------------------------------------------------------------

def save_graph(path, graph):
    write_json(path, graph.to_dict())


def load_graph(path):
    return CausalGraph.from_dict(read_json(path))


# --- model files ------------------------------------------------------------------

def _noise_to_dict(noise):
    return {
        "kind": noise.kind,
        "samples": noise.samples.tolist(),
        "bandwidth": float(noise.bandwidth),
    }


def _noise_from_dict(d):
    if d["kind"] == UNIFORM:
        return NoiseModel(kind=UNIFORM)
    return NoiseModel(kind=d["kind"], samples=np.asarray(d["samples"], float),
                      bandwidth=float(d["bandwidth"]))


def _mechanism_to_dict(mech):
    doc = {
        "node": mech.node,
        "kind": mech.kind,
        "parents": list(mech.parents),
        "input_labels": list(mech.input_labels),
        "levels": int(mech.levels),
        "network": mech.network.to_dict() if mech.network is not None else None,
        "symbolic": mech.symbolic.to_dict() if mech.symbolic is not None else None,
        "root_probs": (mech.root_probs.tolist()
                       if mech.root_probs is not None else None),
    }
    return doc


def _mechanism_from_dict(d):
    return Mechanism(
        node=d["node"],
        kind=d["kind"],
        parents=tuple(d["parents"]),
        input_labels=tuple(d["input_labels"]),
        network=(KanNetwork.from_dict(d["network"])
                 if d.get("network") is not None else None),
        symbolic=(SymbolicMechanism.from_dict(d["symbolic"])
                  if d.get("symbolic") is not None else None),
        root_probs=(np.asarray(d["root_probs"], float)
                    if d.get("root_probs") is not None else None),
        levels=int(d["levels"]),
    )


def model_to_dict(model):
    body = {
        "version": MODEL_FILE_VERSION,
        "graph": model.graph.to_dict(),
        "standardizer": {name: [m, s] for name, (m, s) in model.standardizer.stats.items()},
        "mechanisms": {name: _mechanism_to_dict(mech)
                       for name, mech in model.mechanisms.items()},
        "noise": {name: _noise_to_dict(nm) for name, nm in model.noise.items()},
        "stage": model.stage,
        "metadata": _jsonify(model.metadata),
    }
    body["fingerprint"] = hashlib.sha256(
        canonical_json(body).encode("utf-8")
    ).hexdigest()
    return body


def model_from_dict(doc):
    if not isinstance(doc, dict) or "version" not in doc:
        raise ModelFileError("model document lacks a version field")
    if doc["version"] != MODEL_FILE_VERSION:
        raise ModelFileError(
            "unsupported model file version %r (expected %d)"
            % (doc["version"], MODEL_FILE_VERSION)
        )
    try:
        graph = CausalGraph.from_dict(doc["graph"])
        standardizer = Standardizer(
            {name: (float(m), float(s))
             for name, (m, s) in doc["standardizer"].items()}
        )
        mechanisms = {name: _mechanism_from_dict(d)
                      for name, d in doc["mechanisms"].items()}
        noise = {name: _noise_from_dict(d) for name, d in doc["noise"].items()}
        model = KacgmModel(
            graph=graph,
            standardizer=standardizer,
            mechanisms=mechanisms,
            noise=noise,
            stage=doc["stage"],
            metadata=doc.get("metadata", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError("corrupted model document: %s" % (exc,))
    return model


def save_model(model, path):
    write_json(path, model_to_dict(model))


def load_model(path, verify_fingerprint=True):
    try:
        doc = read_json(path)
    except json.JSONDecodeError as exc:
        raise ModelFileError("model file is not valid JSON: %s" % (exc,))
    if verify_fingerprint and "fingerprint" in doc:
        stated = doc.pop("fingerprint")
        actual = hashlib.sha256(
            canonical_json(doc).encode("utf-8")
        ).hexdigest()
        if stated != actual:
            raise ModelFileError("model file fingerprint mismatch")
        doc["fingerprint"] = stated
    return model_from_dict(doc)


# --- config files -----------------------------------------------------------------

def load_config(path):
    if path is None:
        return {}
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc
