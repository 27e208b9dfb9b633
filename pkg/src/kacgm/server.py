"""HTTP/JSON query service over an immutable trained model.

Request bodies are flat JSON objects whose reserved keys ``request_id`` and
``seed`` ride alongside the endpoint's own fields.  Responses wrap the
endpoint payload in an envelope ``{request_id, seed, payload}`` serialized
canonically (sorted keys), so identical ``(endpoint, payload, seed)``
triples produce byte-identical bodies; compute time travels in the
``X-Compute-Ms`` header instead of the body.  When a request omits its
seed, one is derived by hashing the payload, keeping exploration
reproducible and shareable.
"""

import hashlib
import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response

from . import io
from .diagnostics import falsify
from .errors import ConfigError, IdentifiabilityError, KacgmError
from .interpret import ate_from_pdp, pdp, prp
from .queries import (Intervention, counterfactual, sample_interventional,
                      sample_observational)

MAX_HISTOGRAM_BINS = 64
DEFAULT_MAX_N = 100_000
DEFAULT_ROW_CAP = 200


@dataclass
class ServerConfig:
    """Deployment knobs; the model itself is immutable once loaded."""

    model_path: str = None
    host: str = "127.0.0.1"
    port: int = 8000
    max_n: int = DEFAULT_MAX_N
    row_cap: int = DEFAULT_ROW_CAP
    default_seed: int = None
    cors_origins: tuple = ()
    eval_data_path: str = None
    n_permutations: int = 199
    diagnostics_seed: int = 0

    def __post_init__(self):
        if self.max_n < 1:
            raise ConfigError("max_n must be positive")
        if self.row_cap < 1:
            raise ConfigError("row_cap must be positive")


class ApiError(Exception):
    """Handler-level failure mapped onto an HTTP status + error document."""

    def __init__(self, status, code, message, **extra):
        super().__init__(message)
        self.status = status
        self.code = code
        self.extra = extra


def _json_response(document, status=200, headers=None):
    return Response(content=io.canonical_json(document), status_code=status,
                    media_type="application/json", headers=headers)


def _error_response(status, code, message, **extra):
    document = {"error": code, "message": str(message)}
    document.update(extra)
    return _json_response(document, status=status)


def _derive_seed(endpoint, payload):
    digest = hashlib.blake2b(
        (endpoint + "\x1f" + io.canonical_json(payload)).encode("utf-8"),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "big") >> 2  # keep it comfortably in int64


def _derive_request_id(endpoint, payload, seed):
    digest = hashlib.blake2b(
        ("%s\x1f%s\x1f%r" % (endpoint, io.canonical_json(payload), seed)).encode("utf-8"),
        digest_size=8,
    ).hexdigest()
    return digest


def _envelope(endpoint, payload_in, seed, body, request_id=None):
    if request_id is None:
        request_id = _derive_request_id(endpoint, payload_in, seed)
    return {"request_id": request_id, "seed": seed, "payload": body}


def _fd_histogram(values):
    """Freedman-Diaconis binned histogram, capped at MAX_HISTOGRAM_BINS."""
    values = np.asarray(values, float)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return {"kind": "continuous", "edges": [lo, hi],
                "counts": [int(values.size)]}
    q75, q25 = np.percentile(values, [75.0, 25.0])
    width = 2.0 * (q75 - q25) * values.size ** (-1.0 / 3.0)
    if width <= 0.0:
        bins = MAX_HISTOGRAM_BINS
    else:
        bins = int(np.ceil((hi - lo) / width))
        bins = max(1, min(bins, MAX_HISTOGRAM_BINS))
    counts, edges = np.histogram(values, bins=bins)
    return {"kind": "continuous", "edges": [float(e) for e in edges],
            "counts": [int(c) for c in counts]}


def _level_histogram(values, levels):
    counts = np.bincount(np.asarray(values, int), minlength=levels)
    return {"kind": "categorical", "levels": list(range(levels)),
            "counts": [int(c) for c in counts]}


def _histograms(graph, columns):
    out = {}
    for name in graph.names:
        spec = graph.node(name)
        if spec.kind == "categorical":
            out[name] = _level_histogram(columns[name], spec.levels)
        else:
            out[name] = _fd_histogram(columns[name])
    return out


def _require(payload, key, kinds, what):
    if key not in payload:
        raise ApiError(400, "malformed", "missing field %r" % (key,))
    value = payload[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise ApiError(400, "malformed", "field %r must be %s" % (key, what))
    return value


def _check_known_nodes(graph, names):
    unknown = [n for n in names if n not in graph.names]
    if unknown:
        raise ApiError(404, "unknown-node",
                       "unknown node(s): %s" % ", ".join(sorted(unknown)),
                       nodes=sorted(unknown))


def _parse_interventions(graph, payload):
    doc = payload.get("interventions") or {}
    if not isinstance(doc, dict):
        raise ApiError(400, "malformed", "interventions must be an object")
    standardized = payload.get("standardized", False)
    if not isinstance(standardized, bool):
        raise ApiError(400, "malformed", "standardized must be a boolean")
    _check_known_nodes(graph, doc)
    assignments = {}
    for name, value in doc.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ApiError(400, "malformed",
                           "intervention value for %r must be numeric" % (name,))
        if graph.node(name).kind == "categorical":
            if float(value) != int(value):
                raise ApiError(400, "malformed",
                               "categorical intervention on %r must be an "
                               "integer level" % (name,))
            value = int(value)
        assignments[name] = value
    if not assignments:
        return None
    return Intervention(assignments, standardized=standardized)


def _diagnostics_summary(report):
    if report is None:
        return None
    return {
        "mmd_obs": float(report.mmd_obs),
        "rf_acc_obs": float(report.rf_acc_obs),
        "dhsic_pvalue": float(report.dhsic_pvalue),
        "min_hsic_pvalue": (min(float(t.hsic_pvalue) for t in report.node_tests)
                            if report.node_tests else None),
    }


def create_app(model, config=None):
    """Build the FastAPI app around one loaded model.

    Diagnostics are computed eagerly when evaluation data is configured, so
    every endpoint (including the diagnostics summary inside GET /api/model)
    is deterministic for the server's lifetime.
    """
    config = config or ServerConfig()
    graph = model.graph

    eval_data = None
    report = None
    if config.eval_data_path is not None:
        eval_data = io.read_csv(config.eval_data_path, graph)
        report = falsify(model, eval_data,
                         n_permutations=config.n_permutations,
                         seed=config.diagnostics_seed)

    app = FastAPI(title="kacgm", docs_url=None, redoc_url=None,
                  openapi_url=None)
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )

    @app.middleware("http")
    async def _timing(request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = (time.perf_counter() - start) * 1e3
        response.headers["X-Compute-Ms"] = "%.3f" % elapsed_ms
        return response

    @app.exception_handler(ApiError)
    async def _api_error(request, exc):
        return _error_response(exc.status, exc.code, exc, **exc.extra)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request, exc):
        return _error_response(400, "malformed", "invalid request: %s" % exc)

    @app.exception_handler(KacgmError)
    async def _domain_error(request, exc):
        if isinstance(exc, IdentifiabilityError):
            return _error_response(409, exc.code, exc,
                                   offenders=list(exc.offenders))
        return _error_response(400, exc.code, exc)

    async def _body(request):
        try:
            doc = await request.json()
        except Exception:
            raise ApiError(400, "malformed", "request body is not valid JSON")
        if not isinstance(doc, dict):
            raise ApiError(400, "malformed", "request body must be an object")
        return doc

    def _split_envelope(endpoint, doc):
        request_id = doc.get("request_id")
        if request_id is not None and not isinstance(request_id, str):
            raise ApiError(400, "malformed", "request_id must be a string")
        seed = doc.get("seed")
        if seed is not None and (isinstance(seed, bool)
                                 or not isinstance(seed, int)):
            raise ApiError(400, "malformed", "seed must be an integer")
        payload = {k: v for k, v in doc.items()
                   if k not in ("request_id", "seed")}
        if seed is None:
            seed = (config.default_seed if config.default_seed is not None
                    else _derive_seed(endpoint, payload))
        return request_id, seed, payload

    # --- endpoints ---------------------------------------------------------

    @app.get("/healthz")
    async def healthz():
        return _json_response({"status": "ok", "stage": model.stage})

    @app.get("/api/model")
    async def get_model():
        formulas = {}
        for name in graph.names:
            mech = model.mechanism(name)
            if mech.symbolic is not None:
                formulas[name] = mech.symbolic.formula(decimals=3)
        payload = {
            "graph": graph.to_dict(),
            "kinds": {name: graph.node(name).kind for name in graph.names},
            "levels": {name: graph.node(name).levels
                       for name in graph.names
                       if graph.node(name).kind == "categorical"},
            "stage": model.stage,
            "formulas": formulas,
            "diagnostics": _diagnostics_summary(report),
        }
        return _json_response(_envelope("/api/model", {}, None, payload))

    @app.post("/api/sample")
    async def post_sample(request: Request):
        doc = await _body(request)
        request_id, seed, payload = _split_envelope("/api/sample", doc)
        n = _require(payload, "n", int, "an integer")
        if n < 1:
            raise ApiError(400, "malformed", "n must be at least 1")
        if n > config.max_n:
            raise ApiError(413, "over-cap",
                           "n=%d exceeds the per-request cap of %d"
                           % (n, config.max_n), max_n=config.max_n)
        intervention = _parse_interventions(graph, payload)
        if intervention is None:
            batch = sample_observational(model, n, seed=seed)
        else:
            batch = sample_interventional(model, intervention, n, seed=seed)
        keep = min(n, config.row_cap)
        rows = {name: batch.columns[name][:keep].tolist()
                for name in graph.names}
        body = {
            "n": n,
            "row_count": keep,
            "rows": rows,
            "histograms": _histograms(graph, batch.columns),
            "interventions": payload.get("interventions") or {},
        }
        return _json_response(
            _envelope("/api/sample", payload, seed, body, request_id))

    @app.post("/api/counterfactual")
    async def post_counterfactual(request: Request):
        doc = await _body(request)
        request_id, seed, payload = _split_envelope("/api/counterfactual", doc)
        factual = _require(payload, "factual_row", dict, "an object")
        _check_known_nodes(graph, factual)
        missing = [n for n in graph.names if n not in factual]
        if missing:
            raise ApiError(400, "malformed",
                           "factual_row is missing node(s): %s"
                           % ", ".join(missing))
        intervention = _parse_interventions(graph, payload)
        if intervention is None:
            raise ApiError(400, "malformed",
                           "at least one intervention is required")
        override = payload.get("override", False)
        if not isinstance(override, bool):
            raise ApiError(400, "malformed", "override must be a boolean")
        columns = {}
        for name in graph.names:
            value = factual[name]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ApiError(400, "malformed",
                               "factual value for %r must be numeric" % (name,))
            kind = graph.node(name).kind
            dtype = np.int64 if kind == "categorical" else float
            columns[name] = np.asarray([value], dtype=dtype)
        result = counterfactual(model, columns, intervention,
                                override=override, seed=seed)
        row = {name: result.rows.columns[name][0]
               for name in graph.names}
        noise = {name: float(u[0]) for name, u in result.abducted_noise.items()}
        body = {
            "row": row,
            "point_valued": result.point_valued,
            "category_probs": {name: probs[0].tolist()
                               for name, probs in result.category_probs.items()},
            "noise": noise,
        }
        return _json_response(
            _envelope("/api/counterfactual", payload, seed, body, request_id))

    @app.get("/api/pdp")
    async def get_pdp(node: str, parent: str, points: int = 41):
        _check_known_nodes(graph, [node, parent])
        if points < 2:
            raise ApiError(400, "malformed", "points must be at least 2")
        curve = pdp(model, node, parent, data=eval_data, n_points=points)
        payload_in = {"node": node, "parent": parent, "points": points}
        return _json_response(
            _envelope("/api/pdp", payload_in, None, curve.to_dict()))

    @app.post("/api/ate")
    async def post_ate(request: Request):
        doc = await _body(request)
        request_id, _, payload = _split_envelope("/api/ate", doc)
        node = _require(payload, "node", str, "a string")
        parent = _require(payload, "parent", str, "a string")
        _check_known_nodes(graph, [node, parent])
        from_value = _require(payload, "from", (int, float), "numeric")
        to_value = _require(payload, "to", (int, float), "numeric")
        curve = pdp(model, node, parent, data=eval_data)
        value = ate_from_pdp(curve, float(from_value), float(to_value))
        body = {"node": node, "parent": parent, "from": float(from_value),
                "to": float(to_value), "ate": float(value)}
        return _json_response(
            _envelope("/api/ate", payload, None, body, request_id))

    def _prp_body(node, row, row_id):
        _check_known_nodes(graph, [node])
        decomposition = prp(model, node, row, row_id=row_id)
        return decomposition.to_dict()

    @app.get("/api/prp")
    async def get_prp(node: str, row: int):
        if eval_data is None:
            raise ApiError(404, "no-eval-data",
                           "no evaluation data configured on this server")
        n = len(eval_data[graph.names[0]])
        if not 0 <= row < n:
            raise ApiError(400, "malformed",
                           "row %d out of range for %d evaluation rows"
                           % (row, n))
        values = {name: eval_data[name][row] for name in graph.names}
        body = _prp_body(node, values, row)
        payload_in = {"node": node, "row": row}
        return _json_response(_envelope("/api/prp", payload_in, None, body))

    @app.post("/api/prp")
    async def post_prp(request: Request):
        doc = await _body(request)
        request_id, _, payload = _split_envelope("/api/prp", doc)
        node = _require(payload, "node", str, "a string")
        row = _require(payload, "row", dict, "an object")
        _check_known_nodes(graph, row)
        for name, value in row.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ApiError(400, "malformed",
                               "row value for %r must be numeric" % (name,))
        body = _prp_body(node, dict(row), None)
        return _json_response(
            _envelope("/api/prp", payload, None, body, request_id))

    @app.get("/api/diagnostics")
    async def get_diagnostics():
        if report is None:
            raise ApiError(404, "no-eval-data",
                           "no evaluation data configured on this server")
        return _json_response(
            _envelope("/api/diagnostics", {}, None, report.to_dict()))

    return app


def run_server(config):
    """Load the model and serve it; blocks until interrupted."""
    import uvicorn

    if config.model_path is None:
        raise ConfigError("serve requires a model path")
    model = io.load_model(config.model_path)
    app = create_app(model, config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
