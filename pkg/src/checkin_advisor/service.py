"""HTTP backend: anonymized trace ingestion, model training, prediction and
explanation endpoints.

Endpoints (bodies and responses are the JSON wire format):

    POST /v1/traces              ingest an anonymized trace batch
    POST /v1/models              train + register a model snapshot
    GET  /v1/models              list registry entries
    POST /v1/models/{id}/predict stateless scoring; the trace is not stored
    POST /v1/models/{id}/explain why | how | whatif | howto
    POST /v1/obfuscate           planar-Laplace noise for raw points

Query traces sent to predict/explain are never persisted; only /v1/traces
appends to the store.
"""
from __future__ import annotations

import json
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import api, wire
from .config import ServiceConfig
from .errors import (
    BadCoordinate,
    BadParams,
    BadThresholds,
    BadTimestamp,
    DataError,
    EmptyTrace,
    EngineError,
    MalformedLine,
    MissingCorpus,
    MissingVenueIndex,
    UnknownCheckIn,
    UnknownClass,
)
from .explain import HowToTarget, RiskThresholds, TraceEdit
from .privacy import ObfuscationParams, planar_laplace_sample
from .store import ModelRegistry, StoreRecord, TraceStore
from .trace import AttributeSchema, Trace
from .vectors import VectorParams

_MODEL_ROUTE = re.compile(r"^/v1/models/([^/]+)/(predict|explain)$")

_BAD_REQUEST = (
    BadParams, BadThresholds, UnknownCheckIn, UnknownClass,
    EmptyTrace, MissingCorpus, MissingVenueIndex,
    BadCoordinate, BadTimestamp, MalformedLine,
)


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class AdvisorApp:
    """Route handling over an append-only store and immutable snapshots."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        root = Path(config.store_path)
        self.store = TraceStore(root)
        self.registry = ModelRegistry(root)
        self._model_cache: dict[str, object] = {}

    @property
    def thresholds(self) -> RiskThresholds:
        return RiskThresholds(t_low=self.config.t_low, t_high=self.config.t_high)

    def handle(self, method: str, path: str, body) -> tuple[int, dict]:
        try:
            if method == "POST" and path == "/v1/traces":
                return 200, self._ingest(body)
            if method == "POST" and path == "/v1/models":
                return 200, self._train(body)
            if method == "GET" and path == "/v1/models":
                return 200, {"models": [e.to_jsonable() for e in self.registry.entries()]}
            if method == "POST" and path == "/v1/obfuscate":
                return 200, self._obfuscate(body)
            match = _MODEL_ROUTE.match(path) if method == "POST" else None
            if match:
                model = self._load(match.group(1))
                if match.group(2) == "predict":
                    return 200, self._predict(model, body)
                return 200, self._explain(model, body)
            return 404, {"error": f"no route {method} {path}"}
        except ApiError as exc:
            return exc.status, {"error": str(exc)}
        except _BAD_REQUEST as exc:
            return 400, {"error": str(exc)}
        except (KeyError, TypeError, ValueError) as exc:
            return 400, {"error": f"malformed request: {exc}"}
        except DataError as exc:
            return 422, {"error": str(exc)}
        except EngineError as exc:
            return 422, {"error": str(exc)}

    # -- endpoint bodies ---------------------------------------------------

    def _ingest(self, body) -> dict:
        trace = wire.trace_from_jsonable(body)
        ids = [c.checkin_id for c in trace.checkins]
        if len(set(ids)) != len(ids):
            raise ApiError(409, "duplicate checkin_id within batch")
        records = [StoreRecord.from_checkin(c) for c in trace.checkins]
        accepted = self.store.append_batch(records) if records else 0
        return {"accepted": accepted}

    def _train(self, body) -> dict:
        task = body.get("task", "attribute")
        kind = body.get("kind", "mnb")
        granularity = body.get("granularity", "venue")
        if self.store.count() == 0:
            raise ApiError(404, "store holds no data to train on")
        if task == "identification":
            corpus = self.store.corpus_for_identification(granularity)
        else:
            schema = AttributeSchema(
                name=str(body["schema"]["name"]),
                classes=tuple(body["schema"]["classes"]),
            )
            label_source = body.get("label_source", {})
            if "labels" in label_source:
                label_map = {str(k): str(v) for k, v in label_source["labels"].items()}
            elif "path" in label_source:
                from .trace import read_label_map

                label_map = read_label_map(label_source["path"])
            else:
                raise ApiError(422, "attribute training needs a label_source")
            corpus = self.store.corpus_for_attribute(schema, label_map, granularity)
        params = VectorParams(**body.get("params", {})) if body.get("params") else None
        model = api.train_model(
            corpus,
            task=task,
            kind=kind,
            alpha=float(body.get("alpha", 1.0)),
            k_min=int(body.get("k_min", 0)),
            params=params,
        )
        entry = self.registry.register(model, task, activate=bool(body.get("activate", False)))
        return entry.to_jsonable()

    def _load(self, model_id: str):
        if model_id not in self._model_cache:
            model = self.registry.load_model(model_id)
            if model is None:
                raise ApiError(404, f"unknown model {model_id!r}")
            self._model_cache[model_id] = model
        return self._model_cache[model_id]

    def _predict(self, model, body) -> dict:
        trace = wire.trace_from_jsonable(body["trace"])
        return api.build_predict_payload(model, trace)

    def _explain(self, model, body) -> dict:
        mode = body.get("mode", "why")
        trace = wire.trace_from_jsonable(body["trace"]) if "trace" in body else None
        thresholds = (
            wire.thresholds_from_jsonable(body["thresholds"])
            if "thresholds" in body
            else self.thresholds
        )
        edit = None
        if "edit" in body:
            edit = TraceEdit(
                add=tuple(
                    wire.checkin_from_jsonable(c) for c in body["edit"].get("add", [])
                ),
                remove=tuple(body["edit"].get("remove", [])),
            )
        target = None
        if "target" in body:
            target = HowToTarget(
                kind=body["target"].get("kind", "flip"),
                band=body["target"].get("band", "low"),
            )
        return api.build_explain_payload(
            model,
            trace,
            mode,
            top_k=body.get("top_k", 5),
            thresholds=thresholds,
            edit=edit,
            target=target,
            method=body.get("method"),
            known_pseudonyms=set(self.store.pseudonyms()),
        )

    def _obfuscate(self, body) -> dict:
        params = ObfuscationParams(
            epsilon=float(body["epsilon"]),
            snap=body.get("snap", "none"),
            snap_radius_m=float(body.get("snap_radius_m", 100.0)),
        )
        rng = np.random.default_rng()  # fresh entropy per request
        if params.snap != "none":
            index = self.store.venue_index()
            if not index:
                raise MissingVenueIndex("store holds no venue coordinates to snap to")
        out = []
        for p in body.get("points", []):
            lat, lon = planar_laplace_sample(float(p["lat"]), float(p["lon"]), params, rng)
            point = {"lat": lat, "lon": lon}
            if params.snap != "none":
                from .privacy import nearest_venue

                vid, d = nearest_venue(lat, lon, index)
                point["venue_id"] = vid if vid is not None and d <= params.snap_radius_m else ""
            out.append(point)
        return {"points": out}


class AdvisorHandler(BaseHTTPRequestHandler):
    server_version = "checkin-advisor/0.1"

    def log_message(self, format, *args):  # keep test output quiet
        pass

    def _respond(self, status: int, payload: dict) -> None:
        body = wire.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _dispatch(self, method: str) -> None:
        body = None
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw)
            except json.JSONDecodeError as exc:
                self._respond(400, {"error": f"malformed request body: {exc}"})
                return
        status, payload = self.server.app.handle(method, self.path, body)
        self._respond(status, payload)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


class AdvisorServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, config: ServiceConfig):
        super().__init__((config.host, config.port), AdvisorHandler)
        self.app = AdvisorApp(config)


def serve(config: ServiceConfig) -> None:
    server = AdvisorServer(config)
    host, port = server.server_address[:2]
    print(f"listening on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
