import json
import threading
import urllib.error
import urllib.request

import pytest

from checkin_advisor import wire
from checkin_advisor.config import ServiceConfig
from checkin_advisor.service import AdvisorServer
from checkin_advisor.store import ModelRegistry, StoreRecord, TraceStore
from checkin_advisor.trace import SynthConfig, synth_corpus

from conftest import make_checkin, make_trace


@pytest.fixture()
def server(tmp_path):
    config = ServiceConfig(host="127.0.0.1", port=0, store_path=str(tmp_path / "store"))
    srv = AdvisorServer(config)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield base, srv.app
    srv.shutdown()
    srv.server_close()


def call(base, method, path, body=None):
    data = wire.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(base + path, data=data, method=method)
    if data:
        req.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def ingest_toy(base):
    """Two users with distinct venue habits, enough for 2-class training."""
    total = 0
    for user, venues in (("uA", ["v1", "v1", "v1", "v2"]), ("uB", ["v2", "v3", "v3", "v3"])):
        trace = make_trace(venues, user=user, start_seq=total)
        status, out = call(base, "POST", "/v1/traces", wire.trace_to_jsonable(trace))
        assert status == 200, out
        total += out["accepted"]
    return total


class TestStore:
    def test_append_and_read(self, tmp_path):
        store = TraceStore(tmp_path / "s")
        records = [StoreRecord.from_checkin(make_checkin("v1", "u1", i)) for i in range(3)]
        assert store.append_batch(records) == 3
        assert store.count() == 3
        assert [r.checkin_id for r in store.records()] == [r.checkin_id for r in records]

    def test_append_only_grows(self, tmp_path):
        store = TraceStore(tmp_path / "s")
        store.append_batch([StoreRecord.from_checkin(make_checkin("v1", "u1", 0))])
        first = store.records()
        store.append_batch([StoreRecord.from_checkin(make_checkin("v2", "u2", 1))])
        assert store.records()[: len(first)] == first

    def test_registry_one_active_per_task_schema(self, tmp_path, toy_model):
        registry = ModelRegistry(tmp_path / "s")
        e1 = registry.register(toy_model, "attribute", activate=True)
        e2 = registry.register(toy_model, "attribute", activate=True)
        entries = registry.entries()
        active = [e for e in entries if e.active and e.task == "attribute"]
        assert [e.model_id for e in active] == [e2.model_id]
        assert registry.get(e1.model_id).active is False


class TestIngest:
    def test_accepts_batch(self, server):
        base, app = server
        trace = make_trace(["v1", "v2", "v3"], user="uX")
        status, out = call(base, "POST", "/v1/traces", wire.trace_to_jsonable(trace))
        assert (status, out["accepted"]) == (200, 3)
        assert app.store.count() == 3

    def test_duplicate_ids_rejected_as_unit(self, server):
        base, app = server
        trace = make_trace(["v1"], user="uX")
        payload = wire.trace_to_jsonable(trace)
        payload["checkins"].append(dict(payload["checkins"][0]))
        status, out = call(base, "POST", "/v1/traces", payload)
        assert status == 409
        assert app.store.count() == 0

    def test_empty_batch(self, server):
        base, _ = server
        status, out = call(base, "POST", "/v1/traces", {"pseudonym": "u", "checkins": []})
        assert (status, out["accepted"]) == (200, 0)

    def test_malformed_coordinates(self, server):
        base, app = server
        payload = wire.trace_to_jsonable(make_trace(["v1"], user="uX"))
        payload["checkins"][0]["lat"] = 95.0
        status, _ = call(base, "POST", "/v1/traces", payload)
        assert status == 400
        assert app.store.count() == 0


class TestTrainPredictExplain:
    def _train(self, base, activate=False):
        return call(
            base,
            "POST",
            "/v1/models",
            {
                "task": "attribute",
                "kind": "mnb",
                "schema": {"name": "toy", "classes": ["f1", "f2"]},
                "label_source": {"labels": {"uA": "f1", "uB": "f2"}},
                "alpha": 1.0,
                "activate": activate,
            },
        )

    def test_train_no_data_404(self, server):
        base, _ = server
        status, _ = self._train(base)
        assert status == 404

    def test_train_and_list(self, server):
        base, _ = server
        ingest_toy(base)
        status, entry = self._train(base, activate=True)
        assert status == 200
        assert entry["task"] == "attribute" and entry["kind"] == "mnb"
        status, listing = call(base, "GET", "/v1/models")
        assert [m["model_id"] for m in listing["models"]] == [entry["model_id"]]

    def test_train_missing_label_422(self, server):
        base, _ = server
        ingest_toy(base)
        status, out = call(
            base,
            "POST",
            "/v1/models",
            {
                "task": "attribute",
                "schema": {"name": "toy", "classes": ["f1", "f2"]},
                "label_source": {"labels": {"uA": "f1"}},
            },
        )
        assert status == 422
        assert "uB" in out["error"]

    def test_identification_training_uses_store_pseudonyms(self, server):
        base, app = server
        ingest_toy(base)
        status, entry = call(base, "POST", "/v1/models", {"task": "identification"})
        assert status == 200
        model = app.registry.load_model(entry["model_id"])
        assert set(model.schema.classes) == {"uA", "uB"}

    def test_predict_toy_posterior(self, server):
        base, _ = server
        ingest_toy(base)
        _, entry = self._train(base)
        trace = wire.trace_to_jsonable(make_trace(["v1", "v2"], user="q"))
        status, pred = call(
            base, "POST", f"/v1/models/{entry['model_id']}/predict", {"trace": trace}
        )
        assert status == 200
        assert pred["predicted"] == "f1"
        assert pred["posterior"][0] == pytest.approx(0.8, abs=1e-9)

    def test_predict_unknown_model_404(self, server):
        base, _ = server
        trace = wire.trace_to_jsonable(make_trace(["v1"], user="q"))
        status, _ = call(base, "POST", "/v1/models/nope/predict", {"trace": trace})
        assert status == 404

    def test_predict_empty_trace_returns_priors(self, server):
        base, _ = server
        ingest_toy(base)
        _, entry = self._train(base)
        status, pred = call(
            base,
            "POST",
            f"/v1/models/{entry['model_id']}/predict",
            {"trace": {"pseudonym": "q", "checkins": []}},
        )
        assert pred["posterior"] == [0.5, 0.5]

    def test_predict_does_not_persist_trace(self, server):
        base, app = server
        ingest_toy(base)
        _, entry = self._train(base)
        before = app.store.count()
        trace = wire.trace_to_jsonable(make_trace(["v1", "v2"], user="q"))
        for _ in range(3):
            call(base, "POST", f"/v1/models/{entry['model_id']}/predict", {"trace": trace})
            call(
                base,
                "POST",
                f"/v1/models/{entry['model_id']}/explain",
                {"trace": trace, "mode": "why"},
            )
        assert app.store.count() == before

    def test_explain_why_payload(self, server):
        base, _ = server
        ingest_toy(base)
        _, entry = self._train(base)
        trace = wire.trace_to_jsonable(make_trace(["v1", "v2"], user="q"))
        status, payload = call(
            base,
            "POST",
            f"/v1/models/{entry['model_id']}/explain",
            {"trace": trace, "mode": "why"},
        )
        assert status == 200
        assert payload["mode"] == "why"
        assert payload["risk"]["band"] == "medium"
        assert len(payload["factors"]["entries"]) == 2
        assert payload["audit_removed"] == 0

    def test_explain_whatif_identity(self, server):
        base, _ = server
        ingest_toy(base)
        _, entry = self._train(base)
        trace = wire.trace_to_jsonable(make_trace(["v1", "v2"], user="q"))
        status, payload = call(
            base,
            "POST",
            f"/v1/models/{entry['model_id']}/explain",
            {"trace": trace, "mode": "whatif", "edit": {"remove": [], "add": []}},
        )
        assert status == 200
        assert payload["before"] == payload["after"]

    def test_explain_how_carries_no_pseudonyms(self, server):
        base, app = server
        ingest_toy(base)
        _, entry = self._train(base)
        status, payload = call(
            base,
            "POST",
            f"/v1/models/{entry['model_id']}/explain",
            {"mode": "how", "top_k": 1},
        )
        assert status == 200
        for cls, ranking in payload["per_class_top_features"].items():
            assert len(ranking["entries"]) == 1
        blob = wire.dumps(payload)
        for pseudonym in app.store.pseudonyms():
            assert pseudonym not in blob

    def test_explain_bad_mode_400(self, server):
        base, _ = server
        ingest_toy(base)
        _, entry = self._train(base)
        trace = wire.trace_to_jsonable(make_trace(["v1"], user="q"))
        status, _ = call(
            base, "POST", f"/v1/models/{entry['model_id']}/explain",
            {"trace": trace, "mode": "psychic"},
        )
        assert status == 400

    def test_model_survives_restart(self, server, tmp_path):
        base, app = server
        ingest_toy(base)
        _, entry = self._train(base)
        trace = wire.trace_to_jsonable(make_trace(["v1", "v3"], user="q"))
        _, before = call(
            base, "POST", f"/v1/models/{entry['model_id']}/predict", {"trace": trace}
        )
        from checkin_advisor.service import AdvisorApp

        fresh = AdvisorApp(app.config)  # same store path, new process state
        status, after = fresh.handle(
            "POST", f"/v1/models/{entry['model_id']}/predict", {"trace": trace}
        )
        assert status == 200
        assert after == before


class TestObfuscateEndpoint:
    def test_bad_epsilon_400(self, server):
        base, _ = server
        status, _ = call(base, "POST", "/v1/obfuscate", {"epsilon": -1, "points": []})
        assert status == 400

    def test_empty_points(self, server):
        base, _ = server
        status, out = call(base, "POST", "/v1/obfuscate", {"epsilon": 1.0, "points": []})
        assert (status, out["points"]) == (200, [])

    def test_huge_epsilon_close_to_input(self, server):
        base, _ = server
        status, out = call(
            base,
            "POST",
            "/v1/obfuscate",
            {"epsilon": 1e6, "points": [{"lat": 40.7, "lon": -74.0}]},
        )
        assert status == 200
        p = out["points"][0]
        from checkin_advisor.privacy import planar_distance_m

        assert planar_distance_m(40.7, -74.0, p["lat"], p["lon"]) < 0.01
        assert (p["lat"], p["lon"]) != (40.7, -74.0)  # never echoes raw input


class TestReadOnlyInvariants:
    def test_no_endpoint_mutates_records(self, server):
        base, app = server
        ingest_toy(base)
        _, entry = call(base, "POST", "/v1/models", {"task": "identification"})
        log_before = app.store.log_path.read_bytes()
        trace = wire.trace_to_jsonable(make_trace(["v1"], user="q"))
        call(base, "GET", "/v1/models")
        call(base, "POST", f"/v1/models/{entry['model_id']}/predict", {"trace": trace})
        call(
            base,
            "POST",
            f"/v1/models/{entry['model_id']}/explain",
            {"trace": trace, "mode": "why"},
        )
        call(base, "POST", "/v1/obfuscate", {"epsilon": 1.0, "points": [{"lat": 1, "lon": 2}]})
        assert app.store.log_path.read_bytes() == log_before
