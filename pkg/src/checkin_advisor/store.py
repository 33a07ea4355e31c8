"""Append-only anonymized trace store and the model registry.

Records land in a line-delimited log (one JSON object per line); nothing ever
rewrites or deletes an existing line. Model snapshots are immutable files
under ``snapshots/``; the registry tracks which snapshot is active per
(task, schema) pair.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import wire
from .errors import DataError
from .trace import (
    AttributeSchema,
    CheckIn,
    IdentitySchema,
    LabeledCheckIn,
    LabeledCorpus,
    Trace,
    attach_labels,
    corpus_from_records,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class StoreRecord:
    pseudonym: str
    venue_id: str
    category_id: str
    lat: float
    lon: float
    timestamp: int
    tz_offset: int
    checkin_id: str
    received_at: int
    schema_version: int = SCHEMA_VERSION

    def to_checkin(self) -> CheckIn:
        return CheckIn(
            checkin_id=self.checkin_id,
            pseudonym=self.pseudonym,
            venue_id=self.venue_id,
            category_id=self.category_id,
            lat=self.lat,
            lon=self.lon,
            timestamp=self.timestamp,
            tz_offset=self.tz_offset,
        )

    def to_jsonable(self) -> dict:
        return {
            "pseudonym": self.pseudonym,
            "venue_id": self.venue_id,
            "category_id": self.category_id,
            "lat": float(self.lat),
            "lon": float(self.lon),
            "timestamp": int(self.timestamp),
            "tz_offset": int(self.tz_offset),
            "checkin_id": self.checkin_id,
            "received_at": int(self.received_at),
            "schema_version": int(self.schema_version),
        }

    @staticmethod
    def from_jsonable(d: dict) -> "StoreRecord":
        return StoreRecord(
            pseudonym=str(d["pseudonym"]),
            venue_id=str(d.get("venue_id", "")),
            category_id=str(d.get("category_id", "")),
            lat=float(d["lat"]),
            lon=float(d["lon"]),
            timestamp=int(d["timestamp"]),
            tz_offset=int(d.get("tz_offset", 0)),
            checkin_id=str(d["checkin_id"]),
            received_at=int(d["received_at"]),
            schema_version=int(d.get("schema_version", SCHEMA_VERSION)),
        )

    @staticmethod
    def from_checkin(c: CheckIn, received_at: int | None = None) -> "StoreRecord":
        return StoreRecord(
            pseudonym=c.pseudonym,
            venue_id=c.venue_id,
            category_id=c.category_id,
            lat=c.lat,
            lon=c.lon,
            timestamp=c.timestamp,
            tz_offset=c.tz_offset,
            checkin_id=c.checkin_id,
            received_at=int(time.time()) if received_at is None else received_at,
        )


class TraceStore:
    """Single-writer append log; reads see a consistent prefix."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.log_path = self.root / "records.log"
        self._lock = threading.Lock()

    def append_batch(self, records: list[StoreRecord]) -> int:
        """Append all records atomically with respect to other appenders.

        Batches containing duplicate checkin ids are rejected as a unit.
        """
        ids = [r.checkin_id for r in records]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate checkin_id within batch")
        lines = "".join(wire.dumps_line(r.to_jsonable()) for r in records)
        with self._lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(lines)
                fh.flush()
        return len(records)

    def records(self) -> list[StoreRecord]:
        if not self.log_path.exists():
            return []
        out = []
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    out.append(StoreRecord.from_jsonable(wire.loads(line)))
        return out

    def count(self) -> int:
        return len(self.records())

    def pseudonyms(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for r in self.records():
            seen.setdefault(r.pseudonym, None)
        return tuple(seen)

    def venue_index(self) -> dict[str, tuple[float, float]]:
        """First observed coordinates per venue id."""
        out: dict[str, tuple[float, float]] = {}
        for r in self.records():
            if r.venue_id and r.venue_id not in out:
                out[r.venue_id] = (r.lat, r.lon)
        return out

    def corpus_for_attribute(
        self, schema: AttributeSchema, label_map: dict[str, str], granularity: str
    ) -> LabeledCorpus:
        """Labeled corpus from stored records; records without a discrete
        feature at this granularity carry no trainable signal and are skipped."""
        checkins = [
            r.to_checkin()
            for r in self.records()
            if (r.venue_id if granularity == "venue" else r.category_id)
        ]
        return attach_labels(checkins, schema, label_map, granularity)

    def corpus_for_identification(
        self, granularity: str, schema_name: str = "identification"
    ) -> LabeledCorpus:
        records = [
            r
            for r in self.records()
            if (r.venue_id if granularity == "venue" else r.category_id)
        ]
        users: dict[str, None] = {}
        for r in records:
            users.setdefault(r.pseudonym, None)
        schema = IdentitySchema(name=schema_name, classes=tuple(users))
        labeled = [
            LabeledCheckIn(checkin=r.to_checkin(), label=r.pseudonym) for r in records
        ]
        return corpus_from_records(schema, labeled, granularity)


@dataclass(frozen=True)
class ModelRegistryEntry:
    model_id: str
    task: str
    kind: str
    schema_name: str
    trained_at: int
    snapshot_path: str
    active: bool = False

    def to_jsonable(self) -> dict:
        return {
            "model_id": self.model_id,
            "task": self.task,
            "kind": self.kind,
            "schema_name": self.schema_name,
            "trained_at": int(self.trained_at),
            "snapshot_path": self.snapshot_path,
            "active": bool(self.active),
        }

    @staticmethod
    def from_jsonable(d: dict) -> "ModelRegistryEntry":
        return ModelRegistryEntry(
            model_id=str(d["model_id"]),
            task=str(d["task"]),
            kind=str(d["kind"]),
            schema_name=str(d["schema_name"]),
            trained_at=int(d["trained_at"]),
            snapshot_path=str(d["snapshot_path"]),
            active=bool(d["active"]),
        )


class ModelRegistry:
    """Snapshot files plus a small JSON index; activation is an atomic swap
    of the index, never a mutation of a snapshot."""

    def __init__(self, root):
        self.root = Path(root)
        self.snapshot_dir = self.root / "snapshots"
        self.snapshot_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "registry.json"
        self._lock = threading.Lock()

    def entries(self) -> list[ModelRegistryEntry]:
        if not self.index_path.exists():
            return []
        data = wire.load(self.index_path)
        return [ModelRegistryEntry.from_jsonable(e) for e in data["models"]]

    def get(self, model_id: str) -> ModelRegistryEntry | None:
        for e in self.entries():
            if e.model_id == model_id:
                return e
        return None

    def register(self, model, task: str, activate: bool = False) -> ModelRegistryEntry:
        with self._lock:
            entries = self.entries()
            model_id = f"m{len(entries) + 1:04d}"
            snapshot = self.snapshot_dir / f"{model_id}.json"
            wire.save_model(model, snapshot)
            entry = ModelRegistryEntry(
                model_id=model_id,
                task=task,
                kind=getattr(model, "kind", "mnb"),
                schema_name=model.schema.name,
                trained_at=int(time.time()),
                snapshot_path=str(snapshot.relative_to(self.root)),
                active=activate,
            )
            if activate:
                entries = [
                    replace(e, active=False)
                    if e.task == task and e.schema_name == entry.schema_name
                    else e
                    for e in entries
                ]
            entries.append(entry)
            wire.save({"models": [e.to_jsonable() for e in entries]}, self.index_path)
            return entry

    def load_model(self, model_id: str):
        entry = self.get(model_id)
        if entry is None:
            return None
        return wire.load_model(self.root / entry.snapshot_path)
