"""Check-in data model, dataset ingestion, synthetic corpora and featurization.

The input format is the 8-field tab-separated check-in layout used by the
public Foursquare NYC dumps::

    user_id  venue_id  category_id  category_name  lat  lon  tz_offset  utc_time

One record per line, UTF-8, no header. ``utc_time`` looks like
``Tue Apr 03 18:00:09 +0000 2012``. Label maps are two-column TSV
``pseudonym<TAB>class``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadCoordinate,
    BadParams,
    BadTimestamp,
    MalformedLine,
    MissingLabel,
)

VENUE = "venue"
CATEGORY = "category"
GRANULARITIES = (VENUE, CATEGORY)

_MONTHS = {
    "Jan": 1, "Feb": 2, "Mar": 3, "Apr": 4, "May": 5, "Jun": 6,
    "Jul": 7, "Aug": 8, "Sep": 9, "Oct": 10, "Nov": 11, "Dec": 12,
}
_MONTH_NAMES = list(_MONTHS)
_WEEKDAY_NAMES = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]


def make_checkin_id(seq: int, venue_id: str, timestamp: int) -> str:
    """Deterministic 16-hex identifier for a check-in record."""
    raw = f"{seq}|{venue_id}|{timestamp}".encode()
    return hashlib.blake2b(raw, digest_size=8).hexdigest()


@dataclass(frozen=True)
class CheckIn:
    """One location event.

    ``venue_id`` may be empty only for obfuscated, coordinate-only events;
    ingestion and corpus construction require it to be non-empty.
    """

    checkin_id: str
    pseudonym: str
    venue_id: str
    category_id: str
    lat: float
    lon: float
    timestamp: int
    tz_offset: int

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise BadCoordinate(f"lat {self.lat!r} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise BadCoordinate(f"lon {self.lon!r} outside [-180, 180]")
        if self.timestamp <= 0:
            raise BadTimestamp(f"timestamp must be positive, got {self.timestamp!r}")

    def feature_id(self, granularity: str) -> str:
        return self.venue_id if granularity == VENUE else self.category_id


@dataclass(frozen=True)
class LabeledCheckIn:
    checkin: CheckIn
    label: str


@dataclass(frozen=True)
class Trace:
    """Ordered sequence of check-ins, optionally bound to one user."""

    checkins: tuple[CheckIn, ...]
    pseudonym: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "checkins", tuple(self.checkins))
        if self.pseudonym is not None:
            for c in self.checkins:
                if c.pseudonym and c.pseudonym != self.pseudonym:
                    raise ValueError(
                        f"check-in pseudonym {c.pseudonym!r} differs from "
                        f"trace pseudonym {self.pseudonym!r}"
                    )

    @property
    def n(self) -> int:
        return len(self.checkins)

    def feature_ids(self, granularity: str) -> tuple[str, ...]:
        return tuple(c.feature_id(granularity) for c in self.checkins)


@dataclass(frozen=True)
class AttributeSchema:
    """The class set of one inference task (e.g. political views)."""

    name: str
    classes: tuple[str, ...]

    min_classes = 2

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) < self.min_classes:
            raise ValueError(
                f"schema {self.name!r} needs at least {self.min_classes} classes"
            )
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class identifiers must be unique")
        if any(not c for c in self.classes):
            raise ValueError("class identifiers must be non-empty")

    @property
    def m(self) -> int:
        return len(self.classes)

    def index_of(self, label: str) -> int:
        return self.classes.index(label)


@dataclass(frozen=True)
class IdentitySchema(AttributeSchema):
    """Schema whose classes are user pseudonyms; a single enrolled user is valid."""

    min_classes = 1


@dataclass(frozen=True)
class LabeledCorpus:
    schema: AttributeSchema
    records: tuple[LabeledCheckIn, ...]
    vocabulary: tuple[str, ...]
    granularity: str = VENUE

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}")
        seen = {r.checkin.feature_id(self.granularity) for r in self.records}
        if seen != set(self.vocabulary):
            raise ValueError("vocabulary must match the distinct feature ids in records")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ValueError("vocabulary entries must be unique")
        valid = set(self.schema.classes)
        for r in self.records:
            if r.label not in valid:
                raise ValueError(f"record label {r.label!r} not in schema")

    @cached_property
    def vocab_index(self) -> dict[str, int]:
        return {fid: j for j, fid in enumerate(self.vocabulary)}

    @cached_property
    def users(self) -> tuple[str, ...]:
        """Distinct pseudonyms in first-appearance order."""
        out: dict[str, None] = {}
        for r in self.records:
            out.setdefault(r.checkin.pseudonym, None)
        return tuple(out)

    def user_label(self, pseudonym: str) -> str:
        for r in self.records:
            if r.checkin.pseudonym == pseudonym:
                return r.label
        raise KeyError(pseudonym)


@dataclass(frozen=True)
class FeatureVector:
    """Bag-of-locations counts over a vocabulary.

    ``total`` counts every trace item including out-of-vocabulary ones, so it
    can exceed the sum of the binned counts.
    """

    counts: Mapping[int, int]
    total: int

    def __post_init__(self):
        object.__setattr__(self, "counts", dict(self.counts))
        binned = sum(self.counts.values())
        if any(v < 0 for v in self.counts.values()) or any(k < 0 for k in self.counts):
            raise ValueError("counts must be non-negative with valid indices")
        if self.total < binned:
            raise ValueError("total cannot be below the sum of binned counts")

    def dense(self, size: int) -> np.ndarray:
        out = np.zeros(size)
        for j, v in self.counts.items():
            if j >= size:
                raise ValueError(f"index {j} outside vocabulary of size {size}")
            out[j] = v
        return out


# -- parsing -----------------------------------------------------------------

def _parse_time(text: str) -> int:
    """Parse ``Tue Apr 03 18:00:09 +0000 2012`` into UTC seconds.

    Parsed by hand so the result does not depend on the process locale.
    """
    parts = text.split()
    if len(parts) != 6:
        raise BadTimestamp(f"unparseable time {text!r}")
    _, mon, day, hms, tz, year = parts
    month = _MONTHS.get(mon)
    if month is None:
        raise BadTimestamp(f"unknown month in {text!r}")
    try:
        hh, mm, ss = (int(p) for p in hms.split(":"))
        sign = {"+": 1, "-": -1}[tz[0]]
        tzmin = sign * (int(tz[1:3]) * 60 + int(tz[3:5]))
        dt = datetime(
            int(year), month, int(day), hh, mm, ss,
            tzinfo=timezone(timedelta(minutes=tzmin)),
        )
    except (ValueError, KeyError, IndexError) as exc:
        raise BadTimestamp(f"unparseable time {text!r}") from exc
    return int(dt.timestamp())


def _format_time(timestamp: int) -> str:
    dt = datetime.fromtimestamp(timestamp, tz=timezone.utc)
    return (
        f"{_WEEKDAY_NAMES[dt.weekday()]} {_MONTH_NAMES[dt.month - 1]} "
        f"{dt.day:02d} {dt:%H:%M:%S} +0000 {dt.year}"
    )


def parse_checkin_tsv(line: str, line_no: int) -> CheckIn:
    """Parse one 8-field check-in line.

    The pseudonym is the raw user id as found in the file; pseudonymization is
    a separate privacy step. The check-in id is a deterministic hash of
    (line_no, venue_id, timestamp).
    """
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 8:
        raise MalformedLine(f"line {line_no}: expected 8 fields, got {len(fields)}")
    user_id, venue_id, category_id, _category_name, lat_s, lon_s, tz_s, time_s = fields
    if not venue_id:
        raise MalformedLine(f"line {line_no}: empty venue id")
    try:
        lat = float(lat_s)
        lon = float(lon_s)
    except ValueError as exc:
        raise BadCoordinate(f"line {line_no}: non-numeric coordinate") from exc
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise BadCoordinate(f"line {line_no}: coordinate out of range ({lat}, {lon})")
    try:
        tz_offset = int(tz_s)
    except ValueError as exc:
        raise BadTimestamp(f"line {line_no}: bad tz offset {tz_s!r}") from exc
    timestamp = _parse_time(time_s)
    if timestamp <= 0:
        raise BadTimestamp(f"line {line_no}: non-positive epoch {timestamp}")
    return CheckIn(
        checkin_id=make_checkin_id(line_no, venue_id, timestamp),
        pseudonym=user_id,
        venue_id=venue_id,
        category_id=category_id,
        lat=lat,
        lon=lon,
        timestamp=timestamp,
        tz_offset=tz_offset,
    )


def format_checkin_tsv(checkin: CheckIn) -> str:
    """Serialize back to the 8-field layout (category name column is reused
    for the category id; it is not retained by the data model)."""
    return "\t".join(
        [
            checkin.pseudonym,
            checkin.venue_id,
            checkin.category_id,
            checkin.category_id,
            repr(checkin.lat),
            repr(checkin.lon),
            str(checkin.tz_offset),
            _format_time(checkin.timestamp),
        ]
    )


def read_checkin_file(path) -> list[CheckIn]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if line.strip():
                out.append(parse_checkin_tsv(line, i))
    return out


def read_label_map(path) -> dict[str, str]:
    """Two-column TSV (pseudonym, class); order of first appearance preserved."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 2:
                raise MalformedLine(f"label line {i}: expected 2 fields")
            out[fields[0]] = fields[1]
    return out


# -- corpus construction ------------------------------------------------------

def corpus_from_records(
    schema: AttributeSchema,
    records: Sequence[LabeledCheckIn],
    granularity: str = VENUE,
) -> LabeledCorpus:
    """Build a corpus with the vocabulary in first-appearance order."""
    vocab: dict[str, None] = {}
    for r in records:
        vocab.setdefault(r.checkin.feature_id(granularity), None)
    return LabeledCorpus(
        schema=schema,
        records=tuple(records),
        vocabulary=tuple(vocab),
        granularity=granularity,
    )


def attach_labels(
    corpus_checkins: Sequence[CheckIn],
    schema: AttributeSchema,
    label_map: Mapping[str, str],
    granularity: str = VENUE,
    dedup: bool = False,
) -> LabeledCorpus:
    """Join check-ins with their users' class assignments.

    With ``dedup`` only the first check-in per (user, feature id) is kept;
    the default keeps raw repeat counts.
    """
    records: list[LabeledCheckIn] = []
    seen: set[tuple[str, str]] = set()
    for c in corpus_checkins:
        if not c.venue_id:
            raise MalformedLine("corpus check-ins require a venue id")
        label = label_map.get(c.pseudonym)
        if label is None:
            raise MissingLabel(c.pseudonym)
        if dedup:
            key = (c.pseudonym, c.feature_id(granularity))
            if key in seen:
                continue
            seen.add(key)
        records.append(LabeledCheckIn(checkin=c, label=label))
    return corpus_from_records(schema, records, granularity)


# -- synthetic corpora --------------------------------------------------------

EARTH_RADIUS_M = 6371000.0
M_PER_DEG_LAT = math.pi * EARTH_RADIUS_M / 180.0


@dataclass(frozen=True)
class SynthConfig:
    """Dirichlet-multinomial corpus generator settings.

    Each class draws a venue-frequency profile from a symmetric
    Dirichlet(concentration); each of its users draws check-ins i.i.d. from
    that profile. Venues sit on a square grid so location noise experiments
    have real coordinates to work with.
    """

    m: int = 2
    users_per_class: int = 10
    checkins_per_user: int = 20
    vocab_size: int = 50
    concentration: float = 0.5
    granularity: str = VENUE
    grid_spacing_m: float = 1000.0
    base_lat: float = 40.70
    base_lon: float = -74.00
    base_timestamp: int = 1333476009

    def __post_init__(self):
        if min(self.m, self.users_per_class, self.checkins_per_user, self.vocab_size) < 1:
            raise BadParams("synth counts must all be >= 1")
        if self.m < 2:
            raise BadParams("synth needs at least 2 classes")
        if self.concentration <= 0:
            raise BadParams("concentration must be positive")


def synth_venue_positions(config: SynthConfig) -> dict[str, tuple[float, float]]:
    """Venue id -> (lat, lon) on the synthetic grid."""
    side = math.ceil(math.sqrt(config.vocab_size))
    out = {}
    for j in range(config.vocab_size):
        row, col = divmod(j, side)
        lat = config.base_lat + row * config.grid_spacing_m / M_PER_DEG_LAT
        lon = config.base_lon + col * config.grid_spacing_m / (
            M_PER_DEG_LAT * math.cos(math.radians(config.base_lat))
        )
        out[f"v{j:03d}"] = (lat, lon)
    return out


def synth_corpus(
    config: SynthConfig, seed: int
) -> tuple[LabeledCorpus, dict[str, str]]:
    """Generate a labeled corpus with known ground truth.

    Deterministic for a given (config, seed). Returns the corpus and the
    pseudonym -> class map used to produce it.
    """
    rng = np.random.default_rng(seed)
    n_cat = max(1, config.vocab_size // 5)
    positions = synth_venue_positions(config)
    venue_ids = list(positions)

    profiles = [
        rng.dirichlet(np.full(config.vocab_size, config.concentration))
        for _ in range(config.m)
    ]
    classes = tuple(f"f{i + 1}" for i in range(config.m))
    schema = AttributeSchema(name=f"synthetic_{config.m}way", classes=classes)

    records: list[LabeledCheckIn] = []
    ground_truth: dict[str, str] = {}
    seq = 0
    user_no = 0
    for ci, label in enumerate(classes):
        for _ in range(config.users_per_class):
            user_no += 1
            pseudonym = f"u{user_no:04d}"
            ground_truth[pseudonym] = label
            draws = rng.choice(
                config.vocab_size, size=config.checkins_per_user, p=profiles[ci]
            )
            for j in draws:
                j = int(j)
                venue = venue_ids[j]
                lat, lon = positions[venue]
                ts = config.base_timestamp + seq * 60
                records.append(
                    LabeledCheckIn(
                        checkin=CheckIn(
                            checkin_id=make_checkin_id(seq, venue, ts),
                            pseudonym=pseudonym,
                            venue_id=venue,
                            category_id=f"c{j % n_cat:02d}",
                            lat=lat,
                            lon=lon,
                            timestamp=ts,
                            tz_offset=-240,
                        ),
                        label=label,
                    )
                )
                seq += 1
    return corpus_from_records(schema, records, config.granularity), ground_truth


# -- featurization --------------------------------------------------------------

def to_feature_vector(
    trace: Trace, corpus_vocab: Sequence[str], granularity: str = VENUE
) -> FeatureVector:
    """Count trace check-ins per vocabulary bin.

    Out-of-vocabulary check-ins contribute to ``total`` but to no bin, so
    total always equals the trace length.
    """
    index = {fid: j for j, fid in enumerate(corpus_vocab)}
    counts: dict[int, int] = {}
    for c in trace.checkins:
        j = index.get(c.feature_id(granularity))
        if j is not None:
            counts[j] = counts.get(j, 0) + 1
    return FeatureVector(counts=counts, total=trace.n)


def per_user_vectors(
    corpus: LabeledCorpus,
) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """Aggregate one count vector per user.

    Returns (pseudonyms, X, y) where X is (n_users, |V|) and y holds schema
    class indices. Users appear in first-appearance order.
    """
    users = corpus.users
    pos = {u: i for i, u in enumerate(users)}
    X = np.zeros((len(users), len(corpus.vocabulary)))
    y = np.zeros(len(users), dtype=int)
    for r in corpus.records:
        i = pos[r.checkin.pseudonym]
        X[i, corpus.vocab_index[r.checkin.feature_id(corpus.granularity)]] += 1
        y[i] = corpus.schema.index_of(r.label)
    return users, X, y
