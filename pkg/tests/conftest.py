import pytest

from checkin_advisor.mnb import train_mnb
from checkin_advisor.trace import (
    AttributeSchema,
    CheckIn,
    LabeledCheckIn,
    Trace,
    corpus_from_records,
    make_checkin_id,
)


def make_checkin(venue, user="u1", seq=0, category="cat0", lat=40.7, lon=-74.0,
                 timestamp=None, tz=-240):
    ts = timestamp if timestamp is not None else 1333476009 + seq
    return CheckIn(
        checkin_id=make_checkin_id(seq, venue, ts),
        pseudonym=user,
        venue_id=venue,
        category_id=category,
        lat=lat,
        lon=lon,
        timestamp=ts,
        tz_offset=tz,
    )


def make_trace(venues, user="query", start_seq=1000):
    return Trace(
        checkins=tuple(
            make_checkin(v, user=user, seq=start_seq + i) for i, v in enumerate(venues)
        ),
        pseudonym=user,
    )


@pytest.fixture(scope="session")
def toy_corpus():
    """Two classes over three venues: f1 counts (v1:3, v2:1, v3:0), f2
    mirrored. With alpha=1 the likelihoods come out 4/7, 2/7, 1/7."""
    schema = AttributeSchema(name="toy", classes=("f1", "f2"))
    records = []
    seq = 0
    for venue, n in (("v1", 3), ("v2", 1)):
        for _ in range(n):
            records.append(LabeledCheckIn(make_checkin(venue, "uA", seq), "f1"))
            seq += 1
    for venue, n in (("v2", 1), ("v3", 3)):
        for _ in range(n):
            records.append(LabeledCheckIn(make_checkin(venue, "uB", seq), "f2"))
            seq += 1
    return corpus_from_records(schema, records)


@pytest.fixture(scope="session")
def toy_model(toy_corpus):
    return train_mnb(toy_corpus, alpha=1.0, k_min=0)
