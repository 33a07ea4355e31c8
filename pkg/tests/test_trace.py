import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from checkin_advisor.errors import (
    BadCoordinate,
    BadParams,
    BadTimestamp,
    MalformedLine,
    MissingLabel,
)
from checkin_advisor.trace import (
    AttributeSchema,
    CheckIn,
    IdentitySchema,
    SynthConfig,
    Trace,
    attach_labels,
    corpus_from_records,
    format_checkin_tsv,
    parse_checkin_tsv,
    synth_corpus,
    synth_venue_positions,
    to_feature_vector,
)
from checkin_advisor import wire

from conftest import make_checkin, make_trace

SAMPLE = (
    "470\t49bbd6c0f964a520f4531fe3\t4bf58dd8d48988d127951735\tArts & Crafts Store"
    "\t40.719810375488535\t-74.00258103213994\t-240\tTue Apr 03 18:00:09 +0000 2012"
)


class TestParse:
    def test_sample_line(self):
        c = parse_checkin_tsv(SAMPLE, 1)
        assert c.pseudonym == "470"
        assert c.venue_id == "49bbd6c0f964a520f4531fe3"
        assert c.category_id == "4bf58dd8d48988d127951735"
        assert c.lat == pytest.approx(40.719810375488535)
        assert c.lon == pytest.approx(-74.00258103213994)
        assert c.tz_offset == -240
        assert c.timestamp == 1333476009  # 2012-04-03T18:00:09Z

    def test_checkin_id_deterministic(self):
        assert parse_checkin_tsv(SAMPLE, 1).checkin_id == parse_checkin_tsv(SAMPLE, 1).checkin_id
        assert parse_checkin_tsv(SAMPLE, 1).checkin_id != parse_checkin_tsv(SAMPLE, 2).checkin_id

    def test_wrong_field_count(self):
        with pytest.raises(MalformedLine):
            parse_checkin_tsv("\t".join(SAMPLE.split("\t")[:7]), 1)

    def test_lat_out_of_range(self):
        fields = SAMPLE.split("\t")
        fields[4] = "91.0"
        with pytest.raises(BadCoordinate):
            parse_checkin_tsv("\t".join(fields), 1)

    def test_non_numeric_lon(self):
        fields = SAMPLE.split("\t")
        fields[5] = "east"
        with pytest.raises(BadCoordinate):
            parse_checkin_tsv("\t".join(fields), 1)

    def test_bad_time(self):
        fields = SAMPLE.split("\t")
        fields[7] = "Tue Foo 03 18:00:09 +0000 2012"
        with pytest.raises(BadTimestamp):
            parse_checkin_tsv("\t".join(fields), 1)

    def test_roundtrip_sample(self):
        c = parse_checkin_tsv(SAMPLE, 7)
        again = parse_checkin_tsv(format_checkin_tsv(c), 7)
        assert again == c

    @given(
        venue=st.text(alphabet="abcdef0123456789", min_size=1, max_size=24),
        lat=st.floats(min_value=-89.9, max_value=89.9, allow_nan=False),
        lon=st.floats(min_value=-179.9, max_value=179.9, allow_nan=False),
        ts=st.integers(min_value=1, max_value=4_000_000_000),
        tz=st.integers(min_value=-720, max_value=720),
    )
    @settings(max_examples=200)
    def test_roundtrip_property(self, venue, lat, lon, ts, tz):
        c = CheckIn(
            checkin_id="x",
            pseudonym="user",
            venue_id=venue,
            category_id="cat",
            lat=lat,
            lon=lon,
            timestamp=ts,
            tz_offset=tz,
        )
        again = parse_checkin_tsv(format_checkin_tsv(c), 0)
        assert (again.venue_id, again.lat, again.lon, again.timestamp, again.tz_offset) == (
            venue, lat, lon, ts, tz,
        )


class TestTypes:
    def test_checkin_validates_coordinates(self):
        with pytest.raises(BadCoordinate):
            make_checkin("v1", lat=95.0)
        with pytest.raises(BadCoordinate):
            make_checkin("v1", lon=-200.0)

    def test_checkin_validates_timestamp(self):
        with pytest.raises(BadTimestamp):
            make_checkin("v1", timestamp=0)

    def test_schema_needs_two_classes(self):
        with pytest.raises(ValueError):
            AttributeSchema(name="x", classes=("only",))

    def test_schema_unique_nonempty(self):
        with pytest.raises(ValueError):
            AttributeSchema(name="x", classes=("a", "a"))
        with pytest.raises(ValueError):
            AttributeSchema(name="x", classes=("a", ""))

    def test_identity_schema_allows_single_user(self):
        s = IdentitySchema(name="ident", classes=("u1",))
        assert s.m == 1

    def test_trace_pseudonym_consistency(self):
        with pytest.raises(ValueError):
            Trace(checkins=(make_checkin("v1", user="other"),), pseudonym="me")


class TestAttachLabels:
    def test_empty(self):
        schema = AttributeSchema(name="s", classes=("a", "b"))
        corpus = attach_labels([], schema, {})
        assert corpus.records == ()
        assert corpus.vocabulary == ()

    def test_two_users(self):
        schema = AttributeSchema(name="s", classes=("fa", "fb"))
        checkins = [
            make_checkin("v1", "u1", 0),
            make_checkin("v2", "u2", 1),
            make_checkin("v1", "u2", 2),
        ]
        corpus = attach_labels(checkins, schema, {"u1": "fa", "u2": "fb"})
        assert corpus.vocabulary == ("v1", "v2")
        assert len(corpus.records) == 3
        assert [r.label for r in corpus.records] == ["fa", "fb", "fb"]

    def test_missing_label(self):
        schema = AttributeSchema(name="s", classes=("fa", "fb"))
        with pytest.raises(MissingLabel) as err:
            attach_labels([make_checkin("v1", "u3", 0)], schema, {"u1": "fa"})
        assert err.value.pseudonym == "u3"

    def test_dedup_switch(self):
        schema = AttributeSchema(name="s", classes=("fa", "fb"))
        checkins = [make_checkin("v1", "u1", i) for i in range(3)] + [
            make_checkin("v1", "u2", 9)
        ]
        labels = {"u1": "fa", "u2": "fb"}
        assert len(attach_labels(checkins, schema, labels).records) == 4
        assert len(attach_labels(checkins, schema, labels, dedup=True).records) == 2

    def test_vocabulary_completeness(self, toy_corpus):
        seen = {r.checkin.venue_id for r in toy_corpus.records}
        assert set(toy_corpus.vocabulary) == seen


class TestSynth:
    def test_determinism(self):
        config = SynthConfig(m=2, users_per_class=3, checkins_per_user=5, vocab_size=10,
                             concentration=0.5)
        c1, t1 = synth_corpus(config, seed=7)
        c2, t2 = synth_corpus(config, seed=7)
        assert t1 == t2
        assert wire.dumps(wire.corpus_to_jsonable(c1)) == wire.dumps(wire.corpus_to_jsonable(c2))

    def test_different_seeds_differ(self):
        config = SynthConfig(m=2, users_per_class=3, checkins_per_user=5, vocab_size=10,
                             concentration=0.5)
        c1, _ = synth_corpus(config, seed=1)
        c2, _ = synth_corpus(config, seed=2)
        assert wire.corpus_to_jsonable(c1) != wire.corpus_to_jsonable(c2)

    def test_ground_truth_covers_all_users(self):
        config = SynthConfig(m=3, users_per_class=4, checkins_per_user=5, vocab_size=10,
                             concentration=0.5)
        corpus, truth = synth_corpus(config, seed=3)
        assert set(corpus.users) == set(truth)
        assert len(truth) == 12

    def test_rejects_bad_config(self):
        with pytest.raises(BadParams):
            SynthConfig(m=2, users_per_class=0, checkins_per_user=5, vocab_size=10,
                        concentration=0.5)
        with pytest.raises(BadParams):
            SynthConfig(m=2, users_per_class=1, checkins_per_user=5, vocab_size=10,
                        concentration=0.0)

    def test_grid_positions_spacing(self):
        config = SynthConfig(vocab_size=9, grid_spacing_m=1000.0)
        pos = synth_venue_positions(config)
        assert len(pos) == 9
        from checkin_advisor.privacy import planar_distance_m

        d = planar_distance_m(*pos["v000"], *pos["v001"])
        assert d == pytest.approx(1000.0, rel=0.01)


class TestFeaturization:
    def test_empty_trace(self):
        fv = to_feature_vector(make_trace([]), ["v1", "v2"])
        assert fv.counts == {} and fv.total == 0

    def test_direct_count(self):
        fv = to_feature_vector(make_trace(["v1", "v1", "v2"]), ["v1", "v2", "v3"])
        assert fv.counts == {0: 2, 1: 1}
        assert fv.total == 3

    def test_out_of_vocabulary(self):
        fv = to_feature_vector(make_trace(["v9"]), ["v1", "v2"])
        assert fv.counts == {}
        assert fv.total == 1

    @given(st.lists(st.sampled_from(["v1", "v2", "v3", "v9", "vX"]), max_size=30))
    @settings(max_examples=100)
    def test_conservation_property(self, venues):
        fv = to_feature_vector(make_trace(venues), ["v1", "v2", "v3"])
        assert fv.total == len(venues)
        assert sum(fv.counts.values()) == sum(1 for v in venues if v in ("v1", "v2", "v3"))


class TestCorpusSnapshot:
    def test_roundtrip(self, toy_corpus, tmp_path):
        path = tmp_path / "corpus.json"
        wire.save_corpus(toy_corpus, path)
        again = wire.load_corpus(path)
        assert again == toy_corpus

    def test_snapshot_is_stable(self, toy_corpus, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        wire.save_corpus(toy_corpus, p1)
        wire.save_corpus(wire.load_corpus(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
