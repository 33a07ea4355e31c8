"""Command-line surface: ingest, synth, train, predict, explain, obfuscate,
evaluate, serve.

Machine-readable output goes to stdout in the same wire format the service
speaks; diagnostics go to stderr. Exit codes: 0 success, 1 usage, 2 data
error, 3 engine error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import api, wire
from .config import load_config, resolve_salt
from .errors import AdvisorError, DataError
from .explain import HowToTarget, RiskThresholds, TraceEdit
from .mnb import predict_mnb, train_identification, train_mnb
from .privacy import ObfuscationParams, obfuscate_trace, pseudonymize
from .trace import (
    AttributeSchema,
    SynthConfig,
    Trace,
    attach_labels,
    corpus_from_records,
    format_checkin_tsv,
    read_checkin_file,
    read_label_map,
    synth_corpus,
    synth_venue_positions,
)
from .vectors import VectorParams, predict_any

USAGE_EXIT, DATA_EXIT, ENGINE_EXIT = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _emit(payload) -> None:
    sys.stdout.write(wire.dumps(payload))


def _load_trace(path: str, pseudonym: str | None = None) -> Trace:
    p = Path(path)
    if p.suffix == ".json":
        return wire.trace_from_jsonable(wire.load(p))
    checkins = read_checkin_file(p)
    if pseudonym is None and checkins and len({c.pseudonym for c in checkins}) == 1:
        pseudonym = checkins[0].pseudonym
    return Trace(checkins=tuple(checkins), pseudonym=pseudonym)


def _vector_params(args) -> VectorParams:
    return VectorParams(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        l2=args.l2,
        max_depth=args.max_depth,
        n_trees=args.trees,
        k=args.k,
        seed=args.seed,
    )


# -- subcommands -------------------------------------------------------------

def cmd_ingest(args) -> int:
    checkins = read_checkin_file(args.tsv)
    label_map = read_label_map(args.labels)
    if args.pseudonymize:
        salt = resolve_salt(load_config(args.config) if args.config else load_config())
        if salt is None:
            print("error: no salt configured (set ADVISOR_SALT)", file=sys.stderr)
            return DATA_EXIT
        from dataclasses import replace

        checkins = [
            replace(c, pseudonym=pseudonymize(c.pseudonym, salt).value) for c in checkins
        ]
        label_map = {
            pseudonymize(u, salt).value: cls for u, cls in label_map.items()
        }
    classes: dict[str, None] = {}
    for cls in label_map.values():
        classes.setdefault(cls, None)
    schema = AttributeSchema(name=args.schema_name, classes=tuple(classes))
    corpus = attach_labels(
        checkins, schema, label_map, granularity=args.granularity, dedup=args.dedup
    )
    wire.save_corpus(corpus, args.out)
    _emit(
        {
            "records": len(corpus.records),
            "users": len(corpus.users),
            "vocabulary": len(corpus.vocabulary),
            "out": args.out,
        }
    )
    return 0


def cmd_synth(args) -> int:
    config = SynthConfig(
        m=args.classes,
        users_per_class=args.users,
        checkins_per_user=args.checkins,
        vocab_size=args.vocab,
        concentration=args.concentration,
        granularity=args.granularity,
    )
    corpus, truth = synth_corpus(config, args.seed)
    wire.save_corpus(corpus, args.out)
    if args.truth_out:
        Path(args.truth_out).write_text(
            "".join(f"{u}\t{c}\n" for u, c in truth.items()), encoding="utf-8"
        )
    _emit(
        {
            "records": len(corpus.records),
            "users": len(truth),
            "vocabulary": len(corpus.vocabulary),
            "out": args.out,
        }
    )
    return 0


def cmd_train(args) -> int:
    corpus = wire.load_corpus(args.corpus)
    model = api.train_model(
        corpus,
        task=args.task,
        kind=args.kind,
        alpha=args.alpha,
        k_min=args.k_min,
        params=_vector_params(args),
    )
    wire.save_model(model, args.out)
    _emit(
        {
            "kind": getattr(model, "kind", "mnb"),
            "task": args.task,
            "classes": len(model.schema.classes),
            "vocabulary": len(model.vocabulary),
            "out": args.out,
        }
    )
    return 0


def cmd_predict(args) -> int:
    model = wire.load_model(args.model)
    trace = _load_trace(args.trace)
    _emit(api.build_predict_payload(model, trace))
    return 0


def cmd_explain(args) -> int:
    model = wire.load_model(args.model)
    trace = _load_trace(args.trace) if args.trace else None
    thresholds = RiskThresholds(t_low=args.t_low, t_high=args.t_high)
    edit = TraceEdit(remove=tuple(args.remove or ()))
    target = (
        HowToTarget(kind="flip")
        if args.target == "flip"
        else HowToTarget(kind="band", band=args.target)
    )
    corpus = wire.load_corpus(args.corpus) if args.corpus else None
    payload = api.build_explain_payload(
        model,
        trace,
        args.mode,
        top_k=args.top_k,
        thresholds=thresholds,
        edit=edit,
        target=target,
        corpus=corpus,
        method=args.method,
    )
    if args.format == "structured":
        _emit(payload)
    else:
        from .explain import render_text

        sys.stdout.write(render_text(wire.explanation_from_jsonable(payload)))
    return 0


def cmd_obfuscate(args) -> int:
    params = ObfuscationParams(
        epsilon=args.epsilon, snap=args.snap, snap_radius_m=args.radius
    )
    rng = np.random.default_rng(args.seed)
    venue_index = None
    if args.venues:
        venue_index = {
            k: (float(v[0]), float(v[1])) for k, v in wire.load(args.venues).items()
        }
    elif args.corpus:
        corpus = wire.load_corpus(args.corpus)
        venue_index = {}
        for r in corpus.records:
            venue_index.setdefault(r.checkin.venue_id, (r.checkin.lat, r.checkin.lon))
    data = wire.load(args.input) if args.input.endswith(".json") else None
    if data is not None and "points" in data:
        out = []
        from .privacy import nearest_venue, planar_laplace_sample

        for p in data["points"]:
            lat, lon = planar_laplace_sample(float(p["lat"]), float(p["lon"]), params, rng)
            point = {"lat": lat, "lon": lon}
            if params.snap != "none":
                vid, d = nearest_venue(lat, lon, venue_index or {})
                point["venue_id"] = vid if vid is not None and d <= params.snap_radius_m else ""
            out.append(point)
        _emit({"points": out})
        return 0
    trace = _load_trace(args.input)
    noised = obfuscate_trace(trace, params, venue_index=venue_index, rng=rng)
    _emit(wire.trace_to_jsonable(noised))
    return 0


def cmd_evaluate(args) -> int:
    corpus = wire.load_corpus(args.corpus)
    holdout = args.holdout
    by_user: dict[str, list] = {}
    for r in corpus.records:
        by_user.setdefault(r.checkin.pseudonym, []).append(r)
    train_records, tests = [], []
    for user, records in by_user.items():
        if len(records) <= holdout:
            train_records.extend(records)
            continue
        train_records.extend(records[:-holdout])
        tests.append((user, records[0].label, records[-holdout:]))
    if not tests:
        print("error: holdout leaves no test users", file=sys.stderr)
        return DATA_EXIT
    train_corpus = corpus_from_records(corpus.schema, train_records, corpus.granularity)
    attr_model = api.train_model(
        train_corpus, task="attribute", kind=args.kind, alpha=args.alpha,
        k_min=args.k_min, params=_vector_params(args),
    )
    ident_model = train_identification(train_corpus, alpha=args.alpha, k_min=args.k_min)
    attr_hits = ident_hits = 0
    for user, label, records in tests:
        trace = Trace(checkins=tuple(r.checkin for r in records), pseudonym=user)
        if predict_any(attr_model, trace).predicted == label:
            attr_hits += 1
        if predict_mnb(ident_model, trace).predicted == user:
            ident_hits += 1
    _emit(
        {
            "users_evaluated": len(tests),
            "holdout_per_user": holdout,
            "attribute_accuracy": attr_hits / len(tests),
            "identification_top1": ident_hits / len(tests),
        }
    )
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(load_config(args.config))
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="checkin-advisor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a check-in TSV and label it into a corpus")
    p.add_argument("tsv")
    p.add_argument("--labels", required=True)
    p.add_argument("--schema-name", default="attribute")
    p.add_argument("--granularity", choices=["venue", "category"], default="venue")
    p.add_argument("--dedup", action="store_true")
    p.add_argument("--pseudonymize", action="store_true")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--checkins", type=int, default=20)
    p.add_argument("--vocab", type=int, default=50)
    p.add_argument("--concentration", type=float, default=0.5)
    p.add_argument("--granularity", choices=["venue", "category"], default="venue")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default=None)
    p.set_defaults(func=cmd_synth)

    def add_train_flags(p):
        p.add_argument("--kind", default="mnb",
                       choices=["mnb", "logistic_regression", "linear_svm",
                                "decision_tree", "random_forest", "knn"])
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--k-min", dest="k_min", type=int, default=0)
        p.add_argument("--learning-rate", type=float, default=0.1)
        p.add_argument("--epochs", type=int, default=500)
        p.add_argument("--l2", type=float, default=1e-4)
        p.add_argument("--max-depth", type=int, default=4)
        p.add_argument("--trees", type=int, default=10)
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model from a corpus snapshot")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=["attribute", "identification"], default="attribute")
    add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a trace with a model snapshot")
    p.add_argument("--model", required=True)
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="explain a prediction (why/how/whatif/howto)")
    p.add_argument("--model", required=True)
    p.add_argument("--trace", default=None)
    p.add_argument("--mode", choices=["why", "how", "whatif", "howto"], default="why")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--format", choices=["structured", "text"], default="structured")
    p.add_argument("--t-low", type=float, default=0.55)
    p.add_argument("--t-high", type=float, default=0.85)
    p.add_argument("--remove", nargs="*", default=None, help="checkin ids for whatif")
    p.add_argument("--target", choices=["flip", "low", "medium", "high"], default="flip")
    p.add_argument("--corpus", default=None, help="corpus snapshot for info_gain")
    p.add_argument("--method", default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("obfuscate", help="apply planar-Laplace noise to a trace or points")
    p.add_argument("input")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--snap", choices=["none", "nearest_known_venue"], default="none")
    p.add_argument("--radius", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--venues", default=None, help="venue index JSON {venue: [lat, lon]}")
    p.add_argument("--corpus", default=None, help="derive the venue index from a corpus")
    p.set_defaults(func=cmd_obfuscate)

    p = sub.add_parser("evaluate", help="held-out attribute accuracy and identification top-1")
    p.add_argument("--corpus", required=True)
    p.add_argument("--holdout", type=int, default=5, help="check-ins held out per user")
    add_train_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except AdvisorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ENGINE_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
