"""Command-line interface.

Thin composition over the library: every subcommand parses flags, resolves
them against an optional JSON config file (flag beats config beats default),
calls the library, and writes artifacts that embed the resolved config and
seed.  JSONL artifacts get a ``<out>.meta.json`` sidecar instead, because
their line format is fixed.  Artifacts carry no timestamps, so rerunning an
embedded config reproduces them byte for byte.

Exit codes: 0 success, 1 internal failure or training divergence, 2 usage,
3 unreadable or malformed input files, 4 schema/data mismatches (including
strict-mode encode conflicts).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

import numpy as np

from . import codec, decoding, evaluate, synth
from .core import (
    InvalidInput,
    PairLinkError,
    RelationSchema,
    SentenceAnnotation,
    TokenSpan,
    Triple,
)
from .data import (
    AlignmentError,
    ParseError,
    dataset_stats,
    format_stats,
    load_dataset,
    load_schema,
    read_records,
    relation_names,
)
from .evaluate import format_report, micro_prf, subset_report
from .model import NumericError, infer_batch, load_checkpoint, save_checkpoint
from .train import TrainConfig, check_gradients, train

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DATA = 4


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


class _Options:
    """Flag values layered over a JSON config file over defaults."""

    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args
        self.config: dict = {}
        config_path = getattr(args, "config", None)
        if config_path:
            try:
                self.config = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{config_path}: not valid JSON: {exc}") from None
            if not isinstance(self.config, dict):
                raise ParseError(f"{config_path}: config must be a JSON object")
        self.resolved: dict = {}

    def get(self, name: str, default):
        value = getattr(self.args, name, None)
        if value is None:
            value = self.config.get(name, default)
        self.resolved[name] = value
        return value

    def provenance(self, command: str) -> dict:
        return {"command": command, "config": dict(sorted(self.resolved.items()))}


def _triple_obj(t: Triple, schema: RelationSchema) -> dict:
    return {
        "subject": [t.subject.head, t.subject.tail],
        "relation": schema.name_of(t.relation),
        "object": [t.object.head, t.object.tail],
    }


def _load_annotations(opts: _Options, path, schema) -> list[SentenceAnnotation]:
    standard = opts.get("standard", "whole-span")
    mode = opts.get("mode", "lenient")
    result = load_dataset(path, schema, standard=standard, mode=mode)
    if result.skipped:
        print(
            f"warning: skipped {len(result.skipped)} record(s) from {path} "
            f"(first: line {result.skipped[0].line_no}: {result.skipped[0].reason})",
            file=sys.stderr,
        )
    return result.annotations


def cmd_encode(opts: _Options) -> int:
    args = opts.args
    schema = load_schema(args.schema)
    mode = opts.get("mode", "strict")
    standard = opts.get("standard", "whole-span")
    result = load_dataset(args.data, schema, standard=standard, mode="lenient")
    lines = []
    conflict_rows = []
    phantom_total = 0
    self_relating = 0
    for idx, ann in enumerate(result.annotations):
        if mode == "strict":
            tagging = codec.encode(ann, schema, mode="strict")
        else:
            tagging, conflicts = codec.encode_with_conflicts(ann, schema)
            for c in sorted(conflicts, key=lambda c: (c.kind, c.relation, c.pair)):
                conflict_rows.append(
                    {
                        "sentence": idx,
                        "kind": c.kind,
                        "relation": schema.name_of(c.relation),
                        "pair": list(c.pair),
                        "tags": [c.existing_tag, c.incoming_tag],
                    }
                )
        phantom_total += len(codec.phantom_triples(ann, schema))
        self_relating += len(codec.self_relating_triples(ann))
        lines.append(codec.dump_tagging_line(tagging, schema))
    _write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    meta = opts.provenance("encode")
    meta["report"] = {
        "sentences": len(result.annotations),
        "skipped_records": [
            {"line": s.line_no, "reason": s.reason} for s in result.skipped
        ],
        "conflicts": conflict_rows,
        "phantom_triples": phantom_total,
        "self_relating_triples": self_relating,
    }
    _write(str(args.out) + ".meta.json", _dump_json(meta))
    print(
        f"encoded {len(result.annotations)} sentence(s) -> {args.out} "
        f"({len(conflict_rows)} conflict(s), {phantom_total} phantom triple(s))"
    )
    return EXIT_OK


def cmd_decode(opts: _Options) -> int:
    args = opts.args
    mode = opts.get("mode", "strict")
    out_lines = []
    with open(args.data, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                tagging, schema = codec.parse_tagging_line(line, mode=mode)
            except InvalidInput as exc:
                raise ParseError(f"{args.data}:{line_no}: {exc}") from None
            triples = sorted(decoding.decode(tagging, schema, mode=mode))
            out_lines.append(
                json.dumps(
                    {"n": tagging.n, "triples": [_triple_obj(t, schema) for t in triples]},
                    separators=(",", ":"),
                )
            )
    _write(args.out, "\n".join(out_lines) + ("\n" if out_lines else ""))
    _write(str(args.out) + ".meta.json", _dump_json(opts.provenance("decode")))
    print(f"decoded {len(out_lines)} tagging(s) -> {args.out}")
    return EXIT_OK


def cmd_stats(opts: _Options) -> int:
    args = opts.args
    paths = {}
    if args.data:
        paths["train"] = args.data
    if args.valid:
        paths["valid"] = args.valid
    if args.test:
        paths["test"] = args.test
    if not paths:
        raise InvalidInput("stats needs at least one of --data/--valid/--test")
    if args.schema:
        schema = load_schema(args.schema)
    else:
        names: set[str] = set()
        for path in paths.values():
            names.update(relation_names(read_records(path)))
        if not names:
            raise InvalidInput("no relations found; supply --schema")
        schema = RelationSchema(tuple(sorted(names)))
    splits = {name: _load_annotations(opts, path, schema) for name, path in paths.items()}
    report = dataset_stats(splits, schema)
    print(format_stats(report))
    if args.out:
        payload = opts.provenance("stats")
        payload["stats"] = report.to_json_obj()
        _write(args.out, _dump_json(payload))
    return EXIT_OK


def cmd_train(opts: _Options) -> int:
    args = opts.args
    schema = load_schema(args.schema)
    train_set = _load_annotations(opts, args.data, schema)
    valid_set = _load_annotations(opts, args.valid, schema) if args.valid else None
    config = TrainConfig(
        learning_rate=float(opts.get("lr", 1e-3)),
        epochs=int(opts.get("epochs", 100)),
        batch_size=int(opts.get("batch_size", 6)),
        seed=int(opts.get("seed", 0)),
        optimizer=str(opts.get("optimizer", "adam")),
        grad_check=bool(opts.get("grad_check", False)),
        early_stop_f1=opts.get("early_stop_f1", None),
    )
    result = train(
        train_set,
        schema,
        config,
        valid=valid_set,
        d_embed=int(opts.get("d_embed", 32)),
        d_state=int(opts.get("d_state", 16)),
        d_pair=int(opts.get("d_pair", 32)),
        use_mixer=bool(opts.get("use_mixer", True)),
        max_len=int(opts.get("max_len", 100)),
    )
    extra = opts.provenance("train")
    extra["seed"] = config.seed
    extra["history"] = [
        {"epoch": h.epoch, "loss": h.loss, "f1": h.f1} for h in result.history
    ]
    extra["best_epoch"] = result.best_epoch
    extra["diverged"] = result.diverged
    path = save_checkpoint(args.ckpt, result.params, schema, extra=extra)
    best = max((h.f1 for h in result.history), default=0.0)
    print(
        f"trained {len(result.history)} epoch(s); best exact-match F1 {best:.4f} "
        f"(epoch {result.best_epoch}) -> {path}"
    )
    if result.diverged:
        print(
            "error: training diverged; checkpoint holds the last finite parameters",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    return EXIT_OK


def cmd_eval(opts: _Options) -> int:
    args = opts.args
    params, schema, _ = load_checkpoint(args.ckpt)
    annotations = _load_annotations(opts, args.data, schema)
    match = opts.get("match", "partial")
    batch_size = int(opts.get("batch_size", 24))
    golds = [set(ann.triples) for ann in annotations]
    preds = infer_batch(
        [ann.tokens for ann in annotations], params, schema, batch_size=batch_size
    )
    payload = opts.provenance("eval")
    if args.by_subset:
        report = subset_report(preds, golds, annotations, mode=match)
        print(format_report(report))
        payload["report"] = report.to_json_obj()
    else:
        scores = micro_prf(preds, golds, mode=match)
        print(
            f"match mode: {match}\n"
            f"  precision {scores.precision:.4f}  recall {scores.recall:.4f}  "
            f"f1 {scores.f1:.4f}  (gold {scores.n_gold}, predicted {scores.n_predicted})"
        )
        payload["report"] = scores.to_json_obj()
    if args.out:
        _write(args.out, _dump_json(payload))
    return EXIT_OK


def cmd_bench(opts: _Options) -> int:
    args = opts.args
    params, schema, _ = load_checkpoint(args.ckpt)
    annotations = _load_annotations(opts, args.data, schema)
    batch_size = int(opts.get("batch_size", 24))
    report = evaluate.bench_inference(
        params, schema, [ann.tokens for ann in annotations], batch_size=batch_size
    )
    print(
        f"batched  {report.batched.mean_ms_per_sample:8.3f} ms/sample "
        f"(batch size {report.batched.batch_size})\n"
        f"single   {report.single.mean_ms_per_sample:8.3f} ms/sample "
        f"(batch size 1)\n"
        f"params   {report.params_total} ({report.encoder_fraction:.1%} encoder)"
    )
    if args.out:
        payload = opts.provenance("bench")
        payload["timing"] = report.to_json_obj()
        _write(args.out, _dump_json(payload))
    return EXIT_OK


def cmd_selftest(opts: _Options) -> int:
    seed = int(opts.get("seed", 0))
    fast = bool(opts.args.fast)
    cases = 120 if fast else 400
    rng = random.Random(seed)
    schema = RelationSchema(("r0", "r1", "r2"))
    failures = 0

    def check(label: str, ok: bool) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
        if not ok:
            failures += 1

    # index arithmetic agrees with plain enumeration
    ok = True
    for n in range(1, 41):
        k = 0
        for i in range(n):
            for j in range(i, n):
                if codec.seq_index(i, j, n) != k or codec.matrix_index(k, n) != (i, j):
                    ok = False
                k += 1
        if codec.index_map(n).length != k:
            ok = False
    check("pair index arithmetic (n <= 40)", ok)

    ok = True
    for _ in range(cases):
        ann = synth.random_annotation(rng, schema, n_max=10, max_triples=5)
        tagging = codec.encode(ann, schema, mode="strict")
        if decoding.decode(tagging, schema) != set(ann.triples):
            ok = False
            break
    check(f"encode/decode roundtrip ({cases} random annotations)", ok)

    ok = True
    for _ in range(cases):
        tagging = synth.random_tagging(rng, rng.randint(1, 9), len(schema))
        if decoding.decode(tagging, schema) != decoding.decode_oracle(tagging, schema):
            ok = False
            break
    check(f"decoder equals brute-force oracle ({cases} random taggings)", ok)

    ok = True
    try:
        from .model import build_vocab, init_model
        from .codec import encode as _encode

        for trial in range(2):
            sents = synth.synthetic_dataset(rng, schema, 3, n_min=3, n_max=5)
            vocab = build_vocab(a.tokens for a in sents)
            params = init_model(
                schema, vocab, d_embed=6, d_state=3, d_pair=6, seed=seed + trial
            )
            batch = [(a.tokens, _encode(a, schema, mode="lenient")) for a in sents]
            check_gradients(batch, params, max_coords=6, seed=seed + trial)
    except NumericError:
        ok = False
    check("analytic gradients match finite differences (spot check)", ok)

    span = TokenSpan
    preds = [{Triple(span(0, 0), 0, span(1, 1)), Triple(span(0, 0), 1, span(1, 1))}]
    golds = [
        {
            Triple(span(0, 0), 0, span(1, 1)),
            Triple(span(2, 2), 0, span(3, 3)),
            Triple(span(0, 0), 2, span(1, 1)),
        }
    ]
    scores = micro_prf(preds, golds, mode="exact")
    check(
        "metric fixture (P=0.5, R=1/3, F1=0.4)",
        abs(scores.precision - 0.5) < 1e-12
        and abs(scores.recall - 1 / 3) < 1e-12
        and abs(scores.f1 - 0.4) < 1e-12,
    )

    if failures:
        print(f"{failures} self-test suite(s) failed")
        return EXIT_FAILURE
    print("all self-test suites passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairlink",
        description="Token-pair link tagging: encode, decode, train, and score relation triples.",
        epilog="exit codes: 0 ok, 1 failure, 2 usage, 3 bad input file, 4 schema/data mismatch",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, config: bool = True) -> None:
        if config:
            p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, default=None, help="run seed (default 0)")

    p = sub.add_parser("encode", help="dataset JSONL -> tagging JSONL")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--standard", choices=("whole-span", "last-word"), default=None)
    p.add_argument("--mode", choices=("strict", "lenient"), default=None)
    common(p)

    p = sub.add_parser("decode", help="tagging JSONL -> triples JSONL")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("strict", "lenient"), default=None)
    common(p)

    p = sub.add_parser("stats", help="corpus statistics (patterns, buckets, sizes)")
    p.add_argument("--data", help="training split JSONL")
    p.add_argument("--valid", help="validation split JSONL")
    p.add_argument("--test", help="test split JSONL")
    p.add_argument("--schema", help="relation schema (derived from data when omitted)")
    p.add_argument("--out", help="write the report as JSON here")
    p.add_argument("--standard", choices=("whole-span", "last-word"), default=None)
    p.add_argument("--mode", choices=("strict", "lenient"), default=None)
    common(p)

    p = sub.add_parser("train", help="fit a tagger and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--valid")
    p.add_argument("--schema", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--standard", choices=("whole-span", "last-word"), default=None)
    p.add_argument("--mode", choices=("strict", "lenient"), default=None)
    common(p)

    p = sub.add_parser("eval", help="score a checkpoint against gold annotations")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out")
    p.add_argument("--match", choices=("partial", "exact"), default=None)
    p.add_argument("--by-subset", dest="by_subset", action="store_true",
                   help="also break scores down by overlap pattern and triple count")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--standard", choices=("whole-span", "last-word"), default=None)
    p.add_argument("--mode", choices=("strict", "lenient"), default=None)
    common(p)

    p = sub.add_parser("bench", help="time inference, batched and one-by-one")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--standard", choices=("whole-span", "last-word"), default=None)
    p.add_argument("--mode", choices=("strict", "lenient"), default=None)
    common(p)

    p = sub.add_parser("selftest", help="run quick built-in consistency suites")
    p.add_argument("--fast", action="store_true")
    common(p)

    return parser


_COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "stats": cmd_stats,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _Options(args)
        opts.get("seed", 0)
        return _COMMANDS[args.command](opts)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (codec.EncodeConflictError, InvalidInput, AlignmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PairLinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
