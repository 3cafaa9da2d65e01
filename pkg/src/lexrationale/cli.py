"""Command-line front end.

Every subcommand writes a run manifest (JSON) recording argv, configuration,
seeds, SHA-256 digests of inputs and outputs, warnings, and wall-clock time.
``rerun`` replays a manifest and checks that the outputs come out identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from lexrationale import __version__, plotting
from lexrationale import evaluation as ev
from lexrationale import synth
from lexrationale._parallel import ordered_map
from lexrationale.classifier import DOCUMENT_LEVEL, ModelFormatError, TrainConfig, load_model, save_model
from lexrationale.corpus import CorpusError, load_corpus, save_corpus, split_corpus
from lexrationale.features import DEFAULT_K
from lexrationale.manifest import (
    RunManifest,
    collect_warnings,
    now_utc,
    read_manifest,
    sha256_file,
    working_directory,
)
from lexrationale.rationale import (
    IterConfig,
    NoRationalesError,
    SelectionConfig,
    rank_rationales,
    train_document_model,
    train_iterative_method,
    train_snippet_method,
    write_selection_audit,
)

log = logging.getLogger("lexrationale.cli")

DEFAULT_SNIPPET_SIZE = 50

# report-dir file names written by ``evaluate``
SCORE_REDUCTION_CSV = "score_reduction.csv"
TOKEN_STATS_CSV = "token_stats.csv"
PR_CURVE_CSV = "pr_curve.csv"
REPORT_TXT = "report.txt"
PR_CURVE_PNG = "pr_curve.png"
BUCKETS_PNG = "buckets.png"


class UsageError(Exception):
    """A configuration problem; the message names the offending flag."""


# ---------------------------------------------------------------- arg types


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _even_size(text: str) -> int:
    value = _positive_int(text)
    if value < 2 or value % 2:
        raise argparse.ArgumentTypeError(f"must be an even integer >= 2, got {value}")
    return value


def _float_in(lo: float, hi: float, lo_open: bool = False, hi_open: bool = False):
    def parse(text: str) -> float:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        ok_lo = value > lo if lo_open else value >= lo
        ok_hi = value < hi if hi_open else value <= hi
        if not (ok_lo and ok_hi):
            left = "(" if lo_open else "["
            right = ")" if hi_open else "]"
            raise argparse.ArgumentTypeError(f"must lie in {left}{lo:g}, {hi:g}{right}, got {value:g}")
        return value

    return parse


def _positive_float(text: str) -> float:
    return _float_in(0.0, float("inf"), lo_open=True, hi_open=True)(text)


def _nonneg_float(text: str) -> float:
    return _float_in(0.0, float("inf"), hi_open=True)(text)


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="where to write the run manifest (default: next to the main output)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_training(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("classifier")
    g.add_argument("--features", type=_positive_int, default=DEFAULT_K, help="number of n-gram features (k)")
    g.add_argument("--learning-rate", type=_positive_float, default=0.1)
    g.add_argument("--max-epochs", type=_positive_int, default=500)
    g.add_argument("--l2-lambda", type=_nonneg_float, default=1e-4)
    g.add_argument("--grad-tolerance", type=_nonneg_float, default=1e-6)
    g.add_argument("--seed", type=int, default=0, help="seed for nonresponsive snippet sampling")


def _add_selection(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("snippet selection")
    g.add_argument("--min-score-th", type=_float_in(0.5, 1.0, hi_open=True), default=0.8,
                   help="score needed for the second selection pass")
    g.add_argument("--max-num", type=_positive_int, default=500, help="cap on the second selection pass")
    g.add_argument("--doc-model", help="reuse this document-level model instead of training one")
    g.add_argument("--audit", help="write the selected training snippets here (JSON lines)")
    g.add_argument("--threads", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexrationale",
        description="Annotation-free rationale detection for responsive-document classification.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("gen", help="generate a synthetic corpus with planted rationales")
    p.add_argument("--out", required=True, help="corpus JSONL to write")
    p.add_argument("--truth-out", help="planted-span ground truth JSONL to write")
    p.add_argument("--n-resp", type=_nonneg_int, default=200)
    p.add_argument("--n-nonresp", type=_nonneg_int, default=600)
    p.add_argument("--doc-length-min", type=_positive_int, default=300)
    p.add_argument("--doc-length-max", type=_positive_int, default=800)
    p.add_argument("--plant-length", type=_positive_int, default=50)
    p.add_argument("--plants-min", type=_positive_int, default=1)
    p.add_argument("--plants-max", type=_positive_int, default=1)
    p.add_argument("--signal-strength", type=_float_in(0.0, 1.0, lo_open=True), default=1.0)
    p.add_argument("--vocab-overlap", type=_float_in(0.0, 1.0, hi_open=True), default=0.0)
    p.add_argument("--background-vocab", type=_positive_int, default=3000)
    p.add_argument("--topic-vocab", type=_positive_int, default=150)
    p.add_argument("--zipf-exponent", type=_positive_float, default=1.1)
    p.add_argument("--id-prefix", default="doc")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab-seed", type=int, default=0, help="word lists depend only on this seed")
    _add_common(p)

    p = sub.add_parser("split", help="stratified train/test split of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--train", required=True, help="training corpus to write")
    p.add_argument("--test", required=True, help="test corpus to write")
    p.add_argument("--train-fraction", type=_float_in(0.0, 1.0, True, True), default=0.5)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("train-doc", help="train the document-level model")
    p.add_argument("--train", required=True)
    p.add_argument("--model-out", required=True)
    _add_training(p)
    _add_common(p)

    p = sub.add_parser("train-snippet", help="train a snippet model from document-level scores")
    p.add_argument("--train", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--snippet-size", type=_even_size, default=DEFAULT_SNIPPET_SIZE)
    _add_selection(p)
    _add_training(p)
    _add_common(p)

    p = sub.add_parser("train-iterative", help="train an iterative snippet model with halving sizes")
    p.add_argument("--train", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--start-snippet-size", type=_even_size, default=1000)
    p.add_argument("--snippet-size", type=_even_size, default=DEFAULT_SNIPPET_SIZE, help="final (minimum) snippet size")
    _add_selection(p)
    _add_training(p)
    _add_common(p)

    p = sub.add_parser("extract", help="rank rationale snippets for every document of a corpus")
    p.add_argument("--test", required=True, help="corpus to explain")
    p.add_argument("--doc-model", required=True)
    p.add_argument("--model-in", help="rationale model (default: the document-level model)")
    p.add_argument("--snippet-size", type=_even_size)
    p.add_argument("--top", type=_positive_int, default=5, help="snippets kept per document")
    p.add_argument("--out", required=True, help="JSONL of ranked rationales")
    p.add_argument("--threads", type=_positive_int, default=1)
    _add_common(p)

    p = sub.add_parser("evaluate", help="score-reduction report, token statistics, and PR curve")
    p.add_argument("--test", required=True)
    p.add_argument("--doc-model", required=True)
    p.add_argument("--model-in", help="rationale model (default: the document-level model)")
    p.add_argument("--snippet-size", type=_even_size)
    p.add_argument("--pr-steps", type=_positive_int, default=100)
    p.add_argument("--method", help="name shown in reports (default: the model kind)")
    p.add_argument("--report-dir", required=True)
    p.add_argument("--threads", type=_positive_int, default=1)
    _add_common(p)

    p = sub.add_parser("report", help="side-by-side tables and figures from evaluate runs")
    p.add_argument("inputs", nargs="+", metavar="EVAL_DIR", help="report directories written by evaluate")
    p.add_argument("--report-dir", required=True, help="where to write the combined report")
    _add_common(p)

    p = sub.add_parser("rerun", help="replay a run manifest and verify identical outputs")
    p.add_argument("manifest_in", metavar="MANIFEST")
    p.add_argument("--threads", type=_positive_int, help="override the recorded thread count")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


# ---------------------------------------------------------------- helpers


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.learning_rate,
        max_epochs=args.max_epochs,
        l2_lambda=args.l2_lambda,
        grad_tolerance=args.grad_tolerance,
        k=args.features,
        seed=args.seed,
    )


def _manifest_path(args, default: Path) -> Path:
    return Path(args.manifest) if args.manifest else default


def _config_snapshot(args) -> dict:
    skip = {"func", "manifest", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _load_doc_model(path: str, flag: str):
    model = load_model(path)
    if model.kind != DOCUMENT_LEVEL:
        raise UsageError(f"{flag}: {path} holds a {model.kind} model, expected {DOCUMENT_LEVEL}")
    return model


def _resolve_snippet_size(args, model) -> int:
    """``--snippet-size`` if given, else the size the rationale model was trained on."""
    trained = model.provenance.snippet_size
    if args.snippet_size is None:
        return trained or DEFAULT_SNIPPET_SIZE
    if trained is not None and trained != args.snippet_size:
        log.warning("snippet-size mismatch: rationale model was trained on %d-token snippets but --snippet-size is %d",
                    trained, args.snippet_size)
    return args.snippet_size


def _write_text(path: Path, text: str, manifest: RunManifest) -> None:
    path.write_text(text, encoding="utf-8")
    manifest.add_output(path)


# ---------------------------------------------------------------- commands


def cmd_gen(args, manifest: RunManifest) -> Path:
    if args.doc_length_min > args.doc_length_max:
        raise UsageError("--doc-length-min must not exceed --doc-length-max")
    if args.plants_min > args.plants_max:
        raise UsageError("--plants-min must not exceed --plants-max")
    cfg = synth.GenConfig(
        n_resp=args.n_resp,
        n_nonresp=args.n_nonresp,
        doc_length=(args.doc_length_min, args.doc_length_max),
        plant_length=args.plant_length,
        plants_per_resp_doc=(args.plants_min, args.plants_max),
        background_vocab=args.background_vocab,
        topic_vocab=args.topic_vocab,
        signal_strength=args.signal_strength,
        vocab_overlap=args.vocab_overlap,
        zipf_exponent=args.zipf_exponent,
        id_prefix=args.id_prefix,
        seed=args.seed,
        vocab_seed=args.vocab_seed,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(f"--plants-max/--plant-length/--doc-length-min: {exc}") from None
    manifest.seeds = {"seed": args.seed, "vocab_seed": args.vocab_seed}
    corpus, truth = synth.generate(cfg)
    out = Path(args.out)
    save_corpus(corpus, out)
    manifest.add_output(out)
    if args.truth_out:
        synth.save_ground_truth(truth, args.truth_out)
        manifest.add_output(args.truth_out)
    return _manifest_path(args, out.with_name(out.name + ".manifest.json"))


def cmd_split(args, manifest: RunManifest) -> Path:
    corpus = load_corpus(args.corpus)
    manifest.add_input(args.corpus)
    manifest.seeds = {"seed": args.seed}
    split = split_corpus(corpus, args.train_fraction, args.seed)
    save_corpus(split.train, args.train)
    save_corpus(split.test, args.test)
    manifest.add_output(args.train)
    manifest.add_output(args.test)
    train = Path(args.train)
    return _manifest_path(args, train.with_name(train.name + ".manifest.json"))


def cmd_train_doc(args, manifest: RunManifest) -> Path:
    config = _train_config(args)
    train = load_corpus(args.train)
    manifest.add_input(args.train)
    manifest.seeds = {"seed": args.seed}
    model = train_document_model(train, config)
    if not model.provenance.converged:
        log.warning("document-level model stopped at --max-epochs=%d before reaching --grad-tolerance",
                    config.max_epochs)
    out = Path(args.model_out)
    save_model(model, out)
    manifest.add_output(out)
    return _manifest_path(args, out.with_name(out.name + ".manifest.json"))


def _snippet_common(args, manifest: RunManifest):
    config = _train_config(args)
    selection = SelectionConfig(min_score_th=args.min_score_th, max_num=args.max_num)
    train = load_corpus(args.train)
    manifest.add_input(args.train)
    doc_model = None
    if args.doc_model:
        doc_model = _load_doc_model(args.doc_model, "--doc-model")
        manifest.add_input(args.doc_model)
    manifest.seeds = {"seed": args.seed}
    return config, selection, train, doc_model


def _finish_snippet(args, model, trace, manifest: RunManifest) -> Path:
    for rec in trace:
        if rec.exceeds_max_num:
            manifest.warnings.append(
                f"iteration {rec.iteration} (N={rec.snippet_size}): {rec.n_phase1} first-pass snippets exceed --max-num"
            )
    if not model.provenance.converged:
        log.warning("final model stopped at --max-epochs=%d before reaching --grad-tolerance", args.max_epochs)
    out = Path(args.model_out)
    save_model(model, out)
    manifest.add_output(out)
    if args.audit:
        write_selection_audit(trace, args.audit)
        manifest.add_output(args.audit)
    return _manifest_path(args, out.with_name(out.name + ".manifest.json"))


def cmd_train_snippet(args, manifest: RunManifest) -> Path:
    config, selection, train, doc_model = _snippet_common(args, manifest)
    trace: list = []
    model = train_snippet_method(
        train, args.snippet_size, selection, config, doc_model=doc_model, threads=args.threads, trace=trace
    )
    return _finish_snippet(args, model, trace, manifest)


def cmd_train_iterative(args, manifest: RunManifest) -> Path:
    if args.start_snippet_size < args.snippet_size:
        raise UsageError("--start-snippet-size must be >= --snippet-size")
    config, selection, train, doc_model = _snippet_common(args, manifest)
    iteration = IterConfig(start_n=args.start_snippet_size, min_n=args.snippet_size)
    trace: list = []
    model = train_iterative_method(
        train, iteration, selection, config, doc_model=doc_model, threads=args.threads, trace=trace
    )
    return _finish_snippet(args, model, trace, manifest)


def _load_models(args, manifest: RunManifest):
    doc_model = _load_doc_model(args.doc_model, "--doc-model")
    manifest.add_input(args.doc_model)
    if args.model_in:
        rationale_model = load_model(args.model_in)
        manifest.add_input(args.model_in)
    else:
        rationale_model = doc_model
    return doc_model, rationale_model


def cmd_extract(args, manifest: RunManifest) -> Path:
    test = load_corpus(args.test)
    manifest.add_input(args.test)
    doc_model, rationale_model = _load_models(args, manifest)
    size = _resolve_snippet_size(args, rationale_model)
    ranked = ordered_map(lambda d: rank_rationales(d, rationale_model, doc_model, size), list(test), args.threads)
    lines = []
    for doc, snippets in zip(test, ranked):
        lines.append(json.dumps({
            "id": doc.id,
            "rationales": [
                {"rank": r + 1, "start": s.snippet.start, "length": s.snippet.length, "score": s.score}
                for r, s in enumerate(snippets[: args.top])
            ],
        }))
    out = Path(args.out)
    _write_text(out, "".join(line + "\n" for line in lines), manifest)
    return _manifest_path(args, out.with_name(out.name + ".manifest.json"))


def cmd_evaluate(args, manifest: RunManifest) -> Path:
    test = load_corpus(args.test)
    manifest.add_input(args.test)
    doc_model, rationale_model = _load_models(args, manifest)
    size = _resolve_snippet_size(args, rationale_model)
    out_dir = Path(args.report_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = ev.score_reduction_report(doc_model, rationale_model, test, size, args.method, args.threads)
    curve = ev.pr_curve(doc_model, test, args.pr_steps, args.threads)
    _write_text(out_dir / SCORE_REDUCTION_CSV, ev.report_to_csv(report), manifest)
    _write_text(out_dir / TOKEN_STATS_CSV, ev.token_stats_to_csv(report), manifest)
    _write_text(out_dir / PR_CURVE_CSV, ev.pr_curve_to_csv(curve), manifest)
    _write_text(out_dir / REPORT_TXT, ev.format_report(report), manifest)
    plotting.plot_pr_curves({DOCUMENT_LEVEL: curve}, out_dir / PR_CURVE_PNG)
    manifest.add_output(out_dir / PR_CURVE_PNG)
    plotting.plot_bucket_reductions([report], out_dir / BUCKETS_PNG)
    manifest.add_output(out_dir / BUCKETS_PNG)
    sys.stdout.write(ev.format_report(report))
    return _manifest_path(args, out_dir / "manifest.json")


def cmd_report(args, manifest: RunManifest) -> Path:
    reports = []
    curves = {}
    for d in map(Path, args.inputs):
        for name in (SCORE_REDUCTION_CSV, TOKEN_STATS_CSV, PR_CURVE_CSV):
            if not (d / name).is_file():
                raise UsageError(f"EVAL_DIR {d}: missing {name} (run evaluate first)")
            manifest.add_input(d / name)
        report = ev.read_report_files(
            (d / SCORE_REDUCTION_CSV).read_text(encoding="utf-8"),
            (d / TOKEN_STATS_CSV).read_text(encoding="utf-8"),
        )
        reports.append(report)
        # evaluations sharing a document model share one curve; draw it once
        curve = ev.read_pr_curve_csv((d / PR_CURVE_CSV).read_text(encoding="utf-8"))
        same = next((name for name, c in curves.items() if c.points == curve.points), None)
        if same is None:
            curves[str(d)] = curve
        else:
            curves[f"{same}, {d}"] = curves.pop(same)
    out_dir = Path(args.report_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = "\n".join(ev.format_report(r) for r in reports) + "\n" + ev.format_token_table(reports)
    _write_text(out_dir / REPORT_TXT, text, manifest)
    _write_text(out_dir / "comparison.csv", ev.comparison_to_csv(reports), manifest)
    plotting.plot_bucket_reductions(reports, out_dir / BUCKETS_PNG)
    manifest.add_output(out_dir / BUCKETS_PNG)
    plotting.plot_pr_curves(curves, out_dir / PR_CURVE_PNG)
    manifest.add_output(out_dir / PR_CURVE_PNG)
    sys.stdout.write(text)
    return _manifest_path(args, out_dir / "manifest.json")


COMMANDS = {
    "gen": cmd_gen,
    "split": cmd_split,
    "train-doc": cmd_train_doc,
    "train-snippet": cmd_train_snippet,
    "train-iterative": cmd_train_iterative,
    "extract": cmd_extract,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def _run(parser: argparse.ArgumentParser, argv: list[str]) -> int:
    args = parser.parse_args(argv)
    if args.command == "rerun":
        return _rerun(parser, args)
    manifest = RunManifest(
        command=args.command, argv=list(argv), cwd=str(Path.cwd()), config=_config_snapshot(args), started_at=now_utc()
    )
    t0 = time.perf_counter()
    try:
        with collect_warnings() as collector:
            manifest_path = COMMANDS[args.command](args, manifest)
    except UsageError as exc:
        parser.error(str(exc))
    except (CorpusError, ModelFormatError, NoRationalesError, OSError, ValueError) as exc:
        print(f"lexrationale {args.command}: error: {exc}", file=sys.stderr)
        return 1
    manifest.warnings = collector.messages + manifest.warnings
    manifest.wall_clock_seconds = round(time.perf_counter() - t0, 3)
    manifest.write(manifest_path)
    return 0


def _rerun(parser: argparse.ArgumentParser, args) -> int:
    try:
        recorded = read_manifest(args.manifest_in)
    except ValueError as exc:
        parser.error(f"MANIFEST: {exc}")
    argv = list(recorded.argv)
    if args.threads is not None:
        if "threads" not in recorded.config:
            parser.error(f"--threads: the {recorded.command} command has no thread setting")
        if "--threads" in argv:
            argv[argv.index("--threads") + 1] = str(args.threads)
        else:
            argv += ["--threads", str(args.threads)]
    with working_directory(recorded.cwd):
        # replaying against changed inputs would report spurious output differences
        stale = [p for p, digest in recorded.inputs.items() if not Path(p).is_file() or sha256_file(p) != digest]
        for p in stale:
            print(f"rerun: input differs from manifest: {p}", file=sys.stderr)
        if stale:
            return 1
        status = _run(parser, argv)
        if status:
            return status
        mismatched = [p for p, digest in recorded.outputs.items() if not Path(p).is_file() or sha256_file(p) != digest]
    for p in mismatched:
        print(f"rerun: output differs from manifest: {p}", file=sys.stderr)
    if not mismatched:
        print(f"rerun: {len(recorded.outputs)} outputs identical")
    return 1 if mismatched else 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return _run(parser, argv)


if __name__ == "__main__":
    sys.exit(main())
