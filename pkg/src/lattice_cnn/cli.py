"""Command-line entry point: ``lattice-cnn <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import RunConfig
from .data import SegmentationTable, read_dataset, read_tsv_pairs
from .errors import ConfigError, LatticeCNNError
from .evaluation import (overlap_analysis, read_predictions, write_overlap_csv,
                         write_predictions)
from .lattice import (Vocabulary, lattice_from_segmentations, load_vocab, segment_lattice,
                      split_units)
from .pipeline import SPLITS, run_eval, run_training

WORKERS_ENV = "LATTICE_CNN_WORKERS"
log = logging.getLogger("lattice_cnn")


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# build-lattice
# ---------------------------------------------------------------------------


def _build_one(job):
    lineno, text, strategy, vocab, segs = job
    if not text:
        raise ConfigError(f"line {lineno}: empty sentence")
    try:
        if strategy == "vocab":
            return segment_lattice(text, vocab)
        mode = "union" if strategy == "seg_union" else "intersection"
        return lattice_from_segmentations(split_units(text), segs, mode)
    except LatticeCNNError as exc:
        raise type(exc)(f"line {lineno}: {exc}") from None


def cmd_build_lattice(args) -> int:
    vocab: Vocabulary | None = None
    table: SegmentationTable | None = None
    if args.strategy == "vocab":
        if not args.vocab:
            raise ConfigError("--vocab is required with --strategy vocab")
        if not Path(args.vocab).is_file():
            raise ConfigError(f"vocabulary file not found: {args.vocab}")
        vocab = load_vocab(args.vocab)
    else:
        if not args.segs:
            raise ConfigError(f"--segs is required with --strategy {args.strategy}")
        missing = [p for p in args.segs if not Path(p).is_file()]
        if missing:
            raise ConfigError([f"segmentation file not found: {p}" for p in missing])
        table = SegmentationTable.from_files(args.segs)
    if not Path(args.input).is_file():
        raise ConfigError(f"input file not found: {args.input}")

    jobs = []
    with open(args.input, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\r\n")
            segs = None
            if table is not None:
                if text not in table:
                    raise ConfigError(f"line {lineno}: no segmentation for {text!r}")
                segs = table.get(text)
            jobs.append((lineno, text, args.strategy, vocab, segs))

    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            lattices = list(pool.map(_build_one, jobs, chunksize=64))
    else:
        lattices = [_build_one(j) for j in jobs]

    with open(args.out, "w", encoding="utf-8") as out:
        for lat in lattices:
            out.write(lat.to_json() + "\n")
    if args.dot:
        dot_dir = Path(args.dot)
        dot_dir.mkdir(parents=True, exist_ok=True)
        for i, lat in enumerate(lattices, start=1):
            (dot_dir / f"lattice_{i:05d}.dot").write_text(lat.to_dot(f"lattice_{i}"), encoding="utf-8")
    n = len(lattices)
    avg = sum(len(lat) for lat in lattices) / n if n else 0.0
    avg_chars = sum(lat.n_chars for lat in lattices) / n if n else 0.0
    print(f"lattices: {n}  avg tokens: {avg:.2f}  avg chars: {avg_chars:.2f}")
    return 0


# ---------------------------------------------------------------------------
# train / eval / predict
# ---------------------------------------------------------------------------


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def cmd_train(args) -> int:
    cfg = _load_config(args)
    outputs = run_training(cfg)
    res = outputs.result
    summary = {"epochs": len(res.history), "best_epoch": res.best_epoch,
               "best_dev_mrr": res.best_dev_mrr, "final_loss": res.history[-1]["loss"],
               "checkpoint": str(outputs.checkpoint), "log": str(outputs.log_path),
               "figure": str(outputs.figure)}
    print(json.dumps(summary, indent=2))
    return 0


def _default_split(cfg: RunConfig) -> str:
    for split in ("test", "dev", "train"):
        if getattr(cfg, f"{split}_path"):
            return split
    raise ConfigError("config names no dataset (train_path/dev_path/test_path)")


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    split = args.split or _default_split(cfg)
    _, report = run_eval(cfg, args.checkpoint, split)
    out = Path(args.out) if args.out else cfg.resolve(cfg.output_dir) / "metrics.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_json())
    return 0


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    split = args.split or _default_split(cfg)
    groups, report = run_eval(cfg, args.checkpoint, split)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_predictions(args.out, groups)
    print(report.to_json())
    return 0


# ---------------------------------------------------------------------------
# analyze-overlap
# ---------------------------------------------------------------------------


def _texts_from_args(args) -> tuple[dict[str, str], dict[str, list[str]]]:
    questions: dict[str, str] = {}
    golds: dict[str, list[str]] = {}
    if args.dataset:
        for g in read_dataset(args.dataset):
            questions[g.group_id] = g.question
            golds[g.group_id] = g.gold_texts
    if args.questions:
        for gid, text in read_tsv_pairs(args.questions):
            questions[gid] = text
    if args.golds:
        gold_rows = read_tsv_pairs(args.golds)
        if args.dataset:
            golds = {}
        for gid, text in gold_rows:
            golds.setdefault(gid, []).append(text)
    if not questions or not golds:
        raise ConfigError("analyze-overlap needs --questions and --golds (or --dataset)")
    return questions, golds


def cmd_analyze_overlap(args) -> int:
    from .plotting import plot_overlap

    questions, golds = _texts_from_args(args)
    labels = args.labels or [Path(p).stem for p in args.predictions]
    if len(labels) != len(args.predictions):
        raise ConfigError("--labels must match --predictions one to one")
    series = {}
    for label, path in zip(labels, args.predictions):
        series[label] = overlap_analysis(read_predictions(path), questions, golds, args.n_bins)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if len(series) == 1:
        write_overlap_csv(out, next(iter(series.values())))
        written = [out]
    else:
        written = []
        for label, bins in series.items():
            path = out.with_name(f"{out.stem}.{label}{out.suffix}")
            write_overlap_csv(path, bins)
            written.append(path)
    figure = Path(args.figure) if args.figure else out.with_suffix(".png")
    plot_overlap(series, figure)
    for p in written:
        print(f"wrote {p}")
    print(f"wrote {figure}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lattice-cnn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-lattice", help="build word lattices for lines of text")
    p.add_argument("--input", required=True, help="UTF-8 text, one sentence per line")
    p.add_argument("--vocab", help="vocabulary file, one word per line")
    p.add_argument("--segs", nargs="+", help="segmentation files (space-separated tokens)")
    p.add_argument("--strategy", default="vocab", choices=("vocab", "seg_union", "seg_intersection"))
    p.add_argument("--out", required=True, help="output JSON-lines file")
    p.add_argument("--dot", help="directory for per-lattice DOT dumps")
    p.set_defaults(func=cmd_build_lattice)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (("eval", cmd_eval, "compute ranking metrics"),
                              ("predict", cmd_predict, "write candidate scores as TSV")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--split", choices=SPLITS)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=name == "predict",
                       help="metrics JSON (eval) or predictions TSV (predict)")
        p.set_defaults(func=func)

    p = sub.add_parser("analyze-overlap", help="MRR by question/answer overlap granularity")
    p.add_argument("--predictions", nargs="+", required=True)
    p.add_argument("--labels", nargs="+")
    p.add_argument("--questions", help="TSV: group_id, question_text")
    p.add_argument("--golds", help="TSV: group_id, gold_answer_text (one line per gold)")
    p.add_argument("--dataset", help="dataset TSV to take questions and golds from")
    p.add_argument("--n-bins", type=int, default=12)
    p.add_argument("--out", default="overlap.csv")
    p.add_argument("--figure", help="figure path (default: CSV path with .png)")
    p.set_defaults(func=cmd_analyze_overlap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 2
    except LatticeCNNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
