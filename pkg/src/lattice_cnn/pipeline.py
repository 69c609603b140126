"""Glue between a :class:`RunConfig` and the library pieces."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_model
from .config import RunConfig
from .data import (ExampleGroup, Featurizer, QAGroup, SegmentationTable, all_surfaces,
                   build_examples, read_dataset)
from .errors import ConfigError
from .evaluation import MetricsReport, RankingGroup, predict_and_rank
from .lattice import load_vocab
from .matcher import SiameseMatcher, load_word2vec_text
from .plotting import plot_training_curve
from .training import TrainResult, train

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")


def make_featurizer(cfg: RunConfig) -> Featurizer:
    vocab = None
    if cfg.vocab_path and cfg.input_mode == "lattice" and cfg.lattice_strategy == "vocab":
        vocab = load_vocab(cfg.resolve(cfg.vocab_path))
    segs = None
    if cfg.seg_paths:
        segs = SegmentationTable.from_files([cfg.resolve(p) for p in cfg.seg_paths])
    return Featurizer(cfg.input_mode, cfg.lattice_strategy, vocab, segs, cfg.widths)


def split_path(cfg: RunConfig, split: str) -> Path:
    if split not in SPLITS:
        raise ConfigError(f"split must be one of {SPLITS}, got {split!r}")
    path = getattr(cfg, f"{split}_path")
    if not path:
        raise ConfigError(f"{split}_path is not set in the config")
    return cfg.resolve(path)


def load_split(cfg: RunConfig, split: str, featurizer: Featurizer) -> tuple[list[QAGroup], list[ExampleGroup]]:
    groups = read_dataset(split_path(cfg, split))
    return groups, build_examples(groups, featurizer)


def build_model(cfg: RunConfig, train_examples: list[ExampleGroup], seed: int) -> SiameseMatcher:
    rng = np.random.default_rng(seed)
    tokens = all_surfaces(train_examples)
    pretrained = None
    dim = cfg.embedding_dim
    if cfg.embeddings_path:
        pretrained = load_word2vec_text(cfg.resolve(cfg.embeddings_path))
        if pretrained:
            dim = len(next(iter(pretrained.values())))
            if dim != cfg.embedding_dim:
                raise ConfigError(f"embeddings file has dim {dim}, config says "
                                  f"embedding_dim={cfg.embedding_dim}")
        if cfg.embedding_fallback == "unk":
            tokens = {t for t in tokens if t in pretrained}
    return SiameseMatcher(cfg.model_config(dim), tokens, rng, pretrained)


@dataclass
class TrainOutputs:
    model: SiameseMatcher
    result: TrainResult
    output_dir: Path
    checkpoint: Path
    log_path: Path
    figure: Path


def run_training(cfg: RunConfig, seed: int | None = None) -> TrainOutputs:
    if seed is not None:
        cfg.seed = seed
    featurizer = make_featurizer(cfg)
    _, train_ex = load_split(cfg, "train", featurizer)
    dev_ex = load_split(cfg, "dev", featurizer)[1] if cfg.dev_path else None
    model = build_model(cfg, train_ex, cfg.seed)
    out = cfg.resolve(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.jsonl"
    result = train(train_ex, model, cfg.train_config(), dev=dev_ex, checkpoint_dir=out,
                   log_path=log_path)
    figure = plot_training_curve(result.history, out / "training_curve.png")
    return TrainOutputs(model, result, out, out / "best.npz", log_path, figure)


def run_eval(cfg: RunConfig, checkpoint, split: str) -> tuple[list[RankingGroup], MetricsReport]:
    model = load_model(checkpoint, expected=cfg.model_config())
    featurizer = make_featurizer(cfg)
    _, examples = load_split(cfg, split, featurizer)
    return predict_and_rank(model, examples, cfg.batch_size)
