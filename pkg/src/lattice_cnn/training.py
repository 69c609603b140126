"""Minibatch training with per-epoch negative sampling and adadelta."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .autodiff import Parameter
from .data import ExampleGroup, PairExample, make_batch
from .errors import ConfigError, TrainingError
from .evaluation import predict_and_rank
from .matcher import SiameseMatcher, bce_loss

log = logging.getLogger(__name__)

NEG_PER_QUESTION = {"dbqa": 10, "kbre": 5}


@dataclass
class TrainConfig:
    batch_size: int = 64
    lr: float = 1.0
    rho: float = 0.95
    eps: float = 1e-6
    neg_per_question: int = 10
    max_epochs: int = 20
    patience: int = 5
    seed: int = 0
    # stop as soon as dev P@1 reaches this value (None: never)
    target_p1: float | None = None

    def __post_init__(self):
        problems = []
        for name in ("batch_size", "neg_per_question", "max_epochs", "patience"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name} must be >= 1")
        for name in ("lr", "eps"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        if not 0 < self.rho < 1:
            problems.append("rho must be in (0, 1)")
        if problems:
            raise ConfigError(problems)


def sample_negatives(group: ExampleGroup, k: int, rng: np.random.Generator) -> list[PairExample]:
    """Up to ``k`` negatives drawn uniformly without replacement."""
    negs = group.negatives
    if len(negs) <= k:
        return list(negs)
    picked = np.sort(rng.choice(len(negs), size=k, replace=False))
    return [negs[i] for i in picked]


def adadelta_step(param: Parameter, grad: np.ndarray | None = None, rho: float = 0.95,
                  eps: float = 1e-6, lr: float = 1.0) -> Parameter:
    """One in-place adadelta update using the parameter's accumulators."""
    g = param.grad if grad is None else grad
    param.acc_grad *= rho
    param.acc_grad += (1.0 - rho) * g * g
    delta = -np.sqrt(param.acc_delta + eps) / np.sqrt(param.acc_grad + eps) * g
    param.acc_delta *= rho
    param.acc_delta += (1.0 - rho) * delta * delta
    param.data += lr * delta
    return param


class Adadelta:
    def __init__(self, params: Sequence[Parameter], lr: float = 1.0, rho: float = 0.95,
                 eps: float = 1e-6):
        self.params = list(params)
        self.lr, self.rho, self.eps = lr, rho, eps

    def step(self) -> None:
        for p in self.params:
            adadelta_step(p, p.grad, self.rho, self.eps, self.lr)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def epoch_batches(groups: Sequence[ExampleGroup], cfg: TrainConfig,
                  rng: np.random.Generator) -> list[list[PairExample]]:
    """Shuffle groups, resample negatives, and cut size-bucketed batches."""
    pairs: list[PairExample] = []
    for gi in rng.permutation(len(groups)):
        g = groups[gi]
        pairs.extend(g.positives)
        pairs.extend(sample_negatives(g, cfg.neg_per_question, rng))
    bucket = cfg.batch_size * 8
    batches = []
    for i in range(0, len(pairs), bucket):
        chunk = sorted(pairs[i:i + bucket], key=lambda e: e.size)
        batches.extend(chunk[j:j + cfg.batch_size] for j in range(0, len(chunk), cfg.batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_mrr: float | None = None


def train(groups: Sequence[ExampleGroup], model: SiameseMatcher, cfg: TrainConfig,
          dev: Sequence[ExampleGroup] | None = None, checkpoint_dir=None,
          log_path=None) -> TrainResult:
    """Train ``model`` in place.

    The per-epoch ``loss`` is the mean binary cross-entropy per training pair.
    With a dev set, training stops after ``patience`` epochs without a dev MRR
    gain and the best-scoring parameters are restored at the end.
    """
    if not groups or not any(g.examples for g in groups):
        raise ConfigError("training set is empty")
    from .checkpoint import save_checkpoint

    rng = np.random.default_rng(cfg.seed)
    opt = Adadelta(model.parameters(), cfg.lr, cfg.rho, cfg.eps)
    result = TrainResult()
    best_state = None
    stale = 0
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_fh = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            t0 = time.perf_counter()
            total, n_pairs = 0.0, 0
            for bi, batch_ex in enumerate(epoch_batches(groups, cfg, rng)):
                batch = make_batch(batch_ex, model.embedding)
                opt.zero_grad()
                scores = model.forward(batch, train=True, rng=rng)
                loss = bce_loss(scores, batch.labels)
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingError(f"non-finite loss {value} at epoch {epoch}, batch {bi} "
                                        f"(groups {sorted({e.group_id for e in batch_ex})[:5]})")
                (loss * (1.0 / batch.size)).backward()
                opt.step()
                total += value
                n_pairs += batch.size
            record = {"epoch": epoch, "loss": total / n_pairs,
                      "dev_map": None, "dev_mrr": None, "dev_p1": None}
            if dev:
                _, m = predict_and_rank(model, dev, cfg.batch_size)
                record.update(dev_map=m.map, dev_mrr=m.mrr, dev_p1=m.p_at_1)
            record["seconds"] = time.perf_counter() - t0
            result.history.append(record)
            log.info("epoch %d loss %.4f dev_mrr %s", epoch, record["loss"], record["dev_mrr"])
            if log_fh is not None:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()

            improved = dev and (result.best_dev_mrr is None or record["dev_mrr"] > result.best_dev_mrr)
            if improved:
                result.best_dev_mrr = record["dev_mrr"]
                result.best_epoch = epoch
                best_state = {p.name: p.data.copy() for p in model.parameters()}
                stale = 0
            elif dev:
                stale += 1
            else:
                result.best_epoch = epoch
            if ckpt_dir is not None:
                save_checkpoint(ckpt_dir / "last.npz", model, {"epoch": epoch})
                if improved or not dev:
                    save_checkpoint(ckpt_dir / "best.npz", model, {"epoch": epoch})
            if dev and cfg.target_p1 is not None and record["dev_p1"] >= cfg.target_p1:
                break
            if dev and stale >= cfg.patience:
                break
    finally:
        if log_fh is not None:
            log_fh.close()
    if best_state is not None:
        for p in model.parameters():
            p.data[...] = best_state[p.name]
    return result
