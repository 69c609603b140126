"""Ranking metrics (MAP, MRR, P@1) and the overlap-granularity analysis."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError


@dataclass
class RankingGroup:
    group_id: str
    candidates: list[tuple[str, float, int]]  # (candidate_id, score, label)

    def __post_init__(self):
        if not self.candidates:
            raise DataError(f"group {self.group_id!r} has no candidates")
        for cid, score, label in self.candidates:
            if not math.isfinite(score):
                raise DataError(f"group {self.group_id!r}: non-finite score for {cid!r}")
            if label not in (0, 1):
                raise DataError(f"group {self.group_id!r}: label must be 0/1, got {label!r}")

    def ranked_labels(self) -> list[int]:
        # sorted() is stable, so equal scores keep their original order
        order = sorted(range(len(self.candidates)), key=lambda i: -self.candidates[i][1])
        return [self.candidates[i][2] for i in order]


@dataclass
class MetricsReport:
    map: float
    mrr: float
    p_at_1: float
    n_groups: int
    skipped_groups: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def average_precision(ranked_labels: Sequence[int]) -> float:
    hits = 0
    total = 0.0
    for rank, label in enumerate(ranked_labels, start=1):
        if label:
            hits += 1
            total += hits / rank
    return total / hits if hits else 0.0


def reciprocal_rank(ranked_labels: Sequence[int]) -> float:
    for rank, label in enumerate(ranked_labels, start=1):
        if label:
            return 1.0 / rank
    return 0.0


def rank_metrics(groups: Sequence[RankingGroup]) -> MetricsReport:
    """Mean AP, mean reciprocal rank and top-1 precision over scored groups.

    Groups without any positive candidate are skipped and counted in
    ``skipped_groups``.
    """
    if not groups:
        raise DataError("rank_metrics needs at least one group")
    aps, rrs, p1s = [], [], []
    skipped = 0
    for g in groups:
        labels = g.ranked_labels()
        if not any(labels):
            skipped += 1
            continue
        aps.append(average_precision(labels))
        rrs.append(reciprocal_rank(labels))
        p1s.append(float(labels[0] == 1))
    n = len(aps)
    if n == 0:
        return MetricsReport(0.0, 0.0, 0.0, 0, skipped)
    return MetricsReport(float(np.mean(aps)), float(np.mean(rrs)), float(np.mean(p1s)), n, skipped)


# ---------------------------------------------------------------------------
# Overlap granularity
# ---------------------------------------------------------------------------


def longest_common_substring(a: str, b: str) -> int:
    """Length of the longest contiguous substring shared by ``a`` and ``b``."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    best = 0
    for ca in a:
        cur = [0] * (len(b) + 1)
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best


@dataclass
class OverlapBin:
    bin: int
    min_granularity: float
    max_granularity: float
    mrr: float
    n_questions: int


def overlap_granularity(question: str, golds: Sequence[str]) -> float:
    """Average longest-common-substring length between a question and its golds."""
    if not golds:
        return 0.0
    return float(np.mean([longest_common_substring(question, g) for g in golds]))


def overlap_analysis(groups: Sequence[RankingGroup], question_texts: Mapping[str, str],
                     gold_texts: Mapping[str, Sequence[str]], n_bins: int = 12) -> list[OverlapBin]:
    """Per-bin MRR with questions ordered by overlap granularity.

    Questions with no overlap (or no gold answer) are left out; the rest
    are sorted by granularity and split into ``n_bins`` equal-size bins,
    the first bins taking one extra question each when it does not divide.
    """
    if n_bins < 1:
        raise ConfigError("n_bins must be positive")
    scored = []
    for g in groups:
        if g.group_id not in question_texts:
            raise DataError(f"no question text for group {g.group_id!r}")
        gran = overlap_granularity(question_texts[g.group_id], gold_texts.get(g.group_id, ()))
        if gran > 0 and any(label for _, _, label in g.candidates):
            scored.append((gran, g))
    if len(scored) < n_bins:
        raise ConfigError(f"only {len(scored)} questions with overlap for {n_bins} bins; "
                          f"use a smaller n_bins")
    scored.sort(key=lambda t: t[0])
    bins = []
    for k, chunk in enumerate(np.array_split(np.arange(len(scored)), n_bins), start=1):
        members = [scored[i] for i in chunk]
        report = rank_metrics([g for _, g in members])
        bins.append(OverlapBin(k, members[0][0], members[-1][0], report.mrr, len(members)))
    return bins


def write_overlap_csv(path, bins: Sequence[OverlapBin]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "min_granularity", "max_granularity", "mrr", "n_questions"])
        for b in bins:
            w.writerow([b.bin, f"{b.min_granularity:.4f}", f"{b.max_granularity:.4f}",
                        f"{b.mrr:.6f}", b.n_questions])


# ---------------------------------------------------------------------------
# Prediction files
# ---------------------------------------------------------------------------


def write_predictions(path, groups: Sequence[RankingGroup]) -> None:
    """TSV of ``group_id, candidate_id, score, label``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for g in groups:
            for cid, score, label in g.candidates:
                fh.write(f"{g.group_id}\t{cid}\t{score!r}\t{label}\n")


def read_predictions(path) -> list[RankingGroup]:
    out: dict[str, list[tuple[str, float, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(cols)}")
            try:
                out.setdefault(cols[0], []).append((cols[1], float(cols[2]), int(cols[3])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad score or label") from None
    return [RankingGroup(gid, cands) for gid, cands in out.items()]


def predict_and_rank(model, examples, batch_size: int = 64) -> tuple[list[RankingGroup], MetricsReport]:
    """Score every pair (dropout off) and compute ranking metrics."""
    from .data import make_batch

    flat = [e for eg in examples for e in eg.examples]
    scores: list[float] = []
    for i in range(0, len(flat), batch_size):
        scores.extend(model.score(make_batch(flat[i:i + batch_size], model.embedding)).tolist())
    groups = []
    pos = 0
    for eg in examples:
        n = len(eg.examples)
        groups.append(RankingGroup(eg.group_id, [(e.candidate_id, float(s), e.label)
                                                 for e, s in zip(eg.examples, scores[pos:pos + n])]))
        pos += n
    return groups, rank_metrics(groups)
