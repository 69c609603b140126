"""Dataset files, text-to-lattice featurization and minibatch assembly."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .layers import DEFAULT_WIDTHS, GraphBatch, LatticeArrays, lattice_arrays
from .lattice import (ENTITY, Vocabulary, WordLattice, build_vocab, lattice_from_segmentations,
                      segment_lattice, sequence_lattice, split_units)
from .matcher import EmbeddingTable, concurrence_indicators

INPUT_MODES = ("lattice", "char_seq", "word_seq")
LATTICE_STRATEGIES = ("vocab", "seg_union", "seg_intersection")


@dataclass
class Candidate:
    candidate_id: str
    text: str
    label: int


@dataclass
class QAGroup:
    group_id: str
    question: str
    candidates: list[Candidate] = field(default_factory=list)

    @property
    def gold_texts(self) -> list[str]:
        return [c.text for c in self.candidates if c.label == 1]


def read_dataset(path) -> list[QAGroup]:
    """Read ``group_id<TAB>question<TAB>candidate<TAB>label`` lines.

    Groups keep first-appearance order; candidate ids are their 0-based
    position inside the group.
    """
    groups: dict[str, QAGroup] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 tab-separated columns, got {len(cols)}")
            gid, question, cand, label = cols
            if label not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            if not question or not cand:
                raise DataError(f"{path}:{lineno}: empty question or candidate text")
            group = groups.get(gid)
            if group is None:
                group = groups[gid] = QAGroup(gid, question)
            elif group.question != question:
                raise DataError(f"{path}:{lineno}: group {gid!r} has two different questions")
            group.candidates.append(Candidate(str(len(group.candidates)), cand, int(label)))
    return list(groups.values())


def write_dataset(path, groups: Iterable[QAGroup]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for g in groups:
            for c in g.candidates:
                fh.write(f"{g.group_id}\t{g.question}\t{c.text}\t{c.label}\n")


class SegmentationTable:
    """Segmentations keyed by the sentence they tile.

    A segmentation file has one sentence per line with tokens separated by
    single spaces. Several files (segmenters), or several lines for the
    same sentence (top-k output), give several segmentations per sentence.
    """

    def __init__(self, entries: dict[str, list[list[str]]] | None = None):
        self._table: dict[str, list[list[str]]] = entries or {}

    @classmethod
    def from_files(cls, paths: Sequence) -> "SegmentationTable":
        table = cls()
        for path in paths:
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    tokens = [t for t in line.rstrip("\r\n").split(" ") if t]
                    if tokens:
                        table.add(tokens)
        return table

    def add(self, tokens: Sequence[str]) -> None:
        segs = self._table.setdefault("".join(tokens), [])
        tokens = list(tokens)
        if tokens not in segs:
            segs.append(tokens)

    def __contains__(self, text: str) -> bool:
        return text in self._table

    def __len__(self) -> int:
        return len(self._table)

    def get(self, text: str) -> list[list[str]]:
        try:
            return self._table[text]
        except KeyError:
            raise DataError(f"no segmentation available for sentence {text!r}") from None


class Featurizer:
    """Turns sentences into lattices according to the configured input mode."""

    def __init__(self, input_mode: str = "lattice", lattice_strategy: str = "vocab",
                 vocab: Vocabulary | None = None, segmentations: SegmentationTable | None = None,
                 widths: Sequence[int] = DEFAULT_WIDTHS):
        if input_mode not in INPUT_MODES:
            raise ConfigError(f"input_mode must be one of {INPUT_MODES}, got {input_mode!r}")
        if lattice_strategy not in LATTICE_STRATEGIES:
            raise ConfigError(f"lattice_strategy must be one of {LATTICE_STRATEGIES}, "
                              f"got {lattice_strategy!r}")
        needs_vocab = input_mode == "lattice" and lattice_strategy == "vocab"
        needs_segs = input_mode == "word_seq" or (input_mode == "lattice" and not needs_vocab)
        if needs_vocab and vocab is None:
            raise ConfigError("lattice input with the vocab strategy needs a vocabulary")
        if needs_segs and segmentations is None:
            raise ConfigError(f"input_mode={input_mode} / strategy={lattice_strategy} needs segmentations")
        self.input_mode = input_mode
        self.lattice_strategy = lattice_strategy
        if vocab is not None and ENTITY not in vocab:
            vocab = build_vocab(list(vocab.words) + [ENTITY])
        self.vocab = vocab
        self.segmentations = segmentations
        self.widths = tuple(widths)
        self._cache: dict[str, tuple[WordLattice, LatticeArrays]] = {}

    def lattice(self, text: str) -> WordLattice:
        return self.featurize(text)[0]

    def featurize(self, text: str) -> tuple[WordLattice, LatticeArrays]:
        hit = self._cache.get(text)
        if hit is None:
            lat = self._build(text)
            hit = self._cache[text] = (lat, lattice_arrays(lat, self.widths))
        return hit

    def _build(self, text: str) -> WordLattice:
        if self.input_mode == "char_seq":
            return sequence_lattice(split_units(text))
        if self.input_mode == "word_seq":
            return sequence_lattice(self.segmentations.get(text)[0])
        if self.lattice_strategy == "vocab":
            return segment_lattice(text, self.vocab)
        mode = "union" if self.lattice_strategy == "seg_union" else "intersection"
        return lattice_from_segmentations(text, self.segmentations.get(text), mode)


@dataclass
class PairExample:
    group_id: str
    candidate_id: str
    label: int
    q_lattice: WordLattice
    c_lattice: WordLattice
    q_arrays: LatticeArrays = field(repr=False)
    c_arrays: LatticeArrays = field(repr=False)
    q_flags: np.ndarray = field(repr=False)
    c_flags: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.q_lattice) + len(self.c_lattice)


@dataclass
class ExampleGroup:
    group_id: str
    examples: list[PairExample]

    @property
    def positives(self) -> list[PairExample]:
        return [e for e in self.examples if e.label == 1]

    @property
    def negatives(self) -> list[PairExample]:
        return [e for e in self.examples if e.label == 0]


def build_examples(groups: Sequence[QAGroup], featurizer: Featurizer) -> list[ExampleGroup]:
    out = []
    for g in groups:
        q_lat, q_arr = featurizer.featurize(g.question)
        q_surf = q_lat.surfaces()
        examples = []
        for c in g.candidates:
            c_lat, c_arr = featurizer.featurize(c.text)
            qf, cf = concurrence_indicators(q_surf, c_lat.surfaces())
            examples.append(PairExample(g.group_id, c.candidate_id, c.label, q_lat, c_lat,
                                        q_arr, c_arr, np.asarray(qf, float), np.asarray(cf, float)))
        out.append(ExampleGroup(g.group_id, examples))
    return out


def all_surfaces(groups: Sequence[ExampleGroup]) -> set[str]:
    out: set[str] = set()
    for g in groups:
        for e in g.examples:
            out.update(e.q_lattice.surfaces())
            out.update(e.c_lattice.surfaces())
    return out


@dataclass
class PairBatch:
    """Question graphs ``0..B-1`` followed by candidate graphs ``B..2B-1``."""

    ids: np.ndarray
    flags: np.ndarray
    graph: GraphBatch
    labels: np.ndarray
    examples: list[PairExample]

    @property
    def size(self) -> int:
        return len(self.examples)


def make_batch(examples: Sequence[PairExample], embedding: EmbeddingTable) -> PairBatch:
    if not examples:
        raise ConfigError("cannot build an empty batch")
    q_side = [(e.q_lattice, e.q_arrays, e.q_flags) for e in examples]
    c_side = [(e.c_lattice, e.c_arrays, e.c_flags) for e in examples]
    sides = q_side + c_side
    ids = np.concatenate([embedding.ids(lat.surfaces()) for lat, _, _ in sides])
    flags = np.concatenate([f for _, _, f in sides])
    graph = GraphBatch.from_arrays([arr for _, arr, _ in sides])
    labels = np.asarray([e.label for e in examples], dtype=float)
    return PairBatch(ids, flags, graph, labels, list(examples))


def read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\r\n") for line in fh]


def read_tsv_pairs(path, n_cols: int = 2) -> list[list[str]]:
    """Read a simple TSV (no quoting), checking the column count per line."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), start=1):
            if not row:
                continue
            if len(row) != n_cols:
                raise DataError(f"{path}:{lineno}: expected {n_cols} columns, got {len(row)}")
            rows.append(row)
    return rows


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
