"""Synthetic ranking data with a planted word-overlap signal.

Each question contains a *key* two-character word. Its positive candidate
contains the same key word; with probability ``ambiguity`` the key is
preceded by a character that forms a *trap* word with the key's first
character, so greedy maximum matching segments it away. A ``hard_negatives``
share of the negatives contain both key characters, never adjacent, so
character unigrams alone do not separate them from the positive; the
other negatives contain neither key character.

This makes the three input forms behave differently: a word-sequence
model loses the key on trapped positives, a character model has to learn
adjacency, and a lattice keeps the key word as one node regardless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Candidate, QAGroup, SegmentationTable
from .lattice import Vocabulary, build_vocab

ALPHABET = "abcdefghij"


@dataclass
class Lexicon:
    chars: list[str]
    keys: list[str]
    traps: list[str]

    @property
    def words(self) -> list[str]:
        return self.chars + self.keys + self.traps

    def vocabulary(self) -> Vocabulary:
        return build_vocab(self.words)


def make_lexicon(n_keys: int = 10, seed: int = 0) -> Lexicon:
    """Ten single characters, ``n_keys`` key bigrams and as many trap bigrams."""
    rng = np.random.default_rng(seed)
    chars = list(ALPHABET)
    pool = [a + b for a in chars for b in chars if a != b]
    order = rng.permutation(len(pool))
    keys: list[str] = []
    traps: list[str] = []
    used: set[str] = set()
    for i in order:
        key = pool[i]
        if key in used or len(keys) == n_keys:
            continue
        options = [u + key[0] for u in chars if u not in key and u + key[0] not in used and u + key[0] != key]
        if not options:
            continue
        trap = options[rng.integers(len(options))]
        keys.append(key)
        traps.append(trap)
        used.update((key, trap))
    return Lexicon(chars, keys, traps)


def forward_max_match(text: str, vocab: Vocabulary) -> list[str]:
    """Greedy left-to-right longest-match segmentation (unknown chars kept alone)."""
    out = []
    i = 0
    while i < len(text):
        ends = vocab.match_ends(text, i)
        j = ends[-1] if ends else i + 1
        out.append(text[i:j])
        i = j
    return out


def _fillers(rng, lex: Lexicon, n: int, banned: set[str]) -> list[str]:
    pool = [w for w in lex.chars + lex.keys if w not in banned]
    return [pool[i] for i in rng.integers(len(pool), size=n)]


def _question(rng, lex: Lexicon, k: int, vocab: Vocabulary, n_fillers: int) -> str:
    key = lex.keys[k]
    while True:
        words = _fillers(rng, lex, n_fillers, {key, key[0], key[1]})
        words.insert(int(rng.integers(len(words) + 1)), key)
        text = "".join(words)
        if key in forward_max_match(text, vocab):
            return text


def _positive(rng, lex: Lexicon, k: int, ambiguity: float, n_fillers: int) -> str:
    key, trap = lex.keys[k], lex.traps[k]
    words = _fillers(rng, lex, n_fillers, {key, key[0], key[1], trap[0]})
    pos = int(rng.integers(len(words) + 1))
    insert = [trap[0], key] if rng.random() < ambiguity else [key]
    return "".join(words[:pos] + insert + words[pos:])


def _negative(rng, lex: Lexicon, k: int, hard: bool, n_fillers: int) -> str:
    key, trap = lex.keys[k], lex.traps[k]
    while True:
        words = _fillers(rng, lex, n_fillers, {key, key[0], key[1]})
        if hard:
            i, j = sorted(rng.choice(len(words) + 1, size=2, replace=False))
            first, second = (key[0], key[1]) if rng.random() < 0.5 else (key[1], key[0])
            words = words[:i] + [first] + words[i:j] + [second] + words[j:]
        if rng.random() < 0.5:
            words.insert(int(rng.integers(len(words) + 1)), trap[0])
        text = "".join(words)
        if key not in text:
            return text


def make_groups(lex: Lexicon, n_groups: int = 50, n_negatives: int = 4,
                ambiguity: float = 0.8, hard_negatives: float = 0.3, seed: int = 0,
                prefix: str = "q", question_fillers: int = 2,
                candidate_fillers: int = 3) -> list[QAGroup]:
    rng = np.random.default_rng(seed)
    vocab = lex.vocabulary()
    groups = []
    for gi in range(n_groups):
        k = int(rng.integers(len(lex.keys)))
        texts = [(_positive(rng, lex, k, ambiguity, candidate_fillers), 1)]
        texts += [(_negative(rng, lex, k, rng.random() < hard_negatives, candidate_fillers), 0)
                  for _ in range(n_negatives)]
        order = rng.permutation(len(texts))
        cands = [Candidate(str(ci), texts[i][0], texts[i][1]) for ci, i in enumerate(order)]
        groups.append(QAGroup(f"{prefix}{gi:04d}", _question(rng, lex, k, vocab, question_fillers), cands))
    return groups


def segment_all(groups, vocab: Vocabulary) -> SegmentationTable:
    """Single-segmenter table (greedy maximum matching) for every text."""
    table = SegmentationTable()
    for g in groups:
        table.add(forward_max_match(g.question, vocab))
        for c in g.candidates:
            table.add(forward_max_match(c.text, vocab))
    return table
