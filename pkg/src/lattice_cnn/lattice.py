"""Word lattices over character sequences.

A lattice has one node per span ``[start, end)`` of the character sequence
that is a word, plus ``<unk>`` placeholders for characters that would
otherwise leave the graph disconnected. Two nodes are joined by an edge
whenever the first ends exactly where the second starts.

Sentences are handled as sequences of *units*. Normally a unit is one
character; reserved tokens such as the entity placeholder ``<e>`` are kept
as a single unit so they are never split.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

from .errors import ConfigError, DataError

UNK = "<unk>"
PAD = "<pad>"
ENTITY = "<e>"
PAD_ID = -1

_RESERVED_RE = re.compile(r"<e>|<unk>")


def split_units(text: str) -> tuple[str, ...]:
    """Split ``text`` into characters, keeping reserved tokens whole."""
    units: list[str] = []
    pos = 0
    for m in _RESERVED_RE.finditer(text):
        units.extend(text[pos:m.start()])
        units.append(m.group())
        pos = m.end()
    units.extend(text[pos:])
    return tuple(units)


def _as_units(chars: str | Sequence[str]) -> tuple[str, ...]:
    if isinstance(chars, str):
        return split_units(chars)
    return tuple(chars)


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

_END = ""  # trie terminal marker; safe because words are non-empty


@dataclass(frozen=True)
class Vocabulary:
    """Set of words indexed by a character trie."""

    words: frozenset[str]
    max_word_len: int
    _trie: dict = field(repr=False, compare=False, default_factory=dict)

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)

    def match_ends(self, units: Sequence[str], start: int) -> list[int]:
        """Return every ``end`` such that ``units[start:end]`` is a word."""
        node = self._trie
        ends = []
        for j in range(start, len(units)):
            for ch in units[j]:
                node = node.get(ch)
                if node is None:
                    return ends
            if _END in node:
                ends.append(j + 1)
        return ends


def build_vocab(word_list: Iterable[str]) -> Vocabulary:
    """Build a :class:`Vocabulary`, dropping empty strings and duplicates."""
    words = frozenset(w for w in word_list if w)
    if not words:
        raise ConfigError("vocabulary is empty after dropping empty words")
    trie: dict = {}
    for w in words:
        node = trie
        for ch in w:
            node = node.setdefault(ch, {})
        node[_END] = True
    return Vocabulary(words=words, max_word_len=max(len(w) for w in words), _trie=trie)


def load_vocab(path) -> Vocabulary:
    """Read a vocabulary file: UTF-8, one word per line."""
    with open(path, encoding="utf-8") as fh:
        return build_vocab(line.strip() for line in fh)


# ---------------------------------------------------------------------------
# Lattice
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeNode:
    id: int
    start: int
    end: int
    surface: str
    is_unk: bool = False


@dataclass(frozen=True)
class WordLattice:
    """Immutable DAG of word nodes; node ids follow ``(start, end)`` order."""

    units: tuple[str, ...]
    nodes: tuple[LatticeNode, ...]
    edges: frozenset[tuple[int, int]]
    preds: tuple[tuple[int, ...], ...] = field(repr=False)
    succs: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def n_chars(self) -> int:
        return len(self.units)

    @property
    def topo_order(self) -> tuple[int, ...]:
        # ids are assigned in (start, end) order, which is topological
        return tuple(range(len(self.nodes)))

    @property
    def text(self) -> str:
        return "".join(self.units)

    def __len__(self) -> int:
        return len(self.nodes)

    def spans(self) -> set[tuple[int, int]]:
        return {(n.start, n.end) for n in self.nodes}

    def edge_spans(self) -> set[tuple[tuple[int, int], tuple[int, int]]]:
        nodes = self.nodes
        return {((nodes[u].start, nodes[u].end), (nodes[v].start, nodes[v].end))
                for u, v in self.edges}

    def surfaces(self) -> list[str]:
        return [n.surface for n in self.nodes]

    def is_chain(self) -> bool:
        """True when the nodes form a single path covering the sentence."""
        nodes = self.nodes
        if not nodes or nodes[0].start != 0 or nodes[-1].end != self.n_chars:
            return False
        return all(a.end == b.start for a, b in zip(nodes, nodes[1:])) and \
            len(self.edges) == len(nodes) - 1

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        chars: str | list[str] = self.text
        if any(len(u) != 1 for u in self.units):
            chars = list(self.units)
        return {
            "chars": chars,
            "nodes": [{"start": n.start, "end": n.end, "surface": n.surface,
                       "unk": n.is_unk} for n in self.nodes],
            "edges": sorted([u, v] for u, v in self.edges),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, obj: dict) -> "WordLattice":
        try:
            units = _as_units(obj["chars"])
            spans = {(int(n["start"]), int(n["end"])): (n["surface"], bool(n.get("unk", False)))
                     for n in obj["nodes"]}
            edges = {(int(u), int(v)) for u, v in obj.get("edges", [])}
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed lattice record: {exc}") from exc
        lat = _assemble(units, spans)
        if "edges" in obj and edges != set(lat.edges):
            raise DataError("lattice edges do not match node adjacency")
        return lat

    @classmethod
    def from_json(cls, line: str) -> "WordLattice":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed lattice JSON: {exc}") from exc
        return cls.from_dict(obj)

    def to_dot(self, name: str = "lattice") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for n in self.nodes:
            label = f"{n.surface} [{n.start},{n.end})".replace('"', '\\"')
            style = ", style=dashed" if n.is_unk else ""
            lines.append(f'  n{n.id} [label="{label}"{style}];')
        for u, v in sorted(self.edges):
            lines.append(f"  n{u} -> n{v};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _assemble(units: tuple[str, ...], spans: dict[tuple[int, int], tuple[str, bool]]) -> WordLattice:
    n_chars = len(units)
    order = sorted(spans)
    nodes = []
    for i, (s, e) in enumerate(order):
        if not 0 <= s < e <= n_chars:
            raise DataError(f"span [{s},{e}) outside sentence of length {n_chars}")
        surface, unk = spans[(s, e)]
        nodes.append(LatticeNode(i, s, e, surface, unk))
    starts_at: dict[int, list[int]] = {}
    for node in nodes:
        starts_at.setdefault(node.start, []).append(node.id)
    preds: list[list[int]] = [[] for _ in nodes]
    succs: list[list[int]] = [[] for _ in nodes]
    edges = set()
    for u in nodes:
        for v in starts_at.get(u.end, ()):
            edges.add((u.id, v))
            succs[u.id].append(v)
            preds[v].append(u.id)
    return WordLattice(
        units=units,
        nodes=tuple(nodes),
        edges=frozenset(edges),
        preds=tuple(tuple(sorted(p)) for p in preds),
        succs=tuple(tuple(sorted(s)) for s in succs),
    )


def _unk_repairs(n_chars: int, spans: Iterable[tuple[int, int]]) -> set[int]:
    """Positions that need an ``<unk>`` node to keep a character walk connected.

    A position is repaired when no node covers it, or when a boundary is
    dangling: something ends there but nothing starts there (repair the
    next character) or vice versa (repair the previous one). Repairs can
    create new dangling boundaries, so iterate to a fixpoint.
    """
    spans = set(spans)
    added: set[int] = set()
    while True:
        starts = {s for s, _ in spans}
        ends = {e for _, e in spans}
        cover = [0] * (n_chars + 1)
        for s, e in spans:
            cover[s] += 1
            cover[e] -= 1
        need = set()
        depth = 0
        for p in range(n_chars):
            depth += cover[p]
            if depth == 0:
                need.add(p)
        for j in range(1, n_chars):
            if j in ends and j not in starts:
                need.add(j)
            if j in starts and j not in ends:
                need.add(j - 1)
        need = {p for p in need if (p, p + 1) not in spans}
        if not need:
            return added
        added |= need
        spans |= {(p, p + 1) for p in need}


def segment_lattice(chars: str | Sequence[str], vocab: Vocabulary) -> WordLattice:
    """Build the lattice of every vocabulary word occurring in ``chars``."""
    units = _as_units(chars)
    if not units:
        raise DataError("cannot build a lattice over an empty sentence")
    spans: dict[tuple[int, int], tuple[str, bool]] = {}
    for i in range(len(units)):
        for j in vocab.match_ends(units, i):
            spans[(i, j)] = ("".join(units[i:j]), False)
    for p in _unk_repairs(len(units), spans):
        spans[(p, p + 1)] = (UNK, True)
    return _assemble(units, spans)


def _token_spans(units: tuple[str, ...], tokens: Sequence[str]) -> list[tuple[int, int]]:
    """Align tokens to unit offsets; raise if they do not tile ``units``."""
    text = "".join(units)
    if "".join(tokens) != text:
        raise DataError(f"segmentation {' '.join(tokens)!r} does not match sentence {text!r}")
    unit_at = {}
    off = 0
    for i, u in enumerate(units):
        unit_at[off] = i
        off += len(u)
    unit_at[off] = len(units)
    out = []
    off = 0
    for tok in tokens:
        if not tok:
            continue
        s, e = off, off + len(tok)
        if s not in unit_at or e not in unit_at:
            raise DataError(f"token {tok!r} splits a reserved unit in {text!r}")
        out.append((unit_at[s], unit_at[e]))
        off = e
    return out


def lattice_from_segmentations(chars: str | Sequence[str],
                               segmentations: Sequence[Sequence[str]],
                               mode: str = "union") -> WordLattice:
    """Character backbone plus multi-character tokens from segmentations.

    ``mode="union"`` keeps every positioned multi-character token seen in
    any segmentation; ``"intersection"`` keeps only those present in all.
    Top-k output of several segmenters is passed as extra segmentations.
    """
    if mode not in ("union", "intersection"):
        raise ConfigError(f"unknown segmentation merge mode {mode!r}")
    units = _as_units(chars)
    if not units:
        raise DataError("cannot build a lattice over an empty sentence")
    if not segmentations:
        raise DataError("no segmentations supplied")
    per_seg = [{sp for sp in _token_spans(units, seg) if sp[1] - sp[0] > 1}
               for seg in segmentations]
    if mode == "union":
        multi = set().union(*per_seg)
    else:
        multi = set.intersection(*per_seg)
    spans = {(i, i + 1): (u, False) for i, u in enumerate(units)}
    for s, e in multi:
        spans[(s, e)] = ("".join(units[s:e]), False)
    return _assemble(units, spans)


def sequence_lattice(tokens: Sequence[str]) -> WordLattice:
    """Chain lattice over a token sequence (characters or one segmentation)."""
    tokens = [t for t in tokens if t]
    if not tokens:
        raise DataError("cannot build a lattice over an empty sentence")
    units = _as_units("".join(tokens))
    spans = {sp: ("".join(units[sp[0]:sp[1]]), False) for sp in _token_spans(units, tokens)}
    return _assemble(units, spans)


# ---------------------------------------------------------------------------
# Compositions
# ---------------------------------------------------------------------------


def center_index(n: int) -> int:
    """0-based position of the center word in a width-``n`` window."""
    return (n + 2) // 2 - 1  # ceil((n + 1) / 2) - 1


@dataclass(frozen=True)
class Composition:
    node_ids: tuple[int, ...]
    center_index: int

    @property
    def center(self) -> int:
        return self.node_ids[self.center_index]


def _walks(neighbors: tuple[tuple[int, ...], ...], start: int, k: int) -> list[tuple[int, ...]]:
    """All length-``k`` walks leaving ``start``, PAD-filled at dead ends."""
    if k == 0:
        return [()]
    nxt = neighbors[start]
    if not nxt:
        return [(PAD_ID,) * k]
    out = []
    for v in nxt:
        for rest in _walks(neighbors, v, k - 1):
            out.append((v,) + rest)
    return out


def enumerate_compositions(lattice: WordLattice, center: int, n: int) -> list[Composition]:
    """Every edge-connected length-``n`` path with ``center`` at the kernel center."""
    if n < 1:
        raise ConfigError(f"kernel width must be >= 1, got {n}")
    if not 0 <= center < len(lattice.nodes):
        raise ConfigError(f"node id {center} not in lattice")
    c = center_index(n)
    lefts = [tuple(reversed(w)) for w in _walks(lattice.preds, center, c)]
    rights = _walks(lattice.succs, center, n - c - 1)
    combos = sorted(left + (center,) + right for left, right in product(lefts, rights))
    return [Composition(ids, c) for ids in combos]
