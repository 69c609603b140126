"""Siamese scorer: shared encoder, element-wise merge, MLP head, BCE loss."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import DataError, ShapeError
from .layers import EncoderConfig, SentenceEncoder, glorot
from .lattice import PAD, UNK

BCE_EPS = 1e-7
NO_INDICATOR = frozenset({UNK, PAD})


@dataclass
class MatchHead:
    w1: Parameter  # [dim, hidden]
    b1: Parameter
    w2: Parameter  # [hidden, 1]
    b2: Parameter

    @classmethod
    def init(cls, dim: int, hidden: int = 1024, rng=None) -> "MatchHead":
        rng = rng if rng is not None else np.random.default_rng(0)
        return cls(Parameter(glorot(rng, dim, hidden), name="head.w1"),
                   Parameter(np.zeros(hidden), name="head.b1"),
                   Parameter(glorot(rng, hidden, 1), name="head.w2"),
                   Parameter(np.zeros(1), name="head.b2"))

    def parameters(self) -> list[Parameter]:
        return [self.w1, self.b1, self.w2, self.b2]


def score_pair(f_qu, f_can, head: MatchHead) -> Tensor:
    """Match probability ``sigmoid(W2 relu(W1 (f_qu * f_can) + b1) + b2)``.

    Accepts single vectors (returns a scalar) or row-aligned batches
    ``[B, dim]`` (returns ``[B]``).
    """
    f_qu, f_can = ad.as_tensor(f_qu), ad.as_tensor(f_can)
    if f_qu.shape != f_can.shape:
        raise ShapeError(f"score_pair: feature shapes differ: {f_qu.shape} vs {f_can.shape}")
    single = f_qu.ndim == 1
    merged = ad.mul(f_qu, f_can)
    if single:
        merged = ad.reshape(merged, (1, -1))
    if merged.shape[1] != head.w1.shape[0]:
        raise ShapeError(f"score_pair: features of dim {merged.shape[1]} "
                         f"do not fit head input {head.w1.shape}")
    hidden = ad.relu(ad.add(ad.matmul(merged, head.w1), head.b1))
    logit = ad.add(ad.matmul(hidden, head.w2), head.b2)
    s = ad.sigmoid(ad.reshape(logit, (-1,)))
    return ad.reshape(s, ()) if single else s


def bce_loss(scores, labels, eps: float = BCE_EPS) -> Tensor:
    """Summed binary cross-entropy; scores are clamped to ``[eps, 1 - eps]``."""
    scores = ad.as_tensor(scores)
    y = np.asarray(labels, dtype=float).reshape(scores.shape)
    s = ad.clip(scores, eps, 1.0 - eps)
    terms = ad.add(ad.mul(ad.log(s), y), ad.mul(ad.log(ad.sub(1.0, s)), 1.0 - y))
    return ad.mul(ad.sum(terms), -1.0)


def concurrence_indicators(q_tokens: Sequence[str], c_tokens: Sequence[str]) -> tuple[list[int], list[int]]:
    """Flag tokens whose surface also occurs on the other side of the pair."""
    q_set = set(q_tokens) - NO_INDICATOR
    c_set = set(c_tokens) - NO_INDICATOR
    return ([int(t in c_set) for t in q_tokens], [int(t in q_set) for t in c_tokens])


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


def load_word2vec_text(path) -> dict[str, np.ndarray]:
    """Read word2vec text format: header ``count dim``, then ``token v1 ... vdim``."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}:1: expected header 'count dim'")
        try:
            dim = int(header[1])
        except ValueError:
            raise DataError(f"{path}:1: expected header 'count dim'") from None
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if len(parts) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            try:
                vectors[parts[0]] = np.asarray(parts[1:], dtype=float)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector value") from None
    return vectors


class EmbeddingTable:
    """Token -> row lookup over a trainable matrix; row 0 is a frozen zero PAD."""

    def __init__(self, tokens: Iterable[str], dim: int, rng=None,
                 pretrained: dict[str, np.ndarray] | None = None, init_scale: float = 0.05):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.tokens = [PAD, UNK] + sorted(set(tokens) - {PAD, UNK})
        self.index = {t: i for i, t in enumerate(self.tokens)}
        table = rng.uniform(-init_scale, init_scale, size=(len(self.tokens), dim))
        if pretrained:
            for t, i in self.index.items():
                vec = pretrained.get(t)
                if vec is not None:
                    if vec.shape != (dim,):
                        raise DataError(f"pretrained vector for {t!r} has dim {vec.shape}, want {dim}")
                    table[i] = vec
        table[0] = 0.0
        self.weight = Parameter(table, name="embedding", frozen_rows=(0,))

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        unk = self.index[UNK]
        return np.asarray([self.index.get(t, unk) for t in tokens], dtype=np.int64)

    def lookup(self, ids) -> Tensor:
        return ad.take_rows(self.weight, ids)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass
class ModelConfig:
    embedding_dim: int = 300
    hidden_size: int = 1024
    use_indicators: bool = True
    encoder: EncoderConfig = None

    def __post_init__(self):
        if self.encoder is None:
            self.encoder = EncoderConfig()

    def to_dict(self) -> dict:
        enc = self.encoder
        return {
            "embedding_dim": self.embedding_dim, "hidden_size": self.hidden_size,
            "use_indicators": self.use_indicators,
            "encoder": {"n_layers": enc.n_layers, "pooling": enc.pooling,
                        "layer_kind": enc.layer_kind, "residual": enc.residual,
                        "dropout": enc.dropout, "widths": list(enc.widths),
                        "kernels": list(enc.kernels), "activation": enc.activation},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        obj = dict(obj)
        enc = EncoderConfig(**obj.pop("encoder"))
        return cls(encoder=enc, **obj)


class SiameseMatcher:
    """Shared embedding + encoder for both sides, merged by the match head."""

    def __init__(self, config: ModelConfig, tokens: Iterable[str], rng=None,
                 pretrained: dict[str, np.ndarray] | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        self.embedding = EmbeddingTable(tokens, config.embedding_dim, rng, pretrained)
        in_dim = config.embedding_dim + int(config.use_indicators)
        self.encoder = SentenceEncoder.init(in_dim, config.encoder, rng)
        self.head = MatchHead.init(self.encoder.out_dim, config.hidden_size, rng)

    def parameters(self) -> list[Parameter]:
        return [self.embedding.weight] + self.encoder.parameters() + self.head.parameters()

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def node_inputs(self, ids: np.ndarray, flags: np.ndarray | None) -> Tensor:
        emb = self.embedding.lookup(ids)
        if not self.config.use_indicators:
            return emb
        if flags is None:
            flags = np.zeros(len(ids))
        return ad.concat([emb, ad.Tensor(np.asarray(flags, dtype=float).reshape(-1, 1))], axis=1)

    def forward(self, batch, train: bool = False, rng=None) -> Tensor:
        """Scores ``[B]`` for a :class:`~lattice_cnn.data.PairBatch`."""
        x = self.node_inputs(batch.ids, batch.flags)
        sent = self.encoder(x, batch.graph, train=train, rng=rng)
        b = batch.size
        f_q = ad.take_rows(sent, np.arange(b))
        f_c = ad.take_rows(sent, np.arange(b, 2 * b))
        return score_pair(f_q, f_c, self.head)

    def score(self, batch) -> np.ndarray:
        return self.forward(batch, train=False).data.copy()
