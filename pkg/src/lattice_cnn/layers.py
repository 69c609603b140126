"""Convolution layers over word lattices and the sentence encoder.

All layers work on a :class:`GraphBatch`, i.e. several lattices
concatenated into one disjoint graph, so a whole minibatch is a handful
of dense matrix products plus segment reductions. Node features are a
``[n_nodes, dim]`` tensor; row order follows the batch's node order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import ConfigError
from .lattice import PAD_ID, WordLattice, center_index, enumerate_compositions

POOLINGS = ("max", "ave", "gated")
LAYER_KINDS = ("lcn", "dgc", "seq_cnn")
ACTIVATIONS = {"relu": ad.relu, "linear": ad.identity}
DEFAULT_WIDTHS = (1, 2, 3)
DEFAULT_KERNELS = (256, 512, 256)


# ---------------------------------------------------------------------------
# Graph indexing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeArrays:
    """Precomputed index arrays for one lattice (local node ids)."""

    n_nodes: int
    compositions: dict[int, np.ndarray]   # width -> [C, width]
    comp_centers: dict[int, np.ndarray]   # width -> [C]
    windows: dict[int, np.ndarray]        # width -> [n_nodes, width], positional
    nbr_center: np.ndarray                # [P] first-order neighbourhoods incl. self
    nbr_node: np.ndarray                  # [P]


def lattice_arrays(lattice: WordLattice, widths: Sequence[int] = DEFAULT_WIDTHS) -> LatticeArrays:
    n = len(lattice.nodes)
    comps, centers, windows = {}, {}, {}
    for w in widths:
        rows = []
        cen = []
        for v in range(n):
            for comp in enumerate_compositions(lattice, v, w):
                rows.append(comp.node_ids)
                cen.append(v)
        comps[w] = np.asarray(rows, dtype=np.int64).reshape(-1, w)
        centers[w] = np.asarray(cen, dtype=np.int64)
        offs = np.arange(w) - center_index(w)
        pos = np.arange(n)[:, None] + offs[None, :]
        windows[w] = np.where((pos >= 0) & (pos < n), pos, PAD_ID)
    nc, nn = [], []
    for v in range(n):
        for u in sorted(set(lattice.preds[v]) | set(lattice.succs[v]) | {v}):
            nc.append(v)
            nn.append(u)
    return LatticeArrays(n, comps, centers, windows,
                         np.asarray(nc, dtype=np.int64), np.asarray(nn, dtype=np.int64))


def _shift(a: np.ndarray, off: int) -> np.ndarray:
    return np.where(a == PAD_ID, PAD_ID, a + off)


@dataclass
class GraphBatch:
    """Several lattices laid out as one disjoint graph."""

    n_nodes: int
    n_graphs: int
    node_graph: np.ndarray
    compositions: dict[int, np.ndarray]
    comp_centers: dict[int, np.ndarray]
    windows: dict[int, np.ndarray]
    nbr_center: np.ndarray
    nbr_node: np.ndarray

    @classmethod
    def from_arrays(cls, items: Sequence[LatticeArrays]) -> "GraphBatch":
        if not items:
            raise ConfigError("empty graph batch")
        offsets = np.cumsum([0] + [it.n_nodes for it in items])
        widths = items[0].compositions.keys()
        node_graph = np.concatenate([np.full(it.n_nodes, g, dtype=np.int64)
                                     for g, it in enumerate(items)])
        return cls(
            n_nodes=int(offsets[-1]),
            n_graphs=len(items),
            node_graph=node_graph,
            compositions={w: np.concatenate([_shift(it.compositions[w], o)
                                             for it, o in zip(items, offsets)]) for w in widths},
            comp_centers={w: np.concatenate([it.comp_centers[w] + o
                                             for it, o in zip(items, offsets)]) for w in widths},
            windows={w: np.concatenate([_shift(it.windows[w], o)
                                        for it, o in zip(items, offsets)]) for w in widths},
            nbr_center=np.concatenate([it.nbr_center + o for it, o in zip(items, offsets)]),
            nbr_node=np.concatenate([it.nbr_node + o for it, o in zip(items, offsets)]),
        )

    @classmethod
    def from_lattices(cls, lattices: Sequence[WordLattice],
                      widths: Sequence[int] = DEFAULT_WIDTHS) -> "GraphBatch":
        return cls.from_arrays([lattice_arrays(lat, widths) for lat in lattices])


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


@dataclass
class KernelBank:
    """One weight matrix ``[width * in_dim, count]`` and bias per kernel width."""

    weights: dict[int, Parameter]
    biases: dict[int, Parameter]

    @classmethod
    def init(cls, in_dim: int, widths: Sequence[int] = DEFAULT_WIDTHS,
             counts: Sequence[int] = DEFAULT_KERNELS, rng=None, prefix: str = "") -> "KernelBank":
        if len(widths) != len(counts):
            raise ConfigError("one kernel count is needed per kernel width")
        rng = rng if rng is not None else np.random.default_rng(0)
        weights = {w: Parameter(glorot(rng, w * in_dim, c), name=f"{prefix}w{w}")
                   for w, c in zip(widths, counts)}
        biases = {w: Parameter(np.zeros(c), name=f"{prefix}b{w}") for w, c in zip(widths, counts)}
        return cls(weights, biases)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(self.weights)

    @property
    def out_dim(self) -> int:
        return sum(b.shape[0] for b in self.biases.values())

    def parameters(self) -> list[Parameter]:
        return [p for w in self.widths for p in (self.weights[w], self.biases[w])]


@dataclass
class GateParams:
    """Gate vector and scalar bias per kernel width (for gated pooling)."""

    vectors: dict[int, Parameter]
    biases: dict[int, Parameter]

    @classmethod
    def init(cls, bank: KernelBank, rng=None, prefix: str = "") -> "GateParams":
        rng = rng if rng is not None else np.random.default_rng(0)
        vectors, biases = {}, {}
        for w in bank.widths:
            m = bank.biases[w].shape[0]
            vectors[w] = Parameter(glorot(rng, m, 1, shape=(m,)), name=f"{prefix}gate_v{w}")
            biases[w] = Parameter(np.zeros(1), name=f"{prefix}gate_b{w}")
        return cls(vectors, biases)

    def parameters(self) -> list[Parameter]:
        return [p for w in self.vectors for p in (self.vectors[w], self.biases[w])]


@dataclass
class DGCParams:
    """Shared vertex transform for graph convolution, plus the gate dense layer."""

    weight: Parameter
    bias: Parameter
    gate_weight: Parameter | None = None
    gate_bias: Parameter | None = None

    @classmethod
    def init(cls, in_dim: int, out_dim: int, gated: bool = False, rng=None,
             prefix: str = "") -> "DGCParams":
        rng = rng if rng is not None else np.random.default_rng(0)
        p = cls(Parameter(glorot(rng, in_dim, out_dim), name=f"{prefix}dgc_w"),
                Parameter(np.zeros(out_dim), name=f"{prefix}dgc_b"))
        if gated:
            p.gate_weight = Parameter(glorot(rng, 2 * out_dim, 1, shape=(2 * out_dim,)),
                                      name=f"{prefix}dgc_gate_w")
            p.gate_bias = Parameter(np.zeros(1), name=f"{prefix}dgc_gate_b")
        return p

    @property
    def out_dim(self) -> int:
        return self.bias.shape[0]

    def parameters(self) -> list[Parameter]:
        return [p for p in (self.weight, self.bias, self.gate_weight, self.gate_bias) if p is not None]


# ---------------------------------------------------------------------------
# Pooling
# ---------------------------------------------------------------------------


def gate_weights(vectors, v_g, b_g) -> Tensor:
    """Softmax over ``v_g . v_i + b_g`` for rows ``v_i`` of ``vectors``."""
    return ad.softmax(ad.add(ad.matmul(vectors, v_g), b_g), axis=0)


def gated_pool(vectors, v_g, b_g) -> Tensor:
    """Gate-weighted sum of the rows of ``vectors`` (``[t, d]`` -> ``[d]``)."""
    vectors = ad.as_tensor(vectors)
    alpha = gate_weights(vectors, v_g, b_g)
    return ad.sum(ad.mul(vectors, ad.reshape(alpha, (-1, 1))), axis=0)


def _segment_gated(h: Tensor, seg: np.ndarray, n: int, scores: Tensor) -> Tensor:
    alpha = ad.segment_softmax(scores, seg, n)
    return ad.segment_sum(ad.mul(h, ad.reshape(alpha, (-1, 1))), seg, n)


def _pool(h: Tensor, seg: np.ndarray, n: int, pooling: str, v_g=None, b_g=None) -> Tensor:
    if pooling == "max":
        return ad.segment_max(h, seg, n)
    if pooling == "ave":
        return ad.segment_mean(h, seg, n)
    if pooling == "gated":
        return _segment_gated(h, seg, n, ad.add(ad.matmul(h, v_g), b_g))
    raise ConfigError(f"unknown pooling {pooling!r}; expected one of {POOLINGS}")


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------


def _windows_features(x: Tensor, index: np.ndarray) -> Tensor:
    rows, width = index.shape
    gathered = ad.take_rows(x, index, pad=PAD_ID)
    return ad.reshape(gathered, (rows, width * x.shape[1]))


def lcn_layer(x, graph: GraphBatch, bank: KernelBank, gates: GateParams | None = None,
              pooling: str = "max", activation: str = "relu") -> Tensor:
    """Lattice convolution: every composition through the kernels, pooled per center."""
    x = ad.as_tensor(x)
    act = ACTIVATIONS[activation]
    if pooling == "gated" and gates is None:
        raise ConfigError("gated pooling needs gate parameters")
    outs = []
    for w in bank.widths:
        comps = graph.compositions[w]
        h = act(ad.add(ad.matmul(_windows_features(x, comps), bank.weights[w]), bank.biases[w]))
        v_g = gates.vectors[w] if gates is not None else None
        b_g = gates.biases[w] if gates is not None else None
        outs.append(_pool(h, graph.comp_centers[w], graph.n_nodes, pooling, v_g, b_g))
    return outs[0] if len(outs) == 1 else ad.concat(outs, axis=1)


def seq_cnn_layer(x, graph: GraphBatch, bank: KernelBank, activation: str = "relu") -> Tensor:
    """Plain sequence convolution with center-aligned, zero-padded windows.

    The sequence is each graph's node order; this is the CNN-char /
    CNN-word baseline when the lattices are chains.
    """
    x = ad.as_tensor(x)
    act = ACTIVATIONS[activation]
    outs = [act(ad.add(ad.matmul(_windows_features(x, graph.windows[w]), bank.weights[w]),
                       bank.biases[w]))
            for w in bank.widths]
    return outs[0] if len(outs) == 1 else ad.concat(outs, axis=1)


def dgc_layer(x, graph: GraphBatch, params: DGCParams, mode: str = "ave",
              activation: str = "relu") -> Tensor:
    """Graph convolution pooling transformed first-order neighbours and self.

    Edges are untyped; in- and out-neighbours share one transform. The
    gated mode scores each neighbour from the concatenation of its vector
    and the center's vector through a dense layer.
    """
    x = ad.as_tensor(x)
    act = ACTIVATIONS[activation]
    h = act(ad.add(ad.matmul(x, params.weight), params.bias))
    nbr = ad.take_rows(h, graph.nbr_node)
    if mode == "gated":
        if params.gate_weight is None:
            raise ConfigError("gated DGC needs gate parameters")
        pair = ad.concat([nbr, ad.take_rows(h, graph.nbr_center)], axis=1)
        scores = ad.add(ad.matmul(pair, params.gate_weight), params.gate_bias)
        return _segment_gated(nbr, graph.nbr_center, graph.n_nodes, scores)
    return _pool(nbr, graph.nbr_center, graph.n_nodes, mode)


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------


@dataclass
class EncoderConfig:
    n_layers: int = 1
    pooling: str = "max"
    layer_kind: str = "lcn"
    residual: bool = True
    dropout: float = 0.5
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    kernels: tuple[int, ...] = DEFAULT_KERNELS
    activation: str = "relu"

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        self.kernels = tuple(int(k) for k in self.kernels)
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def problems(self) -> list[str]:
        out = []
        if self.n_layers not in (1, 2, 3):
            out.append(f"n_layers must be 1, 2 or 3, got {self.n_layers}")
        if self.pooling not in POOLINGS:
            out.append(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.layer_kind not in LAYER_KINDS:
            out.append(f"layer_kind must be one of {LAYER_KINDS}, got {self.layer_kind!r}")
        if not 0.0 <= self.dropout < 1.0:
            out.append(f"dropout must be in [0, 1), got {self.dropout}")
        if len(self.widths) != len(self.kernels) or not self.widths:
            out.append("widths and kernels must be non-empty and of equal length")
        if any(w < 1 for w in self.widths) or any(k < 1 for k in self.kernels):
            out.append("kernel widths and counts must be positive")
        if self.activation not in ACTIVATIONS:
            out.append(f"activation must be one of {tuple(ACTIVATIONS)}, got {self.activation!r}")
        return out

    @property
    def out_dim(self) -> int:
        return sum(self.kernels)


@dataclass
class SentenceEncoder:
    """Stack of convolution layers followed by a global max over nodes."""

    in_dim: int
    config: EncoderConfig
    layers: list = field(default_factory=list)

    @classmethod
    def init(cls, in_dim: int, config: EncoderConfig, rng=None) -> "SentenceEncoder":
        rng = rng if rng is not None else np.random.default_rng(0)
        enc = cls(in_dim, config)
        dim = in_dim
        for k in range(config.n_layers):
            prefix = f"enc.l{k}."
            if config.layer_kind == "dgc":
                enc.layers.append(DGCParams.init(dim, config.out_dim, config.pooling == "gated",
                                                 rng, prefix))
            else:
                bank = KernelBank.init(dim, config.widths, config.kernels, rng, prefix)
                gates = None
                if config.layer_kind == "lcn" and config.pooling == "gated":
                    gates = GateParams.init(bank, rng, prefix)
                enc.layers.append((bank, gates))
            dim = config.out_dim
        return enc

    @property
    def out_dim(self) -> int:
        return self.config.out_dim

    def parameters(self) -> list[Parameter]:
        out = []
        for layer in self.layers:
            if isinstance(layer, DGCParams):
                out.extend(layer.parameters())
            else:
                bank, gates = layer
                out.extend(bank.parameters())
                if gates is not None:
                    out.extend(gates.parameters())
        return out

    def node_features(self, x, graph: GraphBatch, train: bool = False,
                      rng: np.random.Generator | None = None) -> Tensor:
        cfg = self.config
        h = ad.as_tensor(x)
        for k, layer in enumerate(self.layers):
            if cfg.layer_kind == "dgc":
                out = dgc_layer(h, graph, layer, cfg.pooling, cfg.activation)
            elif cfg.layer_kind == "seq_cnn":
                out = seq_cnn_layer(h, graph, layer[0], cfg.activation)
            else:
                out = lcn_layer(h, graph, layer[0], layer[1], cfg.pooling, cfg.activation)
            out = ad.dropout(out, cfg.dropout, train, rng)
            if cfg.residual and k >= 1:
                out = ad.add(out, h)
            h = out
        return h

    def __call__(self, x, graph: GraphBatch, train: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        """Sentence vectors ``[n_graphs, out_dim]``."""
        h = self.node_features(x, graph, train, rng)
        return ad.segment_max(h, graph.node_graph, graph.n_graphs)


def encode_sentence(lattice: WordLattice, inputs, encoder: SentenceEncoder) -> Tensor:
    """Encode one lattice given its per-node input vectors (inference mode)."""
    graph = GraphBatch.from_lattices([lattice], encoder.config.widths)
    return ad.reshape(encoder(inputs, graph, train=False), (encoder.out_dim,))
