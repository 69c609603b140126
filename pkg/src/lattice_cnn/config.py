"""Flat ``key = value`` run configuration.

Blank lines and lines starting with ``#`` are ignored. Lists are comma
separated. Every problem found (unknown key, bad value, missing file) is
collected and raised together in one :class:`ConfigError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .data import INPUT_MODES, LATTICE_STRATEGIES
from .errors import ConfigError
from .layers import EncoderConfig
from .matcher import ModelConfig
from .training import NEG_PER_QUESTION, TrainConfig

TASK_STYLES = ("dbqa", "kbre")
FALLBACKS = ("random", "unk")
PATH_KEYS = ("vocab_path", "embeddings_path", "train_path", "dev_path", "test_path")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _paths(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _opt_bool(text: str):
    return None if text.strip().lower() in ("", "auto") else _bool(text)


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "auto") else int(text)


@dataclass
class RunConfig:
    # data
    vocab_path: str | None = None
    embeddings_path: str | None = None
    train_path: str | None = None
    dev_path: str | None = None
    test_path: str | None = None
    seg_paths: tuple[str, ...] = ()
    output_dir: str = "run"
    task_style: str = "dbqa"
    input_mode: str = "lattice"
    lattice_strategy: str = "vocab"
    # model
    embedding_dim: int = 300
    embedding_fallback: str = "random"
    hidden_size: int = 1024
    indicators: bool | None = None  # None: on for dbqa, off for kbre
    n_layers: int = 1
    pooling: str = "gated"
    layer_kind: str = "lcn"
    residual: bool = True
    dropout: float = 0.5
    widths: tuple[int, ...] = (1, 2, 3)
    kernels: tuple[int, ...] = (256, 512, 256)
    activation: str = "relu"
    # training
    batch_size: int = 64
    lr: float = 1.0
    rho: float = 0.95
    eps: float = 1e-6
    neg_per_question: int | None = None  # None: 10 for dbqa, 5 for kbre
    max_epochs: int = 20
    patience: int = 5
    seed: int = 0

    source: str | None = field(default=None, compare=False)

    # -- derived ----------------------------------------------------------

    @property
    def use_indicators(self) -> bool:
        return self.task_style == "dbqa" if self.indicators is None else self.indicators

    def model_config(self, embedding_dim: int | None = None) -> ModelConfig:
        enc = EncoderConfig(n_layers=self.n_layers, pooling=self.pooling,
                            layer_kind=self.layer_kind, residual=self.residual,
                            dropout=self.dropout, widths=self.widths, kernels=self.kernels,
                            activation=self.activation)
        return ModelConfig(embedding_dim=embedding_dim or self.embedding_dim,
                           hidden_size=self.hidden_size, use_indicators=self.use_indicators,
                           encoder=enc)

    def train_config(self) -> TrainConfig:
        neg = self.neg_per_question or NEG_PER_QUESTION[self.task_style]
        return TrainConfig(batch_size=self.batch_size, lr=self.lr, rho=self.rho, eps=self.eps,
                           neg_per_question=neg, max_epochs=self.max_epochs,
                           patience=self.patience, seed=self.seed)

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        if not p.is_absolute() and self.source is not None:
            p = Path(self.source).parent / p
        return p

    # -- parsing ----------------------------------------------------------

    @classmethod
    def parse(cls, text: str, source: str | None = None, check_paths: bool = True) -> "RunConfig":
        converters = {
            "seg_paths": _paths, "widths": _ints, "kernels": _ints,
            "residual": _bool, "indicators": _opt_bool, "neg_per_question": _opt_int,
        }
        types = {f.name: f.type for f in fields(cls) if f.name != "source"}
        values: dict = {}
        problems: list[str] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                problems.append(f"line {lineno}: expected key = value, got {raw!r}")
                continue
            key, _, val = (s.strip() for s in line.partition("="))
            if key not in types:
                problems.append(f"line {lineno}: unknown key {key!r}")
                continue
            conv = converters.get(key)
            if conv is None:
                t = types[key]
                conv = {"int": int, "float": float}.get(t, str)
            try:
                values[key] = conv(val)
            except ValueError as exc:
                problems.append(f"line {lineno}: bad value for {key}: {exc}")
        cfg = cls(source=source, **values)
        problems += cfg.problems(check_paths)
        if problems:
            raise ConfigError(problems)
        return cfg

    @classmethod
    def load(cls, path, check_paths: bool = True) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        return cls.parse(text, str(path), check_paths)

    def problems(self, check_paths: bool = True) -> list[str]:
        out = []
        choices = {"task_style": TASK_STYLES, "input_mode": INPUT_MODES,
                   "lattice_strategy": LATTICE_STRATEGIES, "embedding_fallback": FALLBACKS}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                out.append(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        try:
            self.model_config()
        except ConfigError as exc:
            out += exc.problems
        try:
            TrainConfig(batch_size=self.batch_size, lr=self.lr, rho=self.rho, eps=self.eps,
                        neg_per_question=self.neg_per_question or 1,
                        max_epochs=self.max_epochs, patience=self.patience, seed=self.seed)
        except ConfigError as exc:
            out += exc.problems
        if self.embedding_dim < 1 or self.hidden_size < 1:
            out.append("embedding_dim and hidden_size must be positive")
        if self.input_mode == "lattice" and self.lattice_strategy == "vocab" and not self.vocab_path:
            out.append("vocab_path is required for lattice input with the vocab strategy")
        needs_segs = self.input_mode == "word_seq" or (
            self.input_mode == "lattice" and self.lattice_strategy != "vocab")
        if needs_segs and not self.seg_paths:
            out.append(f"seg_paths is required for input_mode={self.input_mode}, "
                       f"lattice_strategy={self.lattice_strategy}")
        if check_paths:
            for key in PATH_KEYS:
                p = self.resolve(getattr(self, key))
                if p is not None and not p.is_file():
                    out.append(f"{key}: file not found: {p}")
            for sp in self.seg_paths:
                p = self.resolve(sp)
                if not p.is_file():
                    out.append(f"seg_paths: file not found: {p}")
        return out
