"""Parameter checkpoints.

Format (version 1): a numpy ``.npz`` archive. Each parameter is stored
under ``param/<name>`` with its own shape. The entry ``__meta__`` holds a
JSON document::

    {"format": "lattice-cnn-checkpoint", "version": 1,
     "model": <ModelConfig.to_dict()>, "tokens": [...embedding rows...],
     "shapes": {name: shape}, "extra": {...}}

``tokens`` lists the embedding vocabulary in row order, so a checkpoint is
enough to rebuild the model for inference.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .matcher import ModelConfig, SiameseMatcher

FORMAT = "lattice-cnn-checkpoint"
VERSION = 1


def save_checkpoint(path, model: SiameseMatcher, extra: dict | None = None) -> Path:
    path = Path(path)
    params = model.named_parameters()
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "model": model.config.to_dict(),
        "tokens": model.embedding.tokens,
        "shapes": {k: list(p.shape) for k, p in params.items()},
        "extra": extra or {},
    }
    arrays = {f"param/{k}": p.data for k, p in params.items()}
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, ensure_ascii=False)), **arrays)
    tmp.replace(path)
    return path


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            arrays = {k[len("param/"):]: z[k] for k in z.files if k.startswith("param/")}
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except (OSError, ValueError, KeyError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a {FORMAT} file")
    if meta.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    return meta, arrays


def config_mismatches(stored: dict, expected: ModelConfig) -> list[str]:
    want = expected.to_dict()
    out = []
    for key in ("embedding_dim", "hidden_size", "use_indicators"):
        if stored.get(key) != want[key]:
            out.append(f"{key}: checkpoint has {stored.get(key)!r}, config wants {want[key]!r}")
    for key, val in want["encoder"].items():
        if key == "dropout":
            continue  # inference-time irrelevant
        got = stored.get("encoder", {}).get(key)
        if got != val:
            out.append(f"encoder.{key}: checkpoint has {got!r}, config wants {val!r}")
    return out


def load_model(path, expected: ModelConfig | None = None) -> SiameseMatcher:
    """Rebuild a model from a checkpoint, optionally checking it against a config."""
    meta, arrays = read_checkpoint(path)
    if expected is not None:
        problems = config_mismatches(meta["model"], expected)
        if problems:
            raise CheckpointError(f"checkpoint {path} does not match config: " + "; ".join(problems))
    config = ModelConfig.from_dict(meta["model"])
    model = SiameseMatcher(config, meta["tokens"])
    if model.embedding.tokens != list(meta["tokens"]):
        raise CheckpointError(f"checkpoint {path}: embedding vocabulary is not in canonical order")
    load_parameters(model, arrays, str(path))
    return model


def load_parameters(model: SiameseMatcher, arrays: dict[str, np.ndarray], source: str = "") -> None:
    params = model.named_parameters()
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise CheckpointError(f"checkpoint {source} parameter set mismatch: "
                              f"missing={missing} unexpected={extra}")
    for name, p in params.items():
        if arrays[name].shape != p.shape:
            raise CheckpointError(f"checkpoint {source}: {name} has shape {arrays[name].shape}, "
                                  f"model wants {p.shape}")
        p.data[...] = arrays[name]
