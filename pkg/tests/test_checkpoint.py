import json

import numpy as np
import pytest

from lattice_cnn.checkpoint import load_model, read_checkpoint, save_checkpoint
from lattice_cnn.data import make_batch
from lattice_cnn.errors import CheckpointError
from lattice_cnn.layers import EncoderConfig
from lattice_cnn.matcher import ModelConfig

import toy


@pytest.fixture
def trained():
    ex = toy.examples(n_groups=3)
    model = toy.model(ex, emb=6, hidden=5, kernels=(2, 3, 2), pooling="gated", n_layers=2)
    for p in model.parameters():
        p.data += 0.01  # anything but the init values
    return model, [e for g in ex for e in g.examples]


def test_round_trip(tmp_path, trained):
    model, pairs = trained
    path = save_checkpoint(tmp_path / "m.npz", model, {"epoch": 3})
    again = load_model(path, expected=model.config)
    for name, p in model.named_parameters().items():
        np.testing.assert_array_equal(again.named_parameters()[name].data, p.data)
    batch = make_batch(pairs, model.embedding)
    np.testing.assert_array_equal(again.score(make_batch(pairs, again.embedding)), model.score(batch))
    meta, arrays = read_checkpoint(path)
    assert meta["extra"] == {"epoch": 3} and meta["version"] == 1
    assert set(arrays) == set(model.named_parameters())
    assert not (tmp_path / "m.npz.tmp").exists()


def test_dropout_is_not_a_mismatch(tmp_path, trained):
    model, _ = trained
    path = save_checkpoint(tmp_path / "m.npz", model)
    cfg = model.config.to_dict()
    cfg["encoder"]["dropout"] = 0.3
    load_model(path, expected=ModelConfig.from_dict(cfg))


def test_config_mismatch(tmp_path, trained):
    model, _ = trained
    path = save_checkpoint(tmp_path / "m.npz", model)
    other = ModelConfig(embedding_dim=6, hidden_size=7, use_indicators=True,
                        encoder=EncoderConfig(n_layers=1, pooling="max", kernels=(2, 3, 2)))
    with pytest.raises(CheckpointError) as info:
        load_model(path, expected=other)
    msg = str(info.value)
    assert "hidden_size" in msg and "n_layers" in msg and "pooling" in msg


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError, match="not found"):
        load_model(tmp_path / "nope.npz")


def test_not_a_checkpoint(tmp_path):
    np.savez(tmp_path / "x.npz", a=np.zeros(2))
    with pytest.raises(CheckpointError):
        read_checkpoint(tmp_path / "x.npz")
    (tmp_path / "junk.npz").write_bytes(b"hello")
    with pytest.raises(CheckpointError, match="unreadable"):
        read_checkpoint(tmp_path / "junk.npz")


def test_shape_mismatch(tmp_path, trained):
    model, _ = trained
    path = save_checkpoint(tmp_path / "m.npz", model)
    meta, arrays = read_checkpoint(path)
    arrays["head.b1"] = np.zeros(99)
    np.savez(tmp_path / "bad.npz", __meta__=np.array(json.dumps(meta)),
             **{f"param/{k}": v for k, v in arrays.items()})
    with pytest.raises(CheckpointError, match="head.b1"):
        load_model(tmp_path / "bad.npz")
