import math

import numpy as np
import pytest

from lattice_cnn import autodiff as ad
from lattice_cnn.autodiff import Parameter, Tensor, grad_check
from lattice_cnn.data import Featurizer, PairExample, build_examples, make_batch
from lattice_cnn.errors import DataError, ShapeError
from lattice_cnn.layers import EncoderConfig
from lattice_cnn.lattice import PAD, UNK
from lattice_cnn.matcher import (EmbeddingTable, MatchHead, ModelConfig, SiameseMatcher, bce_loss,
                                 concurrence_indicators, load_word2vec_text, score_pair)
from lattice_cnn.synthetic import make_groups, make_lexicon


def head_from(w1, b1, w2, b2):
    return MatchHead(Parameter(np.asarray(w1, float)), Parameter(np.asarray(b1, float)),
                     Parameter(np.asarray(w2, float).reshape(-1, 1)), Parameter(np.asarray(b2, float)))


class TestScorePair:
    def test_hand_example(self):
        head = head_from(np.eye(2), [0, 0], [1, 1], [0])
        s = score_pair(Tensor([1.0, 2.0]), Tensor([3.0, -1.0]), head).item()
        assert s == pytest.approx(1 / (1 + math.exp(-3)), abs=1e-12)
        assert s == pytest.approx(0.9526, abs=1e-4)

    def test_zero_weights(self):
        head = head_from(np.zeros((3, 4)), np.zeros(4), np.zeros(4), [0])
        assert score_pair(Tensor([1.0, 2, 3]), Tensor([4.0, 5, 6]), head).item() == 0.5

    def test_zero_question(self):
        rng = np.random.default_rng(0)
        head = MatchHead.init(3, 5, rng)
        head.b1.data[:] = rng.normal(size=5)
        head.b2.data[:] = 0.3
        want = 1 / (1 + np.exp(-(np.maximum(head.b1.data, 0) @ head.w2.data[:, 0] + 0.3)))
        got = score_pair(Tensor(np.zeros(3)), Tensor(rng.normal(size=3)), head).item()
        assert got == pytest.approx(want, abs=1e-12)

    def test_batch(self):
        rng = np.random.default_rng(1)
        head = MatchHead.init(3, 5, rng)
        q, c = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        batch = score_pair(Tensor(q), Tensor(c), head).data
        single = [score_pair(Tensor(q[i]), Tensor(c[i]), head).item() for i in range(4)]
        np.testing.assert_allclose(batch, single, atol=1e-12)

    def test_dim_mismatch(self):
        head = MatchHead.init(3, 2)
        with pytest.raises(ShapeError):
            score_pair(Tensor(np.ones(3)), Tensor(np.ones(2)), head)
        with pytest.raises(ShapeError):
            score_pair(Tensor(np.ones(4)), Tensor(np.ones(4)), head)

    def test_coordinate_permutation(self):
        rng = np.random.default_rng(2)
        head = MatchHead.init(6, 4, rng)
        q, c = rng.normal(size=6), rng.normal(size=6)
        perm = rng.permutation(6)
        permuted = head_from(head.w1.data[perm], head.b1.data, head.w2.data, head.b2.data)
        a = score_pair(Tensor(q), Tensor(c), head).item()
        b = score_pair(Tensor(q[perm]), Tensor(c[perm]), permuted).item()
        assert a == pytest.approx(b, abs=1e-12)


class TestLoss:
    @pytest.mark.parametrize("s,y,want", [
        ([0.5], [1], math.log(2)),
        ([0.5, 0.5], [1, 0], 2 * math.log(2)),
        ([0.9, 0.1], [1, 0], -2 * math.log(0.9)),
    ])
    def test_examples(self, s, y, want):
        assert bce_loss(Tensor(s), y).item() == pytest.approx(want, abs=1e-12)

    def test_clamped(self):
        loss = bce_loss(Tensor([1.0, 0.0]), [1, 0]).item()
        assert 0 < loss < 1e-6
        assert math.isfinite(bce_loss(Tensor([0.0]), [1]).item())

    def test_non_negative(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            s = rng.uniform(0, 1, size=5)
            assert bce_loss(Tensor(s), rng.integers(0, 2, size=5)).item() >= 0

    def test_grad_check(self):
        rng = np.random.default_rng(3)
        p = Parameter(rng.uniform(0.1, 0.9, size=6), name="s")
        report = grad_check(lambda: bce_loss(p, [1, 0, 1, 1, 0, 0]), [p])
        assert report.passed, report.failures


def test_grad_check_head_and_loss():
    rng = np.random.default_rng(4)
    head = MatchHead.init(5, 6, rng)
    head.b1.data[:] = rng.normal(scale=0.2, size=6)
    q = Parameter(rng.normal(size=(3, 5)), name="q")
    c = Parameter(rng.normal(size=(3, 5)), name="c")
    report = grad_check(lambda: bce_loss(score_pair(q, c, head), [1, 0, 1]),
                        [q, c] + head.parameters())
    assert report.passed, report.failures


class TestIndicators:
    def test_example(self):
        assert concurrence_indicators(["a", "ab"], ["ab", "c"]) == ([0, 1], [1, 0])

    def test_disjoint(self):
        assert concurrence_indicators(["a", "b"], ["c"]) == ([0, 0], [0])

    def test_identical_except_specials(self):
        toks = ["x", UNK, "yz", PAD]
        assert concurrence_indicators(toks, toks) == ([1, 0, 1, 0], [1, 0, 1, 0])

    def test_exact_surface_match(self):
        assert concurrence_indicators(["Ab"], ["ab"]) == ([0], [0])


class TestEmbedding:
    def test_layout(self):
        table = EmbeddingTable(["b", "a", "a"], 4, np.random.default_rng(0))
        assert table.tokens == [PAD, UNK, "a", "b"]
        np.testing.assert_array_equal(table.weight.data[0], np.zeros(4))
        assert np.all(np.abs(table.weight.data[1:]) <= 0.05)
        assert table.ids(["a", "zzz", "b"]).tolist() == [2, 1, 3]

    def test_pad_row_frozen(self):
        table = EmbeddingTable(["a"], 3)
        ad.sum(table.lookup([0, 2, 0])).backward()
        np.testing.assert_array_equal(table.weight.grad[0], np.zeros(3))
        np.testing.assert_array_equal(table.weight.grad[2], np.ones(3))

    def test_pretrained(self, tmp_path):
        path = tmp_path / "vec.txt"
        path.write_text("2 3\na 1 2 3\n<unk> 0.5 0.5 0.5\n", encoding="utf-8")
        vecs = load_word2vec_text(path)
        table = EmbeddingTable(["a", "b"], 3, pretrained=vecs)
        np.testing.assert_array_equal(table.weight.data[table.index["a"]], [1, 2, 3])
        np.testing.assert_array_equal(table.weight.data[1], [0.5, 0.5, 0.5])

    @pytest.mark.parametrize("text", ["3\n", "2 3\na 1 2\n", "1 2\na x y\n"])
    def test_bad_word2vec(self, tmp_path, text):
        path = tmp_path / "vec.txt"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(DataError, match="vec.txt"):
            load_word2vec_text(path)


def tiny_setup(use_indicators=True, **enc):
    lex = make_lexicon(seed=0)
    groups = make_groups(lex, n_groups=3, n_negatives=2, seed=0)
    examples = build_examples(groups, Featurizer("lattice", "vocab", lex.vocabulary()))
    enc_cfg = EncoderConfig(**{"n_layers": 2, "pooling": "gated", "dropout": 0.0,
                               "kernels": (2, 3, 2), **enc})
    cfg = ModelConfig(embedding_dim=4, hidden_size=5, use_indicators=use_indicators, encoder=enc_cfg)
    model = SiameseMatcher(cfg, {s for g in examples for e in g.examples
                                 for s in e.q_lattice.surfaces() + e.c_lattice.surfaces()},
                           np.random.default_rng(0))
    return model, [e for g in examples for e in g.examples]


class TestSiamese:
    def test_shared_parameters(self):
        model, pairs = tiny_setup()
        names = [p.name for p in model.parameters()]
        assert len(names) == len(set(names))
        batch = make_batch(pairs[:1], model.embedding)
        enc_params = {id(p) for p in model.encoder.parameters()}
        # a loss on the question side alone and on the candidate side alone
        # reaches the very same encoder parameter objects
        for side in (0, 1):
            model.zero_grad()
            sent = model.encoder(model.node_inputs(batch.ids, batch.flags), batch.graph)
            ad.sum(ad.take_rows(sent, [side])).backward()
            touched = {id(p) for p in model.encoder.parameters() if np.any(p.grad != 0)}
            assert touched and touched <= enc_params

    def test_swapping_sides_keeps_score(self):
        model, pairs = tiny_setup()
        pair = pairs[0]
        rev = PairExample(pair.group_id, pair.candidate_id, pair.label, pair.c_lattice,
                          pair.q_lattice, pair.c_arrays, pair.q_arrays, pair.c_flags, pair.q_flags)
        np.testing.assert_allclose(model.score(make_batch([pair], model.embedding)),
                                   model.score(make_batch([rev], model.embedding)), atol=1e-12)

    def test_indicator_only_changes_last_dim(self):
        model, pairs = tiny_setup()
        batch = make_batch(pairs[:3], model.embedding)
        on = model.node_inputs(batch.ids, batch.flags).data
        off = model.node_inputs(batch.ids, np.zeros_like(batch.flags)).data
        assert on.shape[1] == model.config.embedding_dim + 1
        np.testing.assert_array_equal(on[:, :-1], off[:, :-1])
        np.testing.assert_array_equal(on[:, -1], batch.flags)

    def test_no_indicators(self):
        model, pairs = tiny_setup(use_indicators=False)
        batch = make_batch(pairs[:2], model.embedding)
        assert model.node_inputs(batch.ids, batch.flags).shape[1] == model.config.embedding_dim

    def test_scores_are_probabilities(self):
        model, pairs = tiny_setup()
        s = model.score(make_batch(pairs, model.embedding))
        assert s.shape == (len(pairs),) and np.all((s > 0) & (s < 1))

    def test_batch_independence(self):
        model, pairs = tiny_setup()
        joint = model.score(make_batch(pairs, model.embedding))
        alone = [model.score(make_batch([p], model.embedding))[0] for p in pairs]
        np.testing.assert_allclose(joint, alone, atol=1e-12)

    def test_config_round_trip(self):
        model, _ = tiny_setup()
        assert ModelConfig.from_dict(model.config.to_dict()) == model.config

    def test_grad_check_full_model(self):
        model, pairs = tiny_setup(kernels=(2, 2, 2))
        batch = make_batch(pairs[:2], model.embedding)
        report = grad_check(lambda: bce_loss(model.forward(batch), batch.labels), model.parameters())
        assert report.passed, report.failures
