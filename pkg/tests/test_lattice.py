import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_cnn.errors import ConfigError, DataError
from lattice_cnn.lattice import (PAD_ID, UNK, WordLattice, build_vocab, center_index,
                                 enumerate_compositions, lattice_from_segmentations, load_vocab,
                                 segment_lattice, sequence_lattice, split_units)

from oracles import brute_lattice


def spans_of(lat):
    return {(n.start, n.end): n.surface for n in lat.nodes}


class TestVocabulary:
    def test_build(self):
        v = build_vocab(["a", "b", "ab"])
        assert len(v) == 3
        assert v.max_word_len == 2

    def test_dedup(self):
        assert len(build_vocab(["a", "a"])) == 1

    def test_empty_word_rejected(self):
        with pytest.raises(ConfigError):
            build_vocab([""])

    def test_match_ends(self):
        v = build_vocab(["a", "ab", "abc", "c"])
        assert v.match_ends("abcd", 0) == [1, 2, 3]
        assert v.match_ends("abcd", 1) == []

    def test_load(self, tmp_path):
        p = tmp_path / "vocab.txt"
        p.write_text("中国\n中国人\n\n人\n人\n", encoding="utf-8")
        v = load_vocab(p)
        assert v.words == frozenset({"中国", "中国人", "人"})
        assert v.max_word_len == 3


class TestSegmentLattice:
    def test_two_chars(self):
        lat = segment_lattice("ab", build_vocab(["a", "b", "ab"]))
        assert spans_of(lat) == {(0, 1): "a", (1, 2): "b", (0, 2): "ab"}
        assert lat.edge_spans() == {((0, 1), (1, 2))}

    def test_unk_substitution(self):
        lat = segment_lattice("xy", build_vocab(["x"]))
        assert spans_of(lat) == {(0, 1): "x", (1, 2): UNK}
        assert lat.nodes[1].is_unk
        assert lat.edge_spans() == {((0, 1), (1, 2))}

    def test_four_char_example(self):
        # c1..c4 as a..d; vocab: all chars + c1c2, c2c3, c3c4
        lat = segment_lattice("abcd", build_vocab(list("abcd") + ["ab", "bc", "cd"]))
        assert len(lat.nodes) == 7
        expected = {
            ((0, 1), (1, 2)), ((1, 2), (2, 3)), ((2, 3), (3, 4)), ((0, 1), (1, 3)),
            ((0, 2), (2, 3)), ((0, 2), (2, 4)), ((1, 3), (3, 4)), ((1, 2), (2, 4)),
        }
        assert lat.edge_spans() == expected

    def test_no_unk_when_words_tile(self):
        # 'b' and 'c' are not words but "a" + "bc" already walks the sentence
        lat = segment_lattice("abc", build_vocab(["a", "bc"]))
        assert not any(n.is_unk for n in lat.nodes)

    def test_dangling_boundaries_repaired(self):
        lat = segment_lattice("abcd", build_vocab(["abc", "bcd"]))
        assert {(n.start, n.end) for n in lat.nodes if n.is_unk} == {(0, 1), (3, 4)}

    def test_repeated_word_distinct_nodes(self):
        lat = segment_lattice("aa", build_vocab(["a"]))
        assert [(n.start, n.end) for n in lat.nodes] == [(0, 1), (1, 2)]

    def test_reserved_unit_kept_whole(self):
        units = split_units("<e>的生日")
        assert units == ("<e>", "的", "生", "日")
        lat = segment_lattice(units, build_vocab(["<e>", "的", "生日"]))
        assert spans_of(lat) == {(0, 1): "<e>", (1, 2): "的", (2, 4): "生日"}

    def test_topo_order_sorted(self):
        lat = segment_lattice("abcab", build_vocab(["ab", "b", "c", "abc", "a"]))
        keys = [(lat.nodes[i].start, lat.nodes[i].end) for i in lat.topo_order]
        assert keys == sorted(keys)
        pos = {v: k for k, v in enumerate(lat.topo_order)}
        assert all(pos[u] < pos[v] for u, v in lat.edges)

    def test_empty_sentence(self):
        with pytest.raises(DataError):
            segment_lattice("", build_vocab(["a"]))


texts = st.text(alphabet="abcde", min_size=1, max_size=12)
vocabs = st.sets(st.text(alphabet="abcde", min_size=1, max_size=4), min_size=1, max_size=15)


@settings(max_examples=300, deadline=None)
@given(texts, vocabs)
def test_oracle_equivalence(text, words):
    lat = segment_lattice(text, build_vocab(words))
    nodes, edges, unk = brute_lattice(text, words)
    assert lat.spans() == nodes
    assert lat.edge_spans() == edges
    assert {(n.start, n.end) for n in lat.nodes if n.is_unk} == unk


@settings(max_examples=300, deadline=None)
@given(texts, vocabs)
def test_lattice_invariants(text, words):
    vocab = build_vocab(words)
    lat = segment_lattice(text, vocab)
    n = lat.n_chars
    for node in lat.nodes:
        assert 0 <= node.start < node.end <= n
        if node.is_unk:
            assert node.end - node.start == 1 and node.surface == UNK
        else:
            assert node.surface == text[node.start:node.end] and node.surface in vocab
    for p in range(n):
        assert any(nd.start <= p < nd.end for nd in lat.nodes)
    starts = {nd.start for nd in lat.nodes}
    ends = {nd.end for nd in lat.nodes}
    for j in range(1, n):
        assert (j in starts) == (j in ends)
    assert 0 in starts and n in ends
    for u, v in lat.edges:
        assert lat.nodes[u].end == lat.nodes[v].start


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["a", "bc", "def", "g", "hi"]), min_size=1, max_size=6, unique=True))
def test_chain_degeneracy(tokens):
    # distinct characters everywhere, so each token matches only at its own position
    lat = segment_lattice("".join(tokens), build_vocab(tokens))
    assert lat.is_chain()
    assert [n.surface for n in lat.nodes] == tokens


class TestSegmentations:
    def test_union(self):
        lat = lattice_from_segmentations("abcd", [["ab", "cd"], ["a", "bcd"]], "union")
        multi = {k for k in lat.spans() if k[1] - k[0] > 1}
        assert multi == {(0, 2), (2, 4), (1, 4)}
        assert {(i, i + 1) for i in range(4)} <= lat.spans()
        assert len(lat.nodes) == 7

    def test_intersection_empty(self):
        lat = lattice_from_segmentations("abcd", [["ab", "cd"], ["a", "bcd"]], "intersection")
        assert lat.spans() == {(i, i + 1) for i in range(4)}

    def test_intersection_shared(self):
        lat = lattice_from_segmentations("abcd", [["ab", "cd"], ["ab", "c", "d"]], "intersection")
        assert {k for k in lat.spans() if k[1] - k[0] > 1} == {(0, 2)}

    def test_single_union(self):
        lat = lattice_from_segmentations("abcd", [["ab", "c", "d"]], "union")
        assert lat.spans() == {(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)}
        assert lat.edge_spans() == {((0, 1), (1, 2)), ((1, 2), (2, 3)), ((2, 3), (3, 4)),
                                    ((0, 2), (2, 3))}
        assert not any(n.is_unk for n in lat.nodes)

    def test_top_k_union(self):
        segs = [["ab", "cd"], ["abc", "d"], ["a", "bcd"], ["ab", "c", "d"]]
        lat = lattice_from_segmentations("abcd", segs, "union")
        assert {k for k in lat.spans() if k[1] - k[0] > 1} == {(0, 2), (2, 4), (0, 3), (1, 4)}

    def test_mismatch(self):
        with pytest.raises(DataError):
            lattice_from_segmentations("abcd", [["ab", "ce"]], "union")

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            lattice_from_segmentations("ab", [["ab"]], "xor")

    def test_sequence_lattice_chain(self):
        lat = sequence_lattice(["中国", "人民"])
        assert lat.is_chain() and lat.surfaces() == ["中国", "人民"]


class TestCompositions:
    def chain(self):
        return sequence_lattice(["a", "b", "c"])

    def test_center_index(self):
        assert [center_index(n) for n in (1, 2, 3, 4, 5)] == [0, 1, 1, 2, 2]

    def test_unique_path(self):
        comps = enumerate_compositions(self.chain(), 1, 3)
        assert [c.node_ids for c in comps] == [(0, 1, 2)]
        assert comps[0].center == 1

    def test_padding(self):
        lat = self.chain()
        assert [c.node_ids for c in enumerate_compositions(lat, 0, 3)] == [(PAD_ID, 0, 1)]
        assert [c.node_ids for c in enumerate_compositions(lat, 2, 3)] == [(1, 2, PAD_ID)]
        assert [c.node_ids for c in enumerate_compositions(lat, 0, 1)] == [(0,)]
        assert [c.node_ids for c in enumerate_compositions(lat, 0, 2)] == [(PAD_ID, 0)]

    def test_first_node_one_per_successor(self):
        lat = segment_lattice("abc", build_vocab(["a", "b", "bc", "c"]))
        a = next(n.id for n in lat.nodes if n.surface == "a")
        comps = enumerate_compositions(lat, a, 3)
        assert len(comps) == 2
        assert all(c.node_ids[0] == PAD_ID for c in comps)

    def test_two_by_two(self):
        # "country/China - citizen - life/alive": 2 predecessors x 2 successors
        lat = segment_lattice("xyzcpq", build_vocab(["xyz", "yz", "x", "c", "pq", "p", "q"]))
        c = next(n.id for n in lat.nodes if n.surface == "c")
        assert len(lat.preds[c]) == 2 and len(lat.succs[c]) == 2
        comps = enumerate_compositions(lat, c, 3)
        assert len(comps) == 4
        assert len({c_.node_ids for c_ in comps}) == 4
        assert len({i for c_ in comps for i in c_.node_ids}) == 5

    def test_width_four_long_walks(self):
        lat = sequence_lattice(list("abcde"))
        comps = enumerate_compositions(lat, 1, 4)
        # center at 0-based index 2: two predecessors (one missing -> PAD), one successor
        assert [c.node_ids for c in comps] == [(PAD_ID, 0, 1, 2)]

    def test_invalid(self):
        with pytest.raises(ConfigError):
            enumerate_compositions(self.chain(), 0, 0)
        with pytest.raises(ConfigError):
            enumerate_compositions(self.chain(), 9, 3)


@settings(max_examples=150, deadline=None)
@given(texts, vocabs, st.integers(1, 4))
def test_composition_properties(text, words, n):
    lat = segment_lattice(text, build_vocab(words))
    for v in range(len(lat.nodes)):
        comps = enumerate_compositions(lat, v, n)
        if n == 3:
            assert len(comps) == max(1, len(lat.preds[v])) * max(1, len(lat.succs[v]))
        ids = [c.node_ids for c in comps]
        assert ids == sorted(set(ids))
        for c in comps:
            assert len(c.node_ids) == n and c.center == v
            real = [i for i in c.node_ids if i != PAD_ID]
            for a, b in zip(real, real[1:]):
                assert (a, b) in lat.edges
            flags = [i == PAD_ID for i in c.node_ids]
            # PAD only as a contiguous prefix and/or suffix
            first = flags.index(False)
            last = len(flags) - 1 - flags[::-1].index(False)
            assert not any(flags[first:last + 1])


class TestSerialization:
    def test_round_trip(self):
        lat = segment_lattice("abxd", build_vocab(["a", "ab", "b", "d"]))
        again = WordLattice.from_json(lat.to_json())
        assert again == lat
        obj = json.loads(lat.to_json())
        assert set(obj) == {"chars", "nodes", "edges"}
        assert set(obj["nodes"][0]) == {"start", "end", "surface", "unk"}

    def test_round_trip_reserved_units(self):
        lat = segment_lattice(split_units("<e>ab"), build_vocab(["<e>", "ab"]))
        assert WordLattice.from_json(lat.to_json()) == lat

    def test_edge_mismatch_rejected(self):
        obj = json.loads(segment_lattice("ab", build_vocab(["a", "b"])).to_json())
        obj["edges"] = []
        with pytest.raises(DataError):
            WordLattice.from_dict(obj)

    def test_dot(self):
        dot = segment_lattice("ab", build_vocab(["a", "b", "ab"])).to_dot()
        assert dot.startswith("digraph")
        assert dot.count("[label=") == 3
        assert dot.count("->") == 1
