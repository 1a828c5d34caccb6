import numpy as np
import pytest

from splitparse.corpus import (
    EOS, PAD, SOS, UNK, TreebankFormatError, Vocab, build_vocab, denumericalize,
    discourse_words, format_discourse, format_ptb, load_embeddings, numericalize,
    parse_discourse, parse_ptb, read_discourse, read_ptb, split_label,
    strip_function_tags, tree_tags, tree_words, write_discourse, write_ptb)
from splitparse.toydata import generate_cfg_treebank, generate_discourse_treebank
from splitparse.trees import EMPTY, Leaf, Node, edus

from helpers import EXAMPLE_DT, EXAMPLE_PTB, example_tree


def test_ptb_roundtrip_text():
    t = example_tree()
    assert format_ptb(t) == EXAMPLE_PTB
    assert tree_words(t) == ["She", "enjoys", "playing", "tennis", "."]
    assert tree_tags(t) == ["PRP", "VBZ", "VBG", "NN", "."]


def test_ptb_wrapper_and_multiline():
    text = "( (S (NP (DT the)\n   (NN dog)) (VP (VBZ barks))) )\n(X (Y a))"
    a, b = parse_ptb(text)
    assert tree_words(a) == ["the", "dog", "barks"]
    assert b == Node("X", (Leaf(1, "Y", "a"),))


def test_empty_elements_removed():
    t = parse_ptb("(S (NP (-NONE- *T*)) (VP (VBZ runs)))")[0]
    assert t == Node("S", (Node("VP", (Leaf(1, "VBZ", "runs"),)),))


def test_function_tags():
    t = parse_ptb("(S (NP-SBJ-1 (PRP he)) (VP (VBD ran)) (-LRB- -LRB-))")[0]
    assert format_ptb(strip_function_tags(t)) == "(S (NP (PRP he)) (VP (VBD ran)) (-LRB- -LRB-))"


@pytest.mark.parametrize("text, where", [
    ("(S (NP (DT the)", "line 1"),
    ("(S (NP a)))", "line 1"),
    ("(S\n (NP a)) x", "line 2"),
])
def test_malformed_ptb_reports_location(text, where):
    with pytest.raises(TreebankFormatError, match=where):
        parse_ptb(text)


def test_file_roundtrip(tmp_path):
    trees = generate_cfg_treebank(20, seed=3)
    write_ptb(tmp_path / "a.ptb", trees)
    assert read_ptb(tmp_path / "a.ptb") == trees
    dts = generate_discourse_treebank(10, seed=3)
    write_discourse(tmp_path / "a.dt", dts)
    back = read_discourse(tmp_path / "a.dt")
    assert back == dts
    assert [discourse_words(d) for d in back] == [discourse_words(d) for d in dts]


def test_empty_file_rejected(tmp_path):
    (tmp_path / "e.ptb").write_text("\n")
    with pytest.raises(TreebankFormatError):
        read_ptb(tmp_path / "e.ptb")


def test_discourse_reader():
    dt = parse_discourse(EXAMPLE_DT)[0]
    assert edus(dt) == [(0, 5), (5, 8), (8, 11)]
    assert dt.label == "Same-Unit_NN"
    assert format_discourse(dt) == EXAMPLE_DT
    assert split_label("Same-Unit_NN") == ("Same-Unit", "NN")


@pytest.mark.parametrize("text", [
    "(Elaboration (EDU a) (EDU b))",
    "(Elaboration_XY (EDU a) (EDU b))",
    "(Joint_NN (EDU a))",
    "(EDU)",
])
def test_discourse_reader_errors(text):
    with pytest.raises(TreebankFormatError):
        parse_discourse(text)


def test_vocab_reserved_and_sorted():
    v = build_vocab([example_tree()])
    for table in (v.words, v.chars):
        assert [table[s] for s in (PAD, UNK, SOS, EOS)] == [0, 1, 2, 3]
    assert list(v.words)[4:] == sorted(["She", "enjoys", "playing", "tennis", "."])
    assert EMPTY in v.syntax_labels
    assert set(v.syntax_labels) == {EMPTY, "S", "VP", "S-VP", "NP"}
    assert Vocab.from_json(v.to_json()) == v


def test_vocab_independent_of_order():
    trees = generate_cfg_treebank(30, seed=1)
    assert build_vocab(trees) == build_vocab(trees[::-1])


def test_min_word_freq():
    trees = parse_ptb("(S (A x) (B y))\n(S (A x) (B z))")
    v = build_vocab(trees, min_word_freq=2)
    assert "x" in v.words and "y" not in v.words
    # characters of rare words are still kept
    assert "y" in v.chars


def test_numericalize():
    v = build_vocab([example_tree()])
    s = numericalize(["She", "plays", "tennis"], v)
    assert len(s) == 3
    assert s.token_ids[0] == v.words[SOS] and s.token_ids[-1] == v.words[EOS]
    assert s.token_ids[2] == v.words[UNK]
    assert len(s.char_ids) == 5
    assert denumericalize(s, v) == ["She", "plays", "tennis"]


def test_discourse_vocab():
    v = build_vocab(parse_discourse(EXAMPLE_DT), mode="discourse")
    assert v.labels("discourse") == ["Elaboration_NS", "Same-Unit_NN"]


def test_load_embeddings(tmp_path):
    v = build_vocab([example_tree()])
    (tmp_path / "e.txt").write_text("tennis 1 2\nunseen 3 4\nShe 5 6\n")
    E = load_embeddings(tmp_path / "e.txt", v)
    assert E.shape == (len(v.words), 2)
    np.testing.assert_array_equal(E[v.words["tennis"]], [1, 2])
    np.testing.assert_array_equal(E[v.words["enjoys"]], [0, 0])


def test_load_embeddings_ragged(tmp_path):
    v = build_vocab([example_tree()])
    (tmp_path / "e.txt").write_text("tennis 1 2\nShe 5\n")
    with pytest.raises(ValueError):
        load_embeddings(tmp_path / "e.txt", v)
