import numpy as np
import pytest

from splitparse.corpus import parse_discourse, parse_ptb
from splitparse.metrics import PRF, MetricInputError, format_report, labeled_prf, rst_prf
from splitparse.toydata import generate_cfg_treebank
from splitparse.trees import EDU, Relation, binarize, leaves

from helpers import example_dt, example_tree, random_tree


def ptb(s):
    return parse_ptb(s)[0]


def test_identical_trees():
    t = example_tree()
    s = labeled_prf([t], [t])
    assert (s.precision, s.recall, s.f1) == (100.0, 100.0, 100.0)


def test_two_of_three():
    gold = ptb("(A (B (C (T x) (T y)) (T z)) (T w))")
    pred = ptb("(A (B (D (T x) (T y)) (T z)) (T w))")
    s = labeled_prf([gold], [pred])
    assert (s.matched, s.gold_count, s.pred_count) == (2, 3, 3)
    assert round(s.f1, 2) == round(s.precision, 2) == round(s.recall, 2) == 66.67


def test_dummy_spans_ignored():
    gold = ptb("(X (A (T a)) (B (T b)) (C (T c)) (D (T d)))")
    s = labeled_prf([gold], [binarize(gold)])
    assert s.f1 == 100.0 and s.pred_count == s.gold_count == 5


def test_preterminals_excluded():
    s = labeled_prf([ptb("(S (NN a) (VB b))")], [ptb("(S (DT a) (JJ b))")])
    assert s.gold_count == 1 and s.f1 == 100.0


def test_duplicate_spans_counted_as_multiset():
    gold = ptb("(S (S (T a) (T b)))")
    pred = ptb("(S (T a) (T b))")
    s = labeled_prf([gold], [pred])
    assert (s.matched, s.gold_count, s.pred_count) == (1, 2, 1)


def test_token_mismatch_names_sentence():
    with pytest.raises(MetricInputError, match="sentence 1"):
        labeled_prf([example_tree(), example_tree()], [example_tree(), ptb("(S (T a))")])
    with pytest.raises(MetricInputError):
        labeled_prf([example_tree()], [])


def test_symmetry_and_order_invariance():
    rng = np.random.default_rng(0)
    gold = [random_tree(rng, int(rng.integers(2, 12))) for _ in range(30)]
    pred = [random_tree(rng, len(leaves(g))) for g in gold]
    a, b = labeled_prf(gold, pred), labeled_prf(pred, gold)
    assert (a.precision, a.recall) == (b.recall, b.precision)
    assert a.f1 == pytest.approx(b.f1)
    perm = rng.permutation(len(gold))
    c = labeled_prf([gold[i] for i in perm], [pred[i] for i in perm])
    assert c.f1 == a.f1


def test_prf_invariants():
    assert PRF.from_counts(0, 0, 0).f1 == 0.0
    s = PRF.from_counts(3, 4, 6)
    assert s.f1 == pytest.approx(2 * s.precision * s.recall / (s.precision + s.recall))
    assert s.matched <= min(s.gold_count, s.pred_count)


class TestRST:
    def test_identical(self):
        s = rst_prf([example_dt()], [example_dt()])
        assert s.span.f1 == s.nuclearity.f1 == s.relation.f1 == 100.0

    def test_one_nuclearity_flip(self):
        gold = parse_discourse("(Elaboration_NS (Joint_NN (EDU a) (EDU b)) (EDU c))")[0]
        pred = parse_discourse("(Elaboration_NS (Joint_NS (EDU a) (EDU b)) (EDU c))")[0]
        s = rst_prf([gold], [pred])
        assert (s.span.f1, s.nuclearity.f1, s.relation.f1) == (100.0, 50.0, 100.0)

    def test_wrong_segmentation_same_topology(self):
        gold = Relation("Joint_NN", EDU(0, 2), EDU(2, 4))
        pred = Relation("Joint_NN", EDU(0, 1), EDU(1, 4))
        s = rst_prf([gold], [pred])
        assert s.span.f1 < 100.0

    def test_relation_and_nuclearity_bounded_by_span(self):
        rng = np.random.default_rng(1)
        labels = ["Joint_NN", "Elaboration_NS", "Cause_SN", "Contrast_NN"]
        for _ in range(200):
            n = int(rng.integers(2, 9))
            g, p = _random_dt(rng, 0, n, labels), _random_dt(rng, 0, n, labels)
            s = rst_prf([g], [p])
            assert s.relation.f1 <= s.span.f1 + 1e-12
            assert s.nuclearity.f1 <= s.span.f1 + 1e-12

    def test_token_mismatch(self):
        with pytest.raises(MetricInputError):
            rst_prf([Relation("Joint_NN", EDU(0, 1), EDU(1, 2))], [EDU(0, 3)])


def _random_dt(rng, i, j, labels):
    if j - i == 1 or rng.random() < 0.3:
        return EDU(i, j)
    k = int(rng.integers(i + 1, j))
    return Relation(labels[rng.integers(len(labels))], _random_dt(rng, i, k, labels),
                    _random_dt(rng, k, j, labels))


def test_report_is_parseable():
    trees = generate_cfg_treebank(5, seed=0)
    text = format_report({"labeled": labeled_prf(trees, trees)})
    kv = dict(pair.split("=") for pair in text.splitlines()[0].split())
    assert kv["labeled.f1"] == "100.00"
    assert int(kv["labeled.matched"]) == int(kv["labeled.gold"])
    assert "F1" in text
