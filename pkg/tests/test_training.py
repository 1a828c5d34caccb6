import numpy as np
import pytest

from splitparse import autodiff as ad
from splitparse import training
from splitparse.corpus import tree_tags
from splitparse.inference import beam_parse, greedy_discourse_parse
from splitparse.toydata import generate_cfg_treebank, generate_discourse_treebank
from splitparse.training import (TrainConfig, example_losses, format_log, make_batches,
                                 make_examples, step, train)
from splitparse.trees import Node, Leaf, num_tokens

from helpers import SMALL, TINY, example_dt, example_tree, make_parser


def test_target_counts_match_tree_sizes():
    trees = generate_cfg_treebank(100, seed=2, min_len=1, max_len=20)
    p = make_parser(trees, dims=TINY)
    ex = make_examples(trees, "syntax", p.vocab)
    assert sum(len(e.splits) for e in ex) == sum(num_tokens(t) - 1 for t in trees)
    assert all(len(e.label_targets) == 2 * e.n - 1 for e in ex)


def test_single_token_example():
    tree = Node("NP", (Leaf(1, "NN", "dog"),))
    p = make_parser([tree], dims=TINY)
    (ex,) = make_examples([tree], "syntax", p.vocab)
    assert ex.splits == () and len(ex.label_targets) == 1
    a, b = example_losses(p, ex)
    assert a == 0.0 and b > 0


def test_batches():
    trees = generate_cfg_treebank(40, seed=0)
    p = make_parser(trees, dims=TINY)
    ex = make_examples(trees, "syntax", p.vocab)
    a = make_batches(ex, 30, np.random.default_rng(0))
    b = make_batches(ex, 30, np.random.default_rng(0))
    assert [[e.index for e in x] for x in a] == [[e.index for e in x] for x in b]
    assert sorted(e.index for x in a for e in x) == list(range(40))
    assert all(sum(e.n for e in x) <= 30 for x in a)
    with pytest.raises(ValueError):
        make_batches(ex, 5, np.random.default_rng(0))


def test_loss_decreases_on_repeated_example():
    tree = example_tree()
    p = make_parser([tree])
    (ex,) = make_examples([tree], "syntax", p.vocab)
    opt = ad.Adam(p.params, base_lr=0.002)
    losses = [sum(step(p, opt, [ex])) for _ in range(50)]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_nan_loss_names_sentence():
    trees = generate_cfg_treebank(3, seed=0)
    p = make_parser(trees, dims=TINY)
    ex = make_examples(trees, "syntax", p.vocab)
    p["w_h"].value[0] = np.nan
    with pytest.raises(ad.NumericalError, match="sentence 2"):
        example_losses(p, ex[2])


def test_best_epoch_is_kept(monkeypatch):
    trees = generate_cfg_treebank(4, seed=0)
    p = make_parser(trees, dims=TINY)
    ex = make_examples(trees, "syntax", p.vocab)
    scores = iter([50.0, 80.0, 60.0, 80.0])
    snapshots = []

    def fake_eval(parser, examples, beam=None):
        snapshots.append(parser.state_dict())
        return {"f1": next(scores)}

    monkeypatch.setattr(training, "evaluate", fake_eval)
    res = train(p, ex, ex, TrainConfig(max_epochs=4, batch_tokens=100))
    assert res.best_epoch == 2 and res.best_metric == 80.0
    for k, v in p.state_dict().items():
        np.testing.assert_array_equal(v, snapshots[1][k])
    assert [r["best_epoch"] for r in res.history] == [1, 2, 2, 2]


def test_training_is_deterministic():
    trees = generate_cfg_treebank(6, seed=1)

    def run():
        p = make_parser(trees, dims=TINY, seed=3)
        ex = make_examples(trees, "syntax", p.vocab)
        log = []
        train(p, ex, ex, TrainConfig(max_epochs=3, batch_tokens=20, seed=9), log.append)
        return p.state_dict(), log

    (a, la), (b, lb) = run(), run()
    assert la == lb
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_empty_corpus():
    p = make_parser([example_tree()], dims=TINY)
    with pytest.raises(ValueError):
        train(p, [], [], TrainConfig())


def test_log_format():
    line = format_log({"epoch": 3, "loss_split": 1.5, "dev_f1": 99.0})
    assert line == "epoch=3 loss_split=1.500000 dev_f1=99.000000"


def test_learns_worked_example_syntax():
    tree = example_tree()
    p = make_parser([tree], dims=SMALL)
    (ex,) = make_examples([tree], "syntax", p.vocab)
    opt = ad.Adam(p.params, base_lr=0.01)
    for _ in range(150):
        step(p, opt, [ex])
    res = beam_parse(p, ex.sentence, beam=4, tags=tree_tags(tree))
    assert str(res.splits) == "(0,5)->1 (1,5)->4 (1,4)->2 (2,4)->3"
    assert res.tree == tree


def test_learns_worked_example_discourse():
    dt = example_dt()
    p = make_parser([dt], mode="discourse", dims=SMALL)
    (ex,) = make_examples([dt], "discourse", p.vocab)
    opt = ad.Adam(p.params, base_lr=0.01)
    for _ in range(150):
        step(p, opt, [ex])
    res = greedy_discourse_parse(p, ex.sentence)
    assert res.edus == [(0, 5), (5, 8), (8, 11)]
    assert res.tree.label == "Same-Unit_NN" and res.tree.split == 8
    assert res.tree.left.label == "Elaboration_NS" and res.tree.left.split == 5


def test_discourse_evaluate_keys():
    trees = generate_discourse_treebank(4, seed=0)
    p = make_parser(trees, mode="discourse", dims=TINY)
    ex = make_examples(trees, "discourse", p.vocab)
    s = training.evaluate(p, ex)
    assert set(s) >= {"f1", "span_f1", "nuclearity_f1", "relation_f1", "segmentation_exact"}
    assert s["f1"] == s["relation_f1"]
