"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (under two minutes
on one core) or as part of the full suite.
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from splitparse import autodiff as ad
from splitparse.autodiff import Tape
from splitparse.corpus import (build_vocab, format_ptb, numericalize, parse_discourse,
                               parse_ptb)
from splitparse.inference import beam_parse, brute_force_parse, greedy_discourse_parse
from splitparse.metrics import labeled_prf, rst_prf
from splitparse.model import ModelConfig, Parser
from splitparse.toydata import generate_cfg_treebank, generate_discourse_treebank
from splitparse.training import TrainConfig, make_examples, train
from splitparse.trees import (
    EDU, Relation, all_binary_trees, all_discourse_trees, binarize, edus, from_splits,
    from_splits_dt, prepare, to_splits, to_splits_dt)

from helpers import TINY, example_dt, example_tree, make_parser, randomize

# scaled-down dimensions for the overfitting runs; everything else is the
# published optimisation setup (Adam 0.002, x0.75 every 5000 steps, 5000-token batches)
OVERFIT_DIMS = dict(word_emb_dim=64, char_emb_dim=16, char_rnn_hidden=8, encoder_hidden=64,
                    decoder_hidden=64, mlp_dim=64, label_mlp_dim=64)


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail, seconds):
        status = "PASS" if ok else "FAIL"
        with capsys.disabled():
            print(f"\n[acceptance {number:>2}] {status} {name}: {detail} ({seconds:.1f}s)")
    return emit


def test_01_codec_exhaustive(report):
    t0 = time.perf_counter()
    checked, ok = 0, True
    for n in range(1, 9):
        trees = all_binary_trees(n)
        seqs = [tuple(to_splits(t)) for t in trees]
        ok &= len(set(seqs)) == len(seqs)
        ok &= all(from_splits(s, n) == t for s, t in zip(seqs, trees))
        checked += len(trees)
    ok &= len(all_binary_trees(8)) == 429
    for n in range(1, 6):
        trees = all_discourse_trees(n)
        seqs = [tuple(to_splits_dt(t)) for t in trees]
        ok &= len(set(seqs)) == len(seqs)
        ok &= all(from_splits_dt(s, n) == t for s, t in zip(seqs, trees))
        checked += len(trees)
    dt = time.perf_counter() - t0
    ok &= dt < 10.0
    report(1, "codec exhaustiveness", ok, f"{checked} trees round-tripped, all distinct", dt)
    assert ok


def test_02_worked_example(report):
    t0 = time.perf_counter()
    c_t = str(to_splits(prepare(example_tree())))
    c_dt = str(to_splits_dt(example_dt()))
    ok = (c_t == "(0,5)->1 (1,5)->4 (1,4)->2 (2,4)->3"
          and c_dt == "(0,11)->8 (0,8)->5 (0,5)->5 (5,8)->8 (8,11)->11")
    report(2, "worked example conformance", ok, f"C(T)={c_t} | C(DT)={c_dt}",
           time.perf_counter() - t0)
    assert ok


def parse_ptb_one(text):
    return parse_ptb(text)[0]


def _gradient_check(tree, mode, seed):
    p = make_parser([tree], mode=mode, dims=TINY, seed=seed)
    randomize(p, np.random.default_rng(seed), scale=1.0)
    (ex,) = make_examples([tree], mode, p.vocab)

    def total():
        a, b = p.losses(ex)
        return float(a.value) + float(b.value)

    for t in p.params.values():
        t.zero_grad()
    with Tape() as tape:
        a, b = p.losses(ex)
        loss = a + b
    tape.backward(loss)
    worst, worst_name, count = 0.0, "", 0
    for name, t in p.params.items():
        # step 1e-4 balances truncation (O(eps^2)) against rounding (O(1/eps))
        # for losses of order 10-100
        fd = ad.finite_difference(total, t, eps=1e-4)
        g = t.grad if t.grad is not None else np.zeros_like(t.value)
        err = ad.relative_error(g, fd)
        count += t.value.size
        if err > worst:
            worst, worst_name = err, name
    return worst, worst_name, count


def test_03_gradient_integrity(report):
    t0 = time.perf_counter()
    syn_tree = parse_ptb_one("(S (NP (PRP She)) (VP (VBZ plays) (NP (NN tennis))) (. .))")
    dis_tree = Relation("Joint_NN", EDU(0, 1, ("a",)), EDU(1, 4, ("b", "c", "d")))
    w1, n1, c1 = _gradient_check(syn_tree, "syntax", 0)
    w2, n2, c2 = _gradient_check(dis_tree, "discourse", 1)
    dt = time.perf_counter() - t0
    ok = w1 < 1e-4 and w2 < 1e-4 and dt < 60.0
    report(3, "gradient integrity", ok,
           f"syntax max rel err {w1:.2e} ({n1}), discourse {w2:.2e} ({n2}); "
           f"{c1 + c2} coordinates", dt)
    assert ok


def test_04_beam_vs_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    words = ["the", "dog", "sees", "a", "cat", "in", "park", "."]
    vocab_trees = [parse_ptb_one("(S (NP (DT the) (NN dog)) (VP (VBZ sees) (NP (DT a) "
                                 "(NN cat)) (PP (IN in) (NP (NN park)))) (. .))")]
    disagreements, max_gap = 0, 0.0
    for trial in range(100):
        p = make_parser(vocab_trees, dims=TINY, seed=trial)
        randomize(p, rng, scale=float(rng.uniform(0.5, 3.0)))
        n = int(rng.integers(2, 7))
        sent = numericalize(list(rng.choice(words, size=n)), p.vocab)
        b = beam_parse(p, sent, beam=64)
        o = brute_force_parse(p, sent)
        gap = abs(b.logp - o.logp)
        max_gap = max(max_gap, gap)
        if b.tree != o.tree or b.splits != o.splits or gap > 1e-9:
            disagreements += 1
    dt = time.perf_counter() - t0
    ok = disagreements == 0 and dt < 120.0
    report(4, "beam vs brute force", ok,
           f"{disagreements} disagreements in 100 models, max |dlogp|={max_gap:.1e}", dt)
    assert ok


def test_05_linear_decoding(report):
    t0 = time.perf_counter()
    p = make_parser([example_tree()], dims=TINY)
    bad = []
    for beam in (1, 4, 20):
        for n in range(2, 51):
            p.decoder_calls = 0
            res = beam_parse(p, numericalize(["x"] * n, p.vocab), beam)
            if p.decoder_calls != n - 1 or res.decoder_steps != n - 1:
                bad.append((beam, n, p.decoder_calls))
    ok = not bad
    report(5, "linear decoding", ok,
           f"decoder calls == n-1 for n in 2..50, beams 1/4/20; violations={bad[:3]}",
           time.perf_counter() - t0)
    assert ok


def test_06_mask_soundness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    models = {m: make_parser([example_tree()] if m == "syntax" else [example_dt()], mode=m,
                             dims=TINY) for m in ("syntax", "discourse")}
    leaked, worst = 0, 0.0
    for call in range(1000):
        mode = "syntax" if call % 2 == 0 else "discourse"
        p = models[mode]
        if call % 50 == 0:
            randomize(p, rng, scale=3.0)
        n = int(rng.integers(2, 30))
        enc = p.encode_np(numericalize(["x"] * n, p.vocab))
        i = int(rng.integers(0, n - 1))
        j = int(rng.integers(i + 2, n + 1))
        _, lp = p.decode_step(enc, p.initial_state(1), [(i, j)])
        a = np.exp(lp[0])
        hi = j if mode == "discourse" else j - 1
        valid = np.zeros(n + 1, dtype=bool)
        valid[i + 1:hi + 1] = True
        leaked += int(np.count_nonzero(a[~valid]))
        worst = max(worst, abs(a[valid].sum() - 1.0))
    ok = leaked == 0 and worst <= 1e-12
    report(6, "mask soundness", ok,
           f"1000 calls, invalid entries with mass={leaked}, max |sum-1|={worst:.1e}",
           time.perf_counter() - t0)
    assert ok


def _overfit(trees, mode, target):
    vocab = build_vocab(trees, mode=mode)
    config = ModelConfig(mode=mode, num_syntactic_labels=len(vocab.syntax_labels),
                         num_discourse_labels=len(vocab.discourse_labels), **OVERFIT_DIMS)
    parser = Parser(config, vocab, seed=0)
    examples = make_examples(trees, mode, vocab)
    result = train(parser, examples, examples,
                   TrainConfig(max_epochs=200, seed=0, target_metric=target))
    return parser, examples, result


def test_07_overfit_syntax(report):
    t0 = time.perf_counter()
    trees = generate_cfg_treebank(50, seed=0, min_len=3, max_len=12)
    parser, examples, result = _overfit(trees, "syntax", 99.0)
    preds = [beam_parse(parser, ex.sentence).tree for ex in examples]
    f1 = labeled_prf(trees, preds).f1
    dt = time.perf_counter() - t0
    ok = f1 >= 99.0 and result.best_epoch <= 200 and dt < 600
    report(7, "overfit syntax", ok,
           f"train F1={f1:.2f} at epoch {result.best_epoch}/200", dt)
    assert ok


def test_08_overfit_discourse(report):
    t0 = time.perf_counter()
    trees = generate_discourse_treebank(30, seed=0, min_edus=2, max_edus=4)
    parser, examples, result = _overfit(trees, "discourse", 100.0)
    results = [greedy_discourse_parse(parser, ex.sentence) for ex in examples]
    s = rst_prf(trees, [r.tree for r in results])
    exact = sum(r.edus == edus(t) for r, t in zip(results, trees))
    dt = time.perf_counter() - t0
    ok = (min(s.span.f1, s.nuclearity.f1, s.relation.f1) >= 99.0 and exact == len(trees)
          and dt < 600)
    report(8, "overfit discourse", ok,
           f"span={s.span.f1:.2f} nuc={s.nuclearity.f1:.2f} rel={s.relation.f1:.2f} "
           f"segmentation exact {exact}/{len(trees)} at epoch {result.best_epoch}", dt)
    assert ok


def _perturb(rng, tree):
    """Random edit: relabel, flip nuclearity, move a split, or re-segment."""
    labels = ["Joint_NN", "Elaboration_NS", "Cause_SN", "Contrast_NN", "Cause_NS"]
    if isinstance(tree, EDU):
        n = tree.end - tree.start
        if n >= 2 and rng.random() < 0.3:
            k = tree.start + int(rng.integers(1, n))
            return Relation(labels[rng.integers(len(labels))], EDU(tree.start, k),
                            EDU(k, tree.end))
        return tree
    r = rng.random()
    if r < 0.2:
        return Relation(labels[rng.integers(len(labels))], tree.left, tree.right)
    if r < 0.3:
        return EDU(tree.span[0], tree.span[1])
    if r < 0.4:
        i, j = tree.span
        k = int(rng.integers(i + 1, j))
        return Relation(tree.label, EDU(i, k), EDU(k, j))
    return Relation(tree.label, _perturb(rng, tree.left), _perturb(rng, tree.right))


def test_09_metric_sanity(report):
    t0 = time.perf_counter()
    checks = {}
    g = parse_ptb_one("(A (B (C (T x) (T y)) (T z)) (T w))")
    p = parse_ptb_one("(A (B (D (T x) (T y)) (T z)) (T w))")
    checks["identity=100"] = labeled_prf([g], [g]).f1 == 100.0
    checks["ABC/ABD=66.67"] = round(labeled_prf([g], [p]).f1, 2) == 66.67
    flat = parse_ptb_one("(X (A (T a)) (B (T b)) (C (T c)) (D (T d)))")
    checks["dummy excluded"] = labeled_prf([flat], [binarize(flat)]).f1 == 100.0
    dt = example_dt()
    s = rst_prf([dt], [dt])
    checks["rst identity"] = s.span.f1 == s.nuclearity.f1 == s.relation.f1 == 100.0
    a = parse_discourse("(Elaboration_NS (Joint_NN (EDU a) (EDU b)) (EDU c))")[0]
    b = parse_discourse("(Elaboration_NS (Joint_NS (EDU a) (EDU b)) (EDU c))")[0]
    s = rst_prf([a], [b])
    checks["nuclearity flip"] = (s.span.f1, s.nuclearity.f1, s.relation.f1) == (100, 50, 100)
    s = rst_prf([Relation("Joint_NN", EDU(0, 2), EDU(2, 4))],
                [Relation("Joint_NN", EDU(0, 1), EDU(1, 4))])
    checks["segmentation counterexample"] = s.span.f1 < 100.0
    rng = np.random.default_rng(9)
    gold = generate_discourse_treebank(200, seed=9, min_edus=1, max_edus=6)
    violations = 0
    for n in range(1000):
        gt = gold[n % len(gold)]
        pt = _perturb(rng, gt)
        s = rst_prf([gt], [pt])
        violations += s.relation.f1 > s.span.f1 or s.nuclearity.f1 > s.span.f1
    checks["relation<=span x1000"] = violations == 0
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(9, "metric sanity", ok, f"{len(checks)} checks, failed={failed}",
           time.perf_counter() - t0)
    assert ok


def test_10_determinism(report, tmp_path):
    t0 = time.perf_counter()
    corpus = tmp_path / "toy.ptb"
    corpus.write_text("".join(format_ptb(t) + "\n" for t in generate_cfg_treebank(50, seed=0)))
    dims = [f"--set={k}={v}" for k, v in OVERFIT_DIMS.items()]
    outputs = []
    for run in ("a", "b"):
        model = tmp_path / f"{run}.ckpt"
        cmd = [sys.executable, "-m", "splitparse.cli"]
        subprocess.run(cmd + ["train", "--train", str(corpus), "--model", str(model),
                              "--epochs", "3", "--seed", "7"] + dims,
                       check=True, capture_output=True)
        parsed = subprocess.run(cmd + ["parse", "--model", str(model), "--test", str(corpus)],
                                check=True, capture_output=True).stdout
        outputs.append((model.read_bytes(), (tmp_path / f"{run}.ckpt.log").read_bytes(),
                        parsed))
    same = [x == y for x, y in zip(*outputs)]
    ok = all(same) and len(outputs[0][2]) > 0
    report(10, "determinism", ok,
           f"checkpoint/log/parse identical: {same}", time.perf_counter() - t0)
    assert ok
