"""Compare the compiled LSTM kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--end-to-end]

Kernel timings call both backends directly on the same inputs and check
that they agree. ``--end-to-end`` also times one training epoch and one
parsing pass on the toy treebank, each in a fresh interpreter with
``SPLITPARSE_PURE_PYTHON`` set or unset.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from splitparse import _lstm_py

try:
    from splitparse import _lstm
except ImportError:
    _lstm = None

# (batch, steps, hidden): char LSTM, word encoder, decoder step
SHAPES = [(40, 8, 50), (1, 40, 200), (1, 30, 400), (64, 1, 400), (8, 40, 200)]

E2E_SCRIPT = """
import time
from splitparse import kernels
from splitparse.corpus import build_vocab
from splitparse.inference import beam_parse
from splitparse.model import ModelConfig, Parser
from splitparse.toydata import generate_cfg_treebank
from splitparse.training import TrainConfig, make_examples, make_batches, step
from splitparse import autodiff as ad
import numpy as np

trees = generate_cfg_treebank(40, seed=0)
vocab = build_vocab(trees, mode="syntax")
config = ModelConfig(mode="syntax", num_syntactic_labels=len(vocab.syntax_labels),
                     num_discourse_labels=len(vocab.discourse_labels))
parser = Parser(config, vocab, seed=0)
examples = make_examples(trees, "syntax", vocab)
opt = ad.Adam(parser.params, 0.002)
t0 = time.perf_counter()
for batch in make_batches(examples, 5000, np.random.default_rng(0)):
    step(parser, opt, batch)
t1 = time.perf_counter()
for ex in examples:
    beam_parse(parser, ex.sentence, 10)
t2 = time.perf_counter()
print(kernels.BACKEND, t1 - t0, t2 - t1)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    print(f"{'shape (B,T,h)':>16} {'pass':>8} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for B, T, h in SHAPES:
        xw = rng.normal(size=(B, T, 4 * h))
        U = rng.normal(scale=h ** -0.5, size=(h, 4 * h))
        h0, c0 = rng.normal(size=(B, h)), rng.normal(size=(B, h))
        dH = rng.normal(size=(B, T, h))
        ref = _lstm_py.lstm_forward(xw, U, h0, c0)
        cases = [("forward", lambda m: m.lstm_forward(xw, U, h0, c0)),
                 ("backward", lambda m: m.lstm_backward(dH, U, h0, c0, *ref))]
        for name, call in cases:
            t_py = best_of(lambda: call(_lstm_py), repeat)
            if _lstm is None:
                print(f"{str((B, T, h)):>16} {name:>8} {1e3 * t_py:10.3f} {'n/a':>10} {'':>8}")
                continue
            for a, b in zip(call(_lstm_py), call(_lstm)):
                if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
                    sys.exit(f"backends disagree on {name} {(B, T, h)}")
            t_cy = best_of(lambda: call(_lstm), repeat)
            print(f"{str((B, T, h)):>16} {name:>8} {1e3 * t_py:10.3f} "
                  f"{1e3 * t_cy:10.3f} {t_py / t_cy:7.2f}x")


def bench_end_to_end():
    print()
    print(f"{'backend':>8} {'train epoch s':>14} {'parse s':>9}")
    for pure in ("1", "0"):
        env = dict(os.environ, SPLITPARSE_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", E2E_SCRIPT], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"{out[0]:>8} {float(out[1]):14.2f} {float(out[2]):9.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()
    if _lstm is None:
        print("compiled extension not built; timing the numpy fallback only")
    bench_kernels(args.repeat)
    if args.end_to_end:
        bench_end_to_end()


if __name__ == "__main__":
    main()
