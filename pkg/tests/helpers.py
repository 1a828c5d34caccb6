"""Shared fixtures-by-function for the test suite."""
import numpy as np

from splitparse.corpus import build_vocab, parse_discourse, parse_ptb
from splitparse.model import ModelConfig, Parser
from splitparse.trees import Leaf, Node, reindex

EXAMPLE_PTB = ("(S (NP (PRP She)) (VP (VBZ enjoys) (S (VP (VBG playing) (NP (NN tennis))))) "
            "(. .))")
EXAMPLE_DT = ("(Same-Unit_NN (Elaboration_NS (EDU w1 w2 w3 w4 w5) (EDU w6 w7 w8)) "
           "(EDU w9 w10 w11))")

LABELS = ["A", "B", "C", "D", "E"]


def example_tree():
    return parse_ptb(EXAMPLE_PTB)[0]


def example_dt():
    return parse_discourse(EXAMPLE_DT)[0]


def random_tree(rng: np.random.Generator, n: int, p_unary: float = 0.2):
    """Random n-ary labeled tree over ``n`` tokens with occasional unary
    chains; labels are hyphen-free."""

    def build(lo, hi):
        if hi - lo == 1 and rng.random() < 0.5:
            node = Leaf(0, "T", f"w{lo}")
        elif hi - lo == 1:
            node = Node(LABELS[rng.integers(len(LABELS))], (Leaf(0, "T", f"w{lo}"),))
        else:
            m = int(rng.integers(2, min(hi - lo, 5) + 1))
            cuts = sorted(rng.choice(np.arange(lo + 1, hi), size=m - 1, replace=False))
            bounds = [lo, *cuts, hi]
            node = Node(LABELS[rng.integers(len(LABELS))],
                        tuple(build(a, b) for a, b in zip(bounds, bounds[1:])))
        while isinstance(node, Node) and rng.random() < p_unary:
            node = Node(LABELS[rng.integers(len(LABELS))], (node,))
        return node

    root = build(0, n)
    if isinstance(root, Leaf):
        root = Node("A", (root,))
    return reindex(root)


TINY = dict(word_emb_dim=3, char_emb_dim=2, char_rnn_hidden=2, encoder_hidden=3,
            encoder_layers=3, decoder_hidden=3, decoder_layers=3, mlp_dim=3,
            label_mlp_dim=3)
SMALL = dict(word_emb_dim=8, char_emb_dim=4, char_rnn_hidden=3, encoder_hidden=6,
             encoder_layers=2, decoder_hidden=6, decoder_layers=2, mlp_dim=6,
             label_mlp_dim=5)


def make_parser(trees, mode="syntax", seed=0, dims=SMALL, **kw):
    vocab = build_vocab(trees, mode=mode)
    config = ModelConfig(mode=mode, num_syntactic_labels=len(vocab.syntax_labels),
                         num_discourse_labels=len(vocab.discourse_labels), **dims, **kw)
    return Parser(config, vocab, seed=seed)


def randomize(parser, rng, scale=1.0):
    """Replace every parameter by Gaussian noise (scaled by fan-in)."""
    for p in parser.params.values():
        fan = p.shape[0] if p.value.ndim > 1 else 1
        p.value[...] = rng.normal(0.0, scale / np.sqrt(fan), p.shape)
