"""Small synthetic treebanks for smoke runs and overfitting checks."""
from __future__ import annotations

import numpy as np

from .trees import EDU, Leaf, Node, ParseTree, Relation, DiscourseTree, reindex

LEXICON = {
    "DT": ["the", "a", "every", "this"],
    "NN": ["dog", "cat", "ball", "park", "tennis", "garden", "book", "river"],
    "JJ": ["big", "small", "red", "happy"],
    "PRP": ["she", "he", "they"],
    "NNP": ["Alice", "Bob", "Paris"],
    "VBZ": ["sees", "enjoys", "likes", "finds"],
    "VBG": ["playing", "reading", "watching"],
    "IN": ["in", "near", "with"],
    "RB": ["quickly", "often"],
    ".": [".", "!"],
}


def _leaf(rng, tag):
    words = LEXICON[tag]
    return Leaf(0, tag, words[rng.integers(len(words))])


def _np(rng, depth):
    r = rng.random()
    if r < 0.2:
        return Node("NP", (_leaf(rng, "PRP"),))
    if r < 0.35:
        return Node("NP", (_leaf(rng, "NNP"),))
    if r < 0.6:
        base = Node("NP", (_leaf(rng, "DT"), _leaf(rng, "NN")))
    else:
        base = Node("NP", (_leaf(rng, "DT"), _leaf(rng, "JJ"), _leaf(rng, "NN")))
    if depth < 2 and rng.random() < 0.3:
        return Node("NP", (base, _pp(rng, depth + 1)))
    return base


def _pp(rng, depth):
    return Node("PP", (_leaf(rng, "IN"), _np(rng, depth)))


def _vp(rng, depth):
    r = rng.random()
    if r < 0.35:
        kids = (_leaf(rng, "VBZ"), _np(rng, depth))
    elif r < 0.55:
        kids = (_leaf(rng, "VBZ"), _np(rng, depth), _pp(rng, depth))
    elif r < 0.75 and depth < 2:
        # S -> VP unary chain, as in "enjoys playing tennis"
        inner = Node("VP", (_leaf(rng, "VBG"), _np(rng, depth + 1)))
        kids = (_leaf(rng, "VBZ"), Node("S", (inner,)))
    else:
        kids = (_leaf(rng, "VBZ"), _np(rng, depth), Node("ADVP", (_leaf(rng, "RB"),)))
    return Node("VP", kids)


def cfg_tree(rng: np.random.Generator) -> ParseTree:
    return reindex(Node("S", (_np(rng, 0), _vp(rng, 0), _leaf(rng, "."))))


def generate_cfg_treebank(n_sentences: int = 50, seed: int = 0, min_len: int = 3,
                          max_len: int = 12) -> list[ParseTree]:
    """Distinct random trees from a small English-like grammar."""
    rng = np.random.default_rng(seed)
    out, seen = [], set()
    while len(out) < n_sentences:
        t = cfg_tree(rng)
        n = t.span[1]
        words = tuple(leaf.word for leaf in _leaves(t))
        if min_len <= n <= max_len and words not in seen:
            seen.add(words)
            out.append(t)
    return out


def _leaves(t):
    if isinstance(t, Leaf):
        return [t]
    return [x for c in t.children for x in _leaves(c)]


# ---------------------------------------------------------------------------
# discourse: connectives mark both the EDU boundary and the relation

CONNECTIVES = {
    # word: (relation label, attachment precedence; lower splits higher)
    "but": ("Contrast_NN", 0),
    "so": ("Result_SN", 0),
    "and": ("Joint_NN", 1),
    "because": ("Cause_NS", 2),
    "which": ("Elaboration_NS", 2),
}
CONTENT = ["rain", "fell", "we", "stayed", "home", "the", "match", "ended", "late",
           "prices", "rose", "sharply", "people", "waited", "outside", "it", "was", "cold"]
OPENERS = ["yes", "well", "indeed", "still"]


def _edu_words(rng, first):
    if first:
        if rng.random() < 0.25:
            return [OPENERS[rng.integers(len(OPENERS))]]
        size = int(rng.integers(2, 5))
        return [CONTENT[rng.integers(len(CONTENT))] for _ in range(size)]
    conn = list(CONNECTIVES)[rng.integers(len(CONNECTIVES))]
    size = int(rng.integers(1, 4))
    return [conn] + [CONTENT[rng.integers(len(CONTENT))] for _ in range(size)]


def _build(units):
    """Split at the right-most unit with the loosest connective."""
    if len(units) == 1:
        return units[0][1]
    prec = [CONNECTIVES[u[0]][1] for u in units[1:]]
    lowest = min(prec)
    cut = max(n for n, p in enumerate(prec, start=1) if p == lowest)
    label = CONNECTIVES[units[cut][0]][0]
    return Relation(label, _build(units[:cut]), _build(units[cut:]))


def generate_discourse_treebank(n_texts: int = 30, seed: int = 0, min_edus: int = 2,
                                max_edus: int = 4) -> list[DiscourseTree]:
    rng = np.random.default_rng(seed)
    out, seen = [], set()
    while len(out) < n_texts:
        k = int(rng.integers(min_edus, max_edus + 1))
        units, offset = [], 0
        for e in range(k):
            words = _edu_words(rng, e == 0)
            units.append((words[0], EDU(offset, offset + len(words), tuple(words))))
            offset += len(words)
        key = tuple(w for _, u in units for w in u.words)
        if key in seen:
            continue
        seen.add(key)
        out.append(_build(units))
    return out
