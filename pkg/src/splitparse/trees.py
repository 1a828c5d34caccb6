"""Constituency and discourse trees, and their split-decision encodings.

Boundary convention: boundary ``k`` sits between token ``k`` and token
``k + 1`` (tokens are 1-based), so a token span ``(a, b)`` is the boundary
span ``(a - 1, b)``.  A split ``(i, j) -> k`` cuts the boundary span
``(i, j)`` into ``(i, k)`` and ``(k, j)``; in discourse mode ``k == j``
marks ``(i, j)`` as a terminal EDU.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence, Union

EMPTY = "∅"  # dummy label introduced by binarization
UNARY_JOIN = "-"

SYNTAX = "syntax"
DISCOURSE = "discourse"


class MalformedTreeError(ValueError):
    pass


class InvalidSequenceError(ValueError):
    def __init__(self, message: str, index: int):
        super().__init__(f"decision {index}: {message}")
        self.index = index


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class Leaf:
    index: int  # 1-based token position
    tag: str | None = None  # preterminal label
    word: str | None = field(default=None, compare=False)

    @property
    def span(self) -> tuple[int, int]:
        return (self.index - 1, self.index)


@dataclass(frozen=True)
class Node:
    label: str | None
    children: tuple

    @property
    def span(self) -> tuple[int, int]:
        return (self.children[0].span[0], self.children[-1].span[1])


ParseTree = Union[Leaf, Node]


@dataclass(frozen=True)
class EDU:
    start: int
    end: int
    words: tuple = field(default=(), compare=False)

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class Relation:
    label: str | None  # relation and nuclearity, e.g. "Elaboration_NS"
    left: "DiscourseTree"
    right: "DiscourseTree"

    @property
    def span(self) -> tuple[int, int]:
        return (self.left.span[0], self.right.span[1])

    @property
    def split(self) -> int:
        return self.left.span[1]


DiscourseTree = Union[EDU, Relation]


class LabeledSpan(NamedTuple):
    i: int
    j: int
    label: str | None


class Split(NamedTuple):
    i: int
    j: int
    k: int

    def __str__(self) -> str:
        return f"({self.i},{self.j})->{self.k}"


@dataclass(frozen=True)
class SplitSequence:
    decisions: tuple[Split, ...]
    mode: str = SYNTAX

    def __len__(self) -> int:
        return len(self.decisions)

    def __iter__(self) -> Iterator[Split]:
        return iter(self.decisions)

    def __getitem__(self, idx):
        return self.decisions[idx]

    def __str__(self) -> str:
        return " ".join(str(d) for d in self.decisions)


# ---------------------------------------------------------------------------
# generic helpers


def leaves(tree: ParseTree) -> list[Leaf]:
    if isinstance(tree, Leaf):
        return [tree]
    out: list[Leaf] = []
    for child in tree.children:
        out.extend(leaves(child))
    return out


def num_tokens(tree: ParseTree | DiscourseTree) -> int:
    return tree.span[1] - tree.span[0]


def check_leaves(tree: ParseTree) -> None:
    """Raise unless the leaves cover tokens 1..n in order."""
    for expected, leaf in enumerate(leaves(tree), start=1):
        if leaf.index != expected:
            raise MalformedTreeError(
                f"leaf {leaf.word!r} has index {leaf.index}, expected {expected}")


def reindex(tree: ParseTree, start: int = 1) -> ParseTree:
    """Renumber leaves left to right from ``start``."""
    counter = itertools.count(start)

    def walk(t):
        if isinstance(t, Leaf):
            return Leaf(next(counter), t.tag, t.word)
        return Node(t.label, tuple(walk(c) for c in t.children))

    return walk(tree)


def unlabeled(tree: ParseTree) -> ParseTree:
    """Bare bracketing: drop every label and nodes that sit directly over
    a single leaf."""
    if isinstance(tree, Leaf):
        return Leaf(tree.index)
    if len(tree.children) == 1 and isinstance(tree.children[0], Leaf):
        return Leaf(tree.children[0].index)
    return Node(None, tuple(unlabeled(c) for c in tree.children))


def unlabeled_dt(tree: DiscourseTree) -> DiscourseTree:
    if isinstance(tree, EDU):
        return EDU(tree.start, tree.end)
    return Relation(None, unlabeled_dt(tree.left), unlabeled_dt(tree.right))


# ---------------------------------------------------------------------------
# binarization / unary chains


def binarize(tree: ParseTree) -> ParseTree:
    """Right-branching binarization with ``EMPTY``-labeled dummy nodes.

    ``(A c1 c2 c3 c4)`` becomes ``(A c1 (EMPTY c2 (EMPTY c3 c4)))``.
    """
    if isinstance(tree, Leaf):
        return tree
    if not tree.children:
        raise MalformedTreeError(f"node {tree.label!r} has no children")
    kids = [binarize(c) for c in tree.children]
    if len(kids) <= 2:
        return Node(tree.label, tuple(kids))
    right = Node(EMPTY, (kids[-2], kids[-1]))
    for kid in reversed(kids[1:-2]):
        right = Node(EMPTY, (kid, right))
    return Node(tree.label, (kids[0], right))


def debinarize(tree: ParseTree) -> ParseTree:
    if isinstance(tree, Node) and tree.label == EMPTY:
        raise MalformedTreeError("dummy label at the root")
    return _debinarize(tree)


def _debinarize(tree):
    if isinstance(tree, Leaf):
        return tree
    kids = []
    for child in tree.children:
        child = _debinarize(child)
        if isinstance(child, Node) and child.label == EMPTY:
            kids.extend(child.children)
        else:
            kids.append(child)
    return Node(tree.label, tuple(kids))


def collapse_unary(tree: ParseTree) -> ParseTree:
    """Merge chains ``L1 -> L2 -> ... -> Lm`` of single-child internal nodes
    into one node labeled ``"L1-L2-...-Lm"``."""
    if isinstance(tree, Leaf):
        return tree
    labels = [tree.label]
    while len(tree.children) == 1 and isinstance(tree.children[0], Node):
        tree = tree.children[0]
        labels.append(tree.label)
    return Node(UNARY_JOIN.join(labels),
                tuple(collapse_unary(c) for c in tree.children))


def expand_unary(tree: ParseTree) -> ParseTree:
    if isinstance(tree, Leaf):
        return tree
    kids = tuple(expand_unary(c) for c in tree.children)
    if tree.label is None or tree.label == EMPTY:
        return Node(tree.label, kids)
    labels = tree.label.split(UNARY_JOIN)
    node = Node(labels[-1], kids)
    for label in reversed(labels[:-1]):
        node = Node(label, (node,))
    return node


def is_binarized(tree: ParseTree) -> bool:
    """Every internal node has two children or sits over a single leaf."""
    if isinstance(tree, Leaf):
        return True
    if len(tree.children) == 1:
        return isinstance(tree.children[0], Leaf)
    return len(tree.children) == 2 and all(is_binarized(c) for c in tree.children)


def prepare(tree: ParseTree) -> ParseTree:
    """Training-time normal form: binarized, unary chains collapsed."""
    return collapse_unary(binarize(tree))


def restore(tree: ParseTree) -> ParseTree:
    """Inverse of :func:`prepare`."""
    return expand_unary(debinarize(tree))


# ---------------------------------------------------------------------------
# labeled spans


def to_spans(tree: ParseTree) -> set[LabeledSpan]:
    """Labeled boundary spans of all branching nodes (singletons excluded)."""
    out: set[LabeledSpan] = set()

    def walk(t):
        if isinstance(t, Leaf):
            return
        i, j = t.span
        if j - i > 1:
            out.add(LabeledSpan(i, j, t.label))
        for c in t.children:
            walk(c)

    walk(tree)
    return out


def singleton_labels(tree: ParseTree) -> list[str]:
    """Label above each preterminal of a prepared tree (``EMPTY`` if none).

    Returned list is indexed by boundary ``i`` of the singleton ``(i, i+1)``.
    """
    labels = [EMPTY] * num_tokens(tree)

    def walk(t):
        if isinstance(t, Leaf):
            return
        if len(t.children) == 1 and isinstance(t.children[0], Leaf):
            labels[t.children[0].index - 1] = t.label
            return
        for c in t.children:
            walk(c)

    walk(tree)
    return labels


def tree_from_spans(n: int, splits: Sequence[Split], span_labels: dict,
                    singletons: Sequence[str | None],
                    words: Sequence[str] | None = None,
                    tags: Sequence[str | None] | None = None) -> ParseTree:
    """Assemble a prepared (binarized, collapsed) labeled tree.

    ``span_labels`` maps ``(i, j)`` to a label; ``singletons[i]`` labels the
    token span ``(i, i+1)``, where ``EMPTY`` or ``None`` means a bare leaf.
    """
    ks = {(s.i, s.j): s.k for s in splits}

    def build(i, j):
        if j - i == 1:
            leaf = Leaf(j, tags[i] if tags else None, words[i] if words else None)
            label = singletons[i]
            if label is None or label == EMPTY:
                return leaf
            return Node(label, (leaf,))
        try:
            k = ks[(i, j)]
        except KeyError:
            raise MalformedTreeError(f"no split for span ({i},{j})") from None
        return Node(span_labels.get((i, j)), (build(i, k), build(k, j)))

    return build(0, n)


# ---------------------------------------------------------------------------
# syntactic split sequences


def to_splits(tree: ParseTree) -> SplitSequence:
    """Depth-first (pre-order) split decisions of a binarized tree."""
    out: list[Split] = []

    def walk(t):
        if isinstance(t, Leaf):
            return
        if len(t.children) == 1:
            if isinstance(t.children[0], Leaf):
                return
            raise MalformedTreeError(f"unary node {t.label!r} over a non-leaf")
        if len(t.children) != 2:
            raise MalformedTreeError(
                f"node {t.label!r} has {len(t.children)} children; binarize first")
        left, right = t.children
        out.append(Split(t.span[0], t.span[1], left.span[1]))
        walk(left)
        walk(right)

    walk(tree)
    return SplitSequence(tuple(out), SYNTAX)


def validate_splits(seq: Sequence[Split], n: int, mode: str = SYNTAX) -> dict:
    """Check ``seq`` against the depth-first protocol; return ``{(i,j): k}``."""
    if n < 1:
        raise InvalidSequenceError(f"token count {n} < 1", 0)
    pending = [(0, n)] if n >= 2 else []
    ks: dict = {}
    for idx, d in enumerate(seq):
        i, j, k = d
        if not pending:
            raise InvalidSequenceError("sequence longer than the tree", idx)
        expected = pending.pop()
        if (i, j) != expected:
            raise InvalidSequenceError(
                f"span ({i},{j}) out of depth-first order, expected {expected}", idx)
        if mode == SYNTAX:
            ok = i < k < j
        else:
            ok = i < k <= j
        if not ok:
            raise InvalidSequenceError(f"split point {k} invalid for ({i},{j})", idx)
        ks[(i, j)] = k
        if k == j:
            continue
        if j - k >= 2:
            pending.append((k, j))
        if k - i >= 2:
            pending.append((i, k))
    if pending:
        raise InvalidSequenceError(
            f"sequence ends with span {pending[-1]} unsplit", len(seq))
    return ks


def from_splits(seq: SplitSequence | Sequence[Split], n: int) -> ParseTree:
    """Unlabeled binary tree whose :func:`to_splits` equals ``seq``."""
    ks = validate_splits(seq, n, SYNTAX)

    def build(i, j):
        if j - i == 1:
            return Leaf(j)
        k = ks[(i, j)]
        return Node(None, (build(i, k), build(k, j)))

    return build(0, n)


# ---------------------------------------------------------------------------
# discourse split sequences


def to_splits_dt(tree: DiscourseTree) -> SplitSequence:
    """Depth-first decisions; multi-token EDUs emit ``(i, j) -> j``."""
    out: list[Split] = []

    def walk(t):
        i, j = t.span
        if isinstance(t, EDU):
            if j - i >= 2:
                out.append(Split(i, j, j))
            return
        out.append(Split(i, j, t.split))
        walk(t.left)
        walk(t.right)

    walk(tree)
    return SplitSequence(tuple(out), DISCOURSE)


def from_splits_dt(seq: SplitSequence | Sequence[Split], n: int) -> DiscourseTree:
    ks = validate_splits(seq, n, DISCOURSE)

    def build(i, j):
        k = ks.get((i, j), j)  # width-1 spans are implicit EDUs
        if k == j:
            return EDU(i, j)
        return Relation(None, build(i, k), build(k, j))

    return build(0, n)


def edus(tree: DiscourseTree) -> list[tuple[int, int]]:
    if isinstance(tree, EDU):
        return [tree.span]
    return edus(tree.left) + edus(tree.right)


def relation_triples(tree: DiscourseTree) -> list[tuple[int, int, int, str | None]]:
    """``(i, k, j, label)`` for every internal node, pre-order."""
    if isinstance(tree, EDU):
        return []
    i, j = tree.span
    return ([(i, tree.split, j, tree.label)]
            + relation_triples(tree.left) + relation_triples(tree.right))


def label_discourse(tree: DiscourseTree, labels: dict) -> DiscourseTree:
    """Attach labels from ``{(i, k, j): label}`` to an unlabeled tree."""
    if isinstance(tree, EDU):
        return tree
    i, j = tree.span
    return Relation(labels[(i, tree.split, j)],
                    label_discourse(tree.left, labels),
                    label_discourse(tree.right, labels))


# ---------------------------------------------------------------------------
# exhaustive enumeration (test oracles, brute-force decoding)


@lru_cache(maxsize=None)
def _binary_shapes(i: int, j: int) -> tuple:
    if j - i == 1:
        return (Leaf(j),)
    out = []
    for k in range(i + 1, j):
        for left in _binary_shapes(i, k):
            for right in _binary_shapes(k, j):
                out.append(Node(None, (left, right)))
    return tuple(out)


def all_binary_trees(n: int) -> tuple:
    """Every unlabeled binary tree over ``n`` tokens (Catalan(n-1) many)."""
    return _binary_shapes(0, n)


@lru_cache(maxsize=None)
def _discourse_shapes(i: int, j: int) -> tuple:
    out = [EDU(i, j)]
    for k in range(i + 1, j):
        for left in _discourse_shapes(i, k):
            for right in _discourse_shapes(k, j):
                out.append(Relation(None, left, right))
    return tuple(out)


def all_discourse_trees(n: int) -> tuple:
    return _discourse_shapes(0, n)


def all_split_sequences(n: int, mode: str = SYNTAX) -> list[SplitSequence]:
    if mode == SYNTAX:
        return [to_splits(t) for t in all_binary_trees(n)]
    return [to_splits_dt(t) for t in all_discourse_trees(n)]
