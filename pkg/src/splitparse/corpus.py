"""Treebank readers/writers, vocabularies and numericalization."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .trees import (EDU, EMPTY, SYNTAX, Leaf, Node, ParseTree,
                    Relation, DiscourseTree, leaves, prepare, reindex,
                    relation_triples, singleton_labels, to_spans)

PAD, UNK, SOS, EOS = "<pad>", "<unk>", "<sos>", "<eos>"
RESERVED = (PAD, UNK, SOS, EOS)
NUCLEARITY = ("NN", "NS", "SN")


class TreebankFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# s-expression tokenizer


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _sexp_tokens(text: str):
    """Yield ``(token, line, column)``, both 1-based."""
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
    line = 0
    for m in _TOKEN.finditer(text):
        while line + 1 < len(line_starts) and line_starts[line + 1] <= m.start():
            line += 1
        yield m.group(), line + 1, m.start() - line_starts[line] + 1


def parse_sexps(text: str) -> list:
    """Parse balanced s-expressions into nested lists of strings."""
    stack: list[list] = []
    opened: list[tuple[int, int]] = []
    out = []
    for tok, line, col in _sexp_tokens(text):
        if tok == "(":
            stack.append([])
            opened.append((line, col))
        elif tok == ")":
            if not stack:
                raise TreebankFormatError(f"line {line}, column {col}: unmatched ')'")
            done = stack.pop()
            opened.pop()
            if stack:
                stack[-1].append(done)
            else:
                out.append(done)
        else:
            if not stack:
                raise TreebankFormatError(
                    f"line {line}, column {col}: token {tok!r} outside brackets")
            stack[-1].append(tok)
    if stack:
        line, col = opened[-1]
        raise TreebankFormatError(f"line {line}, column {col}: unclosed '('")
    return out


# ---------------------------------------------------------------------------
# PTB


def _ptb_node(sexp, where):
    if not sexp or not isinstance(sexp[0], str):
        raise TreebankFormatError(f"tree {where}: empty label")
    label, rest = sexp[0], sexp[1:]
    if not rest:
        raise TreebankFormatError(f"tree {where}: node {label!r} has no children")
    if len(rest) == 1 and isinstance(rest[0], str):
        if label == "-NONE-":
            return None
        return Leaf(0, label, rest[0])
    kids = []
    for child in rest:
        if isinstance(child, str):
            kids.append(Leaf(0, None, child))
        else:
            node = _ptb_node(child, where)
            if node is not None:
                kids.append(node)
    if not kids:
        return None  # yield was all empty elements
    return Node(label, tuple(kids))


def parse_ptb(text: str) -> list[ParseTree]:
    trees = []
    for n, sexp in enumerate(parse_sexps(text), start=1):
        # the usual "( (S ...) )" wrapper has no label and a single child
        if sexp and isinstance(sexp[0], list) and len(sexp) == 1:
            sexp = sexp[0]
        tree = _ptb_node(sexp, n)
        if tree is None:
            raise TreebankFormatError(f"tree {n}: empty yield")
        trees.append(reindex(tree))
    return trees


def read_ptb(path) -> list[ParseTree]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise TreebankFormatError(f"{path}: empty file")
    return parse_ptb(text)


def format_ptb(tree: ParseTree) -> str:
    if isinstance(tree, Leaf):
        if tree.tag is None:
            return tree.word
        return f"({tree.tag} {tree.word})"
    return "(" + tree.label + " " + " ".join(format_ptb(c) for c in tree.children) + ")"


def write_ptb(path, trees: Iterable[ParseTree]) -> None:
    Path(path).write_text("".join(format_ptb(t) + "\n" for t in trees), encoding="utf-8")


_FUNCTION_TAG = re.compile(r"^([^-=]+)[-=].*$")


def strip_function_tags(tree: ParseTree) -> ParseTree:
    """``NP-SBJ-1`` -> ``NP``; leaves and labels like ``-LRB-`` untouched."""
    if isinstance(tree, Leaf):
        return tree
    m = _FUNCTION_TAG.match(tree.label)
    label = m.group(1) if m else tree.label
    return Node(label, tuple(strip_function_tags(c) for c in tree.children))


def tree_words(tree: ParseTree) -> list[str]:
    return [leaf.word for leaf in leaves(tree)]


def tree_tags(tree: ParseTree) -> list[str | None]:
    return [leaf.tag for leaf in leaves(tree)]


# ---------------------------------------------------------------------------
# discourse carrier format:  node := "(" REL_NUC node node ")" | "(EDU" token+ ")"


def _dt_node(sexp, offset, where):
    head = sexp[0] if sexp else None
    if not isinstance(head, str):
        raise TreebankFormatError(f"text {where}: empty label")
    if head == "EDU":
        words = sexp[1:]
        if not words or not all(isinstance(w, str) for w in words):
            raise TreebankFormatError(f"text {where}: EDU needs one or more tokens")
        return EDU(offset, offset + len(words), tuple(words))
    rel, _, nuc = head.rpartition("_")
    if not rel or nuc not in NUCLEARITY:
        raise TreebankFormatError(
            f"text {where}: label {head!r} must end in _NN, _NS or _SN")
    kids = sexp[1:]
    if len(kids) != 2 or not all(isinstance(k, list) for k in kids):
        raise TreebankFormatError(
            f"text {where}: relation {head!r} needs exactly 2 child nodes")
    left = _dt_node(kids[0], offset, where)
    right = _dt_node(kids[1], left.span[1], where)
    return Relation(head, left, right)


def parse_discourse(text: str) -> list[DiscourseTree]:
    return [_dt_node(s, 0, n) for n, s in enumerate(parse_sexps(text), start=1)]


def read_discourse(path) -> list[DiscourseTree]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise TreebankFormatError(f"{path}: empty file")
    return parse_discourse(text)


def format_discourse(tree: DiscourseTree) -> str:
    if isinstance(tree, EDU):
        return "(EDU " + " ".join(tree.words) + ")"
    return f"({tree.label} {format_discourse(tree.left)} {format_discourse(tree.right)})"


def write_discourse(path, trees: Iterable[DiscourseTree]) -> None:
    Path(path).write_text(
        "".join(format_discourse(t) + "\n" for t in trees), encoding="utf-8")


def discourse_words(tree: DiscourseTree) -> list[str]:
    if isinstance(tree, EDU):
        return list(tree.words)
    return discourse_words(tree.left) + discourse_words(tree.right)


def split_label(label: str) -> tuple[str, str]:
    """``"Elaboration_NS"`` -> ``("Elaboration", "NS")``."""
    rel, _, nuc = label.rpartition("_")
    return rel, nuc


# ---------------------------------------------------------------------------
# vocabulary


@dataclass(frozen=True)
class Vocab:
    words: dict
    chars: dict
    syntax_labels: dict
    discourse_labels: dict

    def __post_init__(self):
        for table in (self.words, self.chars):
            for idx, sym in enumerate(RESERVED):
                if table.get(sym) != idx:
                    raise ValueError(f"reserved symbol {sym} must have id {idx}")

    @staticmethod
    def _inverse(table):
        out = [None] * len(table)
        for sym, idx in table.items():
            out[idx] = sym
        return out

    def word(self, idx: int) -> str:
        return self._inverse(self.words)[idx]

    def labels(self, mode: str) -> list[str]:
        table = self.syntax_labels if mode == SYNTAX else self.discourse_labels
        return self._inverse(table)

    def to_json(self) -> dict:
        return {"words": self._inverse(self.words), "chars": self._inverse(self.chars),
                "syntax_labels": self._inverse(self.syntax_labels),
                "discourse_labels": self._inverse(self.discourse_labels)}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        return cls(*({s: i for i, s in enumerate(obj[k])} for k in
                     ("words", "chars", "syntax_labels", "discourse_labels")))


def _index(symbols, reserved=()):
    table = {s: i for i, s in enumerate(reserved)}
    for s in sorted(set(symbols) - set(reserved)):
        table[s] = len(table)
    return table


def build_vocab(trees: Sequence, min_word_freq: int = 1, mode: str = SYNTAX) -> Vocab:
    """Word, character and label vocabularies from training trees.

    Label ids follow sorted label strings, so they do not depend on corpus
    order.  Syntactic labels are read off the binarized, unary-collapsed
    trees, and always include the dummy label.
    """
    if not trees:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts: Counter = Counter()
    syn: set = set()
    dis: set = set()
    for tree in trees:
        if mode == SYNTAX:
            counts.update(tree_words(tree))
            p = prepare(tree)
            syn.update(s.label for s in to_spans(p))
            syn.update(singleton_labels(p))
        else:
            counts.update(discourse_words(tree))
            dis.update(t[3] for t in relation_triples(tree))
    if mode == SYNTAX:
        syn.add(EMPTY)
    words = [w for w, c in counts.items() if c >= min_word_freq]
    chars = {ch for w in counts for ch in w}
    return Vocab(_index(words, RESERVED), _index(chars, RESERVED),
                 _index(syn), _index(dis))


@dataclass(frozen=True)
class Sentence:
    tokens: tuple
    token_ids: tuple  # includes <sos> ... <eos>
    char_ids: tuple  # per entry of token_ids

    def __len__(self) -> int:
        return len(self.tokens)


def numericalize(tokens: Sequence[str], vocab: Vocab) -> Sentence:
    unk, cunk = vocab.words[UNK], vocab.chars[UNK]
    ids = [vocab.words[SOS]] + [vocab.words.get(t, unk) for t in tokens] + [vocab.words[EOS]]
    chars = ([(vocab.chars[SOS],)]
             + [tuple(vocab.chars.get(ch, cunk) for ch in t) or (cunk,) for t in tokens]
             + [(vocab.chars[EOS],)])
    return Sentence(tuple(tokens), tuple(ids), tuple(chars))


def denumericalize(sentence: Sentence, vocab: Vocab) -> list[str]:
    """Surface forms; out-of-vocabulary tokens come back from ``tokens``."""
    inv = Vocab._inverse(vocab.words)
    unk = vocab.words[UNK]
    return [sentence.tokens[n] if i == unk else inv[i]
            for n, i in enumerate(sentence.token_ids[1:-1])]


# ---------------------------------------------------------------------------
# pretrained vectors, "word v1 v2 ..." per line


def load_embeddings(path, vocab: Vocab) -> np.ndarray:
    """Table aligned with ``vocab.words``; rows for missing words are zero."""
    vectors = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            vec = np.array([float(x) for x in parts[1:]])
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise TreebankFormatError(
                    f"{path}, line {lineno}: expected {dim} values, got {len(vec)}")
            vectors[parts[0]] = vec
    if dim is None:
        raise TreebankFormatError(f"{path}: empty embedding file")
    table = np.zeros((len(vocab.words), dim))
    for w, i in vocab.words.items():
        if w in vectors:
            table[i] = vectors[w]
    return table
