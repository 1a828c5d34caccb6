"""Top-down decoding: beam search for syntax, stack-based greedy (and an
optional beam variant) for end-to-end discourse parsing, and an exhaustive
oracle for small inputs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Sentence
from .model import EncoderOutput, Parser
from .trees import (DISCOURSE, EDU, EMPTY, SYNTAX, DiscourseTree, ParseTree,
                    Relation, Split, SplitSequence, all_split_sequences, edus,
                    from_splits, from_splits_dt, label_discourse, restore,
                    tree_from_spans)

MAX_BRUTE_FORCE = 10


@dataclass
class ParseResult:
    tree: ParseTree  # n-ary, debinarized, unary chains expanded
    splits: SplitSequence
    logp: float  # structure log-probability, sum of pointing log-probs
    decoder_steps: int


@dataclass
class DiscourseResult:
    tree: DiscourseTree
    edus: list
    splits: SplitSequence
    logp: float
    decoder_steps: int


# ---------------------------------------------------------------------------
# labeling


def label_syntax(parser: Parser, enc: EncoderOutput, splits: Sequence[Split],
                 words=None, tags=None) -> ParseTree:
    """Argmax labels for every split span and every singleton, then undo
    binarization and unary collapse.  The root never gets the dummy label."""
    n = enc.n
    labels = parser.vocab.labels(SYNTAX)
    empty = parser.vocab.syntax_labels[EMPTY]
    spans = [(s.i, s.j) for s in splits] + [(i, i + 1) for i in range(n)]
    I, J = zip(*spans)
    lp = parser.label_syntactic(enc, I, J)
    root = spans.index((0, n))
    lp[root, empty] = -np.inf
    best = [labels[a] for a in lp.argmax(axis=1)]
    span_labels = dict(zip(spans[:len(splits)], best[:len(splits)]))
    tree = tree_from_spans(n, splits, span_labels, best[len(splits):], words, tags)
    return restore(tree)


def _attach_words(tree: DiscourseTree, words) -> DiscourseTree:
    if isinstance(tree, EDU):
        return EDU(tree.start, tree.end, tuple(words[tree.start:tree.end]))
    return Relation(tree.label, _attach_words(tree.left, words),
                    _attach_words(tree.right, words))


def label_dt(parser: Parser, enc: EncoderOutput, splits: Sequence[Split],
             words=None) -> DiscourseTree:
    tree = from_splits_dt(splits, enc.n)
    triples = [(s.i, s.k, s.j) for s in splits if s.k != s.j]
    labels = {}
    if triples:
        I, K, J = zip(*triples)
        lp = parser.label_discourse(enc, I, K, J)
        names = parser.vocab.labels(DISCOURSE)
        labels = {t: names[a] for t, a in zip(triples, lp.argmax(axis=1))}
    tree = label_discourse(tree, labels)
    return _attach_words(tree, words) if words is not None else tree


def _top_k(row: np.ndarray, width: int) -> list[int]:
    """Admissible split points by descending score, smaller ``k`` first on ties."""
    ks = np.flatnonzero(np.isfinite(row))
    order = sorted(ks, key=lambda k: (-row[k], k))
    return [int(k) for k in order[:width]]


# ---------------------------------------------------------------------------
# syntax


def beam_search(parser: Parser, enc: EncoderOutput, beam: int):
    """Best split sequence under beam search; returns (splits, logp, steps).

    Each beam item carries a schedule with one slot per decoding step:
    slot ``t-1`` holds the span split at step ``t``.  When ``(i, j)`` is
    split at ``k`` in step ``t``, the left child goes to slot ``t`` and the
    right child to slot ``t + (k - i - 1)``, right after the ``k - i - 1``
    decisions of the left subtree (depth-first order).
    """
    if beam < 1:
        raise ValueError("beam width must be >= 1")
    n = enc.n
    steps = n - 1
    if steps <= 0:
        return (), 0.0, 0
    # (logp, schedule, decisions)
    items = [(0.0, ((0, n),) + ((0, 0),) * (steps - 1), ())]
    state = parser.initial_state(1)
    for t in range(1, steps + 1):
        spans = [it[1][t - 1] for it in items]
        new_state, lp = parser.decode_step(enc, state, spans)
        cands = []
        for b, (logp, sched, dec) in enumerate(items):
            i, j = spans[b]
            for k in _top_k(lp[b], beam):
                cands.append((logp + lp[b, k], k, b))
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
        nxt, rows = [], []
        for score, k, b in cands[:beam]:
            _, sched, dec = items[b]
            i, j = spans[b]
            sched = list(sched)
            if k > i + 1:
                sched[t] = (i, k)
            if j > k + 1:
                sched[t + (k - i - 1)] = (k, j)
            nxt.append((score, tuple(sched), dec + (Split(i, j, k),)))
            rows.append(b)
        items = nxt
        state = new_state.select(rows)
    best = items[0]
    return best[2], float(best[0]), steps


def beam_parse(parser: Parser, sentence: Sentence, beam: int | None = None,
               tags=None) -> ParseResult:
    beam = parser.config.beam_width if beam is None else beam
    enc = parser.encode_np(sentence)
    splits, logp, steps = beam_search(parser, enc, beam)
    seq = SplitSequence(tuple(splits), SYNTAX)
    from_splits(seq, enc.n)  # structural validation
    tree = label_syntax(parser, enc, seq, sentence.tokens, tags)
    return ParseResult(tree, seq, logp, steps)


# ---------------------------------------------------------------------------
# discourse


def _push_children(stack: list, i: int, j: int, k: int) -> None:
    if k == j:
        return
    if j - k >= 2:
        stack.append((k, j))
    if k - i >= 2:
        stack.append((i, k))  # popped first


def greedy_discourse_parse(parser: Parser, sentence: Sentence) -> DiscourseResult:
    """Stack-based top-down decoding; EDUs fall out of ``k == j`` decisions."""
    enc = parser.encode_np(sentence)
    n = enc.n
    decisions = []
    logp = 0.0
    steps = 0
    stack = [(0, n)] if n >= 2 else []
    state = parser.initial_state(1)
    while stack:
        i, j = stack.pop()
        state, lp = parser.decode_step(enc, state, [(i, j)])
        steps += 1
        k = int(np.argmax(lp[0]))  # first maximum: smaller k wins ties
        logp += lp[0, k]
        decisions.append(Split(i, j, k))
        _push_children(stack, i, j, k)
    seq = SplitSequence(tuple(decisions), DISCOURSE)
    tree = label_dt(parser, enc, seq, sentence.tokens)
    return DiscourseResult(tree, edus(tree), seq, float(logp), steps)


def beam_discourse_parse(parser: Parser, sentence: Sentence,
                         beam: int) -> DiscourseResult:
    """Beam variant of the discourse decoder.

    Finished hypotheses stay in the beam and compete with unfinished ones;
    decoding stops when every kept hypothesis is finished.
    """
    enc = parser.encode_np(sentence)
    n = enc.n
    # (logp, stack, decisions, state row or None when finished)
    items = [(0.0, ((0, n),) if n >= 2 else (), (), 0)]
    state = parser.initial_state(1)
    steps = 0
    while any(it[1] for it in items):
        active = [b for b, it in enumerate(items) if it[1]]
        spans = [items[b][1][-1] for b in active]
        new_state, lp = parser.decode_step(enc, state.select([items[b][3] for b in active]),
                                           spans)
        steps += 1
        cands = []  # (score, k, order, payload)
        for row, b in enumerate(active):
            logp, stack, dec, _ = items[b]
            i, j = spans[row]
            for k in _top_k(lp[row], beam):
                st = list(stack[:-1])
                _push_children(st, i, j, k)
                cands.append((logp + lp[row, k], k, b,
                              (tuple(st), dec + (Split(i, j, k),), row)))
        for b, (logp, stack, dec, _) in enumerate(items):
            if not stack:
                cands.append((logp, -1, b, (stack, dec, None)))
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
        items, rows = [], []
        for score, _, _, (stack, dec, row) in cands[:beam]:
            items.append((score, stack, dec, len(rows)))
            rows.append(row if row is not None else 0)
        state = new_state.select(rows)
    best = items[0]
    seq = SplitSequence(best[2], DISCOURSE)
    tree = label_dt(parser, enc, seq, sentence.tokens)
    return DiscourseResult(tree, edus(tree), seq, float(best[0]), steps)


# ---------------------------------------------------------------------------
# exhaustive oracle


def score_sequences(parser: Parser, enc: EncoderOutput,
                    sequences: Sequence[Sequence[Split]]) -> np.ndarray:
    """Teacher-forced replay: ``sum_t log a_t[k_t]`` for every sequence."""
    N = len(sequences)
    scores = np.zeros(N)
    if N == 0:
        return scores
    longest = max(len(s) for s in sequences)
    state = parser.initial_state(N)
    for t in range(longest):
        rows = [r for r in range(N) if len(sequences[r]) > t]
        spans = [(sequences[r][t].i, sequences[r][t].j) for r in rows]
        sub, lp = parser.decode_step(enc, state.select(rows), spans)
        state.h[rows] = sub.h
        state.c[rows] = sub.c
        for row, r in enumerate(rows):
            scores[r] += lp[row, sequences[r][t].k]
    return scores


def brute_force_parse(parser: Parser, sentence: Sentence, mode: str | None = None,
                      tags=None):
    """Exact argmax over every tree shape; returns ``ParseResult`` or
    ``DiscourseResult`` with the replayed log-probability."""
    mode = mode or parser.config.mode
    enc = parser.encode_np(sentence)
    n = enc.n
    if n > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_FORCE}, got {n}")
    seqs = all_split_sequences(n, mode)
    scores = score_sequences(parser, enc, seqs)
    best = int(np.argmax(scores))
    seq = seqs[best]
    if mode == SYNTAX:
        tree = label_syntax(parser, enc, seq, sentence.tokens, tags)
        return ParseResult(tree, seq, float(scores[best]), len(seq))
    tree = label_dt(parser, enc, seq, sentence.tokens)
    return DiscourseResult(tree, edus(tree), seq, float(scores[best]), len(seq))
