"""Bracket scoring for constituency and discourse trees.

Syntactic scoring (evalb-style, fixed rule set):

* every internal node of the n-ary tree contributes ``(i, j, label)``,
  including each node of a unary chain and nodes over a single token;
* preterminals (POS tags) and dummy-labeled nodes are excluded;
* no label equivalences, no punctuation deletion;
* matching is multiset intersection, micro-averaged over the corpus.

Discourse scoring matches internal nodes on ``(i, k, j)``: the node's span
together with its split point, i.e. both child spans.  EDU boundaries
therefore enter every comparison, so segmentation errors are penalized
in end-to-end parsing.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .corpus import split_label
from .trees import EMPTY, Leaf, ParseTree, DiscourseTree, num_tokens, relation_triples


class MetricInputError(ValueError):
    pass


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    matched: int
    gold_count: int
    pred_count: int

    @classmethod
    def from_counts(cls, matched: int, gold: int, pred: int) -> "PRF":
        p = 100.0 * matched / pred if pred else 0.0
        r = 100.0 * matched / gold if gold else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, matched, gold, pred)


def bracket_counter(tree: ParseTree) -> Counter:
    out: Counter = Counter()

    def walk(t):
        if isinstance(t, Leaf):
            return
        if t.label != EMPTY:
            out[(t.span[0], t.span[1], t.label)] += 1
        for c in t.children:
            walk(c)

    walk(tree)
    return out


def _check_lengths(gold, pred):
    if len(gold) != len(pred):
        raise MetricInputError(f"{len(gold)} gold vs {len(pred)} predicted trees")
    for n, (g, p) in enumerate(zip(gold, pred)):
        if num_tokens(g) != num_tokens(p):
            raise MetricInputError(
                f"sentence {n}: {num_tokens(g)} gold vs {num_tokens(p)} predicted tokens")


def labeled_prf(gold_trees: Sequence[ParseTree], pred_trees: Sequence[ParseTree]) -> PRF:
    _check_lengths(gold_trees, pred_trees)
    matched = gold = pred = 0
    for g, p in zip(gold_trees, pred_trees):
        gc, pc = bracket_counter(g), bracket_counter(p)
        matched += sum((gc & pc).values())
        gold += sum(gc.values())
        pred += sum(pc.values())
    return PRF.from_counts(matched, gold, pred)


@dataclass(frozen=True)
class RSTScores:
    span: PRF
    nuclearity: PRF
    relation: PRF


def rst_prf(gold_dts: Sequence[DiscourseTree], pred_dts: Sequence[DiscourseTree]) -> RSTScores:
    _check_lengths(gold_dts, pred_dts)
    counts = {"span": [0, 0, 0], "nuc": [0, 0, 0], "rel": [0, 0, 0]}
    for g, p in zip(gold_dts, pred_dts):
        gt, pt = relation_triples(g), relation_triples(p)
        for key, proj in (("span", lambda t: t[:3]),
                          ("nuc", lambda t: t[:3] + (split_label(t[3])[1],)),
                          ("rel", lambda t: t[:3] + (split_label(t[3])[0],))):
            gc, pc = Counter(map(proj, gt)), Counter(map(proj, pt))
            c = counts[key]
            c[0] += sum((gc & pc).values())
            c[1] += sum(gc.values())
            c[2] += sum(pc.values())
    return RSTScores(*(PRF.from_counts(*counts[k]) for k in ("span", "nuc", "rel")))


def format_report(scores: dict) -> str:
    """``key=value`` lines followed by a small table.

    ``scores`` maps a name (e.g. ``"labeled"``) to a :class:`PRF`.
    """
    lines = []
    for name, s in scores.items():
        lines.append(f"{name}.precision={s.precision:.2f} {name}.recall={s.recall:.2f} "
                     f"{name}.f1={s.f1:.2f} {name}.matched={s.matched} "
                     f"{name}.gold={s.gold_count} {name}.pred={s.pred_count}")
    lines.append("")
    lines.append(f"{'metric':<12}{'P':>8}{'R':>8}{'F1':>8}")
    for name, s in scores.items():
        lines.append(f"{name:<12}{s.precision:>8.2f}{s.recall:>8.2f}{s.f1:>8.2f}")
    return "\n".join(lines) + "\n"
