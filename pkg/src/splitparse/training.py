"""Teacher-forced training of the split and label objectives."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .corpus import Sentence, Vocab, discourse_words, numericalize, tree_words
from .inference import beam_parse, greedy_discourse_parse
from .metrics import labeled_prf, rst_prf
from .model import Parser
from .trees import (SYNTAX, edus, prepare,
                    relation_triples, singleton_labels, to_spans, to_splits,
                    to_splits_dt)


@dataclass
class TrainingExample:
    sentence: Sentence
    splits: tuple  # gold decisions, depth-first
    label_targets: tuple  # syntax (i, j, id); discourse (i, k, j, id)
    tree: object = None  # gold tree, for evaluation
    index: int = 0

    @property
    def n(self) -> int:
        return len(self.sentence)


@dataclass
class TrainConfig:
    batch_tokens: int = 5000
    base_lr: float = 0.002
    decay_rate: float = 0.75
    decay_every: int = 5000
    max_epochs: int = 200
    seed: int = 0
    clip_norm: float = 5.0
    weight_decay: float = 0.0
    dropout: float = 0.0
    eval_beam: int | None = None  # defaults to the model's beam width
    eval_every: int = 1
    target_metric: float | None = None  # stop once the dev metric reaches this


def make_examples(trees: Sequence, mode: str, vocab: Vocab) -> list[TrainingExample]:
    """Gold decision sequences and label targets.

    Syntax targets cover every branching span in decision order, then each
    singleton ``(i, i+1)``.
    """
    out = []
    for idx, tree in enumerate(trees):
        if mode == SYNTAX:
            p = prepare(tree)
            splits = to_splits(p).decisions
            lab = {(s.i, s.j): s.label for s in to_spans(p)}
            targets = [(s.i, s.j, vocab.syntax_labels[lab[(s.i, s.j)]]) for s in splits]
            targets += [(i, i + 1, vocab.syntax_labels[l])
                        for i, l in enumerate(singleton_labels(p))]
            words = tree_words(tree)
        else:
            splits = to_splits_dt(tree).decisions
            targets = [(i, k, j, vocab.discourse_labels[l])
                       for i, k, j, l in relation_triples(tree)]
            words = discourse_words(tree)
        out.append(TrainingExample(numericalize(words, vocab), tuple(splits),
                                   tuple(targets), tree, idx))
    return out


def make_batches(examples: Sequence[TrainingExample], budget: int,
                 rng: np.random.Generator) -> list[list[TrainingExample]]:
    """Length-bucketed batches of at most ``budget`` tokens, shuffled."""
    if not examples:
        return []
    longest = max(ex.n for ex in examples)
    if budget < longest:
        raise ValueError(f"batch budget {budget} < longest sentence ({longest} tokens)")
    ordered = sorted(examples, key=lambda ex: (ex.n, ex.index))
    batches, cur, size = [], [], 0
    for ex in ordered:
        if cur and size + ex.n > budget:
            batches.append(cur)
            cur, size = [], 0
        cur.append(ex)
        size += ex.n
    batches.append(cur)
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def example_losses(parser: Parser, ex: TrainingExample):
    """Forward + backward for one example; returns ``(split, label)``."""
    with ad.Tape() as tape:
        try:
            split_loss, label_loss = parser.losses(ex)
        except ad.NumericalError as e:
            raise ad.NumericalError(f"sentence {ex.index}: {e}") from None
        total = split_loss + label_loss
    value = float(total.value)
    if not math.isfinite(value):
        raise ad.NumericalError(f"non-finite loss on sentence {ex.index}")
    if len(tape):
        tape.backward(total)
    return float(split_loss.value), float(label_loss.value)


def step(parser: Parser, optimizer: ad.Adam, batch: Sequence[TrainingExample],
         clip_norm: float = 5.0) -> tuple[float, float]:
    """One optimizer update on the summed losses of ``batch``."""
    optimizer.zero_grad()
    ls = ll = 0.0
    for ex in batch:
        a, b = example_losses(parser, ex)
        ls += a
        ll += b
    ad.clip_grad_norm(list(parser.params.values()), clip_norm)
    optimizer.step()
    return ls, ll


def evaluate(parser: Parser, examples: Sequence[TrainingExample],
             beam: int | None = None) -> dict:
    """Dev scores: ``{"f1": ...}`` for syntax; span/nuclearity/relation F1
    for discourse, with ``"f1"`` holding the relation F1 used for model
    selection."""
    if parser.config.mode == SYNTAX:
        preds = [beam_parse(parser, ex.sentence, beam).tree for ex in examples]
        s = labeled_prf([ex.tree for ex in examples], preds)
        return {"f1": s.f1, "precision": s.precision, "recall": s.recall}
    results = [greedy_discourse_parse(parser, ex.sentence) for ex in examples]
    s = rst_prf([ex.tree for ex in examples], [r.tree for r in results])
    seg = sum(r.edus == edus(ex.tree) for r, ex in zip(results, examples))
    return {"f1": s.relation.f1, "span_f1": s.span.f1, "nuclearity_f1": s.nuclearity.f1,
            "relation_f1": s.relation.f1, "segmentation_exact": seg / max(len(examples), 1)}


@dataclass
class TrainResult:
    best_metric: float
    best_epoch: int
    epochs_run: int
    steps: int
    history: list = field(default_factory=list)


def format_log(record: dict) -> str:
    parts = []
    for k, v in record.items():
        parts.append(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
    return " ".join(parts)


def train(parser: Parser, train_examples: Sequence[TrainingExample],
          dev_examples: Sequence[TrainingExample], config: TrainConfig,
          log: Callable[[str], None] | None = None) -> TrainResult:
    """Train, evaluating on ``dev_examples`` after each epoch.

    The parameters with the best dev metric (strictly better than all
    earlier epochs) are restored into ``parser`` at the end.
    """
    if not train_examples:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(config.seed)
    optimizer = ad.Adam(parser.params, config.base_lr, config.decay_rate,
                        config.decay_every, weight_decay=config.weight_decay)
    parser.set_dropout(config.dropout, np.random.default_rng(config.seed + 1))
    best_metric, best_epoch, best_state = -math.inf, 0, parser.state_dict()
    result = TrainResult(best_metric, 0, 0, 0)
    for epoch in range(1, config.max_epochs + 1):
        ls = ll = 0.0
        for batch in make_batches(train_examples, config.batch_tokens, rng):
            a, b = step(parser, optimizer, batch, config.clip_norm)
            ls += a
            ll += b
        record = {"epoch": epoch, "step": optimizer.step_count, "loss_split": ls,
                  "loss_label": ll, "lr": optimizer.lr()}
        result.epochs_run = epoch
        if epoch % config.eval_every == 0 or epoch == config.max_epochs:
            parser.set_dropout(0.0)
            scores = evaluate(parser, dev_examples, config.eval_beam)
            parser.set_dropout(config.dropout, None)
            for k, v in scores.items():
                record["dev_" + k] = float(v)
            if scores["f1"] > best_metric:
                best_metric, best_epoch, best_state = scores["f1"], epoch, parser.state_dict()
            record["best_epoch"] = best_epoch
        result.history.append(record)
        if log:
            log(format_log(record))
        if (config.target_metric is not None and best_epoch == epoch
                and best_metric >= config.target_metric):
            break
    parser.set_dropout(0.0)
    parser.load_state_dict(best_state)
    result.best_metric, result.best_epoch, result.steps = best_metric, best_epoch, optimizer.step_count
    return result
