"""Command-line entry point: ``splitparse {train,parse,eval,codec,toy}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
from pathlib import Path

from . import autodiff as ad
from .corpus import (TreebankFormatError, build_vocab, discourse_words, format_discourse,
                     format_ptb, load_embeddings, numericalize, parse_discourse,
                     parse_ptb, read_discourse, read_ptb, tree_tags,
                     tree_words)
from .inference import (MAX_BRUTE_FORCE, beam_discourse_parse, beam_parse,
                        brute_force_parse, greedy_discourse_parse)
from .metrics import MetricInputError, format_report, labeled_prf, rst_prf
from .model import ModelConfig, Parser
from .training import TrainConfig, make_examples, train
from .toydata import generate_cfg_treebank, generate_discourse_treebank
from .trees import (DISCOURSE, SYNTAX, InvalidSequenceError, Leaf, MalformedTreeError,
                    Split, edus, from_splits, from_splits_dt, leaves, num_tokens, prepare,
                    to_splits, to_splits_dt, validate_splits)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# configuration

_MODEL_DEFAULTS = {f.name: f.default for f in dataclasses.fields(ModelConfig)}


_TRAIN_DEFAULTS = {f.name: f.default for f in dataclasses.fields(TrainConfig)}


def read_config(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(value: str, like):
    if isinstance(like, bool):
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise UsageError(f"expected a boolean, got {value!r}")
    if value.lower() == "none":
        return None
    if isinstance(like, int):
        return int(value)
    if like is None:
        for cast in (int, float):
            try:
                return cast(value)
            except ValueError:
                pass
        return value
    if isinstance(like, float):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _resolve(args) -> dict:
    """Merge defaults, the config file, ``--set`` pairs and explicit flags."""
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise UsageError(f"--set expects KEY=VALUE, got {pair!r}")
        k, v = pair.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    for key in ("mode", "train", "dev", "test", "model", "beam", "seed", "min_word_freq",
                "epochs", "embeddings", "format", "output", "pred"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def _split_config(cfg: dict):
    plumbing = {"mode", "train", "dev", "test", "model", "beam", "seed", "min_word_freq",
                "epochs", "embeddings", "format", "output", "pred", "oracle"}
    model_kw, train_kw = {}, {}
    for k, v in cfg.items():
        if k in plumbing:
            continue
        if k in _MODEL_DEFAULTS:
            model_kw[k] = _coerce(v, _MODEL_DEFAULTS[k]) if isinstance(v, str) else v
        elif k in _TRAIN_DEFAULTS:
            train_kw[k] = _coerce(v, _TRAIN_DEFAULTS[k]) if isinstance(v, str) else v
        else:
            raise UsageError(f"unknown configuration key {k!r}")
    return model_kw, train_kw


def write_resolved(path, cfg: dict) -> None:
    lines = [f"{k}={cfg[k]}" for k in sorted(cfg)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# corpora


def _read_trees(path, mode):
    if path is None:
        raise UsageError("a treebank path is required")
    if not Path(path).is_file():
        raise DataError(f"{path}: no such file")
    try:
        return read_ptb(path) if mode == SYNTAX else read_discourse(path)
    except TreebankFormatError as e:
        hint = ""
        if mode == DISCOURSE:
            hint = " (is this a constituency treebank? try --mode syntax)"
        raise DataError(f"{path}: {e}{hint}") from None


def _input_lines(path):
    if path is None or path == "-":
        return sys.stdin.read().splitlines()
    if not Path(path).is_file():
        raise DataError(f"{path}: no such file")
    return Path(path).read_text(encoding="utf-8").splitlines()


UNKNOWN_TAG = "XX"  # keeps "(NP (XX w))" distinct from a preterminal "(NP w)"


def _tokens(line: str, mode: str, lineno: int):
    """``(tokens, tags)`` from whitespace-separated text, or the yield (and
    part-of-speech tags) of a bracketed tree."""
    if line.lstrip().startswith("("):
        try:
            if mode == SYNTAX:
                tree = parse_ptb(line)[0]
                return tree_words(tree), tree_tags(tree)
            return discourse_words(parse_discourse(line)[0]), None
        except TreebankFormatError as e:
            raise DataError(f"input line {lineno}: {e}") from None
    toks = line.split()
    return toks, [UNKNOWN_TAG] * len(toks)


def _load_model(path, mode=None) -> Parser:
    if path is None:
        raise UsageError("--model is required")
    if not Path(path).is_file():
        raise DataError(f"{path}: no such file")
    try:
        parser = Parser.load(path)
    except (ValueError, KeyError) as e:
        raise DataError(f"{path}: unreadable checkpoint ({e})") from None
    if mode is not None and mode != parser.config.mode:
        raise UsageError(f"--mode {mode} contradicts the {parser.config.mode} model in {path}")
    return parser


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = _resolve(args)
    mode = cfg.setdefault("mode", SYNTAX)
    cfg.setdefault("seed", 0)
    cfg.setdefault("min_word_freq", 1)
    if "model" not in cfg:
        raise UsageError("train needs --model OUTPUT")
    model_kw, train_kw = _split_config(cfg)
    train_trees = _read_trees(cfg.get("train"), mode)
    dev_trees = _read_trees(cfg["dev"], mode) if cfg.get("dev") else train_trees
    vocab = build_vocab(train_trees, int(cfg["min_word_freq"]), mode)
    pretrained = None
    if cfg.get("embeddings"):
        try:
            pretrained = load_embeddings(cfg["embeddings"], vocab)
        except (OSError, ValueError) as e:
            raise DataError(f"{cfg['embeddings']}: {e}") from None
        model_kw["pretrained_dim"] = pretrained.shape[1]
    if "beam" in cfg:
        model_kw["beam_width"] = int(cfg["beam"])
    model_kw.update(mode=mode, num_syntactic_labels=len(vocab.syntax_labels),
                    num_discourse_labels=len(vocab.discourse_labels))
    if "epochs" in cfg:
        train_kw["max_epochs"] = int(cfg["epochs"])
    train_kw["seed"] = int(cfg["seed"])
    config = ModelConfig(**model_kw)
    tconfig = TrainConfig(**train_kw)
    parser = Parser(config, vocab, seed=int(cfg["seed"]), pretrained=pretrained)
    train_ex = make_examples(train_trees, mode, vocab)
    dev_ex = make_examples(dev_trees, mode, vocab)

    model_path = Path(cfg["model"])
    resolved = dict(cfg)
    resolved.update({f"model.{k}": v for k, v in dataclasses.asdict(config).items()})
    resolved.update({f"train.{k}": v for k, v in dataclasses.asdict(tconfig).items()})
    write_resolved(str(model_path) + ".config", resolved)
    with open(str(model_path) + ".log", "w", encoding="utf-8") as log_fh:
        def log(line):
            log_fh.write(line + "\n")
            print(line, file=sys.stderr)
        log(f"seed={cfg['seed']} mode={mode} params={parser.num_parameters()} "
            f"train={len(train_ex)} dev={len(dev_ex)}")
        result = train(parser, train_ex, dev_ex, tconfig, log)
        log(f"best_epoch={result.best_epoch} best_f1={result.best_metric:.6f}")
    parser.save(model_path, {"seed": int(cfg["seed"])})
    return EXIT_OK


def _format_discourse_result(res, fmt):
    if fmt == "splits":
        return str(res.splits)
    bounds = " ".join(f"({a},{b})" for a, b in res.edus)
    return f"{format_discourse(res.tree)}\t{bounds}"


def _check_output(mode, splits, n):
    """Every printed structure passes the codec's validator first."""
    try:
        validate_splits(splits, n, mode)
    except InvalidSequenceError as e:  # pragma: no cover - decoder bug guard
        raise DataError(f"decoder produced an invalid sequence: {e}") from None


def _parse_all(parser, lines, beam, oracle, warn):
    mode = parser.config.mode
    results = []
    disagreements = 0
    for lineno, line in enumerate(lines, start=1):
        toks, tags = _tokens(line, mode, lineno)
        if not toks:
            continue
        sent = numericalize(toks, parser.vocab)
        if mode == SYNTAX:
            res = beam_parse(parser, sent, beam, tags)
        elif beam is None or beam <= 1:
            res = greedy_discourse_parse(parser, sent)
        else:
            res = beam_discourse_parse(parser, sent, beam)
        _check_output(mode, res.splits, len(sent))
        if oracle and len(sent) <= MAX_BRUTE_FORCE:
            ref = brute_force_parse(parser, sent, tags=tags)
            if ref.tree != res.tree or abs(ref.logp - res.logp) > 1e-9:
                disagreements += 1
                warn(f"oracle disagreement on line {lineno}: "
                     f"beam logp={res.logp:.9f} oracle logp={ref.logp:.9f}")
        results.append(res)
    return results, disagreements


def cmd_parse(args) -> int:
    cfg = _resolve(args)
    parser = _load_model(cfg.get("model"), cfg.get("mode"))
    fmt = cfg.get("format", "trees")
    if fmt not in ("trees", "splits"):
        raise UsageError("parse supports --format trees or splits")
    beam = int(cfg["beam"]) if "beam" in cfg else None
    lines = _input_lines(cfg.get("test"))
    results, bad = _parse_all(parser, lines, beam, args.oracle,
                              lambda m: print(m, file=sys.stderr))
    out = []
    for res in results:
        if parser.config.mode == SYNTAX:
            out.append(str(res.splits) if fmt == "splits" else format_ptb(res.tree))
        else:
            out.append(_format_discourse_result(res, fmt))
    text = "".join(line + "\n" for line in out)
    if cfg.get("output"):
        Path(cfg["output"]).write_text(text, encoding="utf-8")
        write_resolved(cfg["output"] + ".config", cfg)
    else:
        sys.stdout.write(text)
    if args.oracle:
        print(f"oracle_disagreements={bad}", file=sys.stderr)
        if bad:
            return EXIT_DATA
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    mode = cfg.get("mode")
    if cfg.get("pred") is None:
        parser = _load_model(cfg.get("model"), mode)
        mode = parser.config.mode
        gold = _read_trees(cfg.get("test"), mode)
        lines = [format_ptb(t) if mode == SYNTAX else format_discourse(t) for t in gold]
        beam = int(cfg["beam"]) if "beam" in cfg else None
        results, _ = _parse_all(parser, lines, beam, False, None)
        pred = [r.tree for r in results]
    else:
        mode = mode or SYNTAX
        gold = _read_trees(cfg.get("test"), mode)
        pred = _read_trees(cfg["pred"], mode)
    try:
        if mode == SYNTAX:
            report = {"labeled": labeled_prf(gold, pred)}
        else:
            s = rst_prf(gold, pred)
            report = {"span": s.span, "nuclearity": s.nuclearity, "relation": s.relation}
    except MetricInputError as e:
        raise DataError(str(e)) from None
    text = format_report(report)
    if mode == DISCOURSE:
        exact = sum(edus(g) == edus(p) for g, p in zip(gold, pred))
        text = f"segmentation.exact={exact}/{len(gold)}\n" + text
    if cfg.get("output"):
        Path(cfg["output"]).write_text(text, encoding="utf-8")
        write_resolved(cfg["output"] + ".config", cfg)
    else:
        sys.stdout.write(text)
    return EXIT_OK


_DECISION = re.compile(r"^\((\d+),(\d+)\)->(\d+)$")


def parse_decisions(line: str, lineno: int) -> list[Split]:
    out = []
    for tok in line.split():
        m = _DECISION.match(tok)
        if not m:
            raise DataError(f"line {lineno}: cannot read decision {tok!r}; expected (i,j)->k")
        out.append(Split(*(int(g) for g in m.groups())))
    return out


def _bracket_indices(tree) -> str:
    if isinstance(tree, Leaf):
        return str(tree.index)
    return "(" + " ".join(_bracket_indices(c) for c in tree.children) + ")"


def _bracket_edus(tree) -> str:
    if hasattr(tree, "left"):
        return f"({_bracket_edus(tree.left)} {_bracket_edus(tree.right)})"
    return f"[{tree.start},{tree.end}]"


def cmd_codec(args) -> int:
    cfg = _resolve(args)
    mode = cfg.get("mode", SYNTAX)
    lines = _input_lines(cfg.get("test"))
    out = []
    if args.decode:
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            seq = parse_decisions(line, lineno)
            n = seq[0].j if seq else 1
            try:
                if mode == SYNTAX:
                    out.append(_bracket_indices(from_splits(seq, n)))
                else:
                    out.append(_bracket_edus(from_splits_dt(seq, n)))
            except InvalidSequenceError as e:
                raise DataError(f"line {lineno}: {e}") from None
    else:
        text = "\n".join(lines)
        try:
            trees = parse_ptb(text) if mode == SYNTAX else parse_discourse(text)
        except TreebankFormatError as e:
            raise DataError(str(e)) from None
        for n, tree in enumerate(trees, start=1):
            try:
                if mode == SYNTAX:
                    seq = to_splits(prepare(tree))
                    validate_splits(seq, len(leaves(tree)), SYNTAX)
                else:
                    seq = to_splits_dt(tree)
                    validate_splits(seq, num_tokens(tree), DISCOURSE)
            except (MalformedTreeError, InvalidSequenceError) as e:
                raise DataError(f"tree {n}: {e}") from None
            out.append(str(seq))
    sys.stdout.write("".join(line + "\n" for line in out))
    return EXIT_OK


def cmd_toy(args) -> int:
    mode = args.mode or SYNTAX
    seed = args.seed or 0
    if mode == SYNTAX:
        trees = generate_cfg_treebank(args.count or 50, seed)
        text = "".join(format_ptb(t) + "\n" for t in trees)
    else:
        trees = generate_discourse_treebank(args.count or 30, seed)
        text = "".join(format_discourse(t) + "\n" for t in trees)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    top = _ArgParser(prog="splitparse", description="Top-down split-pointing parser.")
    sub = top.add_subparsers(dest="command", parser_class=_ArgParser)
    sub.required = True

    def common(p, model=True):
        p.add_argument("--mode", choices=[SYNTAX, DISCOURSE])
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one configuration key")
        p.add_argument("--seed", type=int)
        if model:
            p.add_argument("--model")
            p.add_argument("--beam", type=int)

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--epochs", type=int)
    p.add_argument("--min-word-freq", type=int)
    p.add_argument("--embeddings", help='plain-text vectors, "word v1 v2 ..." per line')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse tokenized text (one sentence per line)")
    common(p)
    p.add_argument("--test", help="input file (default: standard input)")
    p.add_argument("--format", choices=["trees", "splits"])
    p.add_argument("--output")
    p.add_argument("--oracle", action="store_true",
                   help=f"cross-check against exhaustive search for n <= {MAX_BRUTE_FORCE}")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="score predictions (or a model) against gold trees")
    common(p)
    p.add_argument("--test", help="gold treebank")
    p.add_argument("--pred", help="predicted treebank; without it, --model parses --test")
    p.add_argument("--format", choices=["metrics"])
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("codec", help="convert trees to split sequences and back")
    common(p, model=False)
    p.add_argument("--test", help="input file (default: standard input)")
    p.add_argument("--decode", action="store_true",
                   help="read split sequences and print bracketed structures")
    p.set_defaults(func=cmd_codec)

    p = sub.add_parser("toy", help="print a generated toy treebank")
    p.add_argument("--mode", choices=[SYNTAX, DISCOURSE])
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_toy)
    return top


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # argparse: --help or a usage error
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"splitparse: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ad.NumericalError as e:
        print(f"splitparse: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, TreebankFormatError, MalformedTreeError, InvalidSequenceError,
            MetricInputError, OSError, json.JSONDecodeError) as e:
        print(f"splitparse: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"splitparse: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
