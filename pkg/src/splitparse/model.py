"""Pointing parser: encoder, span decoder, biaffine pointer and labelers.

Training builds a differentiable graph over a whole teacher-forced
decision sequence (:meth:`Parser.losses`).  Inference uses
:meth:`Parser.encode_np` and :meth:`Parser.decode_step`, which advance a
batch of decoder states one decision at a time with plain arrays.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .corpus import PAD, Sentence, Vocab
from .trees import DISCOURSE, SYNTAX


@dataclass
class ModelConfig:
    mode: str = SYNTAX
    word_emb_dim: int = 100
    char_emb_dim: int = 50
    char_rnn_hidden: int = 25  # per direction; the char summary is twice this
    encoder_hidden: int = 400  # per direction
    encoder_layers: int = 3
    decoder_hidden: int = 400
    decoder_layers: int = 3
    mlp_dim: int = 500
    label_mlp_dim: int = 500
    num_syntactic_labels: int = 0
    num_discourse_labels: int = 0
    leaky_slope: float = 0.1
    pretrained_dim: int = 0  # >0 replaces the char pathway by a fixed table
    beam_width: int = 20

    def __post_init__(self):
        if self.mode not in (SYNTAX, DISCOURSE):
            raise ValueError(f"unknown mode {self.mode!r}")
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("num_syntactic_labels", "num_discourse_labels", "pretrained_dim"):
                if v < 0:
                    raise ValueError(f"{f.name} must be >= 0")
            elif isinstance(v, (int, float)) and not isinstance(v, bool) and f.name != "leaky_slope":
                if v <= 0:
                    raise ValueError(f"{f.name} must be > 0, got {v}")
        needed = (self.num_syntactic_labels if self.mode == SYNTAX
                  else self.num_discourse_labels)
        if needed <= 0:
            raise ValueError(f"{self.mode} mode needs at least one label")

    @property
    def token_dim(self) -> int:
        char = self.pretrained_dim or 2 * self.char_rnn_hidden
        return char + self.word_emb_dim

    @property
    def boundary_dim(self) -> int:
        return 2 * self.encoder_hidden

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class EncoderOutput:
    boundaries: np.ndarray  # (n+1, 2*encoder_hidden), row k = [f_k ; b_{k+1}]
    pointer_keys: np.ndarray  # MLP_h applied to every boundary
    label_left: np.ndarray | None = None  # syntactic MLP_l / MLP_r of boundaries
    label_right: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.boundaries.shape[0] - 1


@dataclass
class DecoderState:
    h: np.ndarray  # (batch, layers, decoder_hidden)
    c: np.ndarray

    def select(self, rows) -> "DecoderState":
        return DecoderState(self.h[rows], self.c[rows])


def split_mask(spans: Sequence[tuple[int, int]], n: int, mode: str) -> np.ndarray:
    """Boolean ``(len(spans), n+1)``: syntax ``i<k<j``, discourse ``i<k<=j``."""
    k = np.arange(n + 1)
    sp = np.asarray(spans, dtype=np.intp).reshape(-1, 2)
    lo = k[None, :] > sp[:, :1]
    hi = (k[None, :] <= sp[:, 1:]) if mode == DISCOURSE else (k[None, :] < sp[:, 1:])
    return lo & hi


def _leaky(x, slope):
    return np.where(x > 0, x, slope * x)


def _log_softmax_np(x, mask):
    x = np.where(mask, x, -np.inf)
    m = x.max(axis=-1, keepdims=True)
    s = x - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


class Parser:
    """All learnable weights plus the forward computations over them."""

    def __init__(self, config: ModelConfig, vocab: Vocab, seed: int = 0,
                 pretrained: np.ndarray | None = None):
        self.config = config
        self.vocab = vocab
        self.decoder_calls = 0
        self.dropout = 0.0
        self._dropout_rng = None
        if config.pretrained_dim:
            if pretrained is None or pretrained.shape != (len(vocab.words), config.pretrained_dim):
                raise ValueError("pretrained table missing or misshaped")
            self.pretrained = Tensor(pretrained)
        else:
            self.pretrained = None
        self.params: dict[str, Tensor] = {}
        self._init_params(np.random.default_rng(seed))

    # -- parameters --------------------------------------------------------

    def _add(self, name, value):
        self.params[name] = Tensor(value, requires_grad=True, name=name)

    def _linear(self, rng, name, d_in, d_out, bias=True):
        s = np.sqrt(6.0 / (d_in + d_out))
        self._add(name + ".W", rng.uniform(-s, s, (d_in, d_out)))
        if bias:
            self._add(name + ".b", np.zeros(d_out))

    def _lstm(self, rng, name, d_in, h):
        s = 1.0 / np.sqrt(h)
        self._add(name + ".W", rng.uniform(-s, s, (d_in, 4 * h)))
        self._add(name + ".U", rng.uniform(-s, s, (h, 4 * h)))
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0  # forget gate
        self._add(name + ".b", b)

    def _labeler(self, rng, prefix, d_in, L):
        c = self.config
        d = c.label_mlp_dim
        self._linear(rng, prefix + ".mlp_l", d_in, d)
        self._linear(rng, prefix + ".mlp_r", d_in, d)
        s = np.sqrt(6.0 / (2 * d))
        self._add(prefix + ".W_lr", rng.uniform(-s, s, (d, L, d)))
        s = np.sqrt(6.0 / (d + L))
        self._add(prefix + ".W_l", rng.uniform(-s, s, (d, L)))
        self._add(prefix + ".W_r", rng.uniform(-s, s, (d, L)))
        self._add(prefix + ".b", np.zeros(L))

    def _init_params(self, rng):
        c = self.config
        v = self.vocab
        self._add("word_emb", rng.normal(0.0, 1.0 / np.sqrt(c.word_emb_dim),
                                         (len(v.words), c.word_emb_dim)))
        if not c.pretrained_dim:
            self._add("char_emb", rng.normal(0.0, 1.0 / np.sqrt(c.char_emb_dim),
                                             (len(v.chars), c.char_emb_dim)))
            self._lstm(rng, "char_fw", c.char_emb_dim, c.char_rnn_hidden)
            self._lstm(rng, "char_bw", c.char_emb_dim, c.char_rnn_hidden)
        d_in = c.token_dim
        for layer in range(c.encoder_layers):
            self._lstm(rng, f"enc{layer}_fw", d_in, c.encoder_hidden)
            self._lstm(rng, f"enc{layer}_bw", d_in, c.encoder_hidden)
            d_in = 2 * c.encoder_hidden
        bd = c.boundary_dim
        self._linear(rng, "span.W1", bd, bd, bias=False)
        self._linear(rng, "span.W2", bd, bd, bias=False)
        d_in = bd
        for layer in range(c.decoder_layers):
            self._lstm(rng, f"dec{layer}", d_in, c.decoder_hidden)
            d_in = c.decoder_hidden
        self._add("dec_init.h", np.zeros((c.decoder_layers, c.decoder_hidden)))
        self._add("dec_init.c", np.zeros((c.decoder_layers, c.decoder_hidden)))
        self._linear(rng, "mlp_d", c.decoder_hidden, c.mlp_dim)
        self._linear(rng, "mlp_h", bd, c.mlp_dim)
        s = np.sqrt(6.0 / (2 * c.mlp_dim))
        self._add("W_dh", rng.uniform(-s, s, (c.mlp_dim, c.mlp_dim)))
        self._add("w_h", rng.uniform(-s, s, c.mlp_dim))
        if c.mode == SYNTAX:
            self._labeler(rng, "syn", bd, c.num_syntactic_labels)
        else:
            self._labeler(rng, "dis", 2 * bd, c.num_discourse_labels)

    def set_dropout(self, rate: float, rng: np.random.Generator | None = None) -> None:
        """Inverted dropout on encoder inputs/outputs; 0 disables it."""
        self.dropout = rate
        if rng is not None:
            self._dropout_rng = rng

    def _drop(self, x: Tensor) -> Tensor:
        if self.dropout <= 0 or self._dropout_rng is None:
            return x
        keep = self._dropout_rng.random(x.shape) >= self.dropout
        return ad.mul(x, keep / (1.0 - self.dropout))

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def state_dict(self) -> dict:
        return {k: p.value.copy() for k, p in self.params.items()}

    def load_state_dict(self, state: dict) -> None:
        if set(state) != set(self.params):
            missing = set(self.params) ^ set(state)
            raise KeyError(f"parameter names differ: {sorted(missing)}")
        for k, p in self.params.items():
            if state[k].shape != p.shape:
                raise ValueError(f"{k}: shape {state[k].shape} != {p.shape}")
            p.value[...] = state[k]

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.params.values())

    # -- differentiable forward -------------------------------------------

    def _mlp(self, name, x):
        p = self.params
        return ad.leaky_relu(ad.matmul(x, p[name + ".W"]) + p[name + ".b"],
                             self.config.leaky_slope)

    def _run_lstm(self, name, x, h0=None, c0=None):
        """``x`` has shape (B, T, d); returns (B, T, h)."""
        p = self.params
        U = p[name + ".U"]
        if h0 is None:
            h0 = c0 = Tensor(np.zeros(U.shape[0]))
        return ad.lstm(x, p[name + ".W"], U, p[name + ".b"], h0, c0)

    def embed(self, sentence: Sentence) -> Tensor:
        """Token vectors ``[char summary ; word embedding]``, shape (n+2, e)."""
        p = self.params
        ids = np.asarray(sentence.token_ids)
        if ids.min() < 0 or ids.max() >= p["word_emb"].shape[0]:
            raise IndexError("word id out of vocabulary range")
        word = ad.take(p["word_emb"], ids)
        if self.pretrained is not None:
            return ad.concat([ad.take(self.pretrained, ids), word], axis=-1)
        uniq = sorted(set(sentence.char_ids))
        where = {w: n for n, w in enumerate(uniq)}
        W = len(uniq)
        T = max(len(w) for w in uniq)
        pad = self.vocab.chars[PAD]
        fw = np.full((W, T), pad, dtype=np.intp)
        bw = np.full((W, T), pad, dtype=np.intp)
        last = np.empty(W, dtype=np.intp)
        for n, w in enumerate(uniq):
            fw[n, :len(w)] = w
            bw[n, :len(w)] = w[::-1]
            last[n] = n * T + len(w) - 1
        if fw.max() >= p["char_emb"].shape[0]:
            raise IndexError("char id out of vocabulary range")
        h = self.config.char_rnn_hidden
        parts = []
        for direction, chars in (("char_fw", fw), ("char_bw", bw)):
            x = ad.reshape(ad.take(p["char_emb"], chars.reshape(-1)), (W, T, -1))
            H = ad.reshape(self._run_lstm(direction, x), (W * T, h))
            parts.append(ad.take(H, last))
        char_vec = ad.concat(parts, axis=-1)
        char = ad.take(char_vec, [where[w] for w in sentence.char_ids])
        return ad.concat([char, word], axis=-1)

    def encode(self, sentence: Sentence) -> Tensor:
        """Boundary vectors ``h_0..h_n`` with ``h_k = [f_k ; b_{k+1}]``."""
        x = self._drop(self.embed(sentence))
        T = x.shape[0]
        rev = np.arange(T - 1, -1, -1)
        for layer in range(self.config.encoder_layers):
            fw = ad.reshape(self._run_lstm(f"enc{layer}_fw", ad.reshape(x, (1, T, -1))),
                            (T, -1))
            xr = ad.reshape(ad.take(x, rev), (1, T, -1))
            bw = ad.take(ad.reshape(self._run_lstm(f"enc{layer}_bw", xr), (T, -1)), rev)
            x = ad.concat([fw, bw], axis=-1)
        n = T - 2
        return self._drop(ad.concat([fw[0:n + 1], bw[1:n + 2]], axis=-1))

    def span_reps(self, bound: Tensor, I, J) -> Tensor:
        p = self.params
        return (ad.matmul(ad.take(bound, I), p["span.W1.W"])
                + ad.matmul(ad.take(bound, J), p["span.W2.W"]))

    def split_logprobs(self, bound: Tensor, spans: Sequence[tuple[int, int]]) -> Tensor:
        """Teacher-forced pointing log-distributions, shape (len(spans), n+1)."""
        p = self.params
        n = bound.shape[0] - 1
        I = [s[0] for s in spans]
        J = [s[1] for s in spans]
        x = ad.reshape(self.span_reps(bound, I, J), (1, len(spans), -1))
        for layer in range(self.config.decoder_layers):
            x = self._run_lstm(f"dec{layer}", x,
                               p["dec_init.h"][layer], p["dec_init.c"][layer])
        D = ad.reshape(x, (len(spans), -1))
        dp = self._mlp("mlp_d", D)
        hp = self._mlp("mlp_h", bound)
        scores = (ad.matmul(ad.matmul(dp, p["W_dh"]), ad.transpose(hp))
                  + ad.matmul(hp, p["w_h"]))
        return ad.log_softmax(scores, split_mask(spans, n, self.config.mode))

    def syntactic_label_logprobs(self, bound: Tensor, I, J) -> Tensor:
        p = self.params
        x = ad.take(self._mlp("syn.mlp_l", bound), I)
        y = ad.take(self._mlp("syn.mlp_r", bound), J)
        logits = (ad.bilinear(x, p["syn.W_lr"], y) + ad.matmul(x, p["syn.W_l"])
                  + ad.matmul(y, p["syn.W_r"]) + p["syn.b"])
        return ad.log_softmax(logits)

    def discourse_label_logprobs(self, bound: Tensor, I, K, J) -> Tensor:
        p = self.params
        hi, hk, hj = ad.take(bound, I), ad.take(bound, K), ad.take(bound, J)
        x = self._mlp("dis.mlp_l", ad.concat([hi, hk], axis=-1))
        y = self._mlp("dis.mlp_r", ad.concat([hk, hj], axis=-1))
        logits = (ad.bilinear(x, p["dis.W_lr"], y) + ad.matmul(x, p["dis.W_l"])
                  + ad.matmul(y, p["dis.W_r"]) + p["dis.b"])
        return ad.log_softmax(logits)

    def losses(self, example) -> tuple[Tensor, Tensor]:
        """``(split loss, label loss)`` of one training example, summed."""
        bound = self.encode(example.sentence)
        if example.splits:
            spans = [(s.i, s.j) for s in example.splits]
            lp = self.split_logprobs(bound, spans)
            split_loss = ad.nll_loss(lp, [s.k for s in example.splits])
        else:
            split_loss = Tensor(0.0)
        lab = example.label_targets
        if not lab:
            return split_loss, Tensor(0.0)
        if self.config.mode == SYNTAX:
            I, J, y = zip(*lab)
            lp = self.syntactic_label_logprobs(bound, I, J)
        else:
            I, K, J, y = zip(*lab)
            lp = self.discourse_label_logprobs(bound, I, K, J)
        return split_loss, ad.nll_loss(lp, y)

    # -- inference ---------------------------------------------------------

    def encode_np(self, sentence: Sentence) -> EncoderOutput:
        bound = self.encode(sentence).value
        v = {k: t.value for k, t in self.params.items()}
        slope = self.config.leaky_slope
        keys = _leaky(bound @ v["mlp_h.W"] + v["mlp_h.b"], slope)
        out = EncoderOutput(bound, keys)
        if self.config.mode == SYNTAX:
            out.label_left = _leaky(bound @ v["syn.mlp_l.W"] + v["syn.mlp_l.b"], slope)
            out.label_right = _leaky(bound @ v["syn.mlp_r.W"] + v["syn.mlp_r.b"], slope)
        return out

    def initial_state(self, batch: int = 1) -> DecoderState:
        h = self.params["dec_init.h"].value
        c = self.params["dec_init.c"].value
        return DecoderState(np.repeat(h[None], batch, axis=0),
                            np.repeat(c[None], batch, axis=0))

    def decode_step(self, enc: EncoderOutput, state: DecoderState,
                    spans: Sequence[tuple[int, int]]) -> tuple[DecoderState, np.ndarray]:
        """Advance each decoder in the batch on its span.

        Returns the new states and masked pointing log-probabilities,
        shape (batch, n+1); inadmissible split points hold ``-inf``.
        """
        self.decoder_calls += 1
        v = {k: t.value for k, t in self.params.items()}
        sp = np.asarray(spans, dtype=np.intp).reshape(-1, 2)
        x = enc.boundaries[sp[:, 0]] @ v["span.W1.W"] + enc.boundaries[sp[:, 1]] @ v["span.W2.W"]
        hs, cs = [], []
        for layer in range(self.config.decoder_layers):
            name = f"dec{layer}"
            xw = np.ascontiguousarray((x @ v[name + ".W"] + v[name + ".b"])[:, None, :])
            H, C, _ = kernels.lstm_forward(
                xw, np.ascontiguousarray(v[name + ".U"]),
                np.ascontiguousarray(state.h[:, layer]),
                np.ascontiguousarray(state.c[:, layer]))
            x = H[:, 0]
            hs.append(x)
            cs.append(C[:, 0])
        new = DecoderState(np.stack(hs, axis=1), np.stack(cs, axis=1))
        dp = _leaky(x @ v["mlp_d.W"] + v["mlp_d.b"], self.config.leaky_slope)
        scores = (dp @ v["W_dh"]) @ enc.pointer_keys.T + enc.pointer_keys @ v["w_h"]
        if np.isnan(scores).any():
            raise ad.NumericalError("pointer scores contain NaN")
        return new, _log_softmax_np(scores, split_mask(sp, enc.n, self.config.mode))

    def label_syntactic(self, enc: EncoderOutput, I, J) -> np.ndarray:
        v = {k: t.value for k, t in self.params.items()}
        x, y = enc.label_left[np.asarray(I)], enc.label_right[np.asarray(J)]
        logits = (np.einsum("sa,alb,sb->sl", x, v["syn.W_lr"], y, optimize=True)
                  + x @ v["syn.W_l"] + y @ v["syn.W_r"] + v["syn.b"])
        return _log_softmax_np(logits, True)

    def label_discourse(self, enc: EncoderOutput, I, K, J) -> np.ndarray:
        v = {k: t.value for k, t in self.params.items()}
        slope = self.config.leaky_slope
        b = enc.boundaries
        I, K, J = (np.asarray(a, dtype=np.intp) for a in (I, K, J))
        x = _leaky(np.concatenate([b[I], b[K]], -1) @ v["dis.mlp_l.W"] + v["dis.mlp_l.b"], slope)
        y = _leaky(np.concatenate([b[K], b[J]], -1) @ v["dis.mlp_r.W"] + v["dis.mlp_r.b"], slope)
        logits = (np.einsum("sa,alb,sb->sl", x, v["dis.W_lr"], y, optimize=True)
                  + x @ v["dis.W_l"] + y @ v["dis.W_r"] + v["dis.b"])
        return _log_softmax_np(logits, True)

    # -- persistence -------------------------------------------------------

    def save(self, path, extra_meta: dict | None = None) -> None:
        tensors = self.state_dict()
        if self.pretrained is not None:
            tensors["const.pretrained"] = self.pretrained.value
        meta = {"config": asdict(self.config), "vocab": self.vocab.to_json()}
        meta.update(extra_meta or {})
        ad.save_checkpoint(path, tensors, meta)

    @classmethod
    def load(cls, path) -> "Parser":
        tensors, meta = ad.load_checkpoint(path)
        config = ModelConfig.from_dict(meta["config"])
        vocab = Vocab.from_json(meta["vocab"])
        pretrained = tensors.pop("const.pretrained", None)
        parser = cls(config, vocab, seed=0, pretrained=pretrained)
        parser.load_state_dict(tensors)
        parser.meta = meta
        return parser
