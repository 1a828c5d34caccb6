"""A small dense-tensor engine with reverse-mode differentiation.

Operations record themselves on the active :class:`Tape` when any input
requires a gradient; with no active tape they only compute values, which
is how inference runs.

    >>> W = Tensor(np.eye(2), requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = sum_all(matmul(Tensor(np.ones((1, 2))), W))
    >>> tape.backward(loss)
    >>> W.grad
    array([[1., 1.],
           [1., 1.]])
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels

DTYPE = np.float64


class ShapeError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"<Tensor{tag} shape={self.shape}>"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def zero_grad(self) -> None:
        self.grad = None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# tape


_active: list["Tape"] = []


class Tape:
    """Ordered record of operations; :meth:`backward` may run once."""

    def __init__(self):
        self.records: list[tuple[Tensor, tuple, Callable]] = []
        self.used = False

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)

    def __len__(self) -> int:
        return len(self.records)

    def backward(self, loss: Tensor) -> None:
        if self.used:
            raise RuntimeError("tape already consumed; run the forward pass again")
        if loss.value.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        self.used = True
        loss.grad = np.ones_like(loss.value)
        for out, inputs, fn in reversed(self.records):
            g = out.grad
            if g is None:
                continue
            for inp, gi in zip(inputs, fn(g)):
                if gi is None or not inp.requires_grad:
                    continue
                if inp.grad is None:
                    inp.grad = np.array(gi, dtype=DTYPE, copy=True)
                else:
                    inp.grad += gi
            if not out.name:  # free intermediate buffers
                out.grad = None
        self.records.clear()


def _result(value, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs)
    if needs and _active:
        _active[-1].records.append((out, tuple(inputs), backward))
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.value + b.value
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from None
    return _result(value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.value * b.value
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from None
    return _result(value, (a, b), lambda g: (_unbroadcast(g * b.value, a.shape),
                                             _unbroadcast(g * a.value, b.shape)))


def matmul(a, b) -> Tensor:
    """``(m, k) @ (k, n)`` or ``(m, k) @ (k,)``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    value = a.value @ b.value
    if b.value.ndim == 1:
        return _result(value, (a, b), lambda g: (np.outer(g, b.value), a.value.T @ g))
    return _result(value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.value.T, (a,), lambda g: (g.T,))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        value = a.value.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None
    return _result(value, (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        value = np.concatenate([t.value for t in ts], axis=axis)
    except ValueError:
        raise ShapeError(
            f"concat: shapes {[t.shape for t in ts]} differ off axis {axis}") from None
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _result(value, ts, lambda g: tuple(np.split(g, sizes, axis=axis)))


def getitem(a, index) -> Tensor:
    """Basic (slice) indexing."""
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.value)
        full[index] += g
        return (full,)

    return _result(a.value[index], (a,), backward)


def take(a, indices, axis: int = 0) -> Tensor:
    """Gather along ``axis``; embedding lookup is ``take(table, ids)``."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    n = a.shape[axis]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"take: index out of range for axis of size {n}")

    def backward(g):
        full = np.zeros_like(a.value)
        np.add.at(full, (slice(None),) * (axis % a.value.ndim) + (idx,), g)
        return (full,)

    return _result(np.take(a.value, idx, axis=axis), (a,), backward)


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = 0.5 * (np.tanh(0.5 * a.value) + 1.0)
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def leaky_relu(a, slope: float) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.value > 0, 1.0, slope)
    return _result(a.value * scale, (a,), lambda g: (g * scale,))


def log_softmax(a, mask=None) -> Tensor:
    """Log-softmax over the last axis.

    ``mask`` (boolean, broadcastable) marks admissible entries; the rest get
    ``-inf`` and exactly zero probability and gradient.
    """
    a = as_tensor(a)
    if a.value.ndim == 0 or a.shape[-1] == 0:
        raise ShapeError(f"log_softmax over an empty axis (shape {a.shape})")
    x = a.value
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not mask.any(axis=-1).all():
            raise ShapeError("log_softmax: a row has no admissible entry")
        x = np.where(mask, x, -np.inf)
    m = x.max(axis=-1, keepdims=True)
    shifted = x - m
    y = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    p = np.exp(y)

    def backward(g):
        g = np.where(np.isfinite(y), g, 0.0)
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return _result(y, (a,), backward)


def nll_loss(logp, targets) -> Tensor:
    """Summed negative log-likelihood of ``targets`` under rows of ``logp``."""
    logp = as_tensor(logp)
    t = np.asarray(targets, dtype=np.intp)
    if logp.value.ndim != 2 or len(t) != logp.shape[0]:
        raise ShapeError(f"nll_loss: log-probs {logp.shape} vs targets {t.shape}")
    rows = np.arange(len(t))
    picked = logp.value[rows, t]
    if not np.all(np.isfinite(picked)):
        raise NumericalError("nll_loss: target has zero probability")

    def backward(g):
        full = np.zeros_like(logp.value)
        full[rows, t] = -g
        return (full,)

    return _result(-picked.sum(), (logp,), backward)


def bilinear(x, W, y) -> Tensor:
    """``out[s, l] = sum_ab x[s, a] W[a, l, b] y[s, b]``."""
    x, W, y = as_tensor(x), as_tensor(W), as_tensor(y)
    if (x.value.ndim != 2 or y.value.ndim != 2 or W.value.ndim != 3
            or x.shape[0] != y.shape[0] or W.shape[0] != x.shape[1]
            or W.shape[2] != y.shape[1]):
        raise ShapeError(
            f"bilinear: shapes {x.shape}, {W.shape}, {y.shape} are incompatible")
    xW = np.einsum("sa,alb->slb", x.value, W.value)
    value = np.einsum("slb,sb->sl", xW, y.value)

    def backward(g):
        Wy = np.einsum("alb,sb->sal", W.value, y.value)
        dx = np.einsum("sal,sl->sa", Wy, g)
        dW = np.einsum("sa,sl,sb->alb", x.value, g, y.value, optimize=True)
        dy = np.einsum("slb,sl->sb", xW, g)
        return dx, dW, dy

    return _result(value, (x, W, y), backward)


def lstm(x, W, U, b, h0, c0) -> Tensor:
    """Single-direction LSTM over ``x`` of shape ``(B, T, in)``.

    ``h0``/``c0`` have shape ``(B, h)`` or ``(h,)`` (shared by the batch).
    Returns the hidden states, shape ``(B, T, h)``.
    """
    x, W, U, b, h0, c0 = map(as_tensor, (x, W, U, b, h0, c0))
    B, T, d_in = x.shape
    h = U.shape[0]
    if W.shape != (d_in, 4 * h) or U.shape != (h, 4 * h) or b.shape != (4 * h,):
        raise ShapeError(f"lstm: input {x.shape} with W {W.shape}, U {U.shape}, b {b.shape}")
    hv = np.ascontiguousarray(np.broadcast_to(h0.value, (B, h)))
    cv = np.ascontiguousarray(np.broadcast_to(c0.value, (B, h)))
    xw = np.ascontiguousarray((x.value.reshape(B * T, d_in) @ W.value + b.value)
                              .reshape(B, T, 4 * h))
    H, C, G = kernels.lstm_forward(xw, np.ascontiguousarray(U.value), hv, cv)

    def backward(g):
        dxw, dU, dh0, dc0 = kernels.lstm_backward(
            np.ascontiguousarray(g), np.ascontiguousarray(U.value), hv, cv, H, C, G)
        flat = dxw.reshape(B * T, 4 * h)
        dx = (flat @ W.value.T).reshape(B, T, d_in)
        dW = x.value.reshape(B * T, d_in).T @ flat
        return (dx, dW, dU, flat.sum(axis=0),
                _unbroadcast(dh0, h0.shape), _unbroadcast(dc0, c0.shape))

    return _result(H, (x, W, U, b, h0, c0), backward)


# ---------------------------------------------------------------------------
# gradient utilities


def global_norm(params: Iterable[Tensor]) -> float:
    return math.sqrt(sum(float((p.grad * p.grad).sum())
                         for p in params if p.grad is not None))


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    norm = global_norm(params)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


def finite_difference(f: Callable[[], float], param: Tensor, eps: float = 1e-5,
                      indices=None) -> np.ndarray:
    """Central differences of ``f()`` w.r.t. entries of ``param``."""
    grad = np.zeros_like(param.value)
    flat = param.value.reshape(-1)
    gflat = grad.reshape(-1)
    for n in range(flat.size) if indices is None else indices:
        orig = flat[n]
        flat[n] = orig + eps
        hi = f()
        flat[n] = orig - eps
        lo = f()
        flat[n] = orig
        gflat[n] = (hi - lo) / (2 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-10) -> float:
    """``|a - b| / max(|a| + |b|, floor)`` in the 2-norm."""
    den = max(float(np.linalg.norm(a) + np.linalg.norm(b)), floor)
    return float(np.linalg.norm(a - b)) / den


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Adam with a stepwise exponential learning-rate decay.

    The rate used for update ``t`` (0-based) is
    ``base_lr * decay_rate ** (t // decay_every)``.
    """

    def __init__(self, params: dict, base_lr: float = 0.002, decay_rate: float = 0.75,
                 decay_every: int = 5000, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.base_lr = base_lr
        self.decay_rate = decay_rate
        self.decay_every = decay_every
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def lr(self, step: int | None = None) -> float:
        t = self.step_count if step is None else step
        return self.base_lr * self.decay_rate ** (t // self.decay_every)

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                bad = int(np.count_nonzero(~np.isfinite(p.grad)))
                raise NumericalError(
                    f"non-finite gradient in {name} ({bad} entries) at step {self.step_count}")
        lr = self.lr()
        t = self.step_count + 1
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.value)
            if self.weight_decay:
                g = g + self.weight_decay * p.value
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if not np.all(np.isfinite(p.value)):
                raise NumericalError(f"update made {name} non-finite at step {t}")
        self.step_count = t

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


# ---------------------------------------------------------------------------
# checkpoints
#
# Layout: the magic line, one line of JSON (sorted keys) holding ``meta`` and
# the tensor table [{"name", "shape", "offset"}], then the tensors as
# little-endian float64 in table order.  ``offset`` counts values, not bytes.

CHECKPOINT_MAGIC = b"SPLITPARSE-CHECKPOINT 1\n"


def save_checkpoint(path, tensors: dict, meta: dict) -> None:
    table, chunks, offset = [], [], 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype="<f8", order="C")  # keeps 0-d shapes
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    header = json.dumps({"meta": meta, "tensors": table}, sort_keys=True,
                        ensure_ascii=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header.encode("ascii") + b"\n")
        for chunk in chunks:
            fh.write(chunk)


def load_checkpoint(path) -> tuple[dict, dict]:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint (bad magic line)")
    start = len(CHECKPOINT_MAGIC)
    end = data.index(b"\n", start)
    header = json.loads(data[start:end])
    values = np.frombuffer(data, dtype="<f8", offset=end + 1)
    tensors = {}
    for entry in header["tensors"]:
        size = int(np.prod(entry["shape"], dtype=np.int64))
        o = entry["offset"]
        shape = tuple(entry["shape"])
        tensors[entry["name"]] = values[o:o + size].reshape(shape).astype(DTYPE)
    return tensors, header["meta"]
