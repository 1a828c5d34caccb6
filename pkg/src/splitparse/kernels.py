"""Backend selection for the LSTM recurrence kernels.

The compiled extension is used when it was built; set
``SPLITPARSE_PURE_PYTHON=1`` to force the numpy fallback.

Only the backward pass is taken from the extension. Its compiled forward
is slower than numpy on batched shapes (numpy's vectorized tanh beats
scalar libm calls), see ``benchmarks/bench_kernels.py``.
"""
import os

from . import _lstm_py

BACKEND = "python"
if os.environ.get("SPLITPARSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _lstm as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _lstm_py
else:
    _impl = _lstm_py

lstm_forward = _lstm_py.lstm_forward
lstm_backward = _impl.lstm_backward
