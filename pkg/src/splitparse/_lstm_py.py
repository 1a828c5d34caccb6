"""Reference LSTM recurrence kernels in numpy.

Gate layout along the last axis is ``[input, forget, cell, output]``.
Inputs arrive already projected: ``xw[b, t] = x[b, t] @ W + bias``.
"""
import numpy as np


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def lstm_forward(xw, U, h0, c0):
    """Run the recurrence over ``T`` steps.

    Returns hidden states ``H`` and cell states ``C`` of shape ``(B, T, h)``
    and the activated gates ``G`` of shape ``(B, T, 4h)`` for the backward
    pass.
    """
    B, T, four_h = xw.shape
    h = four_h // 4
    H = np.empty((B, T, h))
    C = np.empty((B, T, h))
    G = np.empty((B, T, four_h))
    h_prev, c_prev = h0, c0
    for t in range(T):
        z = xw[:, t] + h_prev @ U
        g = G[:, t]
        g[:, :2 * h] = _sigmoid(z[:, :2 * h])
        g[:, 2 * h:3 * h] = np.tanh(z[:, 2 * h:3 * h])
        g[:, 3 * h:] = _sigmoid(z[:, 3 * h:])
        c_prev = g[:, h:2 * h] * c_prev + g[:, :h] * g[:, 2 * h:3 * h]
        h_prev = g[:, 3 * h:] * np.tanh(c_prev)
        C[:, t] = c_prev
        H[:, t] = h_prev
    return H, C, G


def lstm_backward(dH, U, h0, c0, H, C, G):
    """Backpropagation through time.

    Returns ``(dxw, dU, dh0, dc0)``.
    """
    B, T, h = dH.shape
    dxw = np.empty((B, T, 4 * h))
    dU = np.zeros_like(U)
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    for t in range(T - 1, -1, -1):
        g = G[:, t]
        i, f, gg, o = g[:, :h], g[:, h:2 * h], g[:, 2 * h:3 * h], g[:, 3 * h:]
        c_prev = C[:, t - 1] if t > 0 else c0
        h_prev = H[:, t - 1] if t > 0 else h0
        tc = np.tanh(C[:, t])
        dh = dH[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dxw[:, t]
        dz[:, :h] = dc * gg * i * (1.0 - i)
        dz[:, h:2 * h] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * h:3 * h] = dc * i * (1.0 - gg * gg)
        dz[:, 3 * h:] = dh * tc * o * (1.0 - o)
        dU += h_prev.T @ dz
        dh_next = dz @ U.T
        dc_next = dc * f
    return dxw, dU, dh_next, dc_next
