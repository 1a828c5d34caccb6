# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM recurrence kernels; same contract as ``_lstm_py``.

Matrix products stay in BLAS (through ``np.dot`` into preallocated
buffers). The gate nonlinearities, the cell update and their derivatives
run as one fused loop per step, which is where numpy spends its time on
temporaries.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


def lstm_forward(const double[:, :, ::1] xw, U, h0, c0):
    cdef Py_ssize_t B = xw.shape[0], T = xw.shape[1], F = xw.shape[2]
    cdef Py_ssize_t h = F // 4
    cdef Py_ssize_t b, t, q
    cdef double c, zi, zf, zg, zo
    U = np.ascontiguousarray(U, dtype=np.float64)
    H_arr = np.empty((B, T, h))
    C_arr = np.empty((B, T, h))
    G_arr = np.empty((B, T, F))
    z_arr = np.empty((B, F))
    hp_arr = np.array(h0, dtype=np.float64, order="C", copy=True)
    cp_arr = np.array(c0, dtype=np.float64, order="C", copy=True)
    cdef double[:, :, ::1] H = H_arr
    cdef double[:, :, ::1] C = C_arr
    cdef double[:, :, ::1] G = G_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] hp = hp_arr
    cdef double[:, ::1] cp = cp_arr
    for t in range(T):
        np.dot(hp_arr, U, out=z_arr)
        with nogil:
            for b in range(B):
                for q in range(h):
                    zi = _sigmoid(xw[b, t, q] + z[b, q])
                    zf = _sigmoid(xw[b, t, h + q] + z[b, h + q])
                    zg = tanh(xw[b, t, 2 * h + q] + z[b, 2 * h + q])
                    zo = _sigmoid(xw[b, t, 3 * h + q] + z[b, 3 * h + q])
                    G[b, t, q] = zi
                    G[b, t, h + q] = zf
                    G[b, t, 2 * h + q] = zg
                    G[b, t, 3 * h + q] = zo
                    c = zf * cp[b, q] + zi * zg
                    cp[b, q] = c
                    C[b, t, q] = c
                    hp[b, q] = zo * tanh(c)
                    H[b, t, q] = hp[b, q]
    return H_arr, C_arr, G_arr


def lstm_backward(const double[:, :, ::1] dH, U,
                  const double[:, ::1] h0, const double[:, ::1] c0,
                  H, const double[:, :, ::1] C, const double[:, :, ::1] G):
    cdef Py_ssize_t B = dH.shape[0], T = dH.shape[1], h = dH.shape[2]
    cdef Py_ssize_t F = 4 * h
    cdef Py_ssize_t b, t, q
    cdef double i, f, gg, o, tc, dh, dc, cprev
    UT = np.ascontiguousarray(np.asarray(U, dtype=np.float64).T)
    dxw_arr = np.empty((B, T, F))
    dz_arr = np.empty((B, F))
    dhn_arr = np.zeros((B, h))
    dcn_arr = np.zeros((B, h))
    cdef double[:, :, ::1] dxw = dxw_arr
    cdef double[:, ::1] dz = dz_arr
    cdef double[:, ::1] dh_next = dhn_arr
    cdef double[:, ::1] dc_next = dcn_arr
    for t in range(T - 1, -1, -1):
        with nogil:
            for b in range(B):
                for q in range(h):
                    i = G[b, t, q]
                    f = G[b, t, h + q]
                    gg = G[b, t, 2 * h + q]
                    o = G[b, t, 3 * h + q]
                    tc = tanh(C[b, t, q])
                    cprev = c0[b, q] if t == 0 else C[b, t - 1, q]
                    dh = dH[b, t, q] + dh_next[b, q]
                    dc = dc_next[b, q] + dh * o * (1.0 - tc * tc)
                    dz[b, q] = dc * gg * i * (1.0 - i)
                    dz[b, h + q] = dc * cprev * f * (1.0 - f)
                    dz[b, 2 * h + q] = dc * i * (1.0 - gg * gg)
                    dz[b, 3 * h + q] = dh * tc * o * (1.0 - o)
                    dc_next[b, q] = dc * f
                for q in range(F):
                    dxw[b, t, q] = dz[b, q]
        np.dot(dz_arr, UT, out=dhn_arr)
    if T == 0:
        return dxw_arr, np.zeros((h, F)), dhn_arr, dcn_arr
    # one GEMM for the recurrent weight gradient over all steps
    h_prev = np.concatenate([np.asarray(h0)[:, None, :], np.asarray(H)[:, :T - 1, :]], axis=1)
    dU_arr = h_prev.reshape(B * T, h).T @ dxw_arr.reshape(B * T, F)
    return dxw_arr, dU_arr, dhn_arr, dcn_arr
