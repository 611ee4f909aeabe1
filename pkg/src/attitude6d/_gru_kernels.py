"""GRU layer forward/backward over a batch of sequences.

Two interchangeable implementations share one signature: ``*_loops`` are
scalar loops compiled by numba, ``*_numpy`` vectorize over the batch and walk
time step by step. ``forward``/``backward`` pick one according to the backend
flag and the hidden width. Gate order in the stacked weight matrices is
(reset, update, candidate).

Cell:
    r  = σ(W_r x + b_ir + U_r h + b_hr)
    z  = σ(W_z x + b_iz + U_z h + b_hz)
    n  = tanh(W_n x + b_in + r ∘ (U_n h + b_hn))
    h' = (1 − z) ∘ n + z ∘ h
"""
import math

import numpy as np

from ._backend import USE_NUMBA, kernel


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def forward_numpy(w_ih, w_hh, b_ih, b_hh, x, h0):
    B, T, _ = x.shape
    H = w_hh.shape[1]
    hs = np.empty((B, T, H))
    r_all = np.empty((B, T, H))
    z_all = np.empty((B, T, H))
    n_all = np.empty((B, T, H))
    ghn_all = np.empty((B, T, H))
    h = h0
    for t in range(T):
        gi = x[:, t, :] @ w_ih.T + b_ih
        gh = h @ w_hh.T + b_hh
        r = _sigmoid(gi[:, :H] + gh[:, :H])
        z = _sigmoid(gi[:, H:2 * H] + gh[:, H:2 * H])
        ghn = gh[:, 2 * H:]
        n = np.tanh(gi[:, 2 * H:] + r * ghn)
        h = (1.0 - z) * n + z * h
        hs[:, t] = h
        r_all[:, t] = r
        z_all[:, t] = z
        n_all[:, t] = n
        ghn_all[:, t] = ghn
    return hs, r_all, z_all, n_all, ghn_all


def backward_numpy(w_ih, w_hh, x, h0, hs, r, z, n, ghn, dhs, dh_last, need_dx):
    B, T, I = x.shape
    H = w_hh.shape[1]
    dw_ih = np.zeros_like(w_ih)
    dw_hh = np.zeros_like(w_hh)
    db_ih = np.zeros(3 * H)
    db_hh = np.zeros(3 * H)
    dx = np.zeros((B, T, I))
    dh = dh_last.copy()
    dgi = np.empty((B, 3 * H))
    dgh = np.empty((B, 3 * H))
    for t in range(T - 1, -1, -1):
        dh = dh + dhs[:, t]
        h_prev = hs[:, t - 1] if t > 0 else h0
        zt = z[:, t]
        nt = n[:, t]
        rt = r[:, t]
        dn = dh * (1.0 - zt)
        dz = dh * (h_prev - nt)
        dan = dn * (1.0 - nt * nt)
        dr = dan * ghn[:, t]
        dgi[:, :H] = dr * rt * (1.0 - rt)
        dgi[:, H:2 * H] = dz * zt * (1.0 - zt)
        dgi[:, 2 * H:] = dan
        dgh[:, :2 * H] = dgi[:, :2 * H]
        dgh[:, 2 * H:] = dan * rt
        if need_dx:
            dx[:, t] = dgi @ w_ih
        dw_ih += dgi.T @ x[:, t]
        db_ih += dgi.sum(axis=0)
        dw_hh += dgh.T @ h_prev
        db_hh += dgh.sum(axis=0)
        dh = dh * zt + dgh @ w_hh
    return dx, dh, dw_ih, dw_hh, db_ih, db_hh


@kernel
def forward_loops(w_ih, w_hh, b_ih, b_hh, x, h0):
    B, T, I = x.shape
    H = w_hh.shape[1]
    hs = np.empty((B, T, H))
    r_all = np.empty((B, T, H))
    z_all = np.empty((B, T, H))
    n_all = np.empty((B, T, H))
    ghn_all = np.empty((B, T, H))
    h = np.empty(H)
    h_new = np.empty(H)
    for b in range(B):
        for j in range(H):
            h[j] = h0[b, j]
        for t in range(T):
            for j in range(H):
                ar = b_ih[j] + b_hh[j]
                az = b_ih[H + j] + b_hh[H + j]
                an = b_ih[2 * H + j]
                gn = b_hh[2 * H + j]
                for i in range(I):
                    xi = x[b, t, i]
                    ar += w_ih[j, i] * xi
                    az += w_ih[H + j, i] * xi
                    an += w_ih[2 * H + j, i] * xi
                for k in range(H):
                    hk = h[k]
                    ar += w_hh[j, k] * hk
                    az += w_hh[H + j, k] * hk
                    gn += w_hh[2 * H + j, k] * hk
                rj = 1.0 / (1.0 + math.exp(-ar))
                zj = 1.0 / (1.0 + math.exp(-az))
                nj = math.tanh(an + rj * gn)
                h_new[j] = (1.0 - zj) * nj + zj * h[j]
                r_all[b, t, j] = rj
                z_all[b, t, j] = zj
                n_all[b, t, j] = nj
                ghn_all[b, t, j] = gn
            for j in range(H):
                h[j] = h_new[j]
                hs[b, t, j] = h_new[j]
    return hs, r_all, z_all, n_all, ghn_all


@kernel
def backward_loops(w_ih, w_hh, x, h0, hs, r, z, n, ghn, dhs, dh_last, need_dx):
    B, T, I = x.shape
    H = w_hh.shape[1]
    dw_ih = np.zeros_like(w_ih)
    dw_hh = np.zeros_like(w_hh)
    db_ih = np.zeros(3 * H)
    db_hh = np.zeros(3 * H)
    dx = np.zeros((B, T, I))
    dh0 = np.empty((B, H))
    dh = np.empty(H)
    dh_next = np.empty(H)
    h_prev = np.empty(H)
    dgi = np.empty(3 * H)
    dgh = np.empty(3 * H)
    for b in range(B):
        for j in range(H):
            dh[j] = dh_last[b, j]
        for t in range(T - 1, -1, -1):
            for j in range(H):
                dh[j] += dhs[b, t, j]
                h_prev[j] = hs[b, t - 1, j] if t > 0 else h0[b, j]
            for j in range(H):
                zt = z[b, t, j]
                nt = n[b, t, j]
                rt = r[b, t, j]
                dn = dh[j] * (1.0 - zt)
                dz = dh[j] * (h_prev[j] - nt)
                dan = dn * (1.0 - nt * nt)
                dr = dan * ghn[b, t, j]
                dgi[j] = dr * rt * (1.0 - rt)
                dgi[H + j] = dz * zt * (1.0 - zt)
                dgi[2 * H + j] = dan
                dgh[j] = dgi[j]
                dgh[H + j] = dgi[H + j]
                dgh[2 * H + j] = dan * rt
            for g in range(3 * H):
                db_ih[g] += dgi[g]
                db_hh[g] += dgh[g]
                for i in range(I):
                    dw_ih[g, i] += dgi[g] * x[b, t, i]
                for k in range(H):
                    dw_hh[g, k] += dgh[g] * h_prev[k]
            if need_dx:
                for i in range(I):
                    acc = 0.0
                    for g in range(3 * H):
                        acc += dgi[g] * w_ih[g, i]
                    dx[b, t, i] = acc
            for k in range(H):
                acc = dh[k] * z[b, t, k]
                for g in range(3 * H):
                    acc += dgh[g] * w_hh[g, k]
                dh_next[k] = acc
            for k in range(H):
                dh[k] = dh_next[k]
        for j in range(H):
            dh0[b, j] = dh[j]
    return dx, dh0, dw_ih, dw_hh, db_ih, db_hh


# Above this width the batched matrix products (BLAS) beat the compiled loops;
# see benchmarks/bench_kernels.py.
LOOP_MAX_HIDDEN = 24


def _use_loops(w_hh):
    return USE_NUMBA and w_hh.shape[1] <= LOOP_MAX_HIDDEN


def forward(w_ih, w_hh, b_ih, b_hh, x, h0):
    impl = forward_loops if _use_loops(w_hh) else forward_numpy
    return impl(w_ih, w_hh, b_ih, b_hh, x, h0)


def backward(w_ih, w_hh, x, h0, hs, r, z, n, ghn, dhs, dh_last, need_dx):
    impl = backward_loops if _use_loops(w_hh) else backward_numpy
    return impl(w_ih, w_hh, x, h0, hs, r, z, n, ghn, dhs, dh_last, need_dx)
