# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of ``_pykernels`` for small dense batches."""

import numpy as np
from libc.math cimport exp, log, sqrt


def batch_forward(const double[:, ::1] x, const double[::1] gamma, const double[::1] beta,
                  const double[:, ::1] weight, const double[::1] bias, double eps_std):
    cdef Py_ssize_t B = x.shape[0], d = x.shape[1], C = weight.shape[0]
    cdef Py_ssize_t i, j, c
    cdef double m, v, s, t, acc, mx, z, lz

    xhat_a = np.empty((B, d))
    logits_a = np.empty((B, C))
    probs_a = np.empty((B, C))
    logp_a = np.empty((B, C))
    ent_a = np.empty(B)
    h_a = np.empty(d)
    cdef double[:, ::1] xhat = xhat_a
    cdef double[:, ::1] logits = logits_a
    cdef double[:, ::1] probs = probs_a
    cdef double[:, ::1] logp = logp_a
    cdef double[::1] ent = ent_a
    cdef double[::1] h = h_a

    for j in range(d):
        m = 0.0
        for i in range(B):
            m += x[i, j]
        m /= B
        v = 0.0
        for i in range(B):
            t = x[i, j] - m
            v += t * t
        s = sqrt(v / B)
        if s < eps_std:
            s = eps_std
        for i in range(B):
            xhat[i, j] = (x[i, j] - m) / s

    for i in range(B):
        for j in range(d):
            h[j] = xhat[i, j] * gamma[j] + beta[j]
        mx = -1e308
        for c in range(C):
            acc = 0.0
            for j in range(d):
                acc += h[j] * weight[c, j]
            acc += bias[c]
            logits[i, c] = acc
            if acc > mx:
                mx = acc
        z = 0.0
        for c in range(C):
            t = exp(logits[i, c] - mx)
            probs[i, c] = t
            z += t
        lz = log(z)
        acc = 0.0
        for c in range(C):
            probs[i, c] /= z
            logp[i, c] = logits[i, c] - mx - lz
            acc -= probs[i, c] * logp[i, c]
        ent[i] = acc
    return xhat_a, logits_a, probs_a, logp_a, ent_a


def entropy_grad(const double[:, ::1] xhat, const double[:, ::1] probs, const double[:, ::1] logp,
                 const double[::1] ent, mask, const double[:, ::1] weight):
    cdef const unsigned char[::1] mk = np.ascontiguousarray(mask).view(np.uint8)
    cdef Py_ssize_t B = xhat.shape[0], d = xhat.shape[1], C = weight.shape[0]
    cdef Py_ssize_t i, j, c, n = 0
    cdef double loss = 0.0, acc, inv
    for i in range(B):
        if mk[i]:
            n += 1
    gg_a = np.zeros(d)
    gb_a = np.zeros(d)
    if n == 0:
        return 0.0, gg_a, gb_a
    dz_a = np.empty(C)
    cdef double[::1] gg = gg_a
    cdef double[::1] gb = gb_a
    cdef double[::1] dz = dz_a
    inv = 1.0 / n
    for i in range(B):
        if not mk[i]:
            continue
        loss += ent[i]
        for c in range(C):
            dz[c] = -probs[i, c] * (logp[i, c] + ent[i]) * inv
        for j in range(d):
            acc = 0.0
            for c in range(C):
                acc += dz[c] * weight[c, j]
            gb[j] += acc
            gg[j] += acc * xhat[i, j]
    return loss * inv, gg_a, gb_a
