"""Pure numpy/scipy implementation of the Gram and cross-kernel loops.

Same array conventions and the same pair-symmetric summation order as the
compiled module, so either backend gives exactly symmetric kernels.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist


def _exponent(a, b, offsets, inv2s2):
    na, r = a.shape[:2]
    nb = b.shape[0]
    e = np.zeros((na * r, nb * r))
    for j in range(len(inv2s2)):
        lo, hi = offsets[j], offsets[j + 1]
        e += inv2s2[j] * cdist(a[:, :, lo:hi].reshape(na * r, -1), b[:, :, lo:hi].reshape(nb * r, -1), "sqeuclidean")
    return e.reshape(na, r, nb, r)


def _reduce_pairs(terms: np.ndarray) -> np.ndarray:
    # terms[i, a, m, b]; diagonal components first, then T[a,b] + T[b,a] for a < b.
    r = terms.shape[1]
    idx = np.arange(r)
    total = terms[:, idx, :, idx].sum(axis=0)
    if r > 1:
        ua, ub = np.triu_indices(r, 1)
        off = terms[:, ua, :, ub] + terms[:, ub, :, ua]
        total = total + off.sum(axis=0)
    return total


def cross(a, mask_a, b, mask_b, offsets, inv2s2):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    terms = np.exp(-_exponent(a, b, offsets, inv2s2))
    terms *= mask_a[:, :, None, None] * mask_b[None, None, :, :]
    return np.ascontiguousarray(_reduce_pairs(terms))


def gram(comps, mask, offsets, inv2s2):
    k = cross(comps, mask, comps, mask, offsets, inv2s2)
    lower = np.tril(k)
    return lower + np.tril(k, -1).T
