"""Independent reference computations used by the tests.

Everything here works pointwise from the sparse term dictionary with plain
float64 and brute-force combinatorics, sharing no code paths with the
dense spectral implementation beyond reading ``a.terms``.
"""
from itertools import combinations, permutations

import numpy as np


def bubble_sign(seq):
    """Sign of the sorting permutation, by counting adjacent swaps."""
    seq = list(seq)
    if len(set(seq)) < len(seq):
        return 0
    swaps = 0
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                swaps += 1
    return -1 if swaps % 2 else 1


def subsets(n, p):
    return list(combinations(range(1, n + 1), p))


def components(a, x):
    """{(I, J): value at x} summed directly over Fourier terms."""
    out = {}
    x = np.asarray(x, dtype=float)
    for (I, J, k), c in a.terms.items():
        out[(I, J)] = out.get((I, J), 0) + complex(c) * np.exp(2j * np.pi * np.dot(k, x))
    return out


def as_matrix(comp, n, p, q):
    rows, cols = subsets(n, p), subsets(n, q)
    M = np.zeros((len(rows), len(cols)), dtype=complex)
    for (I, J), v in comp.items():
        M[rows.index(I), cols.index(J)] += v
    return M


def pointwise_wedge(ca, cb):
    """Wedge of component dictionaries, signs from bubble sort."""
    out = {}
    for (I1, J1), v1 in ca.items():
        for (I2, J2), v2 in cb.items():
            s = bubble_sign(I1 + I2) * bubble_sign(J1 + J2)
            if s:
                key = (tuple(sorted(I1 + I2)), tuple(sorted(J1 + J2)))
                out[key] = out.get(key, 0) + s * v1 * v2
    return out


def del_at(a, x):
    """(del a)(x) computed term by term: sum_j 2 pi i k_j c e^{..} dx^j ^ dx^I."""
    out = {}
    x = np.asarray(x, dtype=float)
    n = a.space.n
    for (I, J, k), c in a.terms.items():
        e = complex(c) * np.exp(2j * np.pi * np.dot(k, x))
        for j in range(1, n + 1):
            s = bubble_sign((j,) + I)
            if s and k[j - 1]:
                key = (tuple(sorted((j,) + I)), J)
                out[key] = out.get(key, 0) + s * 2j * np.pi * k[j - 1] * e
    return out


def minor(M, rows, cols):
    if not rows:
        return 1.0
    return float(np.linalg.det(M[np.ix_([r - 1 for r in rows], [c - 1 for c in cols])]))


def metric_pairing(ca, cb, metric):
    """g(a, b) pointwise (bilinear) from inverse-metric minors."""
    Ginv = np.linalg.inv(metric)
    total = 0
    for (I, J), va in ca.items():
        for (K, L), vb in cb.items():
            if len(I) == len(K) and len(J) == len(L):
                total += va * vb * minor(Ginv, I, K) * minor(Ginv, J, L)
    return total


def exterior_power_bruteforce(A, p):
    """Minor matrix via the Leibniz formula over all permutations."""
    n = A.shape[0]
    sets = subsets(n, p)
    out = np.zeros((len(sets), len(sets)))
    for a, I in enumerate(sets):
        for b, J in enumerate(sets):
            total = 0.0
            for perm in permutations(range(p)):
                term = bubble_sign(perm)
                for r, c in zip(I, (J[i] for i in perm)):
                    term *= A[r - 1, c - 1]
                total += term
            out[a, b] = total
    return out


def pullback_at(A, b, a, x):
    """(gamma^* a)(x) for gamma(x) = A x + b, via the chain rule on minors."""
    n = a.space.n
    y = (A @ np.asarray(x, dtype=float) + b) % 1.0
    comp = components(a, y)
    out = {}
    for (I, J), v in comp.items():
        for K in subsets(n, len(I)):
            for L in subsets(n, len(J)):
                # d(Ax)^I = sum_K det A[I, K] dx^K
                w = v * minor(A.astype(float), I, K) * minor(A.astype(float), J, L)
                out[(K, L)] = out.get((K, L), 0) + w
    return out


def dense_del_matrix(n, B, p, q):
    """Matrix of del from (p-1, q) to (p, q) on coefficient vectors laid out
    as (I, J, k_1, ..., k_n) in C order, built entry by entry."""
    from itertools import product

    freqs = list(product(range(-B, B + 1), repeat=n))
    src_I, dst_I, Js = subsets(n, p - 1), subsets(n, p), subsets(n, q)
    nf = len(freqs)
    M = np.zeros((len(dst_I) * len(Js) * nf, len(src_I) * len(Js) * nf), dtype=complex)
    for a, I in enumerate(src_I):
        for b, _ in enumerate(Js):
            for f, k in enumerate(freqs):
                col = (a * len(Js) + b) * nf + f
                for j in range(1, n + 1):
                    s = bubble_sign((j,) + I)
                    if s and k[j - 1]:
                        row = (dst_I.index(tuple(sorted((j,) + I))) * len(Js) + b) * nf + f
                        M[row, col] += s * 2j * np.pi * k[j - 1]
    return M
