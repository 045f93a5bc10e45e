"""Multi-index combinatorics for exterior algebra.

Multi-indices are strictly increasing tuples of 1-based coordinate labels.
Signs are always produced on demand; nothing signed is ever stored.
"""
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import ValidationError


def check_multi_index(index, n):
    index = tuple(int(i) for i in index)
    if len(index) > n:
        raise ValidationError(f"multi-index {index} longer than dimension {n}")
    if any(i < 1 or i > n for i in index):
        raise ValidationError(f"multi-index {index} has entries outside [1, {n}]")
    if any(a >= b for a, b in zip(index, index[1:])):
        raise ValidationError(f"multi-index {index} is not strictly increasing")
    return index


def permutation_sign(seq):
    """Sign of the permutation that sorts ``seq`` (entries must be distinct)."""
    seq = list(seq)
    inversions = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def index_sets(n, p):
    """All multi-indices of length ``p`` in dimension ``n``, lexicographic."""
    if p < 0 or p > n:
        return ()
    return tuple(combinations(range(1, n + 1), p))


@lru_cache(maxsize=None)
def index_position(n, p):
    return {I: pos for pos, I in enumerate(index_sets(n, p))}


def complement_sign(index, n):
    """Return ``(I', sign)`` with I' the complement of I and
    ``dx^I ^ dx^I' = sign * dx^1 ^ ... ^ dx^n``."""
    index = check_multi_index(index, n)
    rest = tuple(i for i in range(1, n + 1) if i not in index)
    return rest, permutation_sign(index + rest)


def merge(a, b):
    """Merge two multi-indices: ``dx^a ^ dx^b = sign * dx^merged``.

    Returns ``(None, 0)`` when the indices overlap.
    """
    if set(a) & set(b):
        return None, 0
    return tuple(sorted(a + b)), permutation_sign(a + b)


@lru_cache(maxsize=None)
def insertion_table(n, p):
    """Entries ``(src, j, dst, sign)`` with ``dx^j ^ dx^I_src = sign * dx^I_dst``.

    ``j`` is 1-based; ``src`` and ``dst`` are positions in ``index_sets``.
    """
    if p + 1 > n:
        return ()
    dst_pos = index_position(n, p + 1)
    table = []
    for src, I in enumerate(index_sets(n, p)):
        for j in range(1, n + 1):
            if j in I:
                continue
            merged, sign = merge((j,), I)
            table.append((src, j, dst_pos[merged], sign))
    return tuple(table)


def exterior_power(matrix, p):
    """Matrix of p-by-p minors, ``M[I, K] = det(matrix[I, K])``.

    If ``dx^i -> sum_j A[i, j] dx^j`` then ``dx^I -> sum_K M[I, K] dx^K``.
    Integer input yields an exact integer result.
    """
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    sets = index_sets(n, p)
    exact = np.issubdtype(matrix.dtype, np.integer)
    out = np.zeros((len(sets), len(sets)), dtype=object if exact else float)
    for a, I in enumerate(sets):
        rows = [i - 1 for i in I]
        for b, K in enumerate(sets):
            cols = [k - 1 for k in K]
            sub = matrix[np.ix_(rows, cols)]
            out[a, b] = _int_det(sub) if exact else (np.linalg.det(sub) if p else 1.0)
    return out.astype(np.int64) if exact else out


def _int_det(sub):
    # Laplace expansion; sub-matrices here are at most 5x5
    size = sub.shape[0]
    if size == 0:
        return 1
    if size == 1:
        return int(sub[0, 0])
    total = 0
    for c in range(size):
        if sub[0, c]:
            minor = np.delete(np.delete(sub, 0, axis=0), c, axis=1)
            total += (-1) ** c * int(sub[0, c]) * _int_det(minor)
    return total
