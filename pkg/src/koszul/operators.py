"""Differential operators on (p,q)-forms over a constant-metric torus.

del_ differentiates into the first exterior slot, delbar into the second.
Adjoints use the star conjugation d* = (-1)^p star^{-1} d star; the twisted
star differs from the bidegree star by the constant volume scale, which
cancels between star and its inverse.

All operators here are real (they commute with complex conjugation), so the
``real`` flag of the input carries over to the output.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegreeError, ValidationError
from .exterior import complement_sign, exterior_power, index_position, index_sets, insertion_table
from .forms import DTYPE, TWO_PI_I, FlatTorusSpace, PQForm, VolumeFrame, evaluate

ORTHONORMAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OperatorContext:
    """Fixed orthonormal change of frame P (P^T P = metric) for one space.

    The orthonormal coframe is alpha = P dx.
    """

    space: FlatTorusSpace
    orthonormal_change: np.ndarray
    vol: VolumeFrame

    @property
    def inverse_change(self):
        return _frame_matrices(self.space)[1]

    def to_frame(self, coeffs, p, q):
        """Coefficients w.r.t. dx^I (x) dx^J -> w.r.t. alpha_A (x) alpha_B."""
        frame_of = _frame_matrices(self.space)[2]
        return _transport(coeffs, frame_of[p], frame_of[q])

    def from_frame(self, coeffs, p, q):
        back = _frame_matrices(self.space)[3]
        return _transport(coeffs, back[p], back[q])


def _transport(coeffs, left, right):
    out = np.tensordot(left.T, coeffs, axes=([1], [0]))
    out = np.tensordot(right.T, np.moveaxis(out, 1, 0), axes=([1], [0]))
    return np.moveaxis(out, 0, 1)


@lru_cache(maxsize=None)
def _frame_matrices(space):
    G = space.metric
    n = space.n
    if np.array_equal(G, np.eye(n)):
        P = np.eye(n)
        Q = np.eye(n)
    else:
        P = np.linalg.cholesky(G).T
        Q = np.linalg.inv(P)
    to_frame = tuple(
        np.eye(len(index_sets(n, p)), dtype=DTYPE) if np.array_equal(Q, np.eye(n))
        else exterior_power(Q, p).astype(DTYPE)
        for p in range(n + 1)
    )
    back = tuple(
        np.eye(len(index_sets(n, p)), dtype=DTYPE) if np.array_equal(P, np.eye(n))
        else exterior_power(P, p).astype(DTYPE)
        for p in range(n + 1)
    )
    return P, Q, to_frame, back


@lru_cache(maxsize=None)
def context(space: FlatTorusSpace) -> OperatorContext:
    P = _frame_matrices(space)[0]
    vol = VolumeFrame.of(space)
    if not np.allclose(P.T @ P, space.metric, rtol=0, atol=ORTHONORMAL_TOL * max(1.0, np.abs(space.metric).max())):
        raise ValidationError("orthonormal change does not reproduce the metric")
    if abs(abs(np.linalg.det(P)) - vol.scale) > ORTHONORMAL_TOL * vol.scale:
        raise ValidationError("volume scale inconsistent with orthonormal change")
    P = P.copy()
    P.setflags(write=False)
    return OperatorContext(space, P, vol)


# first-order operators


def _check_directions(n, directions):
    if directions is None:
        return tuple(range(1, n + 1))
    directions = tuple(int(j) for j in directions)
    if any(j < 1 or j > n for j in directions):
        raise ValidationError(f"directions {directions} outside 1..{n}")
    return directions


def _exterior_derivative(coeffs, space, p, directions, differentiate=True):
    """Apply sum_j dx^j ^ (d/dx^j) to the first index slot of ``coeffs``."""
    n = space.n
    out = np.zeros((len(index_sets(n, p + 1)),) + coeffs.shape[1:], dtype=DTYPE)
    for src, j, dst, sign in insertion_table(n, p):
        if j not in directions:
            continue
        term = coeffs[src]
        if differentiate:
            term = TWO_PI_I * (space.wavenumber(j) * term)
        if sign > 0:
            out[dst] += term
        else:
            out[dst] -= term
    return out


def del_(a: PQForm, directions=None) -> PQForm:
    """d(sum f dx^I (x) dx^J) = sum (df ^ dx^I) (x) dx^J.

    ``directions`` restricts the derivative to a subset of coordinates
    (e.g. one factor of a product torus).
    """
    n = a.space.n
    if a.p + 1 > n:
        raise DegreeError(f"del maps ({a.p},{a.q}) out of range in dimension {n}")
    dirs = _check_directions(n, directions)
    return PQForm(a.space, a.p + 1, a.q, _exterior_derivative(a.coeffs, a.space, a.p, dirs), a.real)


def delbar(a: PQForm, directions=None) -> PQForm:
    """dbar(sum f dx^I (x) dx^J) = sum dx^I (x) (df ^ dx^J).

    No sign is picked up for moving dx^j past the first slot.
    """
    n = a.space.n
    if a.q + 1 > n:
        raise DegreeError(f"delbar maps ({a.p},{a.q}) out of range in dimension {n}")
    dirs = _check_directions(n, directions)
    swapped = np.swapaxes(a.coeffs, 0, 1)
    out = _exterior_derivative(swapped, a.space, a.q, dirs)
    return PQForm(a.space, a.p, a.q + 1, np.swapaxes(out, 0, 1), a.real)


def covariant_derivative(a: PQForm):
    """Components D_j a (coefficientwise d/dx^j), j = 1..n."""
    return tuple(a.with_coeffs(TWO_PI_I * (a.space.wavenumber(j) * a.coeffs)) for j in range(1, a.space.n + 1))


def insert_left(j, a: PQForm) -> PQForm:
    """e(dx^j (x) a): exterior multiplication by dx^j on the first slot."""
    n = a.space.n
    if a.p + 1 > n:
        raise DegreeError("exterior multiplication out of range")
    out = _exterior_derivative(a.coeffs, a.space, a.p, (j,), differentiate=False)
    return PQForm(a.space, a.p + 1, a.q, out, a.real)


def insert_right(j, a: PQForm) -> PQForm:
    """ebar(dx^j (x) a): exterior multiplication by dx^j on the second slot."""
    n = a.space.n
    if a.q + 1 > n:
        raise DegreeError("exterior multiplication out of range")
    out = _exterior_derivative(np.swapaxes(a.coeffs, 0, 1), a.space, a.q, (j,), differentiate=False)
    return PQForm(a.space, a.p, a.q + 1, np.swapaxes(out, 0, 1), a.real)


# star operators


@lru_cache(maxsize=None)
def _star_permutation(n, p):
    """(target positions, signs) of star on the orthonormal basis of degree p."""
    pos = index_position(n, n - p)
    targets, signs = [], []
    for I in index_sets(n, p):
        comp, sign = complement_sign(I, n)
        targets.append(pos[comp])
        signs.append(sign)
    return np.array(targets), np.array(signs, dtype=np.int8)


def _apply_star_frame(coeffs, n, p, q, inverse=False):
    """star(alpha_I (x) alpha_J) = sgn(I,I') sgn(J,J') alpha_I' (x) alpha_J'."""
    tp, sp = _star_permutation(n, p)
    tq, sq = _star_permutation(n, q)
    signs = (sp[:, None] * sq[None, :]).astype(DTYPE)
    signs = signs.reshape(signs.shape + (1,) * (coeffs.ndim - 2))
    if not inverse:
        out = np.zeros((len(index_sets(n, n - p)), len(index_sets(n, n - q))) + coeffs.shape[2:], dtype=DTYPE)
        out[np.ix_(tp, tq)] = signs * coeffs
        return out
    # coeffs has degree (n-p, n-q); pull back along the same permutation
    return signs * coeffs[np.ix_(tp, tq)]


def star(a: PQForm) -> PQForm:
    ctx = context(a.space)
    n = a.space.n
    framed = ctx.to_frame(a.coeffs, a.p, a.q)
    out = _apply_star_frame(framed, n, a.p, a.q)
    return PQForm(a.space, n - a.p, n - a.q, ctx.from_frame(out, n - a.p, n - a.q), a.real)


def star_inverse(b: PQForm) -> PQForm:
    ctx = context(b.space)
    n = b.space.n
    p, q = n - b.p, n - b.q
    framed = ctx.to_frame(b.coeffs, b.p, b.q)
    out = _apply_star_frame(framed, n, p, q, inverse=True)
    return PQForm(b.space, p, q, ctx.from_frame(out, p, q), b.real)


def twisted_star(a: PQForm):
    """The twisted star kappa o star, returned as (form, K^* coefficient).

    In the flat frame dx^1 ^ ... ^ dx^n of K the coefficient of vol_g^* is
    1 / vol.scale.
    """
    return star(a), 1.0 / context(a.space).vol.scale


# metric pairings


def pointwise_pairing(a: PQForm, b: PQForm, x) -> complex:
    """g(a, b) at x, bilinear (no conjugation)."""
    _check_pair(a, b)
    ctx = context(a.space)
    va = ctx.to_frame(evaluate(a, x).astype(DTYPE), a.p, a.q)
    vb = ctx.to_frame(evaluate(b, x).astype(DTYPE), b.p, b.q)
    return complex(np.sum(va * vb))


def inner_product(a: PQForm, b: PQForm) -> complex:
    """L^2 pairing, linear in ``a`` and conjugate-linear in ``b``.

    Orthogonality of Fourier modes turns the integral into a sum over
    shared frequencies, weighted by the volume scale.
    """
    _check_pair(a, b)
    ctx = context(a.space)
    fa = ctx.to_frame(a.coeffs, a.p, a.q)
    fb = ctx.to_frame(b.coeffs, b.p, b.q)
    return complex(np.sum(fa * np.conj(fb)) * ctx.vol.scale)


def norm(a: PQForm) -> float:
    return float(np.sqrt(max(inner_product(a, a).real, 0.0)))


def _check_pair(a, b):
    if a.space != b.space:
        raise ValidationError("forms live on different spaces")
    if a.bidegree != b.bidegree:
        raise DegreeError(f"bidegree mismatch {a.bidegree} vs {b.bidegree}")


# adjoints and Laplacians


def del_adjoint(a: PQForm, directions=None) -> PQForm:
    """d* = (-1)^p star^{-1} d star; on (0,q)-forms returns the zero form."""
    if a.p == 0:
        return PQForm.zero(a.space, 0, a.q)
    out = star_inverse(del_(star(a), directions))
    return -out if a.p % 2 else out


def delbar_adjoint(a: PQForm, directions=None) -> PQForm:
    """dbar* = (-1)^q star^{-1} dbar star; on (p,0)-forms returns the zero form."""
    if a.q == 0:
        return PQForm.zero(a.space, a.p, 0)
    out = star_inverse(delbar(star(a), directions))
    return -out if a.q % 2 else out


def laplacian(a: PQForm, directions=None) -> PQForm:
    """Box = d d* + d* d."""
    n = a.space.n
    out = PQForm.zero(a.space, a.p, a.q)
    if a.p > 0:
        out = out + del_(del_adjoint(a, directions), directions)
    if a.p < n:
        out = out + del_adjoint(del_(a, directions), directions)
    return out.with_coeffs(out.coeffs, a.real)


def laplacian_bar(a: PQForm, directions=None) -> PQForm:
    n = a.space.n
    out = PQForm.zero(a.space, a.p, a.q)
    if a.q > 0:
        out = out + delbar(delbar_adjoint(a, directions), directions)
    if a.q < n:
        out = out + delbar_adjoint(delbar(a, directions), directions)
    return out.with_coeffs(out.coeffs, a.real)


def eigenvalue(space: FlatTorusSpace, k) -> float:
    """Closed-form Box eigenvalue 4 pi^2 k^T metric^{-1} k of mode k."""
    k = np.asarray(k, dtype=float)
    return float(4 * np.pi**2 * k @ np.linalg.solve(space.metric, k))
