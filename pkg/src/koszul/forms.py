"""Fourier representation of (p,q)-forms on flat tori.

A form sum_{I,J} f_{I,J} dx^I (x) dx^J on R^n/Z^n is stored as a dense
coefficient array of shape ``(C(n,p), C(n,q), 2B+1, ..., 2B+1)``: the first
two axes enumerate the multi-indices I and J (see ``exterior.index_sets``),
the remaining n axes enumerate frequencies k_i in [-B, B] (offset by B).
The basis function of frequency k is exp(2 pi i <k, x>).

Coefficients are held in extended precision (``numpy.clongdouble``) so that
cancellations such as d^2 = 0 land well below the prune threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
import math

import numpy as np

from .errors import BandwidthOverflowError, DegreeError, ValidationError
from .exterior import check_multi_index, index_position, index_sets, merge

DTYPE = np.clongdouble
PI = np.longdouble("3.14159265358979323846264338327950288")
TWO_PI_I = DTYPE(1j) * (2 * PI)
PRUNE = 1e-14
SPD_TOL = 1e-12


def _as_metric_tuple(metric, n):
    if metric is None:
        metric = np.eye(n)
    arr = np.asarray(metric, dtype=float)
    if arr.shape != (n, n):
        raise ValidationError(f"metric must be {n}x{n}, got shape {arr.shape}")
    if not np.array_equal(arr, arr.T):
        raise ValidationError("metric is not symmetric")
    if n and np.linalg.eigvalsh(arr).min() <= SPD_TOL:
        raise ValidationError("metric is not positive definite")
    return tuple(tuple(float(v) for v in row) for row in arr)


@dataclass(frozen=True)
class FlatTorusSpace:
    """The torus R^n/Z^n with bandwidth ``bandwidth`` and a constant metric.

    ``factor_split`` optionally records a product structure as consecutive
    block sizes, e.g. ``(1, 2)`` for T^1 x T^2.
    """

    n: int
    bandwidth: int
    metric_entries: tuple = None
    factor_split: tuple = None

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("dimension must be positive")
        if self.bandwidth < 0:
            raise ValidationError("bandwidth must be non-negative")
        object.__setattr__(self, "metric_entries", _as_metric_tuple(self.metric_entries, self.n))
        if self.factor_split is not None:
            split = tuple(int(s) for s in self.factor_split)
            if any(s < 1 for s in split) or sum(split) != self.n:
                raise ValidationError(f"factor split {split} does not partition 1..{self.n}")
            object.__setattr__(self, "factor_split", split)

    @classmethod
    def identity(cls, n, bandwidth, factor_split=None):
        return cls(n, bandwidth, None, factor_split)

    @property
    def metric(self):
        return np.array(self.metric_entries, dtype=float)

    @property
    def freq_shape(self):
        return (2 * self.bandwidth + 1,) * self.n

    def wavenumber(self, j):
        """Integer k_j broadcast over the frequency axes (``j`` is 1-based)."""
        return _wavenumber(self.n, self.bandwidth, j)

    def frequencies(self):
        B = self.bandwidth
        return product(range(-B, B + 1), repeat=self.n)

    def with_bandwidth(self, bandwidth):
        return FlatTorusSpace(self.n, bandwidth, self.metric_entries, self.factor_split)

    def with_metric(self, metric):
        return FlatTorusSpace(self.n, self.bandwidth, metric, self.factor_split)

    def to_json(self):
        return {"dim": self.n, "entries": [list(row) for row in self.metric_entries]}


_WAVENUMBER_CACHE = {}


def _wavenumber(n, B, j):
    key = (n, B, j)
    if key not in _WAVENUMBER_CACHE:
        shape = [1] * n
        shape[j - 1] = 2 * B + 1
        arr = np.arange(-B, B + 1).reshape(shape)
        arr.setflags(write=False)
        _WAVENUMBER_CACHE[key] = arr
    return _WAVENUMBER_CACHE[key]


@dataclass(frozen=True)
class VolumeFrame:
    """vol_g = scale * dx^1 ^ ... ^ dx^n."""

    space: FlatTorusSpace
    scale: float

    @classmethod
    def of(cls, space):
        return cls(space, math.sqrt(np.linalg.det(space.metric)))

    @property
    def flat_frame(self):
        return tuple(range(1, self.space.n + 1))


def _freq_axes(n):
    return tuple(range(2, 2 + n))


@dataclass(frozen=True, eq=False)
class PQForm:
    """A (p,q)-form; immutable. ``real`` marks conjugate-symmetric data."""

    space: FlatTorusSpace
    p: int
    q: int
    coeffs: np.ndarray = field(repr=False)
    real: bool = False

    def __post_init__(self):
        n = self.space.n
        if not (0 <= self.p <= n and 0 <= self.q <= n):
            raise DegreeError(f"bidegree ({self.p},{self.q}) invalid in dimension {n}")
        arr = np.array(self.coeffs, dtype=DTYPE)
        shape = (len(index_sets(n, self.p)), len(index_sets(n, self.q))) + self.space.freq_shape
        if arr.shape != shape:
            raise ValidationError(f"coefficient array has shape {arr.shape}, expected {shape}")
        arr[np.abs(arr) < PRUNE] = 0
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        if self.real and not np.array_equal(arr, _conj_flip(arr, n)):
            raise ValidationError("form marked real is not conjugate-symmetric")

    # constructors

    @classmethod
    def zero(cls, space, p, q, real=True):
        shape = (len(index_sets(space.n, p)), len(index_sets(space.n, q))) + space.freq_shape
        return cls(space, p, q, np.zeros(shape, dtype=DTYPE), real)

    @classmethod
    def from_terms(cls, space, p, q, terms, real=False):
        """Build from a mapping ``(I, J, k) -> coefficient``."""
        n, B = space.n, space.bandwidth
        arr = np.array(cls.zero(space, p, q).coeffs)
        pos_p, pos_q = index_position(n, p), index_position(n, q)
        for (I, J, k), value in terms.items():
            I, J = check_multi_index(I, n), check_multi_index(J, n)
            if len(I) != p or len(J) != q:
                raise DegreeError(f"term ({I},{J}) does not have bidegree ({p},{q})")
            k = tuple(int(v) for v in k)
            if len(k) != n:
                raise ValidationError(f"frequency {k} has wrong length")
            if any(abs(v) > B for v in k):
                raise BandwidthOverflowError(f"frequency {k} exceeds bandwidth {B}")
            arr[(pos_p[I], pos_q[J]) + tuple(v + B for v in k)] += value
        return cls(space, p, q, arr, real)

    @classmethod
    def constant(cls, space, p, q, values, real=None):
        """Constant-coefficient form; ``values`` has shape (C(n,p), C(n,q))."""
        values = np.asarray(values)
        out = np.array(cls.zero(space, p, q).coeffs)
        out[(slice(None), slice(None)) + (space.bandwidth,) * space.n] = values
        if real is None:
            real = bool(np.isrealobj(values) or np.all(np.imag(values) == 0))
        return cls(space, p, q, out, real)

    # views

    @property
    def bidegree(self):
        return (self.p, self.q)

    @cached_property
    def terms(self):
        n, B = self.space.n, self.space.bandwidth
        Is, Js = index_sets(n, self.p), index_sets(n, self.q)
        out = {}
        for idx in zip(*np.nonzero(self.coeffs)):
            k = tuple(int(v) - B for v in idx[2:])
            out[(Is[idx[0]], Js[idx[1]], k)] = complex(self.coeffs[idx])
        return out

    def coefficient(self, I, J, k):
        n, B = self.space.n, self.space.bandwidth
        if any(abs(v) > B for v in k):
            return 0j
        pos = (index_position(n, self.p)[tuple(I)], index_position(n, self.q)[tuple(J)])
        return complex(self.coeffs[pos + tuple(v + B for v in k)])

    def is_zero(self):
        return not np.any(self.coeffs)

    def zero_mode(self):
        """Constant-coefficient matrix (C(n,p), C(n,q)) at k = 0."""
        return np.array(self.coeffs[(slice(None), slice(None)) + (self.space.bandwidth,) * self.space.n])

    def with_coeffs(self, coeffs, real=None):
        return PQForm(self.space, self.p, self.q, coeffs, self.real if real is None else real)

    def with_bandwidth(self, bandwidth):
        """Re-home the form in a space of different bandwidth."""
        B, n = self.space.bandwidth, self.space.n
        space = self.space.with_bandwidth(bandwidth)
        out = np.array(PQForm.zero(space, self.p, self.q).coeffs)
        if bandwidth >= B:
            dst = (slice(None), slice(None)) + (slice(bandwidth - B, bandwidth + B + 1),) * n
            out[dst] = self.coeffs
        else:
            src = (slice(None), slice(None)) + (slice(B - bandwidth, B + bandwidth + 1),) * n
            kept = self.coeffs[src]
            if np.count_nonzero(kept) != np.count_nonzero(self.coeffs):
                raise BandwidthOverflowError(f"form has frequencies beyond bandwidth {bandwidth}")
            out = kept
        return PQForm(space, self.p, self.q, out, self.real)

    def at(self, x):
        """The constant form (bandwidth 0) with the values of ``self`` at ``x``."""
        vals = evaluate(self, x)
        return PQForm.constant(self.space.with_bandwidth(0), self.p, self.q, vals, real=False)

    # arithmetic

    def _check_compatible(self, other):
        if not isinstance(other, PQForm):
            return NotImplemented
        if other.space != self.space:
            raise ValidationError("forms live on different spaces")
        if other.bidegree != self.bidegree:
            raise DegreeError(f"bidegree mismatch {self.bidegree} vs {other.bidegree}")
        return True

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return self.with_coeffs(self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return self.with_coeffs(self.coeffs - other.coeffs, self.real and other.real)

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, PQForm):
            return NotImplemented
        real = self.real and np.imag(scalar) == 0
        return self.with_coeffs(self.coeffs * DTYPE(scalar), real)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1 / scalar)

    def __eq__(self, other):
        if not isinstance(other, PQForm):
            return NotImplemented
        return (
            self.space == other.space
            and self.bidegree == other.bidegree
            and np.array_equal(self.coeffs, other.coeffs)
        )

    __hash__ = None

    def __repr__(self):
        return f"PQForm(n={self.space.n}, B={self.space.bandwidth}, ({self.p},{self.q}), terms={len(self.terms)})"

    # serialization

    def to_json(self):
        terms = [
            {"I": list(I), "J": list(J), "k": list(k), "re": v.real, "im": v.imag}
            for (I, J, k), v in sorted(self.terms.items())
        ]
        return {
            "dim": self.space.n,
            "bandwidth": self.space.bandwidth,
            "p": self.p,
            "q": self.q,
            "real": bool(self.real),
            "terms": terms,
        }

    @classmethod
    def from_json(cls, data, metric=None, factor_split=None):
        try:
            space = FlatTorusSpace(int(data["dim"]), int(data["bandwidth"]), metric, factor_split)
            terms = {}
            for t in data["terms"]:
                key = (tuple(t["I"]), tuple(t["J"]), tuple(t["k"]))
                terms[key] = terms.get(key, 0) + complex(float(t["re"]), float(t.get("im", 0.0)))
            return cls.from_terms(space, int(data["p"]), int(data["q"]), terms, bool(data.get("real", False)))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed PQForm JSON: {exc}") from exc


def _conj_flip(arr, n):
    return np.conj(np.flip(arr, axis=_freq_axes(n)))


def metric_from_json(data):
    try:
        return FlatTorusSpace(int(data["dim"]), 0, data["entries"]).metric
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed metric JSON: {exc}") from exc


# operations


def _check_same_space(a, b):
    if a.space != b.space:
        raise ValidationError("forms live on different spaces")


def _slot_structure(n, p1, p2):
    """Sign tensor S[a1, a2, A] with dx^{I_a1} ^ dx^{I_a2} = S * dx^{I_A}."""
    sets1, sets2 = index_sets(n, p1), index_sets(n, p2)
    pos = index_position(n, p1 + p2)
    S = np.zeros((len(sets1), len(sets2), len(index_sets(n, p1 + p2))), dtype=np.int8)
    for a1, I1 in enumerate(sets1):
        for a2, I2 in enumerate(sets2):
            merged, sign = merge(I1, I2)
            if merged is not None:
                S[a1, a2, pos[merged]] = sign
    return S


def wedge(a, b):
    """(a1 (x) b1) ^ (a2 (x) b2) = (a1 ^ a2) (x) (b1 ^ b2), with Fourier convolution."""
    _check_same_space(a, b)
    n, B = a.space.n, a.space.bandwidth
    p, q = a.p + b.p, a.q + b.q
    if p > n or q > n:
        raise DegreeError(f"wedge of bidegrees {a.bidegree} and {b.bidegree} exceeds dimension {n}")
    L = _slot_structure(n, a.p, b.p).astype(DTYPE)
    R = _slot_structure(n, a.q, b.q).astype(DTYPE)
    side = 4 * B + 1
    out = np.zeros((L.shape[2], R.shape[2]) + (side,) * n, dtype=DTYPE)
    freq_letters = "".join(chr(ord("f") + i) for i in range(n))
    for kb in zip(*np.nonzero(np.any(b.coeffs != 0, axis=(0, 1)))):
        bmat = b.coeffs[(slice(None), slice(None)) + kb]
        M = np.einsum("uv,xuA,yvB->xyAB", bmat, L, R)
        block = np.einsum(f"xyAB,xy{freq_letters}->AB{freq_letters}", M, a.coeffs)
        dst = (slice(None), slice(None)) + tuple(slice(s, s + 2 * B + 1) for s in kb)
        out[dst] += block
    inner = (slice(None), slice(None)) + (slice(B, 3 * B + 1),) * n
    kept = out[inner]
    mask = np.abs(out) >= PRUNE
    if np.count_nonzero(mask) != np.count_nonzero(np.abs(kept) >= PRUNE):
        raise BandwidthOverflowError(f"wedge product needs bandwidth above {B}; widen the space")
    real = a.real and b.real
    if real:
        # the convolution visits k and -k in different orders
        kept = (kept + _conj_flip(kept, n)) / 2
    return PQForm(a.space, p, q, kept, real)


def _phases(space, x):
    x = np.asarray(x, dtype=np.longdouble)
    if x.shape != (space.n,):
        raise ValidationError(f"point must have length {space.n}")
    k = np.arange(-space.bandwidth, space.bandwidth + 1)
    return [np.exp(TWO_PI_I * k * xi) for xi in x]


def evaluate(a, x):
    """Component values f_{I,J}(x) as an array of shape (C(n,p), C(n,q))."""
    vals = a.coeffs
    for ph in _phases(a.space, x):
        vals = np.tensordot(vals, ph, axes=([2], [0]))
    return np.asarray(vals, dtype=complex)


def evaluate_grid(a, resolution):
    """Component values on the uniform grid (r_1/R, ..., r_n/R).

    Returns shape (C(n,p), C(n,q), R, ..., R).
    """
    n, B = a.space.n, a.space.bandwidth
    k = np.arange(-B, B + 1)
    r = np.arange(resolution)
    E = np.exp(TWO_PI_I * np.outer(k, r) / resolution)
    vals = a.coeffs
    for axis in range(n):
        # contract the leading frequency axis; the new grid axis goes last
        vals = np.tensordot(vals, E, axes=([2], [0]))
    return np.asarray(vals, dtype=complex)


def embed_left(a):
    """alpha -> alpha (x) 1 (identity on the representation)."""
    if a.q != 0:
        raise DegreeError("embed_left expects an ordinary form (q = 0)")
    return a


def embed_right(a):
    """alpha -> 1 (x) alpha: a p-form becomes a (0,p)-form."""
    if a.q != 0:
        raise DegreeError("embed_right expects an ordinary form (q = 0)")
    return PQForm(a.space, 0, a.p, np.swapaxes(a.coeffs, 0, 1), a.real)


def random_form(space, p, q, rng, real=False, scale=1.0, bandwidth=None, decay=0.0):
    """Random band-limited form with uniform coefficients.

    ``bandwidth`` restricts the support to |k_i| <= bandwidth; ``decay``
    damps mode k by exp(-decay * |k|^2).
    """
    shape = (len(index_sets(space.n, p)), len(index_sets(space.n, q))) + space.freq_shape
    c = rng.uniform(-1, 1, shape) + 1j * rng.uniform(-1, 1, shape)
    B = space.bandwidth
    ksq = sum(space.wavenumber(j) ** 2 for j in range(1, space.n + 1))
    weight = np.exp(-decay * ksq)
    if bandwidth is not None:
        inside = np.ones(space.freq_shape, dtype=bool)
        for j in range(1, space.n + 1):
            inside = inside & (np.abs(space.wavenumber(j)) <= bandwidth)
        weight = weight * inside
    c = (c * weight * scale).astype(DTYPE)
    if real:
        c = (c + _conj_flip(c, space.n)) / 2
    c[np.abs(c) < PRUNE] = 0
    return PQForm(space, p, q, c, real)
