"""Finite groups of affine automorphisms of T^n and averaged decompositions.

An automorphism x -> A x + b has integral A with det A = +-1 and rational b.
It acts on Fourier data exactly: mode k moves to A^T k and picks up the
phase exp(2 pi i <k, b>), evaluated from the exact rational <k, b> mod 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sympy import ZZ, Matrix
from sympy.matrices.normalforms import smith_normal_decomp

from .errors import BandwidthOverflowError, ContractViolation, NonFiniteGroupError, ValidationError
from .exterior import _int_det, exterior_power
from .forms import DTYPE, PI, PQForm
from .hessian import HESSIAN_TOL, RESIDUAL_TOL, HessianDecomposition, MetricField, d_alpha, decompose_on_torus
from .operators import norm

INVARIANCE_TOL = 1e-10
DEFAULT_GROUP_BOUND = 1024


def _fraction(value):
    return Fraction(value) if not isinstance(value, str) else Fraction(value.strip())


@dataclass(frozen=True)
class AffineAutomorphism:
    linear: tuple
    translation: tuple

    def __post_init__(self):
        A = tuple(tuple(int(v) for v in row) for row in self.linear)
        n = len(A)
        if any(len(row) != n for row in A):
            raise ValidationError("linear part must be square")
        if abs(_int_det(np.array(A, dtype=object))) != 1:
            raise ValidationError("linear part must have determinant +-1")
        b = tuple(_fraction(v) % 1 for v in self.translation)
        if len(b) != n:
            raise ValidationError("translation has wrong length")
        object.__setattr__(self, "linear", A)
        object.__setattr__(self, "translation", b)

    @classmethod
    def identity(cls, n):
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)), (0,) * n)

    @property
    def n(self):
        return len(self.linear)

    @property
    def matrix(self):
        return np.array(self.linear, dtype=np.int64)

    def is_identity(self):
        return self == AffineAutomorphism.identity(self.n)

    def compose(self, other):
        """self o other: x -> A (A' x + b') + b."""
        A, B = self.matrix, other.matrix
        shifted = tuple(
            sum((int(A[i, j]) * other.translation[j] for j in range(self.n)), Fraction(0)) + self.translation[i]
            for i in range(self.n)
        )
        return AffineAutomorphism(tuple(map(tuple, (A @ B).tolist())), shifted)

    __matmul__ = compose

    def inverse(self):
        Ainv = Matrix(self.linear).inv()
        lin = tuple(tuple(int(v) for v in Ainv.row(i)) for i in range(self.n))
        b = tuple(
            -sum((int(Ainv[i, j]) * self.translation[j] for j in range(self.n)), Fraction(0))
            for i in range(self.n)
        )
        return AffineAutomorphism(lin, b)

    def __call__(self, x):
        return (self.matrix @ np.asarray(x, dtype=float) + np.array([float(v) for v in self.translation])) % 1.0

    def has_fixed_point(self):
        """Decide A x + b = x (mod Z^n) exactly.

        With U (A - I) V = D in Smith form the system becomes D y = -U b
        (mod Z^n); rows with zero diagonal need an integral right side.
        """
        M = Matrix(self.linear) - Matrix.eye(self.n)
        D, U, _ = smith_normal_decomp(M, domain=ZZ)
        ub = [sum((int(U[i, j]) * self.translation[j] for j in range(self.n)), Fraction(0)) for i in range(self.n)]
        return all(ub[i].denominator == 1 for i in range(self.n) if D[i, i] == 0)

    def to_json(self):
        return {"linear": [list(row) for row in self.linear], "translation": [str(v) for v in self.translation]}

    @classmethod
    def from_json(cls, data):
        try:
            return cls(data["linear"], data["translation"])
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"malformed automorphism JSON: {exc}") from exc


@dataclass(frozen=True)
class FiniteAffineGroup:
    generators: tuple
    elements: tuple
    free: bool

    @property
    def order(self):
        return len(self.elements)

    @property
    def n(self):
        return self.elements[0].n

    def to_json(self):
        return {"dim": self.n, "generators": [g.to_json() for g in self.generators]}


def close_group(generators, bound=DEFAULT_GROUP_BOUND) -> FiniteAffineGroup:
    """Closure of ``generators`` under composition (breadth first)."""
    generators = tuple(generators)
    if not generators:
        raise ValidationError("at least one generator is required")
    n = generators[0].n
    if any(g.n != n for g in generators):
        raise ValidationError("generators act on different dimensions")
    identity = AffineAutomorphism.identity(n)
    elements = [identity]
    seen = {identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for h in frontier:
            for g in generators:
                e = g.compose(h)
                if e not in seen:
                    seen.add(e)
                    elements.append(e)
                    nxt.append(e)
                    if len(elements) > bound:
                        raise NonFiniteGroupError(f"group closure exceeded {bound} elements")
        frontier = nxt
    free = not any(e.has_fixed_point() for e in elements if not e.is_identity())
    return FiniteAffineGroup(generators, tuple(elements), free)


def group_from_json(data, bound=DEFAULT_GROUP_BOUND):
    try:
        gens = [AffineAutomorphism.from_json(g) for g in data["generators"]]
        dim = int(data["dim"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed group JSON: {exc}") from exc
    if any(g.n != dim for g in gens):
        raise ValidationError("generator dimension differs from 'dim'")
    return close_group(gens, bound)


# action on forms


def _phase(r: Fraction):
    """exp(2 pi i r) with exact values at quarter turns."""
    r = r % 1
    if r > Fraction(1, 2):
        r -= 1
    exact = {Fraction(0): 1, Fraction(1, 2): -1, Fraction(1, 4): 1j, Fraction(-1, 4): -1j}
    if r in exact:
        return DTYPE(exact[r])
    theta = 2 * PI * np.longdouble(abs(r.numerator)) / np.longdouble(r.denominator)
    z = DTYPE(np.cos(theta) + 1j * np.sin(theta))
    return z if r > 0 else np.conj(z)


def pullback(gamma: AffineAutomorphism, a: PQForm) -> PQForm:
    """gamma^* a: f(Ax + b) d(Ax)^I (x) d(Ax)^J."""
    space = a.space
    n, B = space.n, space.bandwidth
    if gamma.n != n:
        raise ValidationError("automorphism and form have different dimensions")
    A = gamma.matrix
    grid = np.array(list(space.frequencies()), dtype=np.int64)
    target = grid @ A  # row k -> A^T k
    inside = np.all(np.abs(target) <= B, axis=1)
    flat = a.coeffs.reshape(a.coeffs.shape[:2] + (-1,))
    occupied = np.any(flat != 0, axis=(0, 1))
    if np.any(occupied & ~inside):
        raise BandwidthOverflowError(f"pullback moves frequencies beyond bandwidth {B}; widen the space")
    phases = np.ones(len(grid), dtype=DTYPE)
    for s in np.nonzero(occupied)[0]:
        phases[s] = _phase(sum((int(grid[s, i]) * gamma.translation[i] for i in range(n)), Fraction(0)))
    side = 2 * B + 1
    dst = np.ravel_multi_index(tuple((target[inside] + B).T), (side,) * n)
    moved = np.zeros_like(flat)
    moved[:, :, dst] = flat[:, :, inside] * phases[inside]
    Mp = exterior_power(A, a.p).astype(DTYPE)
    Mq = exterior_power(A, a.q).astype(DTYPE)
    out = np.tensordot(Mp.T, moved, axes=([1], [0]))
    out = np.moveaxis(np.tensordot(Mq.T, np.moveaxis(out, 1, 0), axes=([1], [0])), 0, 1)
    return a.with_coeffs(out.reshape(a.coeffs.shape))


def average(group: FiniteAffineGroup, a: PQForm) -> PQForm:
    """(1/|G|) sum over the group of pullbacks, summed in element order."""
    total = PQForm.zero(a.space, a.p, a.q)
    for gamma in group.elements:
        total = total + pullback(gamma, a)
    return total.with_coeffs(total.coeffs / group.order, a.real)


def invariance_residual(group: FiniteAffineGroup, a: PQForm) -> float:
    return max(norm(pullback(gamma, a) - a) for gamma in group.elements)


def metric_is_invariant(group, metric, tol=1e-12):
    G = np.asarray(metric, dtype=float)
    return all(np.abs(g.matrix.T @ G @ g.matrix - G).max() <= tol for g in group.elements)


@dataclass(frozen=True)
class QuotientDecomposition:
    decomposition: HessianDecomposition
    group_order: int
    input_invariance: float
    flat_invariance: float
    one_form_invariance: float
    potential_invariance: float

    @property
    def flat_part(self):
        return self.decomposition.flat_part

    @property
    def one_form(self):
        return self.decomposition.one_form

    @property
    def residual(self):
        return self.decomposition.residual

    def to_json(self):
        data = self.decomposition.to_json()
        data.update(
            group_order=self.group_order,
            invariance={
                "input": self.input_invariance,
                "flat_part": self.flat_invariance,
                "one_form": self.one_form_invariance,
                "potential": self.potential_invariance,
            },
        )
        return data


def decompose_on_quotient(
    g: MetricField,
    group: FiniteAffineGroup,
    grid_resolution=None,
    invariance_tol=INVARIANCE_TOL,
    residual_tol=RESIDUAL_TOL,
    hessian_tol=HESSIAN_TOL,
) -> QuotientDecomposition:
    """Decompose upstairs on the cover, then average flat part and one-form."""
    if group.n != g.space.n:
        raise ValidationError("group and metric act on different dimensions")
    if not group.free:
        raise ValidationError("group action has fixed points; the quotient is not a manifold")
    if not metric_is_invariant(group, g.space.metric):
        raise ValidationError("background metric is not invariant under the group")
    drift = invariance_residual(group, g.tensor)
    if drift > invariance_tol:
        raise ValidationError(f"metric field is not group-invariant (residual {drift:.3e})")
    upstairs = decompose_on_torus(g, grid_resolution, hessian_tol)
    space = g.space
    flat_form = average(group, PQForm.constant(space, 1, 1, upstairs.flat_part, real=True))
    alpha = average(group, upstairs.one_form)
    potential = average(group, upstairs.potential)
    flat = np.array(flat_form.zero_mode().real, dtype=float)
    residual = norm(g.tensor - flat_form - d_alpha(alpha))
    if residual > residual_tol:
        raise ContractViolation(f"averaged reconstruction residual {residual:.3e} exceeds {residual_tol}")
    if np.linalg.eigvalsh((flat + flat.T) / 2).min() <= 0:
        raise ContractViolation("averaged flat part is not positive definite")
    averaged = HessianDecomposition(flat, potential, alpha, residual, upstairs.spd_certificate, upstairs.defect_norm)
    return QuotientDecomposition(
        averaged,
        group.order,
        drift,
        invariance_residual(group, flat_form),
        invariance_residual(group, alpha),
        invariance_residual(group, potential),
    )
