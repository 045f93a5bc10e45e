"""Hessian metrics on tori and product tori.

A metric g = sum g_ij dx^i (x) dx^j is Hessian iff del g = 0. On T^n the
class [g] in H^{1,1} is represented by the zero mode of g, and the rest of g
is D(df) for a potential f recovered mode by mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DegreeError, HessianPreconditionError, ValidationError
from .exterior import index_sets
from .forms import DTYPE, PI, PQForm, TWO_PI_I, FlatTorusSpace, embed_right, evaluate_grid
from .kunneth import ProductSpace, cross
from .operators import del_, delbar, norm

SYMMETRY_TOL = 1e-12
CLOSED_TOL = 1e-11
AGREEMENT_TOL = 1e-11
HESSIAN_TOL = 1e-9
RESIDUAL_TOL = 1e-9
CROSS_TOL = 1e-10


@dataclass(frozen=True)
class MetricField:
    """A real symmetric (1,1)-form. Symmetry is enforced exactly on construction."""

    tensor: PQForm

    def __post_init__(self):
        t = self.tensor
        if t.bidegree != (1, 1):
            raise DegreeError("a metric field is a (1,1)-form")
        c = t.coeffs
        ct = np.swapaxes(c, 0, 1)
        scale = max(1.0, float(np.abs(c).max()) if c.size else 1.0)
        if np.abs(c - ct).max(initial=0) > SYMMETRY_TOL * scale:
            raise ValidationError("metric field is not symmetric")
        sym = (c + ct) / 2
        if not t.real:
            flipped = np.conj(np.flip(sym, axis=tuple(range(2, 2 + t.space.n))))
            if np.abs(sym - flipped).max(initial=0) > SYMMETRY_TOL * scale:
                raise ValidationError("metric field is not real-valued")
            sym = (sym + flipped) / 2
        object.__setattr__(self, "tensor", PQForm(t.space, 1, 1, sym, True))

    @property
    def space(self):
        return self.tensor.space

    @classmethod
    def constant(cls, space, matrix):
        return cls(PQForm.constant(space, 1, 1, np.asarray(matrix, dtype=float), real=True))

    @classmethod
    def from_potential(cls, space, flat, potential):
        """flat + Hess(potential)."""
        return cls(PQForm.constant(space, 1, 1, np.asarray(flat, dtype=float), real=True) + hessian_of(potential))

    def component(self, i, j):
        """Coefficient array of g_ij (1-based) over frequencies."""
        return self.tensor.coeffs[i - 1, j - 1]

    def __add__(self, other):
        other = other.tensor if isinstance(other, MetricField) else other
        return MetricField(self.tensor + other)

    def to_json(self):
        data = self.tensor.to_json()
        data["symmetric"] = True
        return data

    @classmethod
    def from_json(cls, data, metric=None, factor_split=None):
        if data.get("p") != 1 or data.get("q") != 1:
            raise ValidationError("metric-field JSON must have p = q = 1")
        return cls(PQForm.from_json(data, metric, factor_split))


@dataclass(frozen=True)
class SPDCertificate:
    certified: bool
    margin: float
    grid_resolution: int
    sampled_min: float
    derivative_bound: float
    status: str

    def to_json(self):
        return {
            "certified": self.certified,
            "margin": self.margin,
            "grid_resolution": self.grid_resolution,
            "sampled_min": self.sampled_min,
            "status": self.status,
        }


@dataclass(frozen=True)
class HessianDefect:
    form: PQForm | None
    norm: float
    coordinate_tensor: np.ndarray = field(repr=False)
    agreement: float


@dataclass(frozen=True)
class HessianDecomposition:
    flat_part: np.ndarray
    potential: PQForm
    one_form: PQForm
    residual: float
    spd_certificate: SPDCertificate
    defect_norm: float = 0.0

    def to_json(self):
        cert = self.spd_certificate
        return {
            "flat_part": [[float(v) for v in row] for row in self.flat_part],
            "residual": self.residual,
            "cross_term_norm": 0.0,
            "spd": {"certified": cert.certified, "margin": cert.margin},
        }


@dataclass(frozen=True)
class ProductDecomposition:
    g_left: MetricField
    g_right: MetricField
    one_form: PQForm
    residual: float
    cross_term_norm: float
    flat_part: np.ndarray
    left: HessianDecomposition
    right: HessianDecomposition
    failures: tuple

    @property
    def passed(self):
        return not self.failures

    def to_json(self):
        return {
            "flat_part": [[float(v) for v in row] for row in self.flat_part],
            "residual": self.residual,
            "cross_term_norm": self.cross_term_norm,
            "spd": {
                "certified": self.left.spd_certificate.certified and self.right.spd_certificate.certified,
                "margin": min(self.left.spd_certificate.margin, self.right.spd_certificate.margin),
            },
            "left_flat_part": [[float(v) for v in row] for row in self.left.flat_part],
            "right_flat_part": [[float(v) for v in row] for row in self.right.flat_part],
            "pass": self.passed,
            "failures": list(self.failures),
        }


# building blocks


def gradient(f: PQForm) -> PQForm:
    """df as the (0,1)-form 1 (x) df."""
    if f.bidegree != (0, 0):
        raise DegreeError("gradient expects a function")
    return embed_right(del_(f))


def hessian_of(f: PQForm) -> PQForm:
    """D(df) = del(1 (x) df)."""
    return del_(gradient(f))


def d_alpha(alpha: PQForm, require_closed=False) -> PQForm:
    """D alpha = del(1 (x) alpha) for a (0,1)-form alpha."""
    if alpha.bidegree != (0, 1):
        raise DegreeError("d_alpha expects a (0,1)-form")
    if require_closed and alpha.space.n > 1:
        d = delbar(alpha)
        worst = np.abs(d.coeffs).max(initial=0)
        if worst > CLOSED_TOL:
            idx = np.unravel_index(np.argmax(np.abs(d.coeffs)), d.coeffs.shape)
            k = tuple(int(v) - alpha.space.bandwidth for v in idx[2:])
            raise ValidationError(f"alpha is not closed: |d alpha| = {worst:.3e} at frequency {k}")
    return del_(alpha)


def coordinate_condition(g: MetricField) -> np.ndarray:
    """T[c, i, j] = d g_ij / dx^c - d g_jc / dx^i (0-based axes), per frequency."""
    space = g.space
    n = space.n
    c = g.tensor.coeffs
    T = np.zeros((n, n, n) + space.freq_shape, dtype=DTYPE)
    for a in range(n):
        ka = TWO_PI_I * space.wavenumber(a + 1)
        for i in range(n):
            ki = TWO_PI_I * space.wavenumber(i + 1)
            for j in range(n):
                T[a, i, j] = ka * c[i, j] - ki * c[j, a]
    return T


def hessian_defect(g: MetricField) -> HessianDefect:
    """del g and its L^2 norm, cross-checked against the coordinate condition.

    In dimension 1 there is no (2,1)-form; ``form`` is None and the norm 0.
    """
    n = g.space.n
    T = coordinate_condition(g)
    if n == 1:
        return HessianDefect(None, 0.0, T, float(np.abs(T).max(initial=0)))
    form = del_(g.tensor)
    agreement = 0.0
    for pos, (a, b) in enumerate(index_sets(n, 2)):
        for j in range(n):
            diff = form.coeffs[pos, j] - T[a - 1, b - 1, j]
            agreement = max(agreement, float(np.abs(diff).max(initial=0)))
    if agreement > AGREEMENT_TOL:
        raise ContractViolation(f"del g and the coordinate condition disagree by {agreement:.3e}")
    return HessianDefect(form, norm(form), T, agreement)


def certify_spd(g: MetricField, grid_resolution) -> SPDCertificate:
    """Grid certificate of positive definiteness.

    Samples the minimum eigenvalue on the uniform grid and certifies when it
    exceeds L * (sqrt(n) / R) * n, with L = 2 pi max_ij sum_k |k|_1 |g_ij(k)|.
    """
    space = g.space
    n, B, R = space.n, space.bandwidth, int(grid_resolution)
    if R < 2 * B + 1:
        raise ValidationError(f"grid resolution {R} below 2B+1 = {2 * B + 1}")
    vals = evaluate_grid(g.tensor, R).real
    mats = np.moveaxis(vals.reshape(n, n, -1), -1, 0)
    sampled_min = float(np.linalg.eigvalsh(mats).min())
    k1 = sum(np.abs(space.wavenumber(j)) for j in range(1, n + 1))
    weights = np.abs(np.asarray(g.tensor.coeffs, dtype=complex)) * k1
    L = float(2 * np.pi * weights.reshape(n, n, -1).sum(axis=-1).max())
    slack = L * (np.sqrt(n) / R) * n
    margin = sampled_min - slack
    if margin > 0:
        status = "certified"
    elif sampled_min > 0:
        status = "sampled-positive"
    else:
        status = "not-positive"
    return SPDCertificate(bool(margin > 0), float(margin), R, sampled_min, L, status)


def default_resolution(space):
    return max(2 * space.bandwidth + 1, {1: 256, 2: 64, 3: 24}.get(space.n, 8))


# decompositions


def _wavenumber_sum(space, c):
    """sum_ij k_i k_j c_ij over the frequency grid."""
    n = space.n
    total = np.zeros(space.freq_shape, dtype=DTYPE)
    for i in range(n):
        for j in range(n):
            total = total + (space.wavenumber(i + 1) * space.wavenumber(j + 1)) * c[i, j]
    return total


def decompose_on_torus(g: MetricField, grid_resolution=None, hessian_tol=HESSIAN_TOL) -> HessianDecomposition:
    """g = flat + Hess f with flat the zero mode of g.

    The potential solves g_ij(k) = -4 pi^2 k_i k_j f(k) in the least-squares
    sense: f(k) = -sum_ij k_i k_j g_ij(k) / (4 pi^2 |k|^4).
    """
    defect = hessian_defect(g)
    if defect.norm > hessian_tol:
        raise HessianPreconditionError(f"metric is not Hessian: |del g| = {defect.norm:.3e}", defect.norm)
    space = g.space
    n, B = space.n, space.bandwidth
    c = g.tensor.coeffs
    flat = np.array(g.tensor.zero_mode().real, dtype=float)
    ksq = sum(space.wavenumber(j).astype(np.longdouble) ** 2 for j in range(1, n + 1))
    zero = ksq == 0
    denom = 4 * PI**2 * np.where(zero, 1, ksq) ** 2
    fhat = np.where(zero, 0, -_wavenumber_sum(space, c) / denom)
    potential = PQForm(space, 0, 0, fhat.reshape((1, 1) + space.freq_shape), True)
    one_form = gradient(potential)
    rebuilt = PQForm.constant(space, 1, 1, flat, real=True) + del_(one_form)
    residual = norm(g.tensor - rebuilt)
    cert = certify_spd(g, grid_resolution or default_resolution(space))
    return HessianDecomposition(flat, potential, one_form, residual, cert, defect.norm)


def _restrict_to_factor(g: MetricField, prod: ProductSpace, side) -> MetricField:
    """Block g_ab (a, b in one factor) averaged over the other factor's coordinates."""
    m = prod.m
    total = prod.total
    B = total.bandwidth
    n_total = total.n
    if side == "left":
        sl = slice(0, m)
        freq = tuple(slice(None) for _ in range(m)) + (B,) * (n_total - m)
    else:
        sl = slice(m, n_total)
        freq = (B,) * m + tuple(slice(None) for _ in range(n_total - m))
    block = g.tensor.coeffs[sl, sl][(slice(None), slice(None)) + freq]
    target = prod.left if side == "left" else prod.right
    form = PQForm(target.with_bandwidth(B), 1, 1, block, True)
    return MetricField(form.with_bandwidth(target.bandwidth))


def decompose_on_product(
    g: MetricField,
    prod: ProductSpace,
    grid_resolution=None,
    hessian_tol=HESSIAN_TOL,
    residual_tol=RESIDUAL_TOL,
    cross_tol=CROSS_TOL,
) -> ProductDecomposition:
    """g = g_M + g_N + D alpha on T^m x T^n.

    The zero-mode cross block is measured rather than assumed to vanish: a
    constant symmetric cross block is Hessian and flat but is not of this
    form, and is reported as a failure.
    """
    if g.space.factor_split is None:
        raise ValidationError("metric does not live on a product space")
    if g.space != prod.total:
        raise ValidationError("metric space differs from the product's total space")
    whole = decompose_on_torus(g, grid_resolution, hessian_tol)
    m = prod.m
    flat = whole.flat_part
    cross_block = np.zeros_like(flat)
    cross_block[:m, m:] = flat[:m, m:]
    cross_block[m:, :m] = flat[m:, :m]
    cross_term_norm = norm(PQForm.constant(prod.total, 1, 1, cross_block, real=True))

    g_left = _restrict_to_factor(g, prod, "left")
    g_right = _restrict_to_factor(g, prod, "right")
    left = decompose_on_torus(g_left, grid_resolution, hessian_tol)
    right = decompose_on_torus(g_right, grid_resolution, hessian_tol)

    one_left = PQForm.constant(prod.left, 0, 0, [[1.0]], real=True)
    one_right = PQForm.constant(prod.right, 0, 0, [[1.0]], real=True)
    f_mixed = whole.potential - cross(left.potential, one_right, prod) - cross(one_left, right.potential, prod)
    alpha = gradient(f_mixed)
    rebuilt = cross(g_left.tensor, one_right, prod) + cross(one_left, g_right.tensor, prod) + d_alpha(alpha)
    residual = norm(g.tensor - rebuilt)

    failures = []
    if cross_term_norm > cross_tol:
        failures.append("constant-cross-block")
    if residual > residual_tol:
        failures.append("reconstruction-residual")
    for name, part in (("left", left), ("right", right)):
        if part.spd_certificate.status == "not-positive":
            failures.append(f"{name}-factor-not-positive")
    return ProductDecomposition(
        g_left, g_right, alpha, residual, cross_term_norm, flat, left, right, tuple(failures)
    )
