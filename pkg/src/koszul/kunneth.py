"""Product tori: cross products of forms and harmonic-level Kunneth checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DegreeError, ValidationError
from .exterior import index_position, index_sets
from .forms import DTYPE, FlatTorusSpace, PQForm
from .hodge import HarmonicBasis, cohomology_basis, gram_matrix
from .operators import context, del_, del_adjoint, inner_product, laplacian, norm

SPAN_TOL = 1e-10


@dataclass(frozen=True)
class ProductSpace:
    """T^m x T^n with block-diagonal metric; ``total`` is built if omitted."""

    left: FlatTorusSpace
    right: FlatTorusSpace
    total: FlatTorusSpace = field(default=None)

    def __post_init__(self):
        m, n = self.left.n, self.right.n
        metric = np.zeros((m + n, m + n))
        metric[:m, :m] = self.left.metric
        metric[m:, m:] = self.right.metric
        bandwidth = max(self.left.bandwidth, self.right.bandwidth)
        expected = FlatTorusSpace(m + n, bandwidth, metric, (m, n))
        if self.total is None:
            object.__setattr__(self, "total", expected)
        elif self.total.factor_split != (m, n) or not np.array_equal(self.total.metric, metric):
            raise ValidationError("total space is not the block-diagonal product of the factors")

    @property
    def m(self):
        return self.left.n

    @property
    def left_directions(self):
        return tuple(range(1, self.m + 1))

    @property
    def right_directions(self):
        return tuple(range(self.m + 1, self.m + self.right.n + 1))

    @classmethod
    def identity(cls, m, n, bandwidth=1):
        return cls(FlatTorusSpace.identity(m, bandwidth), FlatTorusSpace.identity(n, bandwidth))


def _merge_positions(m, n, p_left, p_right):
    """pos[a, b] = position of I_a u (I_b + m) among index sets of degree p_left + p_right."""
    pos_total = index_position(m + n, p_left + p_right)
    right_sets = index_sets(n, p_right)
    out = np.zeros((len(index_sets(m, p_left)), len(right_sets)), dtype=int)
    for a, I in enumerate(index_sets(m, p_left)):
        for b, K in enumerate(right_sets):
            out[a, b] = pos_total[I + tuple(k + m for k in K)]
    return out


def cross(a: PQForm, b: PQForm, prod: ProductSpace = None) -> PQForm:
    """a x b on the product: indices of b shifted by m, frequencies concatenated.

    No sign arises because every index of b exceeds every index of a.
    """
    if prod is None:
        prod = ProductSpace(a.space, b.space)
    if a.space != prod.left or b.space != prod.right:
        raise ValidationError("factors do not match the product space")
    m, n = prod.left.n, prod.right.n
    B = prod.total.bandwidth
    ca = a.with_bandwidth(B).coeffs
    cb = b.with_bandwidth(B).coeffs
    p, q = a.p + b.p, a.q + b.q
    posI = _merge_positions(m, n, a.p, b.p)
    posJ = _merge_positions(m, n, a.q, b.q)
    out = np.array(PQForm.zero(prod.total, p, q).coeffs)
    for ia in range(ca.shape[0]):
        for ja in range(ca.shape[1]):
            fa = ca[ia, ja]
            if not fa.any():
                continue
            for ib in range(cb.shape[0]):
                for jb in range(cb.shape[1]):
                    fb = cb[ib, jb]
                    if fb.any():
                        out[posI[ia, ib], posJ[ja, jb]] = np.multiply.outer(fa, fb)
    return PQForm(prod.total, p, q, out, a.real and b.real)


def laplacian_sum_check(a: PQForm, b: PQForm, prod: ProductSpace = None) -> float:
    """|| Box(a x b) - (Box a) x b - a x (Box b) ||."""
    prod = prod or ProductSpace(a.space, b.space)
    lhs = laplacian(cross(a, b, prod))
    rhs = cross(laplacian(a), b, prod) + cross(a, laplacian(b), prod)
    return norm(lhs - rhs)


def _apply(op, x, directions):
    """op(x) or None when the target degree does not exist."""
    n = x.space.n
    if op is del_ and x.p + 1 > n:
        return None
    if op is del_adjoint and x.p == 0:
        return None
    return op(x, directions)


def _compose(outer, inner, x, d_outer, d_inner):
    y = _apply(inner, x, d_inner)
    return None if y is None else _apply(outer, y, d_outer)


def anticommutation_residual(a: PQForm, b: PQForm, prod: ProductSpace = None) -> float:
    """max of ||(d_M d_N* + d_N* d_M)(a x b)|| and ||(d_N d_M* + d_M* d_N)(a x b)||."""
    prod = prod or ProductSpace(a.space, b.space)
    x = cross(a, b, prod)
    M, N = prod.left_directions, prod.right_directions
    worst = 0.0
    for first, second in ((M, N), (N, M)):
        terms = [
            _compose(del_, del_adjoint, x, first, second),
            _compose(del_adjoint, del_, x, second, first),
        ]
        terms = [t for t in terms if t is not None]
        if terms:
            total = terms[0] if len(terms) == 1 else terms[0] + terms[1]
            worst = max(worst, norm(total))
    return worst


def kunneth_family(prod: ProductSpace, p, q):
    """[((i, j), h1 x h2)] over all splits (i,j) + (p-i, q-j)."""
    m, n = prod.left.n, prod.right.n
    if not (0 <= p <= m + n and 0 <= q <= m + n):
        raise DegreeError(f"bidegree ({p},{q}) out of range on the product")
    family = []
    for i in range(p + 1):
        for j in range(q + 1):
            if i > m or j > m or p - i > n or q - j > n:
                continue
            for h1 in cohomology_basis(prod.left, i, j):
                for h2 in cohomology_basis(prod.right, p - i, q - j):
                    family.append(((i, j), cross(h1, h2, prod)))
    return family


def kunneth_basis(prod: ProductSpace, p, q) -> HarmonicBasis:
    return HarmonicBasis(prod.total, (p, q), tuple(f for _, f in kunneth_family(prod, p, q)))


def _numerical_rank(gram):
    w = np.linalg.eigvalsh((gram + gram.conj().T) / 2)
    if w.size == 0:
        return 0
    return int((w > SPAN_TOL * max(1.0, w.max())).sum())


def verify_kunneth(prod: ProductSpace, p, q, tol=SPAN_TOL) -> dict:
    """Compare the cross-product family with the harmonic basis of the product.

    Failures are reported in the returned record, never raised.
    """
    family = list(kunneth_basis(prod, p, q))
    direct = list(cohomology_basis(prod.total, p, q))
    gram = gram_matrix(family)
    rank = _numerical_rank(gram)
    worst = 0.0
    if family:
        for e in direct:
            rhs = np.array([inner_product(e, f) for f in family])
            # projection coefficients c solve sum_l c_l <f_l, f_m> = <e, f_m>
            c, *_ = np.linalg.lstsq(gram.T, rhs, rcond=None)
            approx = PQForm.zero(prod.total, p, q)
            for cl, f in zip(c, family):
                approx = approx + f * complex(cl)
            worst = max(worst, norm(e - approx))
    else:
        worst = max((norm(e) for e in direct), default=0.0)
    failures = []
    if len(family) != len(direct):
        failures.append("dimension-mismatch")
    if rank != len(family):
        failures.append("family-not-independent")
    if worst > tol:
        failures.append("span-mismatch")
    return {
        "left_dim": prod.left.n,
        "right_dim": prod.right.n,
        "p": p,
        "q": q,
        "dim_product": len(family),
        "dim_direct": len(direct),
        "gram_rank": rank,
        "max_projection_residual": float(worst),
        "pass": not failures,
        "failures": failures,
    }


def _split_index(I, m):
    left = tuple(i for i in I if i <= m)
    right = tuple(i - m for i in I if i > m)
    return left, right


def decomposable_blocks(a: PQForm) -> dict:
    """Matricizations of ``a``, one per factor split (i, j).

    Rows run over (left I, left J, left k), columns over the right keys;
    coefficients are taken in the orthonormal frame scaled by sqrt(vol) so
    the Frobenius norm equals the L^2 norm.
    """
    split = a.space.factor_split
    if split is None or len(split) != 2:
        raise ValidationError("form does not live on a two-factor product")
    m, n = split
    ctx = context(a.space)
    framed = ctx.to_frame(a.coeffs, a.p, a.q) * np.sqrt(np.longdouble(ctx.vol.scale))
    fl = (2 * a.space.bandwidth + 1) ** m
    fr = (2 * a.space.bandwidth + 1) ** n
    blocks = {}
    for ia, I in enumerate(index_sets(m + n, a.p)):
        IL, IR = _split_index(I, m)
        for ja, J in enumerate(index_sets(m + n, a.q)):
            JL, JR = _split_index(J, m)
            key = (len(IL), len(JL))
            if key not in blocks:
                nrow = comb(m, key[0]) * comb(m, key[1])
                ncol = comb(n, a.p - key[0]) * comb(n, a.q - key[1])
                blocks[key] = np.zeros((nrow, fl, ncol, fr), dtype=complex)
            r = index_position(m, len(IL))[IL] * comb(m, len(JL)) + index_position(m, len(JL))[JL]
            c = index_position(n, len(IR))[IR] * comb(n, len(JR)) + index_position(n, len(JR))[JR]
            blocks[key][r, :, c, :] = np.asarray(framed[ia, ja], dtype=complex).reshape(fl, fr)
    return {key: blk.reshape(blk.shape[0] * fl, blk.shape[2] * fr) for key, blk in sorted(blocks.items())}


def decomposable_density_residual(a: PQForm, max_rank=None) -> float:
    """L^2 error of the best approximation of ``a`` by ``max_rank`` cross
    products per split (truncated SVD, reconstructed and subtracted).

    ``max_rank=None`` uses the full rank of each block.
    """
    if max_rank is not None and max_rank < 1:
        raise ValidationError("max_rank must be at least 1")
    total = 0.0
    for mat in decomposable_blocks(a).values():
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        r = len(s) if max_rank is None else min(max_rank, len(s))
        approx = (u[:, :r] * s[:r]) @ vh[:r]
        total += float(np.sum(np.abs(mat - approx) ** 2))
    return float(np.sqrt(total))
