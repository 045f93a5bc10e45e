"""Spectral Hodge theory for the Koszul Laplacian on constant-metric tori.

Every operator is block-diagonal over Fourier modes, so kernels, ranks and
spectra are computed mode by mode from exact symbol matrices.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DegreeError, ValidationError
from .exterior import index_sets
from .forms import DTYPE, PQForm, FlatTorusSpace
from .operators import del_, del_adjoint, eigenvalue, inner_product, laplacian

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class SpectrumEntry:
    eigenvalue: float
    multiplicity: int
    witness: PQForm
    example_k: tuple
    complete: bool = True


@dataclass(frozen=True)
class Spectrum:
    space: FlatTorusSpace
    p: int
    q: int
    entries: tuple
    truncated: bool

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


@dataclass(frozen=True)
class HarmonicBasis:
    space: FlatTorusSpace
    bidegree: tuple
    basis: tuple

    def __len__(self):
        return len(self.basis)

    def __iter__(self):
        return iter(self.basis)

    def gram(self):
        return gram_matrix(self.basis)


@dataclass(frozen=True)
class HodgeDecomposition:
    harmonic: PQForm
    exact: PQForm
    coexact: PQForm

    def total(self):
        return self.harmonic + self.exact + self.coexact


def gram_matrix(forms):
    forms = list(forms)
    G = np.zeros((len(forms), len(forms)), dtype=complex)
    for a, u in enumerate(forms):
        for b, v in enumerate(forms):
            G[a, b] = inner_product(u, v)
    return G


def _check_degrees(space, p, q):
    if not (0 <= p <= space.n and 0 <= q <= space.n):
        raise DegreeError(f"bidegree ({p},{q}) out of range in dimension {space.n}")


# symbols


def mode_symbols(op, space, p, q):
    """Symbol matrices of a frequency-diagonal linear operator.

    Returns an array of shape (*freq_shape, dim_out, dim_in). Column b is
    read off by applying ``op`` to the form with unit coefficient on basis
    element b at every frequency; this is valid because ``op`` does not
    couple different frequencies.
    """
    _check_degrees(space, p, q)
    nI, nJ = len(index_sets(space.n, p)), len(index_sets(space.n, q))
    columns = []
    out_shape = None
    for a in range(nI):
        for b in range(nJ):
            coeffs = np.zeros((nI, nJ) + space.freq_shape, dtype=DTYPE)
            coeffs[a, b] = 1
            image = op(PQForm(space, p, q, coeffs))
            out_shape = image.coeffs.shape[:2]
            columns.append(image.coeffs.reshape((-1,) + space.freq_shape))
    stacked = np.stack(columns, axis=-1)  # (dim_out, *freq, dim_in)
    stacked = np.moveaxis(stacked, 0, -2)
    assert stacked.shape[-2] == out_shape[0] * out_shape[1]
    return np.asarray(stacked, dtype=complex)


def _ranks(symbols):
    flat = symbols.reshape((-1,) + symbols.shape[-2:])
    if min(flat.shape[-2:]) == 0:
        return np.zeros(flat.shape[0], dtype=int)
    s = np.linalg.svd(flat, compute_uv=False)
    tol = RANK_RTOL * max(1.0, float(s.max()))
    return (s > tol).sum(axis=-1)


def cohomology_dimension(space, p, q):
    """dim ker(del on (p,q)) - dim im(del from (p-1,q)), summed over modes."""
    _check_degrees(space, p, q)
    n = space.n
    nmodes = int(np.prod(space.freq_shape))
    dim = comb(n, p) * comb(n, q)
    rank_out = _ranks(mode_symbols(del_, space, p, q)).sum() if p < n else 0
    rank_in = _ranks(mode_symbols(del_, space, p - 1, q)).sum() if p > 0 else 0
    return int(nmodes * dim - rank_out - rank_in)


def harmonic_dimension(space, p, q):
    """Total nullity of the Box symbols over all modes in the bandwidth."""
    symbols = mode_symbols(laplacian, space, p, q)
    nmodes = int(np.prod(space.freq_shape))
    return int(nmodes * symbols.shape[-1] - _ranks(symbols).sum())


def cohomology_table(n, bandwidth=1):
    space = FlatTorusSpace.identity(n, bandwidth)
    return [[cohomology_dimension(space, p, q) for q in range(n + 1)] for p in range(n + 1)]


def cohomology_report(n, bandwidth=1):
    return {"dim": n, "table": cohomology_table(n, bandwidth)}


# projections


def _eigenvalue_grid(space):
    """4 pi^2 k^T metric^{-1} k on the frequency grid, extended precision."""
    from .forms import PI

    Ginv = np.linalg.inv(space.metric).astype(np.longdouble)
    n = space.n
    total = np.zeros(space.freq_shape, dtype=np.longdouble)
    for i in range(n):
        for j in range(n):
            total = total + Ginv[i, j] * (space.wavenumber(i + 1) * space.wavenumber(j + 1))
    return 4 * PI**2 * total


def _zero_mode_mask(space):
    mask = np.zeros(space.freq_shape, dtype=bool)
    mask[(space.bandwidth,) * space.n] = True
    return mask


def harmonic_projection(a: PQForm) -> PQForm:
    """L^2 projection onto ker Box: for a constant metric, the zero mode."""
    return a.with_coeffs(a.coeffs * _zero_mode_mask(a.space))


def green_operator(a: PQForm) -> PQForm:
    """G with Box G a = a - harmonic_projection(a) and G a harmonic-free."""
    lam = _eigenvalue_grid(a.space)
    zero = _zero_mode_mask(a.space)
    safe = np.where(zero, 1, lam)
    return a.with_coeffs(np.where(zero, 0, a.coeffs / safe))


def hodge_decompose(a: PQForm) -> HodgeDecomposition:
    """a = harmonic + d d* G a + d* d G a."""
    n = a.space.n
    h = harmonic_projection(a)
    g = green_operator(a)
    zero = PQForm.zero(a.space, a.p, a.q)
    exact = del_(del_adjoint(g)) if a.p > 0 else zero
    coexact = del_adjoint(del_(g)) if a.p < n else zero
    if a.real:
        exact, coexact = exact.with_coeffs(exact.coeffs, True), coexact.with_coeffs(coexact.coeffs, True)
    return HodgeDecomposition(h, exact, coexact)


def cohomology_basis(space, p, q) -> HarmonicBasis:
    """Flat forms dx^I (x) dx^J, |I| = p, |J| = q."""
    _check_degrees(space, p, q)
    basis = []
    for I in index_sets(space.n, p):
        for J in index_sets(space.n, q):
            basis.append(PQForm.from_terms(space, p, q, {(I, J, (0,) * space.n): 1.0}, real=True))
    return HarmonicBasis(space, (p, q), tuple(basis))


# spectrum


def _shell_minimum(space):
    """Smallest eigenvalue among modes just outside the bandwidth box."""
    B, n = space.bandwidth, space.n
    best = np.inf
    for k in np.ndindex(*(2 * B + 3,) * n):
        k = np.array(k) - (B + 1)
        if np.abs(k).max() == B + 1:
            best = min(best, eigenvalue(space, k))
    return best


def spectrum(space, p, q, count) -> Spectrum:
    """The ``count`` smallest distinct Box eigenvalues with multiplicities.

    Entries whose eigenvalue reaches the first mode outside the bandwidth
    box may be undercounted; they are marked incomplete and the result is
    flagged ``truncated``.
    """
    _check_degrees(space, p, q)
    if count < 1:
        raise ValidationError("count must be at least 1")
    n = space.n
    identity = np.array_equal(space.metric, np.eye(n))
    groups = {}
    for k in space.frequencies():
        if identity:
            key = sum(v * v for v in k)
        else:
            key = float(f"{eigenvalue(space, k):.12e}")
        groups.setdefault(key, []).append(k)
    keys = sorted(groups)
    block = comb(n, p) * comb(n, q)
    outside = _shell_minimum(space)
    I0, J0 = index_sets(n, p)[0], index_sets(n, q)[0]
    entries = []
    for key in keys[:count]:
        ks = sorted(groups[key])
        lam = eigenvalue(space, ks[0])
        witness = PQForm.from_terms(space, p, q, {(I0, J0, ks[0]): 1.0})
        complete = lam < outside * (1 - 1e-12)
        entries.append(SpectrumEntry(lam, len(ks) * block, witness, ks[0], complete))
    truncated = len(entries) < count or not all(e.complete for e in entries)
    return Spectrum(space, p, q, tuple(entries), truncated)


def spectrum_csv(spec: Spectrum) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eigenvalue", "multiplicity", "p", "q", "example_k"])
    for e in spec.entries:
        writer.writerow([format(e.eigenvalue, ".17g"), e.multiplicity, spec.p, spec.q, ";".join(map(str, e.example_k))])
    return buf.getvalue()
