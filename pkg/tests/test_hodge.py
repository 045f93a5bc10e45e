from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from koszul.errors import DegreeError, ValidationError
from koszul.forms import FlatTorusSpace, PQForm, random_form
from koszul.hodge import (
    cohomology_basis,
    cohomology_dimension,
    cohomology_table,
    gram_matrix,
    green_operator,
    harmonic_dimension,
    harmonic_projection,
    hodge_decompose,
    spectrum,
    spectrum_csv,
)
from koszul.operators import del_, inner_product, laplacian, norm
from oracles import dense_del_matrix
from conftest import random_spd


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cohomology_table_binomial(n):
    table = cohomology_table(n)
    assert table == [[comb(n, p) * comb(n, q) for q in range(n + 1)] for p in range(n + 1)]


@pytest.mark.parametrize("n,B", [(1, 3), (2, 2), (3, 1)])
def test_harmonic_dimension(n, B):
    S = FlatTorusSpace(n, B, random_spd(np.random.default_rng(n), n))
    for p in range(n + 1):
        for q in range(n + 1):
            assert harmonic_dimension(S, p, q) == comb(n, p) * comb(n, q)
            assert cohomology_dimension(S, p, q) == comb(n, p) * comb(n, q)


def test_cohomology_degree_error():
    with pytest.raises(DegreeError):
        cohomology_dimension(FlatTorusSpace.identity(2, 1), 3, 0)


def test_cohomology_basis():
    S1 = FlatTorusSpace.identity(1, 1)
    (only,) = cohomology_basis(S1, 1, 1)
    assert only.terms == {((1,), (1,), (0,)): 1.0}
    basis = cohomology_basis(FlatTorusSpace.identity(2, 1), 1, 1)
    assert len(basis) == 4
    assert np.allclose(basis.gram(), np.eye(4))
    assert all(laplacian(h).is_zero() for h in basis)
    assert len(cohomology_basis(FlatTorusSpace.identity(3, 0), 0, 0)) == 1


def test_harmonic_projection_examples(rng):
    S = FlatTorusSpace.identity(1, 1)
    a = PQForm.from_terms(
        S, 1, 1, {((1,), (1,), (0,)): 1.0, ((1,), (1,), (1,)): 1 / 2j, ((1,), (1,), (-1,)): -1 / 2j}, real=True
    )
    h = harmonic_projection(a)
    assert h.terms == {((1,), (1,), (0,)): 1.0}
    assert laplacian(h).is_zero()
    zero_mean = a - h
    assert harmonic_projection(zero_mean).is_zero()
    for _ in range(20):
        b = random_form(FlatTorusSpace.identity(2, 1), 1, 0, rng)
        assert harmonic_projection(harmonic_projection(b)) == harmonic_projection(b)


def test_green_operator_examples(rng):
    S = FlatTorusSpace.identity(1, 1)
    s = PQForm.from_terms(S, 0, 0, {((), (), (1,)): 1 / 2j, ((), (), (-1,)): -1 / 2j}, real=True)
    g = green_operator(s)
    assert g.coefficient((), (), (1,)) == pytest.approx(1 / 2j / (4 * np.pi**2))
    assert norm(laplacian(g) - s) < 1e-14
    assert green_operator(PQForm.constant(S, 1, 0, [[3.0]])).is_zero()


@given(st.integers(1, 3), st.integers(0, 10**6), st.data())
def test_green_identity(n, seed, data):
    rng = np.random.default_rng(seed)
    S = FlatTorusSpace(n, 2, random_spd(rng, n))
    a = random_form(S, data.draw(st.integers(0, n)), data.draw(st.integers(0, n)), rng)
    assert norm(laplacian(green_operator(a)) + harmonic_projection(a) - a) <= 1e-10 * max(1, norm(a))


@given(st.integers(1, 3), st.integers(0, 10**6), st.data())
def test_hodge_decomposition_orthogonal(n, seed, data):
    rng = np.random.default_rng(seed)
    S = FlatTorusSpace(n, 2, random_spd(rng, n))
    a = random_form(S, data.draw(st.integers(0, n)), data.draw(st.integers(0, n)), rng)
    d = hodge_decompose(a)
    assert norm(d.total() - a) <= 1e-10 * max(1, norm(a))
    parts = (d.harmonic, d.exact, d.coexact)
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(inner_product(parts[i], parts[j])) <= 1e-10 * max(1, norm(a) ** 2)


def test_hodge_decompose_examples(rng):
    S = FlatTorusSpace.identity(2, 2)
    h = PQForm.constant(S, 1, 1, np.arange(4.0).reshape(2, 2))
    d = hodge_decompose(h)
    assert d.harmonic == h and d.exact.is_zero() and d.coexact.is_zero()
    ex = del_(random_form(S, 0, 1, rng))
    d = hodge_decompose(ex)
    assert norm(d.exact - ex) < 1e-10 and norm(d.harmonic) < 1e-10 and norm(d.coexact) < 1e-10
    # closed (1,1)-form = constant + del(random (0,1))
    closed = h + ex
    d = hodge_decompose(closed)
    assert norm(d.coexact) < 1e-10
    assert d.harmonic == harmonic_projection(closed)


@pytest.mark.parametrize("n,B", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_harmonic_matches_dense_least_squares(n, B):
    rng = np.random.default_rng(100 * n + B)
    S = FlatTorusSpace.identity(n, B)
    for p in range(1, n + 1):
        for q in range(n + 1):
            const = PQForm.constant(S, p, q, rng.normal(size=(comb(n, p), comb(n, q))))
            a = const + del_(random_form(S, p - 1, q, rng))
            D = dense_del_matrix(n, B, p, q)
            vec = np.asarray(a.coeffs, dtype=complex).ravel()
            rho, *_ = np.linalg.lstsq(D, vec, rcond=None)
            oracle = vec - D @ rho
            got = np.asarray(harmonic_projection(a).coeffs, dtype=complex).ravel()
            assert np.abs(got - oracle).max() <= 1e-8


def test_spectrum_examples():
    S = FlatTorusSpace.identity(1, 3)
    spec = spectrum(S, 0, 0, 3)
    assert [e.multiplicity for e in spec] == [1, 2, 2]
    assert [e.eigenvalue for e in spec] == pytest.approx([0, 4 * np.pi**2, 16 * np.pi**2])
    assert not spec.truncated
    spec2 = spectrum(FlatTorusSpace.identity(2, 2), 0, 0, 2)
    assert spec2[1].eigenvalue == pytest.approx(4 * np.pi**2)
    assert spec2[1].multiplicity == 4
    spec3 = spectrum(FlatTorusSpace.identity(2, 1), 1, 1, 1)
    assert spec3[0].multiplicity == 4


@given(st.integers(1, 3), st.integers(0, 10**6), st.data())
def test_spectrum_witnesses(n, seed, data):
    rng = np.random.default_rng(seed)
    S = FlatTorusSpace(n, 2, random_spd(rng, n))
    p, q = data.draw(st.integers(0, n)), data.draw(st.integers(0, n))
    spec = spectrum(S, p, q, 4)
    assert spec[0].eigenvalue == 0 and spec[0].multiplicity == comb(n, p) * comb(n, q)
    for e in spec:
        assert e.eigenvalue >= 0
        if e.eigenvalue > 0:
            assert e.eigenvalue > 1e-8
        lhs = np.asarray(laplacian(e.witness).coeffs, dtype=complex)
        assert np.abs(lhs - e.eigenvalue * np.asarray(e.witness.coeffs, dtype=complex)).max() <= 1e-10 * max(1, e.eigenvalue)


def test_spectrum_truncation_is_flagged():
    spec = spectrum(FlatTorusSpace.identity(2, 1), 0, 0, 4)
    assert spec.truncated and len(spec) == 3
    # a long thin torus: k = (0, +-2) lies below k = (1, 0) but outside the box
    thin = spectrum(FlatTorusSpace(2, 1, [[1.0, 0.0], [0.0, 100.0]]), 0, 0, 3)
    assert [e.complete for e in thin] == [True, True, False]
    assert thin.truncated
    with pytest.raises(ValidationError):
        spectrum(FlatTorusSpace.identity(1, 1), 0, 0, 0)


def test_spectrum_csv_round_trip():
    spec = spectrum(FlatTorusSpace.identity(1, 2), 0, 0, 2)
    lines = spectrum_csv(spec).splitlines()
    assert lines[0] == "eigenvalue,multiplicity,p,q,example_k"
    lam = float(lines[2].split(",")[0])
    assert lam == spec[1].eigenvalue


def test_gram_matrix_hermitian(rng):
    forms = [random_form(FlatTorusSpace.identity(2, 1), 1, 1, rng) for _ in range(4)]
    G = gram_matrix(forms)
    assert np.allclose(G, G.conj().T)
    assert np.linalg.eigvalsh(G).min() > 0
