from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from koszul.errors import BandwidthOverflowError, NonFiniteGroupError, ValidationError
from koszul.forms import FlatTorusSpace, PQForm, evaluate, random_form, wedge
from koszul.hessian import MetricField, hessian_of
from koszul.operators import del_, delbar, laplacian, norm
from koszul.quotient import (
    AffineAutomorphism,
    average,
    close_group,
    decompose_on_quotient,
    group_from_json,
    invariance_residual,
    pullback,
)
from oracles import as_matrix, pullback_at

KLEIN = AffineAutomorphism([[1, 0], [0, -1]], ["1/2", "0"])

# signed permutation matrices keep every box |k| <= B closed
LINEAR_PARTS = [
    [[1, 0], [0, 1]],
    [[1, 0], [0, -1]],
    [[0, 1], [1, 0]],
    [[0, -1], [1, 0]],
    [[-1, 0], [0, -1]],
]
TRANSLATIONS = ["0", "1/2", "1/3", "1/4", "3/4", "2/5"]

automorphisms = st.builds(
    lambda A, b1, b2: AffineAutomorphism(A, [b1, b2]),
    st.sampled_from(LINEAR_PARTS),
    st.sampled_from(TRANSLATIONS),
    st.sampled_from(TRANSLATIONS),
)


def test_automorphism_validation():
    with pytest.raises(ValidationError):
        AffineAutomorphism([[2, 0], [0, 1]], [0, 0])
    with pytest.raises(ValidationError):
        AffineAutomorphism([[1, 0], [0, 1]], [0])
    g = AffineAutomorphism([[1, 0], [0, 1]], ["3/2", "-1/4"])
    assert g.translation == (Fraction(1, 2), Fraction(3, 4))


@given(automorphisms, automorphisms)
def test_group_operations(g, h):
    assert g.compose(g.inverse()).is_identity()
    x = np.random.default_rng(0).uniform(size=2)
    lhs = g.compose(h)(x)
    rhs = g(h(x))
    assert np.allclose(np.exp(2j * np.pi * lhs), np.exp(2j * np.pi * rhs))
    assert AffineAutomorphism.from_json(g.to_json()) == g


def test_close_group_examples():
    G = close_group([KLEIN])
    assert G.order == 2 and G.free
    assert close_group([AffineAutomorphism.identity(2)]).order == 1
    minus = close_group([AffineAutomorphism([[-1, 0], [0, -1]], [0, 0])])
    assert minus.order == 2 and not minus.free
    with pytest.raises(NonFiniteGroupError):
        close_group([AffineAutomorphism([[1, 1], [0, 1]], [0, 0])], bound=50)


def fixed_point_bruteforce(g, denominators=12):
    """Search the rational grid (1/N) Z^n for fixed points."""
    N = 1
    for b in g.translation:
        N = np.lcm(N, b.denominator)
    N = int(N) * 2 * denominators
    for i in range(N):
        for j in range(N):
            x = np.array([Fraction(i, N), Fraction(j, N)])
            y = [sum(g.linear[r][c] * x[c] for c in range(2)) + g.translation[r] for r in range(2)]
            if all((y[r] - x[r]).denominator == 1 for r in range(2)):
                return True
    return False


@given(automorphisms)
def test_fixed_points_match_bruteforce(g):
    # fixed points of finite-order affine maps are rational with bounded denominator
    assert g.has_fixed_point() == fixed_point_bruteforce(g, 1)


def test_group_json():
    G = group_from_json({"dim": 2, "generators": [KLEIN.to_json()]})
    assert G.order == 2
    assert G.to_json()["generators"][0]["translation"] == ["1/2", "0"]
    with pytest.raises(ValidationError):
        group_from_json({"dim": 3, "generators": [KLEIN.to_json()]})
    with pytest.raises(ValidationError):
        group_from_json({"generators": [{"linear": [[1]]}]})


# pullback


def test_pullback_examples():
    S = FlatTorusSpace.identity(2, 1)
    a = random_form(S, 1, 1, np.random.default_rng(0))
    assert pullback(AffineAutomorphism.identity(2), a) == a
    dydy = PQForm.from_terms(S, 1, 1, {((2,), (2,), (0, 0)): 1.0})
    assert pullback(KLEIN, dydy) == dydy
    e = PQForm.from_terms(S, 0, 0, {((), (), (1, 0)): 1.0})
    assert pullback(KLEIN, e).terms == {((), (), (1, 0)): -1.0}
    for x in np.random.default_rng(1).uniform(size=(10, 2)):
        assert evaluate(pullback(KLEIN, e), x)[0, 0] == pytest.approx(evaluate(e, KLEIN(x))[0, 0])


@given(automorphisms, st.integers(0, 10**6), st.integers(0, 2), st.integers(0, 2))
def test_pullback_substitution_oracle(g, seed, p, q):
    rng = np.random.default_rng(seed)
    a = random_form(FlatTorusSpace.identity(2, 2), p, q, rng)
    b = pullback(g, a)
    A = np.array(g.linear)
    t = np.array([float(v) for v in g.translation])
    for x in rng.uniform(size=(5, 2)):
        assert np.allclose(evaluate(b, x), as_matrix(pullback_at(A, t, a, x), 2, p, q), atol=1e-10)


def test_pullback_overflow():
    S = FlatTorusSpace.identity(2, 1)
    shear = AffineAutomorphism([[1, 1], [0, 1]], [0, 0])
    a = PQForm.from_terms(S, 0, 0, {((), (), (1, 1)): 1.0})
    with pytest.raises(BandwidthOverflowError):
        pullback(shear, a)
    # low modes stay inside the box
    low = PQForm.from_terms(S, 0, 0, {((), (), (1, 0)): 1.0})
    assert pullback(shear, low).terms == {((), (), (1, 1)): 1.0}


@given(automorphisms, automorphisms, st.integers(0, 10**6))
def test_pullback_homomorphism(g, h, seed):
    rng = np.random.default_rng(seed)
    S = FlatTorusSpace.identity(2, 2)
    a = random_form(S, 1, 0, rng, bandwidth=1)
    b = random_form(S, 0, 1, rng, bandwidth=1)
    assert norm(pullback(g, wedge(a, b)) - wedge(pullback(g, a), pullback(g, b))) <= 1e-12
    # (g h)^* = h^* g^*
    assert norm(pullback(g.compose(h), a) - pullback(h, pullback(g, a))) <= 1e-12


@given(automorphisms, st.integers(0, 10**6))
def test_pullback_commutes_with_operators(g, seed):
    rng = np.random.default_rng(seed)
    a = random_form(FlatTorusSpace.identity(2, 2), 0, 1, rng)
    if all((4 * b).denominator == 1 for b in g.translation):
        # phases are exactly +-1, +-i: commutation is coefficient-exact
        assert pullback(g, del_(a)) == del_(pullback(g, a))
        assert pullback(g, delbar(a)) == delbar(pullback(g, a))
    else:
        assert norm(pullback(g, del_(a)) - del_(pullback(g, a))) <= 1e-14 * norm(del_(a))
        assert norm(pullback(g, delbar(a)) - delbar(pullback(g, a))) <= 1e-14 * norm(delbar(a))
    assert norm(pullback(g, laplacian(a)) - laplacian(pullback(g, a))) <= 1e-11 * max(1, norm(laplacian(a)))


# averaging


def test_average_examples(rng):
    G = close_group([KLEIN])
    S = FlatTorusSpace.identity(2, 1)
    dxdy = PQForm.from_terms(S, 1, 1, {((1,), (2,), (0, 0)): 1.0})
    assert average(G, dxdy).is_zero()
    inv = PQForm.from_terms(S, 1, 1, {((1,), (1,), (0, 0)): 2.0, ((2,), (2,), (0, 0)): 3.0})
    assert average(G, inv) == inv
    for _ in range(20):
        a = random_form(S, 1, 0, rng)
        avg = average(G, a)
        assert average(G, avg) == avg
        assert invariance_residual(G, avg) == 0


def random_small_group(rng):
    gens = [AffineAutomorphism(LINEAR_PARTS[rng.integers(len(LINEAR_PARTS))], [TRANSLATIONS[rng.integers(6)], "0"])]
    return close_group(gens)


def test_average_is_projection(rng):
    S = FlatTorusSpace.identity(2, 2)
    for _ in range(10):
        G = random_small_group(rng)
        a = random_form(S, 1, 1, rng)
        avg = average(G, a)
        assert norm(average(G, avg) - avg) <= 1e-13
        assert invariance_residual(G, avg) <= 1e-13
        assert norm(average(G, del_(a)) - del_(avg)) <= 1e-12


# quotient decomposition


def invariant_metric(S, flat):
    f = PQForm.from_terms(
        S,
        0,
        0,
        {
            ((), (), (0, 1)): 0.01, ((), (), (0, -1)): 0.01,
            ((), (), (2, 0)): 0.004, ((), (), (-2, 0)): 0.004,
            ((), (), (2, 1)): 0.002, ((), (), (2, -1)): 0.002,
            ((), (), (-2, 1)): 0.002, ((), (), (-2, -1)): 0.002,
        },
        real=True,
    )
    return f, MetricField.from_potential(S, flat, f)


def test_decompose_on_quotient_klein():
    G = close_group([KLEIN])
    S = FlatTorusSpace.identity(2, 2)
    flat = np.diag([2.0, 3.0])
    for g_ in G.elements:
        assert np.array_equal(g_.matrix.T @ flat @ g_.matrix, flat)
    f, g = invariant_metric(S, flat)
    assert invariance_residual(G, g.tensor) <= 1e-10
    dec = decompose_on_quotient(g, G)
    assert np.array_equal(dec.flat_part, flat)
    assert dec.residual <= 1e-9
    assert dec.one_form_invariance <= 1e-11 and dec.flat_invariance <= 1e-11
    assert norm(dec.decomposition.potential - f) <= 1e-12
    data = dec.to_json()
    assert data["group_order"] == 2


def test_decompose_on_quotient_constant():
    G = close_group([KLEIN])
    S = FlatTorusSpace.identity(2, 1)
    dec = decompose_on_quotient(MetricField.constant(S, np.diag([2.0, 3.0])), G)
    assert dec.one_form.is_zero() and dec.decomposition.potential.is_zero()


def test_decompose_on_quotient_rejections():
    S = FlatTorusSpace.identity(2, 2)
    f, g = invariant_metric(S, np.diag([2.0, 3.0]))
    with pytest.raises(ValidationError, match="fixed points"):
        decompose_on_quotient(g, close_group([AffineAutomorphism([[-1, 0], [0, -1]], [0, 0])]))
    odd = MetricField.from_potential(
        S, np.diag([2.0, 3.0]), PQForm.from_terms(S, 0, 0, {((), (), (1, 0)): 0.01, ((), (), (-1, 0)): 0.01}, real=True)
    )
    with pytest.raises(ValidationError, match="not group-invariant"):
        decompose_on_quotient(odd, close_group([KLEIN]))
    skew = FlatTorusSpace(2, 2, [[2.0, 0.3], [0.3, 1.0]])
    with pytest.raises(ValidationError, match="background"):
        decompose_on_quotient(MetricField.constant(skew, np.eye(2)), close_group([KLEIN]))
