import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimgap.bernoulli import (
    ConstructionError,
    InvalidInputError,
    InvalidParameterError,
    LyapunovClasses,
    ProbVector,
    dimension,
    entropy,
    hypothesis1_check,
    hypothesis2_check,
    lyapunov,
    lyapunov_monte_carlo,
    psi,
    sharpness_vector,
)
from dimgap.map_core import LengthFamily


def weights(min_size=2, max_size=5):
    return st.lists(st.floats(0.05, 1.0), min_size=min_size, max_size=max_size).map(
        lambda w: list(np.asarray(w) / np.sum(w))
    )


# ---------------------------------------------------------------------------
# probability vectors


def test_probvector_validation():
    with pytest.raises(InvalidInputError):
        ProbVector([0.5, 0.6])
    with pytest.raises(InvalidInputError):
        ProbVector([1.2, -0.2])
    with pytest.raises(InvalidInputError):
        ProbVector([])
    with pytest.raises(InvalidInputError):
        ProbVector.from_json({"kind": "mystery"})


def test_probvector_constructors():
    p = ProbVector.uniform([2, 4])
    assert p.support.tolist() == [2, 4]
    assert p.p(2) == 0.5 and p.p(3) == 0.0 and p.p(9) == 0.0
    a = ProbVector.atom(3)
    assert a.support.tolist() == [3]
    q = ProbVector.power(2.0, cut=100)
    assert q.is_decreasing
    assert q.tail_mass == pytest.approx(1 - sum(1 / n**2 for n in range(1, 101)) / (math.pi**2 / 6))
    assert q.tail_constant == pytest.approx(q.weights[0])
    assert ProbVector.from_json("[0.25, 0.75]") == ProbVector([0.25, 0.75])
    assert ProbVector.from_json({"weights": [1, 3], "normalize": True}) == ProbVector([0.25, 0.75])
    assert hash(ProbVector([0.5, 0.5])) == hash(ProbVector([0.5, 0.5]))


@given(weights(1, 8))
def test_entropy_bounds(w):
    p = ProbVector(w)
    h = entropy(p)
    assert -1e-12 <= h <= math.log(len(w)) + 1e-12


def test_entropy_uniform_and_atom():
    assert entropy(ProbVector.uniform(range(1, 9))) == pytest.approx(math.log(8))
    assert entropy(ProbVector.atom(2)) == 0.0


def test_psi_closed_form():
    # psi = |T'(z1)|^(-1/4) = sqrt(z1)
    assert psi() == pytest.approx(math.sqrt((math.sqrt(5) - 1) / 2), abs=1e-15)
    assert psi() == pytest.approx(0.7861514, abs=1e-6)


# ---------------------------------------------------------------------------
# Lyapunov exponents


def test_atom_lyapunov_closed_forms():
    # chi = log|T'(z_n)| = -2 log z_n at the fixed point of branch n
    chi1 = lyapunov(ProbVector.atom(1))
    assert chi1.value == pytest.approx(2 * math.log((1 + math.sqrt(5)) / 2), abs=1e-13)
    assert chi1.value == pytest.approx(0.9624237, abs=1e-7)
    chi2 = lyapunov(ProbVector.atom(2))
    assert chi2.value == pytest.approx(2 * math.log(1 + math.sqrt(2)), abs=1e-13)


def test_half_half_frozen():
    # regression values from the depth-14 quadrature (error bound 7.7e-8)
    r = lyapunov(ProbVector([0.5, 0.5]), depth=14)
    assert r.value == pytest.approx(1.346022230624415, abs=1e-12)
    assert r.err < 1e-7
    d = dimension(ProbVector([0.5, 0.5]), depth=14)
    assert d.dim == pytest.approx(0.5149596825294607, abs=1e-12)


def test_quadrature_error_bound_covers_deeper_value():
    p = ProbVector([0.6, 0.3, 0.1])
    shallow = lyapunov(p, depth=5)
    deep = lyapunov(p, depth=11)
    assert abs(shallow.value - deep.value) <= shallow.err
    assert deep.err < shallow.err


def test_adaptive_depth_meets_tolerance():
    r = lyapunov(ProbVector([0.7, 0.3]), tol=1e-8)
    assert r.method == "quadrature"
    assert r.err <= 1e-8
    assert [h[0] for h in r.history] == list(range(1, r.depth + 1))


def test_monte_carlo_agrees_with_quadrature():
    p = ProbVector([0.5, 0.5])
    mc, se = lyapunov_monte_carlo(p, n_samples=200_000, seed=3)
    assert abs(mc - 1.346022230624415) < 4 * se
    assert lyapunov_monte_carlo(p, n_samples=1000, seed=3) == lyapunov_monte_carlo(p, n_samples=1000, seed=3)


def test_monte_carlo_fallback_when_budget_is_small():
    # budget allows depth 1 only, whose bound is far worse than 3 standard errors
    p = ProbVector.uniform(range(1, 40))
    r = lyapunov(p, tol=1e-9, budget=39, mc_samples=20_000)
    assert r.method == "monte-carlo"
    assert r.err < r.history[0][2]
    assert abs(r.value - r.history[0][1]) < r.history[0][2]


@settings(max_examples=15, deadline=None)
@given(weights(2, 4))
def test_classes_match_direct_quadrature(w):
    p = ProbVector(w)
    k = 6
    cls = LyapunovClasses.build(p.support, k)
    direct = lyapunov(p, depth=k)
    val, err = cls.lyapunov(p.support_weights)
    assert val == pytest.approx(direct.value, rel=1e-12)
    assert err == pytest.approx(direct.err, rel=1e-9)
    assert cls.dimension(p.support_weights) == pytest.approx(p.entropy / direct.value, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(weights(2, 6))
def test_dimension_below_one(w):
    d = dimension(ProbVector(w), depth=5)
    assert 0 < d.dim < 1


# ---------------------------------------------------------------------------
# hypotheses


def test_hypothesis_clauses():
    h = hypothesis1_check(ProbVector([0.5, 0.5]), 0.01)
    assert h.satisfies and h.branch == "a"
    h = hypothesis1_check(ProbVector([0.9, 0.0, 0.1]), 0.01)
    assert h.satisfies and h.branch == "b"
    h = hypothesis1_check(ProbVector([0.8, 0.2]), 0.01)
    assert h.branch == "a,b"
    h = hypothesis1_check(ProbVector([0.0, 0.5, 0.5]), 0.01)
    assert not h.satisfies and h.branch == "none"
    # strict versus non-strict at the boundary p_2 = eps
    edge = ProbVector([0.5, 0.25, 0.25])
    assert not hypothesis1_check(edge, 0.25).satisfies
    assert hypothesis2_check(edge, 0.25).satisfies
    with pytest.raises(InvalidParameterError):
        hypothesis1_check(edge, 0.9)


# ---------------------------------------------------------------------------
# sharpness construction


def test_sharpness_bounds_increase_towards_t():
    fam = LengthFamily.log_squared()
    bounds = [sharpness_vector(fam, 0.9, N).bound for N in (10**2, 10**3, 10**4)]
    assert bounds[0] < bounds[1] < bounds[2] < 0.9
    assert bounds[2] >= 0.8


def test_sharpness_masses_sum_to_one():
    fam = LengthFamily.log_squared()
    r = sharpness_vector(fam, 0.5, 100)
    p = r.weights()
    assert p.support[0] == 100
    # weights() renormalises the integer truncation; the continuous k differs by < 1 term
    raw = r.c * np.exp(r.t * fam.log(p.support)).sum()
    assert raw == pytest.approx(1.0, abs=2 * r.c * math.exp(r.t * float(fam.log(100))))


def test_sharpness_entropy_identity():
    fam = LengthFamily.log_squared()
    r = sharpness_vector(fam, 0.5, 100)
    p = r.weights()
    assert r.entropy == pytest.approx(p.entropy, rel=1e-3)


def test_sharpness_rejects_summable_family():
    with pytest.raises(ConstructionError):
        sharpness_vector(LengthFamily.gauss(), 0.9, 100)
    with pytest.raises(InvalidParameterError):
        sharpness_vector(LengthFamily.log_squared(), 1.2, 100)


def test_sharpness_lower_bound_holds_on_the_affine_map():
    from dimgap.map_core import FamilyAffineMap

    fam = LengthFamily.log_squared()
    r = sharpness_vector(fam, 0.5, 20)
    p = r.weights()
    tmap = FamilyAffineMap(fam, digit_cut=int(r.k) + 1)
    # affine branches: log|T'| = -log|I_n|, so depth 1 is exact and chi = A
    chi = lyapunov(p, depth=1, tmap=tmap)
    assert chi.err == pytest.approx(0.0, abs=1e-12)
    assert chi.value == pytest.approx(r.A, rel=1e-2)
    assert p.entropy / chi.value >= r.bound


def test_sharpness_near_one_does_not_overflow():
    # the support end k exceeds float range here; the sums run in log space
    fam = LengthFamily.log_squared()
    r = sharpness_vector(fam, 0.99, 100)
    assert r.k == math.inf
    assert 0.98 < r.bound < 0.99
    with pytest.raises(ConstructionError):
        r.weights()


def test_log_at_exp_matches_log():
    for fam in (LengthFamily.gauss(), LengthFamily.power(2.0), LengthFamily.log_squared()):
        n = np.array([1.0, 7.0, 1e5])
        assert np.allclose(fam.log_at_exp(np.log(n)), fam.log(n), rtol=1e-12)
