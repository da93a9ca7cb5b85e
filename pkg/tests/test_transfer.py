import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimgap import thermo, transfer
from dimgap.bernoulli import ProbVector, dimension
from dimgap.transfer import GridFunction, NotInConeError, hilbert_metric


@pytest.fixture(scope="module")
def state_half():
    p = ProbVector([0.5, 0.5])
    return transfer.gibbs_state(p, 0.2, thermo.beta(p, 0.2))


@pytest.fixture(scope="module")
def bernoulli_state():
    # t = 1, beta = 0: the Gibbs state is the Bernoulli measure itself
    p = ProbVector([0.6, 0.3, 0.1])
    return transfer.gibbs_state(p, 1.0, 0.0)


# ---------------------------------------------------------------------------
# grid functions


def test_grid_function_norms():
    f = GridFunction.from_callable(lambda x: 1 + x, M=64)
    assert f.sup == pytest.approx(2.0)
    assert f.lip == pytest.approx(1.0)
    assert f.log_slope() == pytest.approx(1.0, rel=2e-2)
    assert f.in_cone(1.0) and not f.in_cone(0.5)
    assert f(np.array([0.25])) == pytest.approx([1.25])


def test_interp_matrix_reproduces_linear_functions():
    M = 32
    y = np.random.default_rng(0).uniform(0, 1, 50)
    P = transfer.interp_matrix(y, M)
    x = np.linspace(0, 1, M + 1)
    assert np.allclose(P @ (3 * x - 1), 3 * y - 1)


# ---------------------------------------------------------------------------
# eigenfunctions


def test_gauss_density():
    # full alphabet, b = 1: h is proportional to 1/(1+x)
    op = transfer.build_operator(None, 0.0, 1.0, cut=400, tail_order=1)
    lam, h, _ = transfer.leading_eigen(op.L)
    x = op.x
    ref = 1.0 / (1.0 + x)
    h = h / h[0]
    assert np.max(np.abs(h - ref) / ref) < 1e-4
    assert math.log(lam) == pytest.approx(0.0, abs=1e-6)


def test_operator_family_matches_fresh_build():
    p = ProbVector([0.5, 0.3, 0.2])
    fam = transfer.OperatorFamily(p, 0.4)
    for b in (0.2, 0.7):
        L1 = fam.operator(b).L
        L2 = transfer.build_operator(p, 0.4, b).L
        assert abs(L1 - L2).max() < 1e-14


def test_bernoulli_cylinders(bernoulli_state):
    st_ = bernoulli_state
    assert st_.lam == pytest.approx(1.0, abs=1e-12)
    assert st_.cylinder("1") == pytest.approx(0.6, abs=1e-12)
    assert st_.cylinder("121") == pytest.approx(0.6 * 0.3 * 0.6, abs=1e-12)
    assert st_.cylinder("4") == 0.0
    masses = st_.cylinders(3)
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=5))
def test_cylinders_additive(w):
    p = ProbVector([0.5, 0.3, 0.2])
    st_ = _cached_state(p, 0.3)
    parent = st_.cylinder(w)
    children = sum(st_.cylinder(list(w) + [n]) for n in (1, 2, 3))
    # additive up to the power-iteration tolerance on pi
    assert children == pytest.approx(parent, rel=1e-7)


_STATES = {}


def _cached_state(p, t):
    key = (p, t)
    if key not in _STATES:
        _STATES[key] = thermo.gibbs_state(p, t)
    return _STATES[key]


def test_cylinder_exact_pullback_agrees(state_half):
    for w in ("1", "2", "12", "211", "1212"):
        assert state_half.cylinder(w) == pytest.approx(state_half.cylinder_exact_pullback(w), rel=1e-6)


def test_lyapunov_at_t_one_matches_quadrature():
    p = ProbVector([0.6, 0.4])
    st_ = transfer.gibbs_state(p, 1.0, 0.0)
    d = dimension(p, tol=1e-9)
    assert st_.lyapunov() == pytest.approx(d.lyapunov, rel=1e-7)
    assert transfer.beta_prime_gibbs(st_) == pytest.approx(-d.dim, abs=1e-7)


def test_gibbs_constant_frozen(state_half):
    c3 = state_half.gibbs_constant()["c3"]
    assert 1.0 < c3 < 1.1


def test_eigenfunction_in_cone(state_half):
    assert state_half.h.in_cone(state_half.a)
    assert state_half.cone["lambda1"] == pytest.approx(13 / 18)


def test_cone_parameter_formula():
    c = transfer.cone_parameter(1.0)
    a2 = 4 / 9
    lam1 = 13 / 18
    a0 = 2 * a2 / (lam1 - a2)
    assert c["a0"] == pytest.approx(a0) == pytest.approx(3.2)
    assert c["a1"] == pytest.approx((a0 + 2 * a2 + a2 * a0) / (lam1 - a2))
    assert transfer.cone_parameter(0.0)["a"] == 1.0


# ---------------------------------------------------------------------------
# coboundary and variance


def test_coboundary_residual(state_half):
    cob = transfer.coboundary_U(state_half)
    assert transfer.residual_M_ftilde(state_half, cob) <= 1e-6
    # the corrected potential has mean zero
    ft = transfer.ftilde_Y(state_half, cob)
    assert abs(state_half.integrate_branchwise(ft)) < 1e-7


def test_variance_routes_agree(state_half):
    v = transfer.variance(state_half)
    assert v.agreement < 1e-4
    assert v.single_integral / state_half.lyapunov() == pytest.approx(0.0340811062, abs=1e-8)
    assert 0 < v.rho < 1


def test_variance_zero_for_constant_potential():
    # single digit: f_p is constant, so sigma^2 = 0
    p = ProbVector.atom(1)
    st_ = transfer.gibbs_state(p, 0.5, thermo.beta(p, 0.5))
    v = transfer.variance(st_)
    assert abs(v.single_integral) < 1e-12


# ---------------------------------------------------------------------------
# Hilbert metric and contraction


def test_hilbert_metric_projective(state_half):
    rng = np.random.default_rng(1)
    a = 3.0
    v = transfer.random_cone_function(rng, a, M=256)
    w = transfer.random_cone_function(rng, a, M=256)
    assert hilbert_metric(v, v, a) == pytest.approx(0.0, abs=1e-12)
    assert hilbert_metric(v, GridFunction(5 * v.values), a) == pytest.approx(0.0, abs=1e-12)
    d = hilbert_metric(v, w, a)
    assert d > 0
    assert hilbert_metric(w, v, a) == pytest.approx(d, rel=1e-12)
    u = transfer.random_cone_function(rng, a, M=256)
    assert hilbert_metric(v, u, a) <= d + hilbert_metric(w, u, a) + 1e-12


def test_hilbert_metric_rejects_outside_cone():
    x = np.linspace(0, 1, 65)
    with pytest.raises(NotInConeError):
        hilbert_metric(np.exp(5 * x), np.ones(65), 1.0)
    with pytest.raises(NotInConeError):
        hilbert_metric(x, np.ones(65), 1.0)


def test_contraction_ratio_below_one(state_half):
    r = transfer.contraction_ratios(state_half, n_pairs=10, seed=0)
    assert r["r_hat"] < 1
    assert r["in_lambda_cone"]


# ---------------------------------------------------------------------------
# normalised operator and named entry points


def test_M_fixes_constants_and_preserves_mu(state_half):
    one = np.ones(state_half.M + 1)
    assert np.max(np.abs(state_half.apply_M(one).values - 1)) < 1e-9
    rng = np.random.default_rng(5)
    for _ in range(20):
        w = rng.normal(size=state_half.M + 1)
        assert abs(state_half.integrate(state_half.apply_M(w)) - state_half.integrate(w)) <= 1e-7


def test_fixed_point_h_bernoulli_is_constant():
    h, a, iters = transfer.fixed_point_h(ProbVector([0.5, 0.3, 0.2]), 1.0, 0.0)
    assert np.allclose(h.values, 1.0, atol=1e-12)
    assert a >= 1.0 and iters >= 1


def test_fixed_point_h_gauss():
    h, a, _ = transfer.fixed_point_h(None, 0.0, 1.0, cut=500, tail_order=1)
    ref = 1.0 / (1.0 + h.nodes)
    ref = ref / ref.max()
    assert np.max(np.abs(h.values - ref) / ref) < 1e-4
    assert h.in_cone(a)


def test_fixed_point_h_spectral_error():
    with pytest.raises(transfer.SpectralError):
        transfer.fixed_point_h(ProbVector([0.5, 0.5]), 0.3, 0.4, max_iter=2)


def test_gibbs_cylinder_and_lyapunov_gibbs(bernoulli_state):
    assert transfer.gibbs_cylinder(bernoulli_state, "12") == pytest.approx(0.18, abs=1e-8)
    assert transfer.gibbs_cylinder(bernoulli_state, "17") == 0.0
    p = ProbVector([0.5, 0.5])
    st_ = transfer.gibbs_state(p, 1.0, 0.0)
    lg = transfer.lyapunov_gibbs(st_, beta_min=0.75)
    assert lg["value"] == pytest.approx(dimension(p, tol=1e-9).lyapunov, rel=1e-7)
    assert lg["value"] <= lg["uniform_bound"]


def test_lyapunov_gibbs_atom():
    st_ = transfer.gibbs_state(ProbVector.atom(2), 0.5, 0.0)
    z2 = math.sqrt(2) - 1
    # the point mass at z2 is resolved by the grid eigenvector, O(1/M^2) error
    assert transfer.lyapunov_gibbs(st_)["value"] == pytest.approx(-2 * math.log(z2), abs=1e-7)
