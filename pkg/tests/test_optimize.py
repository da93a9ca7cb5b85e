import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimgap import optimize
from dimgap.bernoulli import InvalidParameterError, ProbVector, dimension
from dimgap.optimize import DimEvaluator, project_simplex

# grid search over p1 in [0.01, 0.99] with step 1e-3 at depth 19 (N = 2)
GRID_P1 = 0.60269
GRID_DIM = 0.5312326


@pytest.fixture(scope="module")
def run2():
    return optimize.maximize_dim(2, restarts=4)


# ---------------------------------------------------------------------------
# projection


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12))
def test_project_simplex_lands_on_simplex(v):
    w = project_simplex(np.array(v))
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0)


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=8), st.integers(0, 2**31))
def test_project_simplex_is_nearest(v, seed):
    # no random simplex point is closer than the projection
    v = np.array(v)
    w = project_simplex(v)
    q = np.random.default_rng(seed).dirichlet(np.ones(v.size), 20)
    assert np.all(np.linalg.norm(q - v, axis=1) >= np.linalg.norm(w - v) - 1e-9)


def test_project_simplex_fixes_simplex_points():
    w = np.array([0.2, 0.3, 0.5])
    assert np.allclose(project_simplex(w), w)


def test_depth_for():
    assert optimize.depth_for(2, 10**6) == 19
    assert optimize.depth_for(10, 10**6) == 6
    assert optimize.depth_for(10**7, 10**6) == 1


# ---------------------------------------------------------------------------
# gradients


def test_gradient_is_tangent():
    g = optimize.dim_gradient(ProbVector([0.5, 0.3, 0.2]), depth=6)
    assert abs(g.grad.sum()) < 1e-12
    assert not g.one_sided


def test_gradient_matches_secant_at_uniform():
    # moving mass to digit 1 raises the dimension of the uniform two-digit vector
    ev = DimEvaluator(2, 12)
    g, _ = ev.gradient([0.5, 0.5])
    h = 1e-3
    secant = (ev([0.5 + h, 0.5 - h]) - ev([0.5 - h, 0.5 + h])) / (2 * h)
    assert g[0] > 0
    # the tangent direction (1, -1) has derivative g[0] - g[1]
    assert g[0] - g[1] == pytest.approx(secant, rel=1e-4)


def test_gradient_one_sided_on_boundary():
    g = optimize.dim_gradient(ProbVector([0.7, 0.3, 0.0]), depth=5, N=3)
    assert g.one_sided


def test_gradient_rejects_wide_support():
    with pytest.raises(InvalidParameterError):
        optimize.dim_gradient(ProbVector([0.5, 0.25, 0.25]), N=2)


def test_gradient_vanishes_at_grid_optimum():
    g = optimize.dim_gradient(ProbVector([GRID_P1, 1 - GRID_P1]))
    assert g.norm <= 1e-3  # grid spacing 1e-3 limits how close p1 is


# ---------------------------------------------------------------------------
# search


def test_two_digit_optimum_matches_grid(run2):
    assert run2.oracle["p1"] == pytest.approx(GRID_P1, abs=1e-3)
    assert run2.oracle["dim"] == pytest.approx(GRID_DIM, abs=1e-6)
    assert run2.dim >= run2.oracle["dim"] - 1e-4
    assert run2.p.weights[0] == pytest.approx(GRID_P1, abs=2e-3)
    assert run2.flags["converged"] and run2.flags["decreasing"] and run2.flags["below_one"]
    assert run2.grad_norm <= 1e-4


def test_grid_method():
    r = optimize.maximize_dim(2, "grid")
    assert r.dim == pytest.approx(GRID_DIM, abs=1e-6)


def test_coordinate_ascent_agrees(run2):
    r = optimize.maximize_dim(2, "ca", restarts=3)
    assert r.dim == pytest.approx(run2.dim, abs=1e-6)


def test_sequence_monotone_and_decreasing():
    runs = optimize.maximize_sequence((2, 3, 4), restarts=3, opt_words=10**5, final_words=10**6)
    dims = [r.dim for r in runs]
    assert dims[0] < dims[1] < dims[2] < 1
    assert all(r.flags["decreasing"] for r in runs)
    # the final dimension agrees with an independent evaluation
    d = dimension(runs[-1].p, depth=runs[-1].depth_final)
    assert runs[-1].dim == pytest.approx(d.dim, abs=1e-12)
    js = runs[-1].to_json()
    assert js["N"] == 4 and len(js["p"]) == 4


def test_rejects_bad_arguments():
    with pytest.raises(InvalidParameterError):
        optimize.maximize_dim(1)
    with pytest.raises(InvalidParameterError):
        optimize.maximize_dim(3, "grid")
    with pytest.raises(InvalidParameterError):
        optimize.maximize_dim(3, "newton")
