import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from dimgap import gap
from dimgap.bernoulli import ProbVector, hypothesis1_check
from dimgap.gap import AssemblyError, Constant


@pytest.fixture(scope="module")
def sweep():
    vectors = [ProbVector([0.5, 0.5]), ProbVector([0.6, 0.25, 0.15])]
    return gap.run_sweep(vectors)


# ---------------------------------------------------------------------------
# analytic constants


def test_kappa_matches_direct_summation():
    # sum n^(-3/2) to 10^6 with the midpoint integral tail
    n = np.arange(1, 10**6 + 1, dtype=float)
    s = (n**-1.5).sum() + 2 / math.sqrt(10**6 + 0.5)
    assert gap.kappa(0.75) == pytest.approx(math.log(s), abs=1e-9)
    assert abs(gap.kappa(0.75) - 0.96022) <= 1e-4


def test_kappa_diverges_at_half():
    with pytest.raises(Exception):
        gap.kappa(0.5)


def test_escape_bound_threshold():
    lam = gap.min_lambda0(0.75)
    assert lam == pytest.approx(3.841039610923141, rel=1e-12)
    assert gap.escape_dim_bound(0.75, lam) == pytest.approx(1.0)
    assert gap.escape_dim_bound(0.75, 4.0) < 1
    best, s = gap.min_escape_bound(4.0)
    assert best <= gap.escape_dim_bound(0.75, 4.0) and 0.5 < s < 1


def test_tail_params():
    tp = gap.tail_params(0.75, 4.0)
    assert tp.N == 17652258459883239
    with mpmath.workdps(50):
        ps = mpmath.mpf(gap.psi())
        assert (1 - ps) * mpmath.log(tp.N) > 8
        assert (1 - ps) * mpmath.log(tp.N - 1) <= 8
    assert tp.eps0 == pytest.approx((1 - ps) / (4 * tp.N))


def test_tail_params_rejects_small_lambda():
    # with lambda0 = 1/2 the escape bound is far above 1
    with pytest.raises(AssemblyError):
        gap.tail_params(0.75, 0.5)


def test_c1_floor():
    cf = gap.c1_floor()
    assert cf["c1"] == pytest.approx(0.011406, abs=1e-5)
    assert cf["c1"] == cf["c11"] < cf["c12"]
    assert cf["c12"] == pytest.approx(math.log((1 + math.sqrt(5)) / 2), abs=1e-12)


def test_witness_uses_supported_points():
    w = gap.witness_c1(ProbVector([0.5, 0.5]), -0.5)
    assert set(w.values) == {"1", "2", "12"}
    assert w.value == max(w.values.values())
    w3 = gap.witness_c1(ProbVector.uniform([2, 3]), -0.5)
    assert set(w3.values) == {"2"}
    with pytest.raises(AssemblyError):
        gap.witness_c1(ProbVector.uniform([3, 4]), -0.5)


def test_witness_exceeds_floor_at_half():
    # the lemma: max over witnesses is at least c1 for every beta'
    p = ProbVector([0.5, 0.5])
    for bp in np.linspace(-1.5, 0.0, 31):
        assert gap.witness_c1(p, float(bp)).value >= gap.c1_floor()["c1"]


def test_hoelder_depth_and_floor():
    m = gap.hoelder_depth(0.0114, 1.0)
    assert gap.ALPHA**m <= 0.0114 / 2 < gap.ALPHA ** (m - 1)
    fl = gap.variance_floor(0.01, 0.0114, 1.0, 1.05, m)
    assert fl["gamma"] == pytest.approx(mpmath.mpf(0.01) ** (m / 4) / 9**m)
    assert fl["floor"] > 0


def test_lyapunov_bound_series():
    # c3 * sum 2 log(n+1)/n^(9/8), compared to a partial sum with integral tail
    n = np.arange(1, 2 * 10**6 + 1, dtype=float)
    part = (2 * np.log(n + 1) / n**1.125).sum()
    N = n[-1] + 0.5
    tail = 2 * (8 * math.log(N) + 64) / N**0.125  # integral of 2 log x / x^(9/8)
    assert float(gap.lyapunov_bound(1.0)) == pytest.approx(part + tail, rel=1e-5)


# ---------------------------------------------------------------------------
# sweep and certificates


def test_sweep_points(sweep):
    assert len(sweep) == 6
    for pt in sweep:
        assert pt.residual <= 1e-6
        assert abs(pt.sigma2_gk - pt.sigma2_si) <= 0.02 * abs(pt.sigma2_si)
        assert pt.beta_second > 0
        assert len(pt.witness_masses) == gap.MAX_WITNESS_DEPTH
        assert all(a >= b for a, b in zip(pt.witness_masses, pt.witness_masses[1:]))


def test_paper_chain(sweep):
    cert = gap.paper_chain(sweep)
    inv = cert.check_invariants()
    assert all(inv.values()), inv
    assert mpmath.mpf(cert.eta) > 0
    assert cert.eta == min(cert.eta_branches.values(), key=mpmath.mpf)
    js = cert.to_json()
    assert js["constants"]["c2"]["provenance"] == "measured-sweep"
    assert js["prior_gap_comparison"] == "dim <= 1 - 1e-7"


def test_paper_chain_detects_tampering(sweep):
    cert = gap.paper_chain(sweep)
    c = dict(cert.constants)
    c["c3"] = replace(c["c3"], value=repr(2 * float(c["c3"].value)))
    bad = replace(cert, constants=c)
    assert not bad.check_invariants()["bit_for_bit"]


def test_paper_chain_needs_sweep():
    with pytest.raises(AssemblyError):
        gap.paper_chain([])


def test_empirical(sweep):
    cert = gap.empirical(sweep)
    d = cert.details
    assert float(cert.eta) >= 0.01
    assert d["floors_ok"] and d["all_respect_bounds"]
    assert sum(d["classification_counts"].values()) == d["n_vectors"] == 2


def test_classify_priority():
    eps, s0, lam0 = 0.01, 0.75, 4.0
    low = gap.classify(ProbVector([0.5, 0.5]), 0.51, 1e-8, eps, s0, lam0, None)
    assert low.branch == "dim_le_3/4" and low.respects
    tail_p = ProbVector.uniform([3, 4, 5])
    assert not hypothesis1_check(tail_p, eps).satisfies
    tail = gap.classify(tail_p, 0.8, 1e-8, eps, s0, lam0, None)
    assert tail.branch == "tail" and tail.bound == pytest.approx(gap.escape_dim_bound(s0, lam0))
    h2 = gap.classify(ProbVector.uniform(range(1, 9)), 0.8, 1e-8, eps, s0, lam0, 0.03)
    assert h2.branch == "hypothesis2" and h2.bound == pytest.approx(1 - 0.03 / 128)
    with pytest.raises(AssemblyError):
        gap.classify(ProbVector.uniform(range(1, 9)), 0.8, 1e-8, eps, s0, lam0, None)


def test_sample_hypothesis1():
    vs = gap.sample_hypothesis1(10, seed=3)
    assert len(vs) == 10
    assert all(hypothesis1_check(p, 0.01).satisfies and p.is_decreasing for p in vs)
    assert gap.sample_hypothesis1(3, seed=3) == vs[:3]


def test_constant_record():
    c = Constant("0.5", "analytic")
    assert c.note == ""


def test_measure_c2(sweep):
    r = gap.measure_c2(sweep)
    assert all(r["c2"] >= pt.ftilde_holder for pt in sweep)
    assert r["f_holder_max"] <= r["analytic_component"]
    with pytest.raises(AssemblyError):
        gap.measure_c2([])


def test_assemble_gap_dispatch(sweep):
    assert gap.assemble_gap("paper-chain", sweep).mode == "paper-chain"
    assert gap.assemble_gap("empirical", sweep).mode == "empirical"
    with pytest.raises(AssemblyError):
        gap.assemble_gap("other", sweep)


def test_witness_lemma_on_sweep():
    # small |f(z1)| and |f(z2)| force a large two-periodic witness
    c11 = gap.c1_floor()["c11"]
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(200):
        w = rng.dirichlet(np.ones(rng.integers(2, 6)))
        w = np.sort(w)[::-1]
        bp = -rng.uniform(0.2, 1.0)
        wit = gap.witness_c1(ProbVector(w), bp)
        if wit.values["1"] < c11 and wit.values["2"] < c11:
            hits += 1
            assert wit.values["12"] >= 2 * c11
    assert wit.value >= 0
