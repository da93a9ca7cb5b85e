"""
Dimension-gap certificates.

Two assemblies are provided.

``paper-chain``
    Follows the analytic chain: tail parameters (N, eps_0) from the escape-set
    bound, the periodic-point witness constant c_1, the Hoelder bound c_2 of the
    corrected potential, the Gibbs constant c_3, the Hoelder depth m, the
    variance floor and the Lyapunov bound L. c_2 and c_3 are measured on a
    sweep of (p, t) and labelled as such. The resulting gap is tiny but
    positive; all arithmetic runs in mpmath so nothing underflows.

``empirical``
    eta = 1 - (largest measured dimension upper bound) over the same sweep and
    the optimiser's best vectors, together with per-point variance floors and
    the three-way classification of test vectors.

Convexity of beta on I = [1/8, 1/4] with beta'' >= G there gives
dim mu_p <= 1 - G/128 (the part of the integral over [0, 1/8] would
improve this to 3G/128; the smaller value is used).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np
from scipy.stats import qmc

from . import thermo, transfer
from .bernoulli import ProbVector, dimension, hypothesis1_check, psi
from .map_core import (
    ALPHA,
    GAUSS,
    BranchMap,
    DimgapError,
    Word,
    log_deriv_holder,
    nonlinearity_theta,
    periodic_point,
    word_table,
)

I_T = (1.0 / 8.0, 3.0 / 16.0, 1.0 / 4.0)
R_CONVEXITY = mpmath.mpf(1) / 128
PRIOR_GAP = "1e-7"
MAX_WITNESS_DEPTH = 60


class AssemblyError(DimgapError, ValueError):
    pass


# ---------------------------------------------------------------------------
# escape-set bounds


def kappa(s: float) -> float:
    """log sup_x sum_n |T'(T_n^{-1} x)|^{-s} = log zeta(2s) for the Gauss map."""
    if s <= 0.5:
        raise thermo.DivergenceError(f"kappa diverges for s = {s} <= 1/2")
    return float(mpmath.log(mpmath.zeta(2 * s)))


def escape_dim_bound(s: float, lam: float) -> float:
    """s + kappa(s)/lambda."""
    return s + kappa(s) / lam


def min_escape_bound(lam: float, s_grid=None) -> tuple:
    """Minimum of s + kappa(s)/lambda over a grid in (1/2, 1)."""
    s_grid = np.linspace(0.5005, 0.9995, 999) if s_grid is None else s_grid
    vals = np.array([escape_dim_bound(float(s), lam) for s in s_grid])
    i = int(np.argmin(vals))
    return float(vals[i]), float(s_grid[i])


def min_lambda0(s0: float) -> float:
    """Smallest lambda_0 with s_0 + kappa(s_0)/lambda_0 < 1 (exclusive)."""
    return kappa(s0) / (1.0 - s0)


@dataclass
class TailParams:
    N: int
    eps0: mpmath.mpf
    log_N: float
    bound: float


def tail_params(s0: float, lam0: float, tmap: BranchMap = GAUSS) -> TailParams:
    """Smallest N with (1 - psi) log N > 2 lambda_0, and eps_0 = (1 - psi)/(4N).

    On I_N the Gauss derivative satisfies log|T'| >= 2 log N.
    """
    bound = escape_dim_bound(s0, lam0)
    if not bound < 1:
        raise AssemblyError(
            f"s0 + kappa(s0)/lambda0 = {bound:.6f} >= 1; need lambda0 > {min_lambda0(s0):.6f}"
        )
    ps = mpmath.mpf(psi(tmap))
    with mpmath.workdps(50):
        thr = 2 * mpmath.mpf(lam0) / (1 - ps)
        N = int(mpmath.floor(mpmath.exp(thr))) + 1
        while (1 - ps) * mpmath.log(N) <= 2 * lam0:
            N += 1
        eps0 = (1 - ps) / (4 * N)
    return TailParams(N, eps0, float(thr), bound)


# ---------------------------------------------------------------------------
# c_1


def c1_floor(tmap: BranchMap = GAUSS) -> dict:
    """min(theta/8, log|T'(z_1)|/2)."""
    th = nonlinearity_theta(tmap)
    z1 = periodic_point("1", tmap)
    c12 = 0.5 * float(tmap.log_deriv_on_branch([1], np.array([z1]))[0])
    return {"theta": th, "c11": th / 8.0, "c12": c12, "c1": min(th / 8.0, c12)}


def potential_at(p: ProbVector, beta_prime: float, y: float, digit: int, tmap: BranchMap = GAUSS) -> float:
    """f_{p,t}(y) = -beta' log|T'(y)| + log p_digit."""
    pn = p.p(digit)
    if pn <= 0:
        return -math.inf
    return -beta_prime * float(tmap.log_deriv_on_branch([digit], np.array([y]))[0]) + math.log(pn)


@dataclass
class Witness:
    value: float
    word: str
    values: dict
    c1_floor: float


def witness_c1(p: ProbVector, beta_prime: float, tmap: BranchMap = GAUSS) -> Witness:
    """Largest of |f(z_1)|, |f(z_2)| and |S_2 f(z_12)/2| over supported witnesses.

    Birkhoff sums at periodic points are unchanged by adding a coboundary, so
    these equal the corresponding values for the corrected potential.
    """
    vals = {}
    if p.p(1) > 0:
        vals["1"] = abs(potential_at(p, beta_prime, periodic_point("1", tmap), 1, tmap))
    if p.p(2) > 0:
        vals["2"] = abs(potential_at(p, beta_prime, periodic_point("2", tmap), 2, tmap))
    if p.p(1) > 0 and p.p(2) > 0:
        s2 = potential_at(p, beta_prime, periodic_point("12", tmap), 1, tmap) + potential_at(
            p, beta_prime, periodic_point("21", tmap), 2, tmap
        )
        vals["12"] = abs(0.5 * s2)
    if not vals:
        raise AssemblyError("no supported witness among z_1, z_2, z_12")
    word = max(vals, key=vals.get)
    return Witness(vals[word], word, vals, c1_floor(tmap)["c1"])


# ---------------------------------------------------------------------------
# c_2


def ftilde_holder(state: transfer.GibbsState, cob: transfer.Coboundary, depth: int = 6,
                  samples: int = 17, max_words: int = 1 << 12, alpha: float = ALPHA) -> dict:
    """Measured Hoelder-alpha seminorm of f~ = f + U - U o T on supported cylinders.

    For every supported word w of length n <= depth, f~ is sampled at
    phi_w(s) for ``samples`` points s in [0, 1]; its oscillation over I_w
    divided by alpha^n is maximised.
    """
    tmap = state.op.tmap
    dig = state.digits
    s = np.linspace(0.0, 1.0, samples)
    U = cob.U.values
    logp = dict(zip(dig.tolist(), state.op.logp.tolist()))
    best = 0.0
    var = []
    for n in range(1, depth + 1):
        if dig.size**n > max_words:
            break
        tab = word_table(tmap, dig, n)
        a, b, c, d = (v[:, None] for v in (tab.a, tab.b, tab.c, tab.d))
        y = (a * s + b) / (c * s + d)
        if n == 1:
            ty = np.broadcast_to(s, y.shape)
        else:
            sub = word_table(tmap, dig, n - 1)
            # shifted word w_2..w_n is row (index of w) mod K^(n-1)
            rows = np.arange(len(tab)) % len(sub)
            a2, b2, c2, d2 = (v[rows][:, None] for v in (sub.a, sub.b, sub.c, sub.d))
            ty = (a2 * s + b2) / (c2 * s + d2)
        first = tab.first_digits()
        f = -cob.beta_prime * tmap.log_deriv_on_branch(first[:, None], y) + np.array([logp[k] for k in first])[:, None]
        ft = f + transfer.interpolate(U, y) - transfer.interpolate(U, ty)
        osc = float((ft.max(axis=1) - ft.min(axis=1)).max())
        var.append(osc)
        best = max(best, osc / alpha**n)
    return {"holder": best, "var": var}


def measure_c2(sweep: list, tmap: BranchMap = GAUSS) -> dict:
    """c_2 = max measured Hoelder seminorm of the corrected potential over the sweep.

    Also reports the analytic component 8 [log|T'|]_alpha for comparison.
    """
    if not sweep:
        raise AssemblyError("c_2 needs at least one sweep point")
    return {"c2": max(pt.ftilde_holder for pt in sweep),
            "f_holder_max": max(pt.f_holder for pt in sweep),
            "analytic_component": 8 * log_deriv_holder(tmap)}


def hoelder_depth(c1: float, c2: float, alpha: float = ALPHA) -> int:
    """Smallest m with alpha^m <= c_1 / (2 c_2)."""
    m = int(math.ceil(math.log(c1 / (2.0 * c2)) / math.log(alpha)))
    return max(m, 1)


# ---------------------------------------------------------------------------
# variance floor and L


def variance_floor(eps, c1, c2, c3, m: int) -> dict:
    """sigma^2 floor (c_1^2/4) gamma_eps / c_3 with gamma_eps = eps^(m/4) / 9^m.

    ``c2`` is carried for the record; it enters through ``m``.
    """
    eps, c1, c3 = mpmath.mpf(eps), mpmath.mpf(c1), mpmath.mpf(c3)
    gamma = eps ** (mpmath.mpf(m) / 4) / mpmath.mpf(9) ** m
    return {"gamma": gamma, "floor": c1**2 / 4 * gamma / c3}


def lyapunov_bound(c3, beta_min=mpmath.mpf(9) / 16) -> mpmath.mpf:
    """L = c_3 sum_{n>=1} 2 log(n+1) / n^(2 beta_min).

    On I_n the Gauss derivative is at most (n+1)^2, and the Gibbs constant
    bounds mu(I_n) by c_3 n^(-2 beta).
    """
    s = 2 * mpmath.mpf(beta_min)
    # log(n+1) = log n + log(1 + 1/n): the first part is -zeta'(s), the rest
    # converges like n^(-s-1). Direct extrapolation of the series is unreliable.
    rest = mpmath.nsum(lambda n: mpmath.log1p(1 / n) / n**s, [1, mpmath.inf])
    tot = 2 * (-mpmath.zeta(s, derivative=1) + rest)
    return mpmath.mpf(c3) * tot


# ---------------------------------------------------------------------------
# sweep


@dataclass
class SweepPoint:
    p: ProbVector
    t: float
    beta: float
    beta_prime: float
    lyapunov: float
    sigma2_gk: float
    sigma2_si: float
    beta_second: float
    residual: float
    witness: float
    witness_word: str
    f_holder: float
    ftilde_holder: float
    c3: float
    rho: float
    witness_masses: list = field(default_factory=list)  # mu(I_{w|j}) for j = 1..len


def sample_hypothesis1(n: int, eps: float = 0.01, max_support: int = 8, seed: int = 0) -> list:
    """Quasi-random decreasing vectors with support size 2..max_support satisfying Hypothesis 1."""
    sob = qmc.Sobol(d=max_support + 1, scramble=True, seed=seed)
    out = []
    while len(out) < n:
        for u in sob.random(64):
            K = 2 + int(u[0] * (max_support - 1))
            w = -np.log(np.clip(u[1:K + 1], 1e-12, 1.0))
            w = np.sort(w / w.sum())[::-1]
            p = ProbVector.normalized(w)
            if hypothesis1_check(p, eps).satisfies:
                out.append(p)
            if len(out) == n:
                break
    return out


def sweep_point(p: ProbVector, t: float, grid: int = transfer.DEFAULT_GRID, word_budget: int = 5 * 10**5,
                c3_depth: int = 5, tmap: BranchMap = GAUSS) -> SweepPoint:
    b = thermo.beta(p, t, word_budget=word_budget, grid=grid)
    st = transfer.gibbs_state(p, t, b, tmap=tmap, M=grid)
    cob = transfer.coboundary_U(st)
    var = transfer.variance(st, cob)
    lyap = st.lyapunov()
    wit = witness_c1(p, cob.beta_prime, tmap)
    fh = ftilde_holder(st, cob)
    c3 = st.gibbs_constant(c3_depth, max_words=1 << 12)["c3"]
    f_hold = abs(cob.beta_prime) * log_deriv_holder(tmap, digits=st.digits)
    masses = [st.cylinder(Word.parse(wit.word).repeat_to(j)) for j in range(1, MAX_WITNESS_DEPTH + 1)]
    return SweepPoint(
        p, float(t), b, cob.beta_prime, lyap, var.green_kubo, var.single_integral,
        max(var.single_integral, 0.0) / lyap, transfer.residual_M_ftilde(st, cob),
        wit.value, wit.word, f_hold, fh["holder"], c3, cob.rho, masses,
    )


def run_sweep(vectors, t_values=I_T, threads: int = 1, **kw) -> list:
    jobs = [(p, t) for p in vectors for t in t_values]
    if threads <= 1:
        return [sweep_point(p, t, **kw) for p, t in jobs]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(lambda job: sweep_point(job[0], job[1], **kw), jobs))


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Constant:
    value: str  # decimal string; exact input to recomputation
    provenance: str  # analytic | measured-sweep | paper-stated
    note: str = ""


@dataclass
class GapCertificate:
    mode: str
    constants: dict
    eta: str
    eta_branches: dict
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "eta": self.eta,
            "eta_float": float(mpmath.mpf(self.eta)),
            "eta_branches": self.eta_branches,
            "constants": {k: asdict(v) for k, v in self.constants.items()},
            "prior_gap_comparison": f"dim <= 1 - {PRIOR_GAP}",
            "details": self.details,
        }

    def recompute_eta(self) -> str:
        if self.mode == "paper-chain":
            return _paper_eta({k: v.value for k, v in self.constants.items()})[0]
        return self.eta

    def check_invariants(self) -> dict:
        c = {k: mpmath.mpf(v.value) for k, v in self.constants.items() if _is_number(v.value)}
        out = {"provenance": all(v.provenance in ("analytic", "measured-sweep", "paper-stated") for v in self.constants.values()),
               "eta_positive": mpmath.mpf(self.eta) > 0}
        if self.mode == "paper-chain":
            out["tail_bound_below_one"] = c["s0"] + c["kappa_s0"] / c["lambda0"] < 1
            out["eps0_margin"] = c["eps0"] < (1 - c["psi"]) / (2 * c["N"])
            out["eps0_below_psi"] = c["eps0"] < c["psi"]
            out["holder_depth"] = mpmath.mpf(ALPHA) ** int(c["m"]) <= c["c1"] / (2 * c["c2"])
            out["bit_for_bit"] = self.recompute_eta() == self.eta
        return out


def _is_number(s: str) -> bool:
    try:
        mpmath.mpf(s)
        return True
    except (ValueError, TypeError):
        return False


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return mpmath.nstr(x, 40, min_fixed=0, max_fixed=0)


def _paper_eta(vals: dict) -> tuple:
    """eta from stored decimal strings; the single arithmetic path for assembly and recheck."""
    with mpmath.workdps(60):
        g = {k: mpmath.mpf(v) for k, v in vals.items() if _is_number(v)}
        fl = variance_floor(g["eps0"], g["c1"], g["c2"], g["c3"], int(g["m"]))
        G = fl["floor"] / g["L"]
        branches = {
            "dim_le_3/4": 1 - mpmath.mpf(3) / 4,
            "tail": 1 - (g["s0"] + g["kappa_s0"] / g["lambda0"]),
            "hypothesis2": g["r"] * G,
        }
        eta = min(branches.values())
        return _fmt(eta), {k: _fmt(v) for k, v in branches.items()}, fl, G


def paper_chain(sweep: list, s0: float = 0.75, lam0: float = 4.0, tmap: BranchMap = GAUSS) -> GapCertificate:
    """Assemble the analytic chain with sweep-measured c_2 and c_3."""
    if not sweep:
        raise AssemblyError("paper-chain assembly needs at least one sweep point")
    tp = tail_params(s0, lam0, tmap)
    ps = psi(tmap)
    if not tp.eps0 < ps:
        raise AssemblyError("eps0 >= psi")
    cf = c1_floor(tmap)
    c2 = measure_c2(sweep, tmap)["c2"]
    c3 = max(pt.c3 for pt in sweep)
    m = hoelder_depth(cf["c1"], c2)
    L = lyapunov_bound(c3)
    consts = {
        "s0": Constant(repr(float(s0)), "analytic", "chosen in (1/2, 1)"),
        "lambda0": Constant(repr(float(lam0)), "analytic", "chosen so the escape bound is < 1"),
        "kappa_s0": Constant(_fmt(mpmath.log(mpmath.zeta(2 * mpmath.mpf(s0)))), "analytic", "log zeta(2 s0)"),
        "psi": Constant(repr(ps), "analytic", "|T'(z1)|^(-1/4)"),
        "N": Constant(str(tp.N), "analytic", "smallest N with (1-psi) log N > 2 lambda0"),
        "eps0": Constant(_fmt(tp.eps0), "analytic", "(1-psi)/(4N)"),
        "theta": Constant(repr(cf["theta"]), "analytic", "nonlinearity of the four periodic points"),
        "c1": Constant(repr(cf["c1"]), "analytic", "min(theta/8, log|T'(z1)|/2)"),
        "c2": Constant(repr(c2), "measured-sweep", "max measured Hoelder seminorm of the corrected potential"),
        "c3": Constant(repr(c3), "measured-sweep", "max Gibbs constant over sweep words of length <= 5"),
        "alpha": Constant(repr(ALPHA), "paper-stated", "Hoelder exponent 2/3"),
        "m": Constant(str(m), "analytic", "smallest m with alpha^m <= c1/(2 c2)"),
        "L": Constant(_fmt(L), "analytic", "c3 * sum 2 log(n+1) / n^(9/8)"),
        "r": Constant(_fmt(R_CONVEXITY), "analytic", "convexity on I = [1/8, 1/4]"),
        "beta_floor_on_I": Constant("0.5625", "paper-stated", "beta >= 9/16 on I when dim >= 3/4"),
    }
    eta, branches, fl, G = _paper_eta({k: v.value for k, v in consts.items()})
    consts["gamma_eps"] = Constant(_fmt(fl["gamma"]), "analytic", "eps0^(m/4) / 9^m")
    consts["sigma2_floor"] = Constant(_fmt(fl["floor"]), "analytic", "(c1^2/4) gamma / c3")
    consts["G"] = Constant(_fmt(G), "analytic", "sigma2_floor / L")
    details = {
        "log10_eta": float(mpmath.log10(mpmath.mpf(eta))),
        "sweep_points": len(sweep),
        "analytic_c2_component": 8 * log_deriv_holder(tmap),
    }
    return GapCertificate("paper-chain", consts, eta, branches, details)


@dataclass
class Classification:
    p: list
    dim: float
    dim_err: float
    branch: str
    bound: float
    respects: bool


def classify(p: ProbVector, dim_value: float, dim_err: float, eps: float, s0: float, lam0: float,
             G_p: float | None) -> Classification:
    """Assign p to exactly one branch, in priority order dim <= 3/4, tail, Hypothesis 2."""
    if dim_value + dim_err <= 0.75:
        branch, bound = "dim_le_3/4", 0.75
    elif not hypothesis1_check(p, eps).satisfies:
        branch, bound = "tail", escape_dim_bound(s0, lam0)
    else:
        if G_p is None:
            raise AssemblyError("Hypothesis-2 branch needs beta'' on I")
        branch, bound = "hypothesis2", 1.0 - G_p / 128.0
    return Classification(p.to_json(), dim_value, dim_err, branch, bound, dim_value <= bound)


def empirical(sweep: list, extra_vectors=(), eps: float = 0.01, s0: float = 0.75, lam0: float = 4.0,
              depth_budget: int = 10**6, grid: int = transfer.DEFAULT_GRID, tmap: BranchMap = GAUSS) -> GapCertificate:
    """eta = 1 - max measured dimension upper bound over sweep and extra vectors."""
    cf = c1_floor(tmap)
    c2 = measure_c2(sweep, tmap)["c2"]
    m = hoelder_depth(cf["c1"], c2)
    # per-vector data
    byp = {}
    for pt in sweep:
        byp.setdefault(pt.p, []).append(pt)
    floors_ok = True
    floor_rows = []
    for p, pts in byp.items():
        for pt in pts:
            if m > len(pt.witness_masses):
                raise AssemblyError(f"Hoelder depth {m} exceeds stored witness depth")
            mu_w = pt.witness_masses[m - 1]
            floor_b2 = cf["c1"] ** 2 / 4.0 * mu_w / pt.lyapunov
            ok = pt.beta_second >= floor_b2
            floors_ok &= ok
            floor_rows.append({"t": pt.t, "beta_second": pt.beta_second, "floor": floor_b2, "ok": bool(ok)})
    dims = []
    classes = []
    vectors = list(byp.keys()) + [v if isinstance(v, ProbVector) else ProbVector.from_json(v) for v in extra_vectors]
    for p in vectors:
        d = dimension(p, budget=depth_budget, tol=1e-7)
        dims.append((d.dim, d.err))
        G_p = None
        if p in byp:
            G_p = min(pt.beta_second for pt in byp[p])
        elif hypothesis1_check(p, eps).satisfies and d.dim + d.err > 0.75:
            G_p = min(sweep_point(p, t, grid=grid).beta_second for t in I_T)
        classes.append(classify(p, d.dim, d.err, eps, s0, lam0, G_p))
    upper = max(dv + de for dv, de in dims)
    eta = 1.0 - upper
    consts = {
        "eps": Constant(repr(eps), "analytic", "Hypothesis 1 threshold for the sweep"),
        "c1": Constant(repr(cf["c1"]), "analytic", "min(theta/8, log|T'(z1)|/2)"),
        "c2": Constant(repr(c2), "measured-sweep", "max measured Hoelder seminorm of the corrected potential"),
        "m": Constant(str(m), "analytic", "smallest m with alpha^m <= c1/(2 c2)"),
        "max_dim_upper": Constant(repr(upper), "measured-sweep", "max of dim + quadrature error bound"),
    }
    counts = {}
    for c in classes:
        counts[c.branch] = counts.get(c.branch, 0) + 1
    details = {
        "n_vectors": len(vectors),
        "max_dim": max(dv for dv, _ in dims),
        "floors_ok": bool(floors_ok),
        "min_floor_margin": min(r["beta_second"] - r["floor"] for r in floor_rows),
        "classification_counts": counts,
        "all_respect_bounds": all(c.respects for c in classes),
        "classifications": [asdict(c) for c in classes],
        "floor_rows": floor_rows,
    }
    return GapCertificate("empirical", consts, repr(eta), {"empirical": repr(eta)}, details)


def assemble_gap(mode: str, sweep: list, **kw) -> GapCertificate:
    """Dispatch to :func:`paper_chain` or :func:`empirical` by ``mode``."""
    if mode == "paper-chain":
        return paper_chain(sweep, **kw)
    if mode == "empirical":
        return empirical(sweep, **kw)
    raise AssemblyError(f"unknown gap mode {mode!r}")
