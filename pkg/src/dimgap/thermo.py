"""
Topological pressure and the curve beta_p(t).

For the potential ``g = -b log|T'| + t f_p`` the pressure is computed from
periodic orbits. Period-n partition sums

    Z_n = sum_{|w| = n} p_w^t |(T^n)'(z_w)|^{-b}

give the differenced estimate ``log Z_{n+1} - log Z_n``. The default
estimate uses the same orbits in the cycle expansion of the dynamical
determinant: with traces ``tau_n = sum_w p_w^t |(T^n)'(z_w)|^{-b} /
(1 - 1/(T^n)'(z_w))`` the power series ``exp(-sum tau_n z^n / n)`` is
truncated and ``P = -log z*`` at its smallest positive zero. Its error decays
faster than any exponential in n, where the differenced estimate only decays
geometrically.

``beta_p(t)`` solves ``P(-beta log|T'| + t f_p) = 0`` by bisection in b.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .bernoulli import ProbVector
from .map_core import GAUSS, BranchMap, DimgapError, iter_word_chunks, word_table
from . import transfer

DEFAULT_WORD_BUDGET = 2 * 10**6
MAX_PERIOD = 24


class DivergenceError(DimgapError, ValueError):
    pass


class BudgetError(DimgapError, RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class BracketError(DimgapError, RuntimeError):
    def __init__(self, msg, p_lo=None, p_hi=None):
        super().__init__(msg)
        self.p_lo = p_lo
        self.p_hi = p_hi


@dataclass(frozen=True)
class PotentialSpec:
    """g = -b log|T'| + t f_p, with f_p = log p_n on I_n.

    ``p = None`` means the full alphabet with no f_p term.
    """

    b: float
    t: float = 0.0
    p: ProbVector | None = None

    def check_summable(self):
        if self.p is None and self.b <= 0.5:
            raise DivergenceError(f"sum_n n^(-2b) diverges for b = {self.b}")


def max_period(K: int, budget: int = DEFAULT_WORD_BUDGET, cap: int = MAX_PERIOD) -> int:
    """Largest n with sum_{j<=n} K^j words inside the budget."""
    n, tot = 0, 0
    while n < cap:
        nxt = tot + K ** (n + 1)
        if nxt > budget:
            break
        n += 1
        tot = nxt
    return n


# ---------------------------------------------------------------------------
# periodic-orbit data


@dataclass
class CycleData:
    """Per-period arrays over all words of the support digits."""

    digits: tuple
    index: list  # per n: (K^n, n) digit positions
    logD: list  # per n: log|(T^n)'(z_w)|
    sign: list  # per n: sign of (T^n)'

    @property
    def n_max(self):
        return len(self.logD)


@functools.lru_cache(maxsize=8)
def cycle_data(tmap: BranchMap, digits: tuple, n_max: int) -> CycleData:
    idx, logD, sign = [], [], []
    for n in range(1, n_max + 1):
        tab = word_table(tmap, digits, n)
        idx.append(tab.index)
        logD.append(tab.log_deriv_n())
        sign.append(np.sign(tab.det))
    return CycleData(digits, idx, logD, sign)


def determinant_coeffs(tau) -> np.ndarray:
    """Coefficients of exp(-sum_n tau_n z^n / n) up to z^len(tau) (Newton's identities)."""
    a = [1.0]
    for m in range(1, len(tau) + 1):
        a.append(-sum(tau[j - 1] * a[m - j] for j in range(1, m + 1)) / m)
    return np.array(a)


def smallest_positive_root(coeffs, guess: float) -> float:
    """Positive real zero of the polynomial sum coeffs[m] z^m nearest ``guess``."""
    c = np.trim_zeros(np.asarray(coeffs, float), "b")
    if c.size < 2:
        raise DimgapError("determinant is constant; increase the period")
    roots = np.roots(c[::-1])
    real = roots[(np.abs(roots.imag) <= 1e-9 * np.abs(roots)) & (roots.real > 0)].real
    if real.size == 0:
        raise DimgapError("no positive real zero of the truncated determinant")
    z = real[np.argmin(np.abs(np.log(real / guess)))]
    # polish with Newton on the polynomial
    poly = np.polynomial.Polynomial(c)
    dp = poly.deriv()
    for _ in range(5):
        step = poly(z) / dp(z)
        z -= step
        if abs(step) < 1e-16 * abs(z):
            break
    return float(z)


@dataclass
class PressureResult:
    value: float
    method: str
    n_max: int
    Z: list = field(default_factory=list)
    differences: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    determinant: list = field(default_factory=list)
    err_estimate: float = math.nan

    def as_dict(self):
        return {
            "value": self.value,
            "method": self.method,
            "n_max": self.n_max,
            "Z": list(map(float, self.Z)),
            "differences": list(map(float, self.differences)),
            "err_estimate": self.err_estimate,
        }


class _PeriodicPressure:
    """Reusable evaluator for fixed (p, t): precomputes log p_w per word."""

    def __init__(self, p: ProbVector, t: float, n_max: int, tmap: BranchMap = GAUSS):
        self.p, self.t, self.n_max, self.tmap = p, float(t), n_max, tmap
        digits = tuple(int(v) for v in p.support)
        self.data = cycle_data(tmap, digits, n_max)
        logp = np.log(p.support_weights)
        self.tlogp = [self.t * logp[ix].sum(axis=1) for ix in self.data.index]
        self.fac = [1.0 / (1.0 - s * np.exp(-ld)) for s, ld in zip(self.data.sign, self.data.logD)]

    def sums(self, b: float):
        Z, tau, logZ = [], [], []
        for tl, ld, fac in zip(self.tlogp, self.data.logD, self.fac):
            e = tl - b * ld
            m = e.max()
            w = np.exp(e - m)
            Z.append(w.sum() * math.exp(m))
            logZ.append(math.log(w.sum()) + m)
            tau.append(float((w * fac).sum()) * math.exp(m))
        return Z, logZ, tau

    def __call__(self, b: float, method: str = "determinant") -> PressureResult:
        Z, logZ, tau = self.sums(b)
        diffs = list(np.diff(logZ))
        p_diff = diffs[-1] if diffs else logZ[0]
        if method == "difference":
            err = abs(diffs[-1] - diffs[-2]) if len(diffs) >= 2 else math.nan
            return PressureResult(p_diff, method, self.n_max, Z, diffs, tau, [], err)
        # rescale z -> z e^{-p_diff} so the coefficients stay O(1)
        s = math.exp(p_diff)
        tau_s = [tk / s ** (k + 1) for k, tk in enumerate(tau)]
        coef = determinant_coeffs(tau_s)
        z = smallest_positive_root(coef, 1.0)
        val = p_diff - math.log(z)
        # error proxy: change when the last period is dropped
        err = math.nan
        if self.n_max >= 3:
            try:
                z2 = smallest_positive_root(coef[:-1], z)
                err = abs(math.log(z2) - math.log(z))
            except DimgapError:
                pass
        return PressureResult(val, method, self.n_max, Z, diffs, tau, list(coef), err)


def pressure(spec: PotentialSpec, n_max: int | None = None, *, method: str = "auto",
             tmap: BranchMap = GAUSS, word_budget: int = DEFAULT_WORD_BUDGET,
             digit_cut: int = 200, grid: int = transfer.DEFAULT_GRID, tail_order: int = 0) -> PressureResult:
    """Topological pressure of ``spec``.

    Methods: ``"determinant"`` (cycle expansion, default for finite support),
    ``"difference"`` (log Z_{n+1} - log Z_n), and ``"operator"`` (log of the
    leading eigenvalue of the grid operator; default for the full alphabet,
    where the branches beyond ``digit_cut`` enter through a Hurwitz-zeta
    tail of order ``tail_order``).
    """
    spec.check_summable()
    if method == "auto":
        method = "operator" if spec.p is None else "determinant"
    if method == "operator":
        val = transfer.operator_pressure(spec.p, spec.t, spec.b, tmap, grid,
                                         cut=digit_cut if spec.p is None else None,
                                         tail_order=tail_order if spec.p is None else -1)
        return PressureResult(val, "operator", 0)
    if spec.p is None:
        p = ProbVector.uniform(range(1, digit_cut + 1))
        t = 0.0
    else:
        p, t = spec.p, spec.t
    K = p.support.size
    if n_max is None:
        n_max = max(2, max_period(K, word_budget))
    need = sum(K**j for j in range(1, n_max + 1))
    if need > word_budget:
        n_ok = max_period(K, word_budget)
        partial = None
        if n_ok >= 2:
            partial = _PeriodicPressure(p, t, n_ok, tmap)(spec.b, method)
        raise BudgetError(f"{need} words exceed the budget {word_budget}", partial)
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    return _PeriodicPressure(p, t, n_max, tmap)(spec.b, method)


# ---------------------------------------------------------------------------
# beta_p(t)


def _pressure_fn(p: ProbVector, t: float, method: str, tmap, word_budget, grid):
    if method == "operator":
        fam = transfer.OperatorFamily(p, t, tmap, grid)
        return fam.pressure
    n = max(2, max_period(p.support.size, word_budget))
    ev = _PeriodicPressure(p, t, n, tmap)
    return lambda b: ev(b, method).value


def choose_method(p: ProbVector, word_budget: int = DEFAULT_WORD_BUDGET) -> str:
    """Cycle expansion while at least period 5 fits the budget, else the grid operator."""
    return "determinant" if max_period(p.support.size, word_budget) >= 5 else "operator"


def beta(p: ProbVector, t: float, tol: float = 1e-12, *, method: str = "auto",
         tmap: BranchMap = GAUSS, word_budget: int = DEFAULT_WORD_BUDGET,
         grid: int = transfer.DEFAULT_GRID, max_iter: int = 200) -> float:
    """The b in [0, 2] with P(-b log|T'| + t f_p) = 0, by bisection.

    Pressure is strictly decreasing in b; the bracket ends are checked on
    every call. Returns once |P| <= tol or the bracket is below 1e-15.
    """
    if p.support.size < 1:
        raise DimgapError("empty support")
    method = choose_method(p, word_budget) if method == "auto" else method
    P = _pressure_fn(p, t, method, tmap, word_budget, grid)
    lo, hi = 0.0, 2.0
    p_lo, p_hi = P(lo), P(hi)
    if abs(p_lo) <= tol:
        return lo
    if p_lo < 0 or p_hi > 0 or p_lo < p_hi:
        raise BracketError(f"no sign change on [0, 2]: P(0) = {p_lo}, P(2) = {p_hi}", p_lo, p_hi)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        pm = P(mid)
        if abs(pm) <= tol or hi - lo < 1e-15:
            return mid
        if pm > 0:
            lo = mid
        else:
            hi = mid
    return mid


def beta_subsystem_zero(p: ProbVector, **kw) -> float:
    """beta(0) of the subsystem on the support: its Hausdorff dimension (< 1)."""
    return beta(ProbVector.uniform(p.support), 0.0, **kw)


def gibbs_state(p: ProbVector, t: float, b: float | None = None, **kw) -> transfer.GibbsState:
    """Gibbs state of -beta_p(t) log|T'| + t f_p; solves for beta when not given."""
    grid = kw.pop("grid", transfer.DEFAULT_GRID)
    tmap = kw.pop("tmap", GAUSS)
    if b is None:
        b = beta(p, t, tmap=tmap, grid=grid, **kw)
    return transfer.gibbs_state(p, t, b, tmap=tmap, M=grid)


def beta_prime(p: ProbVector, t: float, state: transfer.GibbsState | None = None, **kw) -> float:
    """beta'(t) = int f_p dmu_{p,t} / int log|T'| dmu_{p,t}."""
    st = gibbs_state(p, t, **kw) if state is None else state
    return transfer.beta_prime_gibbs(st)


def beta_second(p: ProbVector, t: float, state: transfer.GibbsState | None = None, **kw) -> float:
    """beta''(t) = sigma^2(f_{p,t}) / int log|T'| dmu_{p,t}, never negative."""
    st = gibbs_state(p, t, **kw) if state is None else state
    var = transfer.variance(st)
    return max(var.single_integral, 0.0) / st.lyapunov()


def finite_difference(p: ProbVector, t: float, h: float, order: int = 1, **kw) -> float:
    """Centred first or second difference of beta at t."""
    if order == 1:
        return (beta(p, t + h, **kw) - beta(p, t - h, **kw)) / (2 * h)
    return (beta(p, t + h, **kw) - 2 * beta(p, t, **kw) + beta(p, t - h, **kw)) / (h * h)


@dataclass
class CurveSample:
    t: float
    beta: float
    beta_prime: float
    beta_second: float
    err: float


@dataclass
class BetaCurve:
    p: ProbVector
    samples: list
    beta0_subsystem: float
    beta0_full: float = 1.0
    interval: tuple = (1 / 8, 1 / 4)
    flags: list = field(default_factory=list)

    @property
    def t(self):
        return np.array([s.t for s in self.samples])

    @property
    def beta(self):
        return np.array([s.beta for s in self.samples])

    @property
    def beta_prime(self):
        return np.array([s.beta_prime for s in self.samples])

    @property
    def beta_second(self):
        return np.array([s.beta_second for s in self.samples])

    def trapezoid(self) -> float:
        """Trapezoid integral of beta' over the sample grid."""
        return float(np.trapezoid(self.beta_prime, self.t))

    def is_convex(self, tol: float = 1e-9) -> bool:
        b, t = self.beta, self.t
        slopes = np.diff(b) / np.diff(t)
        return bool(np.all(np.diff(slopes) >= -tol))

    def to_csv(self) -> str:
        lines = ["t,beta,beta_prime,beta_second,err"]
        for s in self.samples:
            lines.append(",".join("%.17g" % v for v in (s.t, s.beta, s.beta_prime, s.beta_second, s.err)))
        return "\n".join(lines) + "\n"


def beta_curve(p: ProbVector, t_grid, tol: float = 1e-12, second: bool = True, **kw) -> BetaCurve:
    """Sample beta, beta', beta'' on ``t_grid``.

    The reported ``err`` is the pressure tolerance divided by the Lyapunov
    integral plus the variance-route disagreement.
    """
    grid = kw.get("grid", transfer.DEFAULT_GRID)
    samples = []
    flags = []
    for t in t_grid:
        b = beta(p, float(t), tol, **kw)
        st = transfer.gibbs_state(p, float(t), b, M=grid)
        lyap = st.lyapunov()
        bp = transfer.beta_prime_gibbs(st)
        err = tol / lyap
        b2 = math.nan
        if second:
            try:
                var = transfer.variance(st)
                b2 = max(var.single_integral, 0.0) / lyap
                err += abs(var.green_kubo - var.single_integral) / lyap
            except transfer.NoDecayError as e:
                flags.append(f"t={t}: {e}")
        samples.append(CurveSample(float(t), b, bp, b2, err))
    b0 = beta_subsystem_zero(p, **{k: v for k, v in kw.items() if k in ("method", "word_budget", "grid")})
    return BetaCurve(p, samples, b0, flags=flags)
