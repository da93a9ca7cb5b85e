"""
Bernoulli measures on continued-fraction digits.

A probability vector ``p`` on the digits defines the Bernoulli measure
``mu_p``, the image of the i.i.d. digit measure under the coding map. Its
dimension is entropy over Lyapunov exponent. Lyapunov exponents are computed
by periodic-point quadrature over all words of a fixed depth, with a rigorous
error bound from the oscillation of ``log|T'|`` on each cylinder.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import mpmath
import numpy as np
from scipy import optimize as sopt

from .map_core import (
    GAUSS,
    BranchMap,
    DimgapError,
    LengthFamily,
    iter_word_chunks,
    periodic_point,
)

DEFAULT_TOL = 1e-6
DEFAULT_BUDGET = 10**7


class InvalidInputError(DimgapError, ValueError):
    pass


class InvalidParameterError(DimgapError, ValueError):
    pass


class ConstructionError(DimgapError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ProbVector:
    """Finitely supported probability vector on digits 1..N.

    ``weights[i]`` is the mass of digit ``i + 1``.
    """

    weights: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise InvalidInputError("empty probability vector")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise InvalidInputError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"weights sum to {float(w.sum())!r}, not 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, weights, tail_mass: float = 0.0) -> "ProbVector":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), tail_mass)

    @classmethod
    def power(cls, exponent: float = 2.0, cut: int = 64) -> "ProbVector":
        """p_n proportional to n^-exponent, truncated at ``cut`` and renormalised."""
        n = np.arange(1, int(cut) + 1, dtype=float)
        w = n ** (-float(exponent))
        total = float(mpmath.zeta(exponent))
        return cls.normalized(w, tail_mass=1.0 - w.sum() / total)

    @classmethod
    def uniform(cls, digits) -> "ProbVector":
        digits = list(digits)
        w = np.zeros(max(digits))
        w[np.asarray(digits) - 1] = 1.0 / len(digits)
        return cls.normalized(w)

    @classmethod
    def atom(cls, n: int) -> "ProbVector":
        w = np.zeros(n)
        w[n - 1] = 1.0
        return cls(w)

    @classmethod
    def from_json(cls, obj) -> "ProbVector":
        """Accept a list of weights, a JSON string, a path, or a family dict."""
        if isinstance(obj, ProbVector):
            return obj
        if isinstance(obj, str):
            s = obj.strip()
            if s.startswith("[") or s.startswith("{"):
                obj = json.loads(s)
            else:
                with open(s) as fh:
                    obj = json.load(fh)
        if isinstance(obj, dict):
            if obj.get("family") == "power":
                return cls.power(obj.get("exponent", 2.0), obj.get("cut", 64))
            if "weights" in obj:
                return cls.normalized(obj["weights"]) if obj.get("normalize") else cls(obj["weights"])
            raise InvalidInputError(f"unknown probability-vector spec {obj!r}")
        return cls(np.asarray(obj, dtype=float))

    def to_json(self):
        return [float(v) for v in self.weights]

    # properties ------------------------------------------------------------
    def __len__(self):
        return self.weights.size

    def __getitem__(self, k):
        return self.weights[k]

    def __eq__(self, other):
        return isinstance(other, ProbVector) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def __repr__(self):
        return f"ProbVector({np.array2string(self.weights, precision=6)})"

    @cached_property
    def support(self) -> np.ndarray:
        """Digits (1-based) carrying positive mass."""
        return np.flatnonzero(self.weights > 0) + 1

    @cached_property
    def support_weights(self) -> np.ndarray:
        return self.weights[self.support - 1]

    @property
    def is_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.weights) <= 0))

    @property
    def tail_constant(self) -> float:
        """Smallest K with p_n <= K / n^2."""
        n = np.arange(1, self.weights.size + 1)
        return float(np.max(self.weights * n**2))

    @cached_property
    def entropy(self) -> float:
        return entropy(self)

    def p(self, n: int) -> float:
        return float(self.weights[n - 1]) if 1 <= n <= self.weights.size else 0.0


def entropy(p: ProbVector) -> float:
    """Shannon entropy in nats; zero weights contribute nothing."""
    w = p.weights[p.weights > 0]
    return float(-(w * np.log(w)).sum())


def psi(tmap: BranchMap = GAUSS) -> float:
    """|T'(z_1)|^{-1/4}; equals sqrt(z_1) for the Gauss map."""
    z = periodic_point("1", tmap)
    return float(np.exp(-0.25 * tmap.log_deriv_on_branch([1], np.array([z]))[0]))


# ---------------------------------------------------------------------------
# Lyapunov exponent


@dataclass
class LyapunovResult:
    value: float
    err: float
    depth: int
    method: str  # "quadrature" or "monte-carlo"
    words: int = 0
    history: list = field(default_factory=list)


def _quadrature(p: ProbVector, k: int, tmap: BranchMap, chunk: int = 1 << 20) -> tuple:
    dig = p.support
    logp = np.log(p.support_weights)
    val = 0.0
    err = 0.0
    n_words = 0
    for tab in iter_word_chunks(tmap, dig, k, chunk):
        pw = np.exp(logp[tab.index].sum(axis=1))
        val += float(pw @ tab.log_deriv_n()) / k
        e0, e1 = tab.endpoints()
        first = tab.first_digits()
        var = np.abs(tmap.log_deriv_on_branch(first, e0) - tmap.log_deriv_on_branch(first, e1))
        err += float(pw @ var)
        n_words += len(tab)
    return val, err, n_words


def lyapunov_monte_carlo(p: ProbVector, n_samples: int = 10**6, seed: int = 0, length: int = 40,
                         tmap: BranchMap = GAUSS, chunk: int = 1 << 18) -> tuple:
    """Mean of log|T'(x)| over x = Pi(i_1 ... i_length) with i.i.d. digits.

    Returns (estimate, standard error).
    """
    rng = np.random.default_rng(seed)
    dig = p.support
    a, b, c, d = tmap.coeffs(dig)
    s1 = 0.0
    s2 = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        idx = rng.choice(dig.size, size=(m, length), p=p.support_weights)
        x = np.full(m, 0.5)
        for j in range(length - 1, -1, -1):
            i = idx[:, j]
            x = (a[i] * x + b[i]) / (c[i] * x + d[i])
        v = tmap.log_deriv_on_branch(dig[idx[:, 0]], x)
        s1 += v.sum()
        s2 += (v * v).sum()
        done += m
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0)
    return float(mean), float(math.sqrt(var / n_samples))


def lyapunov(p: ProbVector, depth: int | None = None, *, tol: float = DEFAULT_TOL,
             budget: int = DEFAULT_BUDGET, tmap: BranchMap = GAUSS, seed: int = 0,
             mc_samples: int = 10**6) -> LyapunovResult:
    """Lyapunov exponent of mu_p by depth-k periodic-point quadrature.

    chi_k = (1/k) sum_{|w|=k} p_w log|(T^k)'(z_w)|. The error bound is
    sum_w p_w osc_{I_w} log|T'|, which also bounds |chi_k - chi_{k+1}|.
    Without ``depth`` the smallest k with bound below ``tol`` is used, capped by
    the word budget; if the bound still exceeds ``tol`` a seeded Monte Carlo
    estimate is computed and the more accurate of the two returned.
    """
    if p.support.size == 0:
        raise InvalidInputError("empty support")
    K = p.support.size
    if depth is not None:
        v, e, nw = _quadrature(p, int(depth), tmap)
        return LyapunovResult(v, e, int(depth), "quadrature", nw, [(int(depth), v, e)])
    hist = []
    k = 1
    best = None
    while K**k <= budget:
        v, e, nw = _quadrature(p, k, tmap)
        hist.append((k, v, e))
        best = LyapunovResult(v, e, k, "quadrature", nw, hist)
        if e <= tol or K == 1:
            return best
        k += 1
    mc, se = lyapunov_monte_carlo(p, mc_samples, seed, tmap=tmap)
    if best is None or 3 * se < best.err:
        return LyapunovResult(mc, 3 * se, 0, "monte-carlo", mc_samples, hist)
    return best


@dataclass
class DimensionResult:
    entropy: float
    lyapunov: float
    dim: float
    err: float
    depth: int
    method: str


def dimension(p: ProbVector, depth: int | None = None, **kw) -> DimensionResult:
    """dim mu_p = h / chi with a propagated error bound."""
    h = p.entropy
    ly = lyapunov(p, depth, **kw)
    if h == 0.0:
        return DimensionResult(0.0, ly.value, 0.0, 0.0, ly.depth, ly.method)
    dim = h / ly.value
    lo = max(ly.value - ly.err, 1e-300)
    err = h / lo - dim
    return DimensionResult(h, ly.value, dim, err, ly.depth, ly.method)


# ---------------------------------------------------------------------------
# aggregated quadrature for repeated evaluation at fixed support and depth


@dataclass
class LyapunovClasses:
    """Depth-k quadrature grouped by digit-count class.

    Words with the same digit counts share p_w, so chi_k(p) reduces to
    sum_c prod_j p_j^{counts[c, j]} * S[c].
    """

    digits: np.ndarray
    depth: int
    counts: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @classmethod
    def build(cls, digits, depth: int, tmap: BranchMap = GAUSS, chunk: int = 1 << 20) -> "LyapunovClasses":
        dig = np.asarray(digits)
        K = dig.size
        base = depth + 1
        keys_all, S_all, V_all = [], [], []
        for tab in iter_word_chunks(tmap, dig, depth, chunk):
            key = np.zeros(len(tab), dtype=np.int64)
            for j in range(K):
                key = key * base + (tab.index == j).sum(axis=1)
            e0, e1 = tab.endpoints()
            first = tab.first_digits()
            var = np.abs(tmap.log_deriv_on_branch(first, e0) - tmap.log_deriv_on_branch(first, e1))
            u, inv = np.unique(key, return_inverse=True)
            keys_all.append(u)
            S_all.append(np.bincount(inv, weights=tab.log_deriv_n() / depth))
            V_all.append(np.bincount(inv, weights=var))
        keys = np.concatenate(keys_all)
        u, inv = np.unique(keys, return_inverse=True)
        S = np.bincount(inv, weights=np.concatenate(S_all))
        V = np.bincount(inv, weights=np.concatenate(V_all))
        counts = np.zeros((u.size, K), dtype=np.int64)
        rest = u.copy()
        for j in range(K - 1, -1, -1):
            counts[:, j] = rest % base
            rest //= base
        return cls(dig, depth, counts, S, V)

    def weights(self, w: np.ndarray) -> np.ndarray:
        return np.prod(np.asarray(w, float)[None, :] ** self.counts, axis=1)

    def lyapunov(self, w: np.ndarray) -> tuple:
        pw = self.weights(w)
        return float(pw @ self.S), float(pw @ self.V)

    def dimension(self, w: np.ndarray) -> float:
        w = np.asarray(w, float)
        pos = w[w > 0]
        h = float(-(pos * np.log(pos)).sum())
        return h / self.lyapunov(w)[0]


# ---------------------------------------------------------------------------
# hypotheses


@dataclass
class HypothesisCheck:
    satisfies: bool
    clauses: tuple
    psi: float

    @property
    def branch(self) -> str:
        return ",".join(self.clauses) if self.clauses else "none"


def hypothesis1_check(p: ProbVector, eps: float, tmap: BranchMap = GAUSS) -> HypothesisCheck:
    """Clause (a): p_1, p_2 > eps. Clause (b): p_1 > psi."""
    ps = psi(tmap)
    if not 0.0 < eps < ps:
        raise InvalidParameterError(f"eps must lie in (0, psi = {ps:.7f}), got {eps}")
    clauses = []
    if p.p(1) > eps and p.p(2) > eps:
        clauses.append("a")
    if p.p(1) > ps:
        clauses.append("b")
    return HypothesisCheck(bool(clauses), tuple(clauses), ps)


def hypothesis2_check(p: ProbVector, eps: float, tmap: BranchMap = GAUSS) -> HypothesisCheck:
    """Non-strict version: p_1, p_2 >= eps or p_1 >= psi."""
    ps = psi(tmap)
    if not 0.0 < eps < ps:
        raise InvalidParameterError(f"eps must lie in (0, psi = {ps:.7f}), got {eps}")
    clauses = []
    if p.p(1) >= eps and p.p(2) >= eps:
        clauses.append("a")
    if p.p(1) >= ps:
        clauses.append("b")
    return HypothesisCheck(bool(clauses), tuple(clauses), ps)


# ---------------------------------------------------------------------------
# sharpness of the summability condition


@dataclass
class SharpnessResult:
    """Vector p_n = c |I_n|^t on N <= n <= k and its dimension lower bound.

    ``k`` can be astronomically large, so the weights are not materialised;
    :meth:`weights` returns them on request for moderate ``k``.
    """

    family: LengthFamily
    t: float
    N: int
    k: float
    c: float
    A: float
    C: float
    bound: float

    @property
    def entropy(self) -> float:
        return self.t * self.A - math.log(self.c)

    def weights(self, max_len: int = 10**7) -> ProbVector:
        if self.k > max_len:
            raise ConstructionError(f"support up to {self.k:g} is too long to materialise")
        k = int(self.k)
        n = np.arange(self.N, k + 1)
        w = np.zeros(k)
        w[n - 1] = self.c * np.exp(self.t * self.family.log(n))
        return ProbVector.normalized(w)


def _log_sum(family, t, N, log_k, exact_terms=4096):
    """Sums of l^t and -l^t log l over N <= n <= k, k = exp(log_k).

    Up to ``exact_terms`` terms are summed directly; the rest uses the
    midpoint rule integral in the variable u = log x, which stays finite
    when k itself overflows a float.
    """
    top = math.floor(math.exp(min(log_k, math.log(N + exact_terms - 1))) + 1e-9)
    n = np.arange(N, top + 1, dtype=float)
    L = family.log(n)
    s0 = float(np.exp(t * L).sum())
    s1 = float((-L * np.exp(t * L)).sum())
    if log_k > math.log(top + 1):
        lo = math.log(top + 0.5)
        hi = math.log(math.floor(math.exp(log_k)) + 0.5) if log_k < 700 else log_k

        def f(u, moment):
            lx = float(family.log_at_exp(u))
            return math.exp(u + t * lx) * (-lx) ** moment

        with mpmath.workdps(20):
            s0 += float(mpmath.quad(lambda u: f(float(u), 0), [lo, hi]))
            s1 += float(mpmath.quad(lambda u: f(float(u), 1), [lo, hi]))
    return s0, s1


def sharpness_vector(family: LengthFamily, t: float, N: int, C: float = math.log(2)) -> SharpnessResult:
    """Vector concentrated on digits N..k with p_n proportional to |I_n|^t.

    ``k`` is the smallest index with sum_{n=N}^k |I_n|^t >= 1 and
    ``c = 1/sum``. With ``A = -sum c |I_n|^t log |I_n|`` the dimension of
    mu_p is at least ``(t A - log c) / (A + C)``, where ``C`` bounds
    ``log|T'| + log|I_n|`` on I_n (log 2 for Gauss-type branches).
    """
    if not 0.0 < t < 1.0:
        raise InvalidParameterError("t must lie in (0, 1)")
    if math.isfinite(family.tail(t, N)):
        raise ConstructionError(f"sum |I_n|^{t} converges for {family.name}; construction inapplicable")
    first = float(np.exp(t * family.log(N)))
    if first >= 1.0:
        log_k = math.log(N)
    else:
        # bracket log k, then refine
        lo, hi = math.log(N), math.log(N) + 1.0
        while _log_sum(family, t, N, hi)[0] < 1.0:
            lo, hi = hi, 2.0 * hi
            if hi > 1e6:
                raise ConstructionError("partial sums do not reach 1")
        log_k = sopt.brentq(lambda u: _log_sum(family, t, N, u)[0] - 1.0, lo, hi, xtol=1e-12, rtol=1e-14)
    k = math.exp(log_k) if log_k < 709 else math.inf
    s0, s1 = _log_sum(family, t, N, log_k)
    c = 1.0 / s0
    A = c * s1
    bound = (t * A - math.log(c)) / (A + C)
    return SharpnessResult(family, t, int(N), k, c, A, C, bound)
