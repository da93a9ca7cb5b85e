"""
Transfer operators on a uniform grid.

The weighted transfer operator

    (L w)(x) = sum_n p_n^t |(T_n^{-1})'(x)|^b w(T_n^{-1} x)

is discretised on ``M + 1`` uniform nodes with piecewise-linear
interpolation, giving a sparse matrix. Its leading eigenfunction ``h`` and
left eigenvector give the Gibbs measure; the normalised operator
``M w = L(h w) / (lambda h)`` fixes constants.

Functions that are smooth on each branch but jump between branches (the
potential ``f_p``, cylinder indicators) are never interpolated directly.
They are pulled back one step first, ``(M f)(x) = sum_n wt_n(x) f(T_n^{-1} x)``,
which is smooth, and integrated as ``mu(f) = mu(M f)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import zeta

from .map_core import ALPHA, GAUSS, BranchMap, DimgapError, Word, log_deriv_holder, word_matrix

DEFAULT_GRID = 1024


class SpectralError(DimgapError, RuntimeError):
    pass


class NotInConeError(DimgapError, ValueError):
    pass


class NoDecayError(DimgapError, RuntimeError):
    pass


# ---------------------------------------------------------------------------
# grid functions


@dataclass
class GridFunction:
    """Values at uniform nodes i/M, i = 0..M, with linear interpolation."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    @classmethod
    def from_callable(cls, f, M: int = DEFAULT_GRID) -> "GridFunction":
        return cls(f(np.linspace(0.0, 1.0, M + 1)))

    @property
    def M(self) -> int:
        return self.values.size - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.values.size)

    def __call__(self, y):
        return interpolate(self.values, y)

    @property
    def sup(self) -> float:
        return float(np.abs(self.values).max())

    @property
    def lip(self) -> float:
        """Max adjacent-node slope, the Lipschitz seminorm of the interpolant."""
        return float(np.abs(np.diff(self.values)).max() * self.M)

    @property
    def norm01(self) -> float:
        return self.sup + self.lip

    def log_slope(self) -> float:
        """max |log v(x_i) - log v(x_j)| / |x_i - x_j| over node pairs.

        The maximum over all pairs is attained at adjacent nodes, since a
        secant slope is an average of adjacent slopes.
        """
        if np.any(self.values <= 0):
            return math.inf
        return float(np.abs(np.diff(np.log(self.values))).max() * self.M)

    def in_cone(self, a: float) -> bool:
        """v > 0 and v(x) <= exp(a|x - y|) v(y) for all node pairs."""
        return self.log_slope() <= a * (1 + 1e-12)

    def holder(self, tmap: BranchMap = GAUSS, depth: int = 6, digits=None, alpha: float = ALPHA) -> float:
        """sup_n var_n / alpha^n with var_n the largest oscillation on depth-n cylinders."""
        return holder_seminorm(self.values, tmap, depth, digits, alpha)


def interpolate(values: np.ndarray, y) -> np.ndarray:
    M = values.shape[-1] - 1
    s = np.clip(np.asarray(y, dtype=float), 0.0, 1.0) * M
    j = np.minimum(np.floor(s).astype(np.int64), M - 1)
    f = s - j
    return values[..., j] * (1.0 - f) + values[..., j + 1] * f


def interp_matrix(y: np.ndarray, M: int) -> sp.csr_matrix:
    """Sparse P with (P w)_i = linear interpolation of w at y_i."""
    s = np.clip(y, 0.0, 1.0) * M
    j = np.minimum(np.floor(s).astype(np.int64), M - 1)
    f = s - j
    rows = np.arange(y.size)
    return sp.csr_matrix(
        (np.concatenate([1.0 - f, f]), (np.concatenate([rows, rows]), np.concatenate([j, j + 1]))),
        shape=(y.size, M + 1),
    )


def holder_seminorm(values, tmap=GAUSS, depth=6, digits=None, alpha=ALPHA, max_words=1 << 15) -> float:
    """Discrete Hoelder-alpha seminorm of a grid function over cylinders.

    For each depth n the oscillation of the interpolant over every cylinder
    I_w (endpoints plus the nodes inside) is measured; the result is
    sup_n max_w osc / alpha^n. ``digits`` restricts the cylinders.
    """
    values = np.asarray(values, float)
    M = values.size - 1
    dig = tmap.digits(20) if digits is None else np.asarray(digits)
    best = 0.0
    for n in range(1, depth + 1):
        K = dig.size
        k = max(1, min(K, int(math.floor(max_words ** (1.0 / n) + 1e-9))))
        from .map_core import word_table

        tab = word_table(tmap, np.sort(dig)[:k], n)
        e0, e1 = tab.endpoints()
        lo, hi = np.minimum(e0, e1), np.maximum(e0, e1)
        i0 = np.ceil(lo * M).astype(np.int64)
        i1 = np.floor(hi * M).astype(np.int64)
        vlo, vhi = interpolate(values, lo), interpolate(values, hi)
        mx = np.maximum(vlo, vhi)
        mn = np.minimum(vlo, vhi)
        # nodes strictly inside: use a sparse-table free approach via cumulative max per cylinder
        for idx in np.flatnonzero(i1 >= i0):
            seg = values[i0[idx]: i1[idx] + 1]
            mx[idx] = max(mx[idx], seg.max())
            mn[idx] = min(mn[idx], seg.min())
        best = max(best, float((mx - mn).max()) / alpha**n)
    return best


# ---------------------------------------------------------------------------
# operators


@dataclass
class Operator:
    """Discretised transfer operator for g = -b log|T'| + t f_p.

    ``p`` is a ProbVector or ``None`` for the full alphabet (digits up to
    ``cut``; ``tail`` adds the Hurwitz-zeta estimate of the remaining
    branches, which is only available for the Gauss map).
    """

    tmap: BranchMap
    digits: np.ndarray
    logp: np.ndarray
    b: float
    t: float
    M: int
    Y: np.ndarray = field(repr=False)  # (K, M+1) preimages
    G: np.ndarray = field(repr=False)  # (K, M+1) weights exp(g(Y))
    L: sp.csr_matrix = field(repr=False)
    tail_order: int = -1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M + 1)

    def log_deriv_Y(self) -> np.ndarray:
        """log|T'| at every preimage, shape (K, M+1)."""
        return self.tmap.log_deriv_on_branch(self.digits[:, None], self.Y)


class OperatorFamily:
    """The operators L_b for fixed (p, t) and varying b, sharing one sparsity pattern.

    Row i of L_b holds, for every branch k, the two interpolation weights of
    the preimage Y[k, i] scaled by exp(t log p_k + b log|phi_k'(x_i)|), plus
    the alphabet-tail columns when requested. Only the data array depends on
    b, so repeated evaluation (as in the pressure root search) skips the
    sparse assembly.
    """

    def __init__(self, p, t: float, tmap: BranchMap = GAUSS, M: int = DEFAULT_GRID,
                 cut: int | None = None, tail_order: int = -1):
        x = np.linspace(0.0, 1.0, M + 1)
        if p is None:
            digits = tmap.digits(cut)
            logp = np.zeros(digits.size)
        else:
            digits = p.support
            logp = np.log(p.support_weights)
        if p is None and tail_order >= 0 and tmap.name != "gauss":
            raise DimgapError("alphabet tail correction is implemented for the Gauss map only")
        a, bb, c, d = tmap.coeffs(digits)
        a, bb, c, d = (v[:, None] for v in (a, bb, c, d))
        self.tmap, self.digits, self.logp = tmap, np.asarray(digits), logp
        self.t, self.M, self.x = float(t), int(M), x
        self.tail_order = tail_order if p is None else -1
        self.Y = (a * x + bb) / (c * x + d)
        self.logphi = np.log(np.abs(a * d - bb * c)) - 2.0 * np.log(np.abs(c * x + d))
        sY = np.clip(self.Y, 0.0, 1.0) * M
        j = np.minimum(np.floor(sY).astype(np.int64), M - 1)
        f = sY - j
        K = digits.size
        # (row, branch, side) layout keeps rows contiguous
        self._cols = np.stack([j.T, (j + 1).T], axis=-1).reshape(M + 1, 2 * K)
        self._frac = np.stack([(1.0 - f).T, f.T], axis=-1).reshape(M + 1, 2 * K)
        n_extra = {-1: 0, 0: 1, 1: 3}[min(self.tail_order, 1)]
        if n_extra:
            extra = np.array([0, 0, 1][:n_extra])
            self._cols = np.hstack([self._cols, np.broadcast_to(extra, (M + 1, n_extra))])
        self._width = self._cols.shape[1]
        self._indptr = np.arange(0, (M + 1) * self._width + 1, self._width)
        self._indices = self._cols.ravel().astype(np.int32)
        self._v = None

    def weights(self, b: float) -> np.ndarray:
        """exp(g) at the preimages, shape (K, M+1)."""
        return np.exp(self.t * self.logp[:, None] + b * self.logphi)

    def matrix(self, b: float, G: np.ndarray | None = None) -> sp.csr_matrix:
        M = self.M
        G = self.weights(b) if G is None else G
        data = (np.repeat(G.T, 2, axis=1) * self._frac)
        if self.tail_order >= 0:
            # sum_{n>N} (x+n)^{-2b} w(1/(x+n)) ~ w(0) zeta(2b, x+N+1) + w'(0) zeta(2b+1, x+N+1)
            N = int(self.digits[-1])
            cols = [zeta(2 * b, self.x + N + 1)]
            if self.tail_order >= 1:
                z1 = zeta(2 * b + 1, self.x + N + 1) * M
                cols += [-z1, z1]
            data = np.hstack([data, np.stack(cols, axis=1)])
        return sp.csr_matrix((data.ravel(), self._indices, self._indptr), shape=(M + 1, M + 1))

    def operator(self, b: float) -> "Operator":
        G = self.weights(b)
        # sum_duplicates sorts indices in place; keep the shared pattern intact
        L = self.matrix(b, G).copy()
        L.sum_duplicates()
        return Operator(self.tmap, self.digits, self.logp, float(b), self.t, self.M, self.Y, G, L, self.tail_order)

    def pressure(self, b: float, tol: float = 1e-13) -> float:
        """log of the leading eigenvalue, warm-started from the previous call."""
        lam, v, _ = leading_eigen(self.matrix(b), tol=tol, v0=self._v)
        self._v = v
        return math.log(lam)


def build_operator(p, t: float, b: float, tmap: BranchMap = GAUSS, M: int = DEFAULT_GRID,
                   cut: int | None = None, tail_order: int = -1) -> Operator:
    return OperatorFamily(p, t, tmap, M, cut, tail_order).operator(b)


def leading_eigen(L: sp.csr_matrix, tol: float = 1e-12, max_iter: int = 10_000, v0=None) -> tuple:
    """Power iteration with sup-norm renormalisation; returns (lambda, v, iters)."""
    v = np.ones(L.shape[0]) if v0 is None else np.asarray(v0, float).copy()
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = L @ v
        lam = float(w.max())
        if not lam > 0:
            raise SpectralError("operator iterate is not positive")
        w /= lam
        if np.abs(w - v).max() < tol:
            return lam, w, it
        v = w
    raise SpectralError(f"power iteration did not converge in {max_iter} steps")


def operator_pressure(p, t: float, b: float, tmap: BranchMap = GAUSS, M: int = DEFAULT_GRID,
                      cut: int | None = None, tail_order: int = -1) -> float:
    """log of the leading eigenvalue of the discretised operator."""
    op = build_operator(p, t, b, tmap, M, cut, tail_order)
    lam, _, _ = leading_eigen(op.L, tol=1e-13)
    return math.log(lam)


# ---------------------------------------------------------------------------
# Gibbs states


def cone_parameter(kappa: float, alpha: float = ALPHA) -> dict:
    """Cone aperture from the two-step contraction recipe.

    lambda_1 = (1 + alpha^2)/2, a_0 = 2 alpha^2 kappa / (lambda_1 - alpha^2),
    a_1 = (a_0 + 2 alpha^2 kappa + alpha^2 a_0) / (lambda_1 - alpha^2),
    a = max(1, a_1).
    """
    a2 = alpha * alpha
    lam1 = (1.0 + a2) / 2.0
    a0 = 2.0 * a2 * kappa / (lam1 - a2)
    a1 = (a0 + 2.0 * a2 * kappa + a2 * a0) / (lam1 - a2)
    return {"lambda1": lam1, "a0": a0, "a1": a1, "a": max(1.0, a1), "kappa": kappa}


@dataclass
class GibbsState:
    """Equilibrium state of g = -beta log|T'| + t f_p on the grid.

    ``h`` is the leading eigenfunction (sup-normalised), ``lam`` the
    eigenvalue (1 when ``beta`` solves the pressure equation) and ``pi`` the
    invariant discrete measure of the normalised operator, so that
    ``mu(f) = pi @ f`` for a grid function ``f``.
    """

    p: object
    t: float
    beta: float
    op: Operator = field(repr=False)
    h: GridFunction = field(repr=False)
    lam: float
    pi: np.ndarray = field(repr=False)
    iterations: int
    cone: dict
    wt: np.ndarray = field(repr=False)  # (K, M+1) normalised branch weights
    _P: list = field(default_factory=list, repr=False)
    _cyl: dict = field(default_factory=dict, repr=False)

    @property
    def M(self):
        return self.op.M

    @property
    def digits(self):
        return self.op.digits

    @property
    def a(self) -> float:
        return self.cone["a"]

    # normalised operator ---------------------------------------------------
    def interp_Y(self, values: np.ndarray) -> np.ndarray:
        """values interpolated at all preimages, shape (K, M+1)."""
        return interpolate(values, self.op.Y)

    def apply_M(self, w) -> GridFunction:
        """M w = L(h w) / (lam h) with the assembled L, so pi(M w) = pi(w) up to the eigen tolerance."""
        v = w.values if isinstance(w, GridFunction) else np.asarray(w, float)
        hv = self.h.values
        return GridFunction(self.op.L @ (hv * v) / (self.lam * hv))

    def apply_M_branchwise(self, F: np.ndarray) -> GridFunction:
        """(M f)(x) = sum_k wt_k(x) F[k](x) with F[k] = f(T_k^{-1} x) given exactly."""
        return GridFunction((self.wt * F).sum(axis=0))

    def apply_L(self, w) -> GridFunction:
        v = w.values if isinstance(w, GridFunction) else np.asarray(w, float)
        return GridFunction(self.op.L @ v)

    # integrals --------------------------------------------------------------
    def integrate(self, w) -> float:
        v = w.values if isinstance(w, GridFunction) else np.asarray(w, float)
        return float(self.pi @ v)

    def integrate_branchwise(self, F: np.ndarray) -> float:
        return float(self.pi @ (self.wt * F).sum(axis=0))

    def log_deriv_Y(self) -> np.ndarray:
        return self.op.log_deriv_Y()

    def fp_Y(self) -> np.ndarray:
        """f_p at the preimages: log p_{d_k}, broadcast to (K, M+1)."""
        return np.broadcast_to(self.op.logp[:, None], self.op.Y.shape)

    def lyapunov(self) -> float:
        """int log|T'| dmu via the exact one-step pullback."""
        return self.integrate_branchwise(self.log_deriv_Y())

    # cylinders --------------------------------------------------------------
    def _branch_index(self, n: int) -> int | None:
        hit = np.flatnonzero(self.digits == n)
        return int(hit[0]) if hit.size else None

    def _B(self, k: int, v: np.ndarray) -> np.ndarray:
        return self.wt[k] * interpolate(v, self.op.Y[k])

    def cylinder_density(self, w) -> np.ndarray | None:
        """Grid function M^n 1_{I_w} = B_{w_n} ... B_{w_1} 1 (None if unsupported)."""
        w = Word.parse(w)
        v = np.ones(self.M + 1)
        for n in w:
            k = self._branch_index(n)
            if k is None:
                return None
            v = self._B(k, v)
        return v

    def cylinder(self, w) -> float:
        """mu(I_w). Additive under refinement up to the eigenvector tolerance."""
        w = Word.parse(w)
        if w in self._cyl:
            return self._cyl[w]
        v = self.cylinder_density(w)
        val = 0.0 if v is None else float(self.pi @ v)
        self._cyl[w] = val
        return val

    def cylinder_exact_pullback(self, w) -> float:
        """mu(I_w) from the closed-form n-step pullback of 1_{I_w}.

        phi_w(x) = p_w^t |phi_w'(x)|^b h(phi_w x) / (lam^n h(x)). Agrees with
        :meth:`cylinder` up to interpolation error.
        """
        w = Word.parse(w)
        if any(self._branch_index(n) is None for n in w):
            return 0.0
        m = word_matrix(w, self.op.tmap)
        a, b, c, d = (float(v) for v in (m.a, m.b, m.c, m.d))
        x = self.op.x
        y = (a * x + b) / (c * x + d)
        logpw = sum(self.op.logp[self._branch_index(n)] for n in w)
        dens = np.exp(self.t * logpw + self.beta * (math.log(abs(a * d - b * c)) - 2 * np.log(np.abs(c * x + d))))
        dens *= self.h(y) / (self.lam ** len(w) * self.h.values)
        return float(self.pi @ dens)

    def cylinders(self, depth: int) -> tuple:
        """All supported words of one length and their measures (lexicographic)."""
        K = self.digits.size
        layer = self.wt.copy()
        for _ in range(depth - 1):
            # layer rows are words; extend each by every digit
            nxt = np.empty((layer.shape[0] * K, self.M + 1))
            for k in range(K):
                nxt[k::K] = self.wt[k] * interpolate(layer, self.op.Y[k])
            layer = nxt
        masses = layer @ self.pi
        return masses

    def gibbs_constant(self, depth: int = 5, max_words: int = 1 << 15) -> dict:
        """c_3 with mu(I_w) |(T^n)'(z_w)|^beta / p_w^t in [1/c_3, c_3] for |w| <= depth."""
        from .map_core import word_table

        worst = 1.0
        K = self.digits.size
        for n in range(1, depth + 1):
            if K**n > max_words:
                break
            masses = self.cylinders(n)
            tab = word_table(self.op.tmap, self.digits, n)
            logpw = self.op.logp[tab.index].sum(axis=1)
            ratio = np.log(masses) + self.beta * tab.log_deriv_n() - self.t * logpw
            worst = max(worst, float(np.exp(np.abs(ratio).max())))
        return {"c3": worst, "depth": n}


def gibbs_state(p, t: float, beta: float, tmap: BranchMap = GAUSS, M: int = DEFAULT_GRID,
                tol: float = 1e-12, max_iter: int = 10_000, cut: int | None = None,
                tail_order: int = -1) -> GibbsState:
    """Leading eigendata of L for g = -beta log|T'| + t f_p.

    ``beta`` should solve the pressure equation so that the eigenvalue is 1;
    the normalised operator divides by the measured eigenvalue either way.
    """
    op = build_operator(p, t, beta, tmap, M, cut, tail_order)
    lam, h, iters = leading_eigen(op.L, tol=tol, max_iter=max_iter)
    nu_lam, nu, _ = leading_eigen(op.L.T.tocsr(), tol=tol, max_iter=max_iter)
    pi = nu * h
    pi /= pi.sum()
    hY = interpolate(h, op.Y)
    wt = op.G * hY / (lam * h[None, :])
    kappa = beta * log_deriv_holder(tmap, digits=op.digits if p is not None else None)
    cone = cone_parameter(kappa)
    return GibbsState(p, float(t), float(beta), op, GridFunction(h), lam, pi, iters, cone, wt)


def fixed_point_h(p, t: float, beta: float, tmap: BranchMap = GAUSS, M: int = DEFAULT_GRID,
                  cut: int | None = None, tail_order: int = -1, max_iter: int = 10_000) -> tuple:
    """Positive eigenfunction h = lim L^n 1 (sup-normalised), its cone parameter and iteration count.

    Raises SpectralError if power iteration has not settled after ``max_iter`` steps.
    """
    op = build_operator(p, t, beta, tmap, M, cut, tail_order)
    _, h, iters = leading_eigen(op.L, tol=1e-10, max_iter=max_iter)
    kappa = beta * log_deriv_holder(tmap, digits=op.digits if p is not None else None)
    return GridFunction(h / h.max()), cone_parameter(kappa)["a"], iters


def gibbs_cylinder(state: GibbsState, w) -> float:
    """mu_{p,t}(I_w); zero for words with an unsupported digit."""
    return state.cylinder(w)


def lyapunov_gibbs(state: GibbsState, beta_min: float | None = None) -> dict:
    """int log|T'| dmu_{p,t} together with the uniform bound c_3 sum 2 log(n+1) / n^(2 beta)."""
    from .gap import lyapunov_bound  # gap depends on this module

    c3 = state.gibbs_constant()["c3"]
    b = state.beta if beta_min is None else beta_min
    bound = float(lyapunov_bound(c3, b)) if b > 0.5 else math.inf
    return {"value": state.lyapunov(), "c3": c3, "uniform_bound": bound}


# ---------------------------------------------------------------------------
# coboundary and variance


@dataclass
class Coboundary:
    U: GridFunction
    n_terms: int
    rho: float
    tail_bound: float
    norms: list
    beta_prime: float
    Mf: GridFunction
    mean: float


def potential_Y(state: GibbsState, beta_prime: float) -> np.ndarray:
    """f_{p,t} = -beta' log|T'| + f_p at the preimages."""
    return -beta_prime * state.log_deriv_Y() + state.fp_Y()


def beta_prime_gibbs(state: GibbsState) -> float:
    """int f_p dmu / int log|T'| dmu.

    This is the sign fixed by centring, -beta' int log|T'| + int f_p = 0,
    and makes beta decreasing.
    """
    return state.integrate_branchwise(state.fp_Y()) / state.lyapunov()


def _series(state: GibbsState, first: np.ndarray, tol: float, max_terms: int, strict: bool = True):
    """Sum_{j>=0} M^j first until ||M^j first||_{0,1} < tol (1 - rho)/2."""
    first = first - state.integrate(first)
    acc = np.zeros_like(first)
    terms = []
    norms = []
    v = first
    rho = 0.0
    for j in range(max_terms):
        acc += v
        terms.append(v)
        nv = GridFunction(v).norm01
        norms.append(nv)
        if len(norms) >= 3 and norms[-2] > 0:
            rho = norms[-1] / norms[-2]
        if nv == 0.0:
            break
        if len(norms) >= 3 and nv < tol * max(1e-12, 1.0 - min(rho, 0.999)) / 2.0:
            break
        if len(norms) >= 8 and rho >= 0.999 and strict:
            raise NoDecayError(f"no decay: norm ratio {rho:.4f}")
        v = state.apply_M(v).values
        # remove the drift along constants left by the finite eigen-solve
        v = v - state.integrate(v)
    return acc, terms, norms, rho


def coboundary_U(state: GibbsState, beta_prime: float | None = None, tol: float = 1e-10,
                 max_terms: int = 5000) -> Coboundary:
    """U = sum_{n>=1} M^n f_{p,t}, so that f + U - U o T has M(.) = 0."""
    bp = beta_prime_gibbs(state) if beta_prime is None else beta_prime
    F = potential_Y(state, bp)
    Mf = state.apply_M_branchwise(F)
    mean = state.integrate(Mf)
    acc, terms, norms, rho = _series(state, Mf.values, tol, max_terms)
    tail = norms[-1] * rho / max(1e-12, 1.0 - rho)
    return Coboundary(GridFunction(acc), len(terms), rho, tail, norms, bp, Mf, mean)


def ftilde_Y(state: GibbsState, cob: Coboundary) -> np.ndarray:
    """f~ = f + U - U o T at the preimages: F_k + U(Y_k) - U(x)."""
    F = potential_Y(state, cob.beta_prime)
    return F + state.interp_Y(cob.U.values) - cob.U.values[None, :]


def residual_M_ftilde(state: GibbsState, cob: Coboundary) -> float:
    """||M f~||_inf, zero for an exact coboundary correction."""
    return state.apply_M_branchwise(ftilde_Y(state, cob)).sup


@dataclass
class VarianceResult:
    green_kubo: float
    single_integral: float
    gk_tail: float
    n_terms: int
    rho: float

    @property
    def agreement(self) -> float:
        """Relative difference between the two estimators."""
        s = max(abs(self.green_kubo), abs(self.single_integral))
        return 0.0 if s == 0 else abs(self.green_kubo - self.single_integral) / s


def variance(state: GibbsState, cob: Coboundary | None = None, tol: float = 1e-12,
             max_terms: int = 5000) -> VarianceResult:
    """Asymptotic variance of f_{p,t} by two routes.

    green_kubo: mu(f^2) + 2 sum_{n>=1} mu(f . M^n f).
    single_integral: mu(f~^2) with f~ the coboundary-corrected potential.
    """
    cob = coboundary_U(state) if cob is None else cob
    F = potential_Y(state, cob.beta_prime)
    si = state.integrate_branchwise(ftilde_Y(state, cob) ** 2)
    gk = state.integrate_branchwise(F * F)
    v = cob.Mf.values
    n = 0
    last = 0.0
    rho = 0.0
    for n in range(1, max_terms + 1):
        term = state.integrate_branchwise(F * state.interp_Y(v))
        gk += 2.0 * term
        if n >= 3 and abs(last) > 0:
            rho = min(abs(term / last), 0.999)
        if n >= 3 and abs(term) < tol:
            break
        last = term
        v = state.apply_M(v).values
    tail = 2.0 * abs(last) * rho / (1.0 - rho) if rho else 0.0
    return VarianceResult(float(gk), float(si), float(tail), n, float(rho))


# ---------------------------------------------------------------------------
# Hilbert projective metric


def _subsample(v: np.ndarray, max_nodes: int = 513) -> tuple:
    M = v.size - 1
    step = max(1, int(math.ceil(M / (max_nodes - 1))))
    idx = np.arange(0, M + 1, step)
    if idx[-1] != M:
        idx = np.append(idx, M)
    return idx / M, idx


def hilbert_metric(v, w, a: float, max_nodes: int = 513) -> float:
    """Projective distance Theta(v, w) in the cone C_a.

    A = sup{s: w - s v in C_a}, B = inf{s: s v - w in C_a}, both over node
    pairs; Theta = log(B / A).
    """
    v = v.values if isinstance(v, GridFunction) else np.asarray(v, float)
    w = w.values if isinstance(w, GridFunction) else np.asarray(w, float)
    x, idx = _subsample(v, max_nodes)
    vs, ws = v[idx], w[idx]
    if np.any(vs <= 0) or np.any(ws <= 0):
        raise NotInConeError("functions must be positive")
    d = np.abs(x[:, None] - x[None, :])
    E = np.exp(a * d)
    # pair (i, j): condition u(x_i) <= E_ij u(x_j); ratios for i != j
    den_v = E * vs[None, :] - vs[:, None]
    den_w = E * ws[None, :] - ws[:, None]
    off = ~np.eye(x.size, dtype=bool)
    for name, den in (("v", den_v), ("w", den_w)):
        bad = off & (den <= 0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise NotInConeError(f"{name} violates the cone condition at nodes ({idx[i]}, {idx[j]})")
    R = den_w[off] / den_v[off]
    ratio = ws / vs
    A = min(R.min(), ratio.min())
    B = max(R.max(), ratio.max())
    return float(math.log(B / A))


def random_cone_function(rng: np.random.Generator, a: float, M: int = DEFAULT_GRID, modes: int = 6,
                         fill: float = 0.5) -> GridFunction:
    """Random smooth positive function with log-slope at most ``fill * a``."""
    x = np.linspace(0.0, 1.0, M + 1)
    k = np.arange(1, modes + 1)
    coef = rng.normal(size=modes) / k
    phase = rng.uniform(0, 2 * np.pi, size=modes)
    g = (coef[:, None] * np.sin(np.pi * k[:, None] * x + phase[:, None])).sum(axis=0)
    slope = np.abs(np.diff(g)).max() * M
    g *= fill * a / slope * rng.uniform(0.2, 1.0)
    return GridFunction(np.exp(g))


def contraction_ratios(state: GibbsState, n_pairs: int = 50, seed: int = 0, steps: int = 2) -> dict:
    """Theta(M^2 v, M^2 w) / Theta(v, w) over random pairs of C_a."""
    rng = np.random.default_rng(seed)
    a = state.a
    ratios = []
    in_lam_cone = []
    lam1 = state.cone["lambda1"]
    for _ in range(n_pairs):
        v = random_cone_function(rng, a, state.M)
        w = random_cone_function(rng, a, state.M)
        th0 = hilbert_metric(v, w, a)
        v2, w2 = v, w
        for _ in range(steps):
            v2, w2 = state.apply_M(v2), state.apply_M(w2)
        th1 = hilbert_metric(v2, w2, a)
        ratios.append(th1 / th0)
        in_lam_cone.append(v2.in_cone(lam1 * a) and w2.in_cone(lam1 * a))
    ratios = np.array(ratios)
    return {"r_hat": float(ratios.max()), "ratios": ratios, "in_lambda_cone": bool(all(in_lam_cone)), "a": a}
