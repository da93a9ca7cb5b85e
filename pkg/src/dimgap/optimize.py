"""
Empirical search for the largest dimension over vectors of fixed support size.

dim mu_p = h(p) / chi(p) is smooth on the interior of the simplex. The
search maximises it by projected gradient ascent (finite-difference gradient,
Armijo backtracking), by cyclic coordinate ascent, or, for two digits, by an
exhaustive grid. Inner evaluations use the class-aggregated quadrature of
:class:`~dimgap.bernoulli.LyapunovClasses` at a moderate depth; the incumbent
is re-evaluated at a deeper level with an error bound.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sopt
from scipy.stats import qmc

from .bernoulli import InvalidParameterError, LyapunovClasses, ProbVector, dimension
from .map_core import GAUSS, BranchMap, DimgapError

FD_STEP = 1e-5
ARMIJO_C = 1e-4
N_RESTARTS = 8
OPT_WORDS = 10**6
FINAL_WORDS = 10**7
DECREASING_TOL = 1e-6


class OptimizationBug(DimgapError, RuntimeError):
    """An optimum that violates a structural property (e.g. not decreasing)."""


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def depth_for(N: int, words: int) -> int:
    """Largest k with N^k <= words (at least 1)."""
    return max(1, int(math.floor(math.log(words) / math.log(N) + 1e-12)))


class DimEvaluator:
    """dim of weights on digits 1..N at a fixed quadrature depth."""

    def __init__(self, N: int, depth: int, tmap: BranchMap = GAUSS):
        self.N = N
        self.depth = depth
        self.classes = LyapunovClasses.build(np.arange(1, N + 1), depth, tmap=tmap)
        self.calls = 0

    def __call__(self, w) -> float:
        self.calls += 1
        return self.classes.dimension(np.asarray(w, float))

    def gradient(self, w, step: float = FD_STEP) -> tuple:
        """Tangent gradient by renormalised finite differences.

        Returns (gradient, one_sided) where one_sided is True if some
        coordinate was too close to 0 for a central difference.
        """
        w = np.asarray(w, float)
        g = np.empty(w.size)
        one_sided = False
        f0 = None
        for i in range(w.size):
            up = w.copy()
            up[i] += step
            up /= up.sum()
            if w[i] - step > 0:
                dn = w.copy()
                dn[i] -= step
                dn /= dn.sum()
                g[i] = (self(up) - self(dn)) / (2 * step)
            else:
                one_sided = True
                if f0 is None:
                    f0 = self(w)
                g[i] = (self(up) - f0) / step
        return g - g.mean(), one_sided


@dataclass
class GradientResult:
    grad: np.ndarray
    norm: float
    one_sided: bool
    depth: int


def dim_gradient(p: ProbVector, depth: int | None = None, N: int | None = None,
                 step: float = FD_STEP, tmap: BranchMap = GAUSS) -> GradientResult:
    """Gradient of dim mu_p on the simplex over digits 1..N.

    Central differences of h/chi along each coordinate with step ``step``
    followed by renormalisation, projected so the components sum to 0.
    Coordinates with weight below ``step`` use forward differences and set
    ``one_sided``.

    Parameters
    ----------
    p : ProbVector
        Point of evaluation; weights beyond N must vanish.
    depth : int, optional
        Quadrature depth; defaults to the optimiser's inner depth for N.
    N : int, optional
        Number of coordinates; defaults to ``len(p)``.
    """
    N = len(p) if N is None else int(N)
    if p.tail_mass > 0 or np.any(p.weights[N:] > 0):
        raise InvalidParameterError("p must be supported on digits 1..N")
    w = np.zeros(N)
    w[: min(N, len(p))] = p.weights[:N]
    k = depth_for(N, OPT_WORDS) if depth is None else int(depth)
    ev = DimEvaluator(N, k, tmap)
    g, one = ev.gradient(w, step)
    return GradientResult(g, float(np.linalg.norm(g)), one, k)


# ---------------------------------------------------------------------------
# search


@dataclass
class LocalRun:
    start: list
    p: np.ndarray
    dim: float
    grad_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)  # (p, dim, grad norm) per accepted step


def _pg(ev: DimEvaluator, w0, tol: float, max_iter: int) -> LocalRun:
    w = project_simplex(np.asarray(w0, float))
    f = ev(w)
    step = 1.0
    hist = []
    for it in range(max_iter):
        g, _ = ev.gradient(w)
        # projected-gradient mapping; zero exactly at a KKT point
        gm = project_simplex(w + g) - w
        gn = float(np.linalg.norm(gm))
        hist.append((w.tolist(), f, gn))
        if gn <= tol:
            return LocalRun(list(w0), w, f, gn, it, True, hist)
        step = min(4.0 * step, 1e3)
        while True:
            cand = project_simplex(w + step * g)
            fc = ev(cand)
            if fc >= f + ARMIJO_C * float(g @ (cand - w)):
                break
            step *= 0.5
            if step < 1e-14:
                return LocalRun(list(w0), w, f, gn, it, False, hist)
        w, f = cand, fc
    g, _ = ev.gradient(w)
    gn = float(np.linalg.norm(project_simplex(w + g) - w))
    hist.append((w.tolist(), f, gn))
    return LocalRun(list(w0), w, f, gn, max_iter, gn <= tol, hist)


def _ca(ev: DimEvaluator, w0, tol: float, max_iter: int) -> LocalRun:
    """Cyclic ascent: coordinate i is set to s, the rest rescaled to 1 - s."""
    w = project_simplex(np.asarray(w0, float))
    f = ev(w)
    hist = []
    for it in range(max_iter):
        f_start = f
        for i in range(w.size):
            rest = w.copy()
            rest[i] = 0.0
            if rest.sum() <= 0:
                continue
            rest /= rest.sum()

            def neg(s, i=i, rest=rest):
                v = (1.0 - s) * rest
                v[i] = s
                return -ev(v)

            r = sopt.minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
            if -r.fun > f:
                w = (1.0 - r.x) * rest
                w[i] = r.x
                f = -r.fun
        g, _ = ev.gradient(w)
        gn = float(np.linalg.norm(project_simplex(w + g) - w))
        hist.append((w.tolist(), f, gn))
        if gn <= tol or f - f_start <= 1e-14:
            return LocalRun(list(w0), w, f, gn, it + 1, gn <= tol, hist)
    return LocalRun(list(w0), w, f, hist[-1][2], max_iter, False, hist)


def grid_oracle(ev: DimEvaluator, lo: float = 0.01, hi: float = 0.99, step: float = 1e-3) -> dict:
    """Exhaustive search over (p_1, 1 - p_1) for two digits."""
    if ev.N != 2:
        raise InvalidParameterError("grid search needs N = 2")
    xs = np.arange(lo, hi + step / 2, step)
    vals = np.array([ev(np.array([x, 1.0 - x])) for x in xs])
    i = int(np.argmax(vals))
    return {"p1": float(xs[i]), "dim": float(vals[i]), "points": int(xs.size)}


def sobol_starts(N: int, n: int, seed: int = 0) -> list:
    """Interior starting points: scrambled Sobol points mapped to the simplex."""
    # draw a power of two to keep the balance properties, then truncate
    u = qmc.Sobol(d=N, scramble=True, seed=seed).random_base2(max(0, math.ceil(math.log2(max(n, 1)))))[:n]
    x = -np.log(np.clip(u, 1e-12, 1.0))  # uniform on the simplex after normalising
    x /= x.sum(axis=1, keepdims=True)
    return [row for row in x]


@dataclass
class OptRun:
    N: int
    method: str
    p: ProbVector
    dim: float
    dim_err: float
    dim_inner: float
    depth_opt: int
    depth_final: int
    grad_norm: float
    seed: int
    budget: dict
    flags: dict
    history: list
    local_maxima: list
    oracle: dict | None = None

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "method": self.method,
            "p": self.p.weights.tolist(),
            "dim": self.dim,
            "dim_err": self.dim_err,
            "dim_inner": self.dim_inner,
            "depth_opt": self.depth_opt,
            "depth_final": self.depth_final,
            "grad_norm": self.grad_norm,
            "seed": self.seed,
            "budget": self.budget,
            "flags": self.flags,
            "history": [{"p": h[0], "dim": h[1], "grad_norm": h[2]} for h in self.history],
            "local_maxima": self.local_maxima,
            "oracle": self.oracle,
        }


def _distinct(runs: list, tol: float = 1e-3) -> list:
    out = []
    for r in sorted(runs, key=lambda r: -r.dim):
        if all(np.abs(r.p - q["p_arr"]).max() > tol for q in out):
            out.append({"p_arr": r.p, "p": r.p.tolist(), "dim": r.dim, "grad_norm": r.grad_norm})
    for q in out:
        del q["p_arr"]
    return out


def maximize_dim(N: int, method: str = "pg", *, max_iter: int = 200, tol: float = 1e-6,
                 restarts: int = N_RESTARTS, seed: int = 0, warm_start=None, threads: int = 1,
                 opt_words: int = OPT_WORDS, final_words: int = FINAL_WORDS,
                 tmap: BranchMap = GAUSS) -> OptRun:
    """Search for the largest dim mu_p over p supported on digits 1..N.

    Parameters
    ----------
    N : int
        Support size, at least 2.
    method : {"pg", "ca", "grid"}
        Projected gradient, coordinate ascent, or exhaustive grid (N = 2).
    max_iter : int
        Iteration cap per restart; hitting it sets ``flags["budget_exhausted"]``.
    tol : float
        Target norm of the projected-gradient mapping.
    restarts : int
        Number of quasi-random interior starting points.
    warm_start : array_like, optional
        Extra starting point, e.g. the optimum for a smaller support padded
        with zeros (used for monotonicity in N).
    opt_words, final_words : int
        Word budgets fixing the inner and final quadrature depths.

    Returns
    -------
    OptRun
    """
    if N < 2:
        raise InvalidParameterError("N must be at least 2")
    if method not in ("pg", "ca", "grid"):
        raise InvalidParameterError(f"unknown method {method!r}")
    k_opt = depth_for(N, opt_words)
    k_final = max(depth_for(N, final_words), k_opt)
    ev = DimEvaluator(N, k_opt, tmap)
    oracle = grid_oracle(ev) if N == 2 else None

    if method == "grid":
        if N != 2:
            raise InvalidParameterError("grid search needs N = 2")
        w = np.array([oracle["p1"], 1.0 - oracle["p1"]])
        runs = [LocalRun([], w, oracle["dim"], float("nan"), oracle["points"], True, [(w.tolist(), oracle["dim"], float("nan"))])]
    else:
        starts = sobol_starts(N, restarts, seed)
        if warm_start is not None:
            ws = np.zeros(N)
            ws[: len(warm_start)] = warm_start
            # nudge off the boundary so every coordinate can move
            starts.append(0.999 * ws + 0.001 / N)
        local = _pg if method == "pg" else _ca
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                runs = list(ex.map(lambda s: local(ev, s, tol, max_iter), starts))
        else:
            runs = [local(ev, s, tol, max_iter) for s in starts]

    best = max(runs, key=lambda r: r.dim)
    w = best.p
    p = ProbVector(w.copy())
    fin = dimension(p, depth=k_final, tmap=tmap) if p.support.size > 1 else dimension(p, tmap=tmap)
    diffs = np.diff(w)
    flags = {
        "budget_exhausted": any(not r.converged for r in runs) and method != "grid",
        "converged": bool(best.converged),
        "decreasing": bool(np.all(diffs <= DECREASING_TOL)),
        "max_increase": float(max(diffs.max(), 0.0)),
        "below_one": fin.dim < 1.0,
    }
    if not flags["below_one"]:
        raise OptimizationBug(f"optimiser reports dim {fin.dim} >= 1")
    return OptRun(
        N=N, method=method, p=p, dim=fin.dim, dim_err=fin.err, dim_inner=best.dim,
        depth_opt=k_opt, depth_final=k_final, grad_norm=best.grad_norm, seed=seed,
        budget={"max_iter": max_iter, "restarts": restarts, "opt_words": opt_words,
                "final_words": final_words, "evaluations": ev.calls},
        flags=flags, history=best.history, local_maxima=_distinct(runs), oracle=oracle,
    )


def maximize_sequence(Ns=(2, 4, 8, 16), method: str = "pg", **kw) -> list:
    """Run :func:`maximize_dim` for increasing N, warm-starting from the previous optimum."""
    out = []
    prev = None
    for N in sorted(Ns):
        run = maximize_dim(N, method, warm_start=prev, **kw)
        out.append(run)
        prev = run.p.weights[:N]
    return out
