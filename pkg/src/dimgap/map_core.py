"""
Expanding interval maps with Moebius or affine inverse branches.

The Gauss map ``T(x) = 1/x mod 1`` is the canonical instance. Every inverse
branch is a Moebius transformation ``x -> (a x + b) / (c x + d)`` so that
derivatives, cylinder endpoints and periodic points have closed forms; affine
branches are the special case ``c = 0``.

Word enumeration is vectorised: :func:`word_table` returns the composed
matrices of all words of a given length over a digit set as float arrays.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

ALPHA = 2.0 / 3.0
DEFAULT_DIGIT_CUT = 64


class DimgapError(Exception):
    """Base class for domain errors raised by the library."""


class InvalidDigitError(DimgapError, ValueError):
    pass


class DomainError(DimgapError, ValueError):
    pass


class UnsupportedMapError(DimgapError, ValueError):
    pass


# ---------------------------------------------------------------------------
# words


@functools.total_ordering
@dataclass(frozen=True)
class Word:
    """A finite string of positive digits.

    Words compare lexicographically as tuples. For the Gauss map the position
    of cylinders on the line follows :meth:`position_key` instead, since odd
    levels reverse orientation.
    """

    digits: tuple

    def __post_init__(self):
        d = tuple(int(v) for v in self.digits)
        if len(d) == 0:
            raise InvalidDigitError("a word needs at least one digit")
        if min(d) < 1:
            raise InvalidDigitError(f"digits must be >= 1, got {d}")
        object.__setattr__(self, "digits", d)

    @classmethod
    def parse(cls, text) -> "Word":
        """Build a word from ``"12"``, ``"1,12,3"``, an int or a sequence."""
        if isinstance(text, Word):
            return text
        if isinstance(text, int):
            return cls((text,))
        if isinstance(text, str):
            s = text.strip()
            if "," in s or " " in s:
                parts = [q for q in s.replace(",", " ").split() if q]
                return cls(tuple(int(q) for q in parts))
            return cls(tuple(int(ch) for ch in s))
        return cls(tuple(text))

    def __len__(self):
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    def __getitem__(self, k):
        return self.digits[k]

    def __lt__(self, other):
        return self.digits < Word.parse(other).digits

    def __add__(self, other):
        return Word(self.digits + Word.parse(other).digits)

    def __str__(self):
        if max(self.digits) < 10:
            return "".join(str(d) for d in self.digits)
        return ",".join(str(d) for d in self.digits)

    def prefix(self, n: int) -> "Word":
        return Word(self.digits[:n])

    def repeat_to(self, n: int) -> "Word":
        """The length-``n`` prefix of the periodic sequence ``w w w ...``."""
        k = len(self.digits)
        return Word(tuple(self.digits[i % k] for i in range(n)))

    def position_key(self) -> tuple:
        """Sort key ordering same-length Gauss cylinders from left to right."""
        return tuple(-d if i % 2 == 0 else d for i, d in enumerate(self.digits))


# ---------------------------------------------------------------------------
# exact Moebius arithmetic


@dataclass(frozen=True)
class MoebiusMatrix:
    """Integer (or rational) 2x2 matrix acting as ``x -> (ax+b)/(cx+d)``."""

    a: object
    b: object
    c: object
    d: object

    @classmethod
    def gauss_digit(cls, n: int) -> "MoebiusMatrix":
        if n < 1:
            raise InvalidDigitError(f"digit must be >= 1, got {n}")
        return cls(0, 1, 1, int(n))

    @classmethod
    def identity(cls) -> "MoebiusMatrix":
        return cls(1, 0, 0, 1)

    def __matmul__(self, o: "MoebiusMatrix") -> "MoebiusMatrix":
        return MoebiusMatrix(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def __call__(self, x):
        x = Fraction(x) if isinstance(x, (int, Fraction)) else x
        return (self.a * x + self.b) / (self.c * x + self.d)

    def endpoints(self) -> tuple:
        """Exact images of 0 and 1, sorted."""
        lo = Fraction(self.b) / Fraction(self.d)
        hi = Fraction(self.a + self.b) / Fraction(self.c + self.d)
        return (lo, hi) if lo <= hi else (hi, lo)

    def derivative(self, x):
        """phi'(x) = det / (c x + d)^2."""
        return self.det / (self.c * x + self.d) ** 2

    def fixed_point(self, dps: int = 40) -> float:
        """Attracting fixed point in [0, 1] of the contraction.

        Solves ``c z^2 + (d - a) z - b = 0`` with the cancellation-free form of
        the quadratic formula, evaluated in ``dps`` decimal digits.
        """
        a, b, c, d = self.a, self.b, self.c, self.d
        with mpmath.workdps(dps):
            a, b, c, d = (mpmath.mpf(Fraction(v).numerator) / Fraction(v).denominator for v in (a, b, c, d))
            s = d - a
            if c == 0:
                # affine: z = b / (d - a)
                return float(b / s)
            disc = mpmath.sqrt(s * s + 4 * b * c)
            z = 2 * b / (s + disc) if s >= 0 else (-s + disc) / (2 * c)
            return float(z)

    def convergent(self) -> Fraction:
        """For a Gauss word the image of 0, i.e. the continued-fraction convergent."""
        return Fraction(self.b) / Fraction(self.d)


# ---------------------------------------------------------------------------
# branch maps


class BranchMap:
    """Countable-branch expanding map whose inverse branches are Moebius.

    Subclasses provide :meth:`branch` returning the exact matrix of the
    inverse branch for digit ``n`` (1-based) and the branch count.
    """

    name = "generic"
    declared_expansion: tuple | None = None  # (l, Lambda) stated for the map

    def __init__(self, digit_cut: int = DEFAULT_DIGIT_CUT):
        self.digit_cut = int(digit_cut)

    # interface ------------------------------------------------------------
    @property
    def n_branches(self) -> float:
        raise NotImplementedError

    def branch(self, n: int) -> MoebiusMatrix:
        raise NotImplementedError

    @property
    def key(self) -> tuple:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    # derived --------------------------------------------------------------
    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        return isinstance(other, BranchMap) and self.key == other.key

    def __repr__(self):
        return f"{type(self).__name__}({self.to_json()})"

    def check_digit(self, n: int) -> int:
        n = int(n)
        if n < 1 or n > self.n_branches:
            raise InvalidDigitError(f"digit {n} outside 1..{self.n_branches}")
        return n

    def digits(self, cut: int | None = None) -> np.ndarray:
        cut = self.digit_cut if cut is None else cut
        return np.arange(1, int(min(cut, self.n_branches)) + 1)

    def coeffs(self, digits) -> tuple:
        """Float arrays (a, b, c, d) of the inverse-branch matrices."""
        digits = np.atleast_1d(np.asarray(digits, dtype=np.int64))
        mats = [self.branch(int(n)) for n in digits]
        return tuple(np.array([float(getattr(m, f)) for m in mats]) for f in "abcd")

    def interval(self, n: int) -> tuple:
        """Closure of the branch interval I_n as floats (lo, hi)."""
        lo, hi = self.branch(self.check_digit(n)).endpoints()
        return float(lo), float(hi)

    def inverse_branch(self, n, x):
        """T_n^{-1}(x); vectorised over ``x``."""
        if np.any(np.asarray(n) < 1):
            raise InvalidDigitError(f"digit must be >= 1, got {n}")
        x = np.asarray(x, dtype=float)
        if np.any((x < 0) | (x > 1)):
            raise DomainError("inverse branches act on [0, 1]")
        a, b, c, d = self.coeffs(n)
        if a.size == 1:
            a, b, c, d = a[0], b[0], c[0], d[0]
        return (a * x + b) / (c * x + d)

    def digit(self, x: float) -> int:
        """Branch containing ``x``; shared endpoints go to the lower index."""
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"x = {x} outside [0, 1]")
        for n in self.digits(self.n_branches if math.isfinite(self.n_branches) else self.digit_cut):
            lo, hi = self.interval(n)
            if lo <= x <= hi:
                return int(n)
        raise DomainError(f"x = {x} not in any branch with digit <= cut")

    def apply(self, x: float, n: int | None = None) -> float:
        """T(x), using branch ``n`` when given (needed at shared endpoints)."""
        n = self.digit(x) if n is None else self.check_digit(n)
        m = self.branch(n)
        a, b, c, d = (float(v) for v in (m.a, m.b, m.c, m.d))
        return (d * x - b) / (a - c * x)

    def deriv(self, x, n: int | None = None):
        """|T'(x)| on branch ``n``: |det| / (a - c x)^2."""
        n = self.digit(float(x)) if n is None else n
        a, b, c, d = self.coeffs(n)
        val = np.abs(a * d - b * c) / (a - c * np.asarray(x, float)) ** 2
        return val[0] if np.ndim(x) == 0 else val

    def second_deriv(self, x, n: int | None = None):
        """Signed T''(x) on branch ``n``: 2 c det / (a - c x)^3."""
        n = self.digit(float(x)) if n is None else n
        a, b, c, d = self.coeffs(n)
        val = 2 * c * (a * d - b * c) / (a - c * np.asarray(x, float)) ** 3
        return val[0] if np.ndim(x) == 0 else val

    def log_deriv_on_branch(self, digits, y) -> np.ndarray:
        """log|T'(y)| for points ``y`` known to lie in the branches ``digits``."""
        a, b, c, d = self.coeffs(digits)
        return np.log(np.abs(a * d - b * c)) - 2.0 * np.log(np.abs(a - c * y))

    def lengths(self, digits) -> np.ndarray:
        a, b, c, d = self.coeffs(digits)
        return np.abs(b / d - (a + b) / (c + d))

    def length_family(self) -> "LengthFamily | None":
        """Analytic description of |I_n| used for tail bounds (countable maps)."""
        return None

    def affine(self) -> bool:
        return False


class GaussMap(BranchMap):
    """T(x) = 1/x mod 1 with inverse branches 1/(x+n)."""

    name = "gauss"
    declared_expansion = (2, 9.0 / 4.0)

    @property
    def n_branches(self):
        return math.inf

    def branch(self, n: int) -> MoebiusMatrix:
        return MoebiusMatrix.gauss_digit(n)

    def coeffs(self, digits):
        digits = np.atleast_1d(np.asarray(digits, dtype=float))
        if np.any(digits < 1):
            raise InvalidDigitError("digits must be >= 1")
        one = np.ones_like(digits)
        return 0.0 * one, one, one, digits

    @property
    def key(self):
        return ("gauss", self.digit_cut)

    def to_json(self):
        return {"type": "gauss", "digit_cut": self.digit_cut}

    def digit(self, x: float) -> int:
        if not 0.0 < x <= 1.0:
            raise DomainError(f"Gauss digit undefined at x = {x}")
        if isinstance(x, Fraction):
            q = 1 / x
            n = math.ceil(q) - 1
        else:
            q = 1.0 / x
            n = math.ceil(q) - 1
        return max(1, int(n))

    def length_family(self):
        return LengthFamily.gauss()


class MoebiusBranchMap(BranchMap):
    """Finite map given by an explicit list of Moebius inverse-branch matrices."""

    name = "moebius"

    def __init__(self, branches: Sequence, digit_cut: int | None = None):
        mats = []
        for m in branches:
            if isinstance(m, MoebiusMatrix):
                mats.append(m)
            else:
                (a, b), (c, d) = m
                mats.append(MoebiusMatrix(Fraction(a), Fraction(b), Fraction(c), Fraction(d)))
        if len(mats) < 1:
            raise UnsupportedMapError("need at least one branch")
        for k, m in enumerate(mats):
            if m.det == 0:
                raise UnsupportedMapError(f"branch {k + 1} is singular")
            for x in (Fraction(0), Fraction(1)):
                if m.c * x + m.d == 0:
                    raise UnsupportedMapError(f"branch {k + 1} has a pole in [0, 1]")
            lo, hi = m.endpoints()
            if lo < 0 or hi > 1:
                raise UnsupportedMapError(f"branch {k + 1} does not map into [0, 1]")
        ivs = sorted(m.endpoints() for m in mats)
        for (l0, h0), (l1, h1) in zip(ivs, ivs[1:]):
            if l1 < h0:
                raise UnsupportedMapError("branch intervals overlap")
        self._mats = tuple(mats)
        super().__init__(len(mats) if digit_cut is None else digit_cut)

    @property
    def n_branches(self):
        return len(self._mats)

    def branch(self, n):
        return self._mats[self.check_digit(n) - 1]

    def coeffs(self, digits):
        digits = np.atleast_1d(np.asarray(digits, dtype=np.int64))
        if np.any(digits < 1) or np.any(digits > self.n_branches):
            raise InvalidDigitError("digit outside branch range")
        tab = np.array([[float(getattr(m, f)) for f in "abcd"] for m in self._mats])
        rows = tab[digits - 1]
        return rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3]

    @property
    def key(self):
        return ("moebius", tuple((m.a, m.b, m.c, m.d) for m in self._mats), self.digit_cut)

    def to_json(self):
        return {
            "type": "moebius",
            "branches": [[[str(m.a), str(m.b)], [str(m.c), str(m.d)]] for m in self._mats],
            "digit_cut": self.digit_cut,
        }

    def affine(self):
        return all(m.c == 0 for m in self._mats)


class AffineBranchMap(MoebiusBranchMap):
    """Full-branch piecewise-affine map from a list of interval lengths.

    Branch ``n`` has length ``lengths[n-1]``; intervals are laid out from the
    right end of [0, 1] leftwards, as for the Gauss map. ``orientation`` is
    +1 (increasing branches) or -1.
    """

    name = "affine"

    def __init__(self, lengths: Sequence, orientation: int = 1, digit_cut: int | None = None):
        ls = [Fraction(v).limit_denominator(10**15) if isinstance(v, float) else Fraction(v) for v in lengths]
        if any(v <= 0 for v in ls) or sum(ls) > 1:
            raise UnsupportedMapError("lengths must be positive with sum <= 1")
        mats, hi = [], Fraction(1)
        for v in ls:
            lo = hi - v
            if orientation > 0:
                mats.append(MoebiusMatrix(v, lo, Fraction(0), Fraction(1)))
            else:
                mats.append(MoebiusMatrix(-v, hi, Fraction(0), Fraction(1)))
            hi = lo
        self._lengths = tuple(ls)
        self._orientation = 1 if orientation > 0 else -1
        super().__init__(mats, digit_cut)

    def to_json(self):
        return {
            "type": "affine",
            "branches": [str(v) for v in self._lengths],
            "orientation": self._orientation,
            "digit_cut": self.digit_cut,
        }


class FamilyAffineMap(BranchMap):
    """Countable full-branch affine map with |I_n| from a :class:`LengthFamily`.

    Intervals are laid out from x = 1 leftwards; the family must have total
    length at most 1.
    """

    name = "affine_family"

    def __init__(self, family: "LengthFamily", digit_cut: int = DEFAULT_DIGIT_CUT):
        self.family = family
        super().__init__(digit_cut)

    @property
    def n_branches(self):
        return math.inf

    def _right_ends(self, digits):
        top = int(np.max(digits))
        cum = np.concatenate([[0.0], np.cumsum(self.family(np.arange(1, top + 1)))])
        return 1.0 - cum[np.asarray(digits) - 1]

    def coeffs(self, digits):
        digits = np.atleast_1d(np.asarray(digits, dtype=np.int64))
        if np.any(digits < 1):
            raise InvalidDigitError("digits must be >= 1")
        ell = self.family(digits)
        hi = self._right_ends(digits)
        one = np.ones(digits.size)
        return ell, hi - ell, 0.0 * one, one

    def branch(self, n):
        a, b, c, d = (float(v[0]) for v in self.coeffs([self.check_digit(n)]))
        return MoebiusMatrix(Fraction(a), Fraction(b), Fraction(0), Fraction(1))

    @property
    def key(self):
        return ("affine_family", self.family, self.digit_cut)

    def to_json(self):
        return {"type": "affine_family", "family": self.family.name, "digit_cut": self.digit_cut}

    def length_family(self):
        return self.family

    def affine(self):
        return True


GAUSS = GaussMap()


def load_map(spec) -> BranchMap:
    """Build a map from a JSON document (dict, JSON string or file path)."""
    if isinstance(spec, BranchMap):
        return spec
    if isinstance(spec, str):
        s = spec.strip()
        if s.startswith("{"):
            spec = json.loads(s)
        elif s == "gauss":
            spec = {"type": "gauss"}
        else:
            with open(s) as fh:
                spec = json.load(fh)
    kind = spec.get("type")
    cut = spec.get("digit_cut")
    if kind == "gauss":
        return GaussMap(DEFAULT_DIGIT_CUT if cut is None else cut)
    if kind == "moebius":
        return MoebiusBranchMap(
            [[[Fraction(v) for v in row] for row in m] for m in spec["branches"]], cut
        )
    if kind == "affine_family":
        fam = {"log_squared": LengthFamily.log_squared, "gauss": LengthFamily.gauss}[spec["family"]]()
        return FamilyAffineMap(fam, DEFAULT_DIGIT_CUT if cut is None else cut)
    if kind == "affine":
        return AffineBranchMap(
            [Fraction(v) for v in spec["branches"]], spec.get("orientation", 1), cut
        )
    raise UnsupportedMapError(f"unknown or unsupported map type {kind!r}")


# ---------------------------------------------------------------------------
# words: exact and vectorised


def word_matrix(w, tmap: BranchMap = GAUSS) -> MoebiusMatrix:
    """Exact composition T_{w1}^{-1} o ... o T_{wn}^{-1}."""
    w = Word.parse(w)
    m = MoebiusMatrix.identity()
    for n in w:
        m = m @ tmap.branch(tmap.check_digit(n))
    return m


def cylinder_interval(w, tmap: BranchMap = GAUSS, exact: bool = False) -> tuple:
    """Closure of the cylinder I_w.

    Exact rational endpoints are rounded outward to floats unless ``exact``.
    """
    lo, hi = word_matrix(w, tmap).endpoints()
    if exact:
        return lo, hi
    return _round_down(lo), _round_up(hi)


def _round_down(q: Fraction) -> float:
    f = float(q)
    return f if Fraction(f) <= q else math.nextafter(f, -math.inf)


def _round_up(q: Fraction) -> float:
    f = float(q)
    return f if Fraction(f) >= q else math.nextafter(f, math.inf)


def periodic_point(w, tmap: BranchMap = GAUSS) -> float:
    """The unique point z in I_w with T^{|w|} z = z, i.e. Pi(w^infinity)."""
    return word_matrix(w, tmap).fixed_point()


def coding_map(prefix, depth: int | None = None, tmap: BranchMap = GAUSS) -> tuple:
    """Representative point of ``prefix`` and enclosure width.

    Returns ``Pi(prefix^infinity)`` and ``|I_v|`` where ``v`` is the
    length-``depth`` prefix of the periodic sequence (default: the prefix
    itself). Every infinite extension of ``v`` codes a point of I_v.
    """
    w = Word.parse(prefix)
    v = w if depth is None else w.repeat_to(int(depth))
    lo, hi = cylinder_interval(v, tmap, exact=True)
    return periodic_point(w, tmap), float(hi - lo)


def derivative_along_orbit(w, z: float, tmap: BranchMap = GAUSS, tol: float = 1e-12) -> float:
    """|(T^n)'(z)| for z in I_w, following the branches named by ``w``."""
    w = Word.parse(w)
    lo, hi = cylinder_interval(w, tmap)
    if not lo - tol <= z <= hi + tol:
        raise DomainError(f"z = {z} is outside I_{w} = [{lo}, {hi}]")
    # |(T^n)'(z)| = |det| / (a - c z)^2 for the composed inverse branch; a - c z
    # cancels near periodic points, so it is formed exactly from the float z
    m = word_matrix(w, tmap)
    q = Fraction(z) if isinstance(z, float) else z
    return float(abs(Fraction(m.det)) / (Fraction(m.a) - Fraction(m.c) * q) ** 2)


@dataclass
class WordTable:
    """All words of one length over a digit set, with composed matrices.

    ``index[i]`` holds positions into ``digits`` (0-based), so
    ``digits[index[i]]`` is the i-th word. Rows are in lexicographic order.
    """

    digits: np.ndarray
    index: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    dets: np.ndarray | None = None  # product of branch determinants; avoids ad - bc cancellation

    @property
    def length(self) -> int:
        return self.index.shape[1]

    def __len__(self):
        return self.a.size

    @property
    def det(self):
        if self.dets is not None:
            return self.dets
        return self.a * self.d - self.b * self.c

    def periodic_points(self) -> np.ndarray:
        a, b, c, d = self.a, self.b, self.c, self.d
        s = d - a
        disc = np.sqrt(s * s + 4.0 * b * c)
        with np.errstate(divide="ignore", invalid="ignore"):
            quad = np.where(s >= 0, 2.0 * b / (s + disc), (-s + disc) / (2.0 * c))
            lin = b / s
        return np.where(c == 0, lin, quad)

    def endpoints(self) -> tuple:
        """(phi_w(0), phi_w(1)) unsorted."""
        return self.b / self.d, (self.a + self.b) / (self.c + self.d)

    def widths(self) -> np.ndarray:
        e0, e1 = self.endpoints()
        return np.abs(e1 - e0)

    def log_deriv_n(self, z: np.ndarray | None = None) -> np.ndarray:
        """log|(T^n)'(z_w)| at the periodic points."""
        z = self.periodic_points() if z is None else z
        return 2.0 * np.log(np.abs(self.c * z + self.d)) - np.log(np.abs(self.det))

    def first_digits(self) -> np.ndarray:
        return self.digits[self.index[:, 0]]

    def counts(self) -> np.ndarray:
        k = self.digits.size
        out = np.zeros((len(self), k), dtype=np.int16)
        for j in range(self.length):
            np.add.at(out, (np.arange(len(self)), self.index[:, j]), 1)
        return out

    def words(self) -> list:
        return [Word(tuple(int(v) for v in self.digits[row])) for row in self.index]


def _extend(parent: WordTable, da, db, dc, dd) -> tuple:
    k = da.size
    A = np.repeat(parent.a, k)
    B = np.repeat(parent.b, k)
    C = np.repeat(parent.c, k)
    D = np.repeat(parent.d, k)
    ta, tb, tc, td = (np.tile(v, len(parent)) for v in (da, db, dc, dd))
    return A * ta + B * tc, A * tb + B * td, C * ta + D * tc, C * tb + D * td


CACHE_WORDS = 1 << 21


def word_table(tmap: BranchMap, digits, n: int) -> WordTable:
    """All ``len(digits)**n`` words of length ``n`` (lexicographic order)."""
    digits = tuple(int(v) for v in np.atleast_1d(digits))
    if len(digits) ** n <= CACHE_WORDS:
        return _word_table_cached(tmap, digits, int(n))
    return _word_table(tmap, digits, int(n))


@functools.lru_cache(maxsize=32)
def _word_table_cached(tmap, digits, n):
    return _word_table(tmap, digits, n)


def _word_table(tmap, digits, n):
    if n < 1:
        raise ValueError("word length must be >= 1")
    dig = np.asarray(digits, dtype=np.int64)
    da, db, dc, dd = tmap.coeffs(dig)
    k = dig.size
    dtype = np.uint8 if k < 256 else np.uint16
    ddet = da * dd - db * dc
    if n == 1:
        return WordTable(dig, np.arange(k, dtype=dtype)[:, None], da, db, dc, dd, ddet)
    parent = word_table(tmap, digits, n - 1)
    a, b, c, d = _extend(parent, da, db, dc, dd)
    idx = np.empty((len(parent) * k, n), dtype=dtype)
    idx[:, :-1] = np.repeat(parent.index, k, axis=0)
    idx[:, -1] = np.tile(np.arange(k, dtype=dtype), len(parent))
    dets = np.repeat(parent.det, k) * np.tile(ddet, len(parent))
    return WordTable(dig, idx, a, b, c, d, dets)


def iter_word_chunks(tmap: BranchMap, digits, n: int, chunk: int = 1 << 20):
    """Yield :class:`WordTable` blocks covering all words of length ``n``.

    Blocks are consecutive in lexicographic order, so reductions over them
    reproduce the single-table order.
    """
    digits = tuple(int(v) for v in np.atleast_1d(digits))
    k = len(digits)
    if n == 1 or k ** n <= chunk:
        yield word_table(tmap, digits, n)
        return
    # split on a prefix length whose children fit in a chunk
    j = n - 1
    while j > 1 and k ** (n - j) <= chunk // k:
        j -= 1
    parent = word_table(tmap, digits, j)
    rest = n - j
    tail = word_table(tmap, digits, rest)
    per = max(1, chunk // len(tail))
    for s in range(0, len(parent), per):
        sl = slice(s, s + per)
        p = WordTable(parent.digits, parent.index[sl], parent.a[sl], parent.b[sl], parent.c[sl], parent.d[sl])
        a, b, c, d = _extend(p, tail.a, tail.b, tail.c, tail.d)
        idx = np.empty((len(p) * len(tail), n), dtype=parent.index.dtype)
        idx[:, :j] = np.repeat(p.index, len(tail), axis=0)
        idx[:, j:] = np.tile(tail.index, (len(p), 1))
        dets = np.repeat(parent.det[sl], len(tail)) * np.tile(tail.det, len(p))
        yield WordTable(parent.digits, idx, a, b, c, d, dets)


# ---------------------------------------------------------------------------
# distortion and map conditions


def log_deriv_variation(tmap: BranchMap, depth: int = 6, cut: int | None = 20, digits=None,
                        budget: int = 1 << 20) -> np.ndarray:
    """var_n(log|T'|) = sup over length-n cylinders of the oscillation.

    On each Moebius branch log|T'| is monotone, so the oscillation over a
    cylinder is the difference at its two endpoints. At depth n only the
    first ``budget**(1/n)`` digits are enumerated; for the Gauss map the
    largest cylinders, which carry the supremum, use the smallest digits.
    """
    dig = tmap.digits(cut) if digits is None else np.sort(np.asarray(digits))
    out = []
    for n in range(1, depth + 1):
        k = max(1, min(dig.size, int(math.floor(budget ** (1.0 / n) + 1e-9))))
        tab = word_table(tmap, dig[:k], n)
        e0, e1 = tab.endpoints()
        first = tab.first_digits()
        v = np.abs(tmap.log_deriv_on_branch(first, e0) - tmap.log_deriv_on_branch(first, e1))
        out.append(v.max())
    return np.array(out)


def log_deriv_holder(tmap: BranchMap = GAUSS, depth: int = 6, cut: int | None = 20, digits=None,
                     alpha: float = ALPHA) -> float:
    """[log|T'|]_alpha = sup_n var_n(log|T'|) / alpha^n over the probed depths."""
    var = log_deriv_variation(tmap, depth, cut, digits)
    return float(np.max(var / alpha ** np.arange(1, depth + 1)))


def distortion_constant(tmap: BranchMap = GAUSS, alpha: float = ALPHA, **kw) -> float:
    """C = exp([log|T'|]_alpha / (1 - alpha))."""
    return math.exp(log_deriv_holder(tmap, alpha=alpha, **kw) / (1 - alpha))


def renyi_constant(tmap: BranchMap = GAUSS, cut: int | None = None, digits=None, probes: int = 0) -> float:
    """sup over branches of |T''(x)| / (|T'(y)| |T'(z)|) with x, y, z in I_n.

    For Moebius branches |T'| and |T''| are monotone on each interval, so the
    supremum is attained at endpoint combinations. ``probes`` adds interior
    sample points as a sanity check.
    """
    if not isinstance(tmap, BranchMap):
        raise UnsupportedMapError("Renyi constant needs a C^2 branch map")
    dig = tmap.digits(cut) if digits is None else np.asarray(digits)
    a, b, c, d = tmap.coeffs(dig)
    e0, e1 = b / d, (a + b) / (c + d)
    pts = [e0, e1] + [e0 + (e1 - e0) * s for s in np.linspace(0, 1, probes + 2)[1:-1]]
    det = np.abs(a * d - b * c)
    t1 = np.array([det / (a - c * y) ** 2 for y in pts])
    t2 = np.array([np.abs(2 * c * det / (a - c * y) ** 3) for y in pts])
    ratio = t2.max(axis=0) / t1.min(axis=0) ** 2
    return float(ratio.max())


def expansion_constant(tmap: BranchMap = GAUSS, l_max: int = 3, cut: int | None = 20) -> tuple:
    """Smallest l with inf |(T^l)'| > 1 over cylinders, and that infimum.

    |(T^l)'| on I_w equals (c y + d)^2 / |det| for y in [0, 1], so the infimum
    is attained at y = 0 or y = 1.
    """
    dig = tmap.digits(cut)
    lam = 1.0
    for l in range(1, l_max + 1):
        tab = word_table(tmap, dig, l)
        det = np.abs(tab.det)
        lam = float(np.minimum(tab.d ** 2, (tab.c + tab.d) ** 2).__truediv__(det).min())
        if lam > 1.0 + 1e-12:
            return l, lam
    return None, lam


def nonlinearity_theta(tmap: BranchMap = GAUSS) -> float:
    """|log T'(z1) T'(z2) / (T'(z12) T'(z21))| from four periodic points."""
    if tmap.n_branches < 2:
        raise UnsupportedMapError("need at least two branches")
    with mpmath.workdps(40):
        def logd(w, first):
            m = word_matrix(w, tmap)
            z = _fixed_point_mp(m)
            br = tmap.branch(first)
            a, b, c, d = (mpmath.mpf(Fraction(v).numerator) / Fraction(v).denominator for v in (br.a, br.b, br.c, br.d))
            return mpmath.log(abs(a * d - b * c)) - 2 * mpmath.log(abs(a - c * z))

        val = logd("1", 1) + logd("2", 2) - logd("12", 1) - logd("21", 2)
        # below the working precision the cross-ratio is exactly 1
        return 0.0 if abs(val) < mpmath.mpf(10) ** -30 else float(abs(val))


def _fixed_point_mp(m: MoebiusMatrix):
    a, b, c, d = (mpmath.mpf(Fraction(v).numerator) / Fraction(v).denominator for v in (m.a, m.b, m.c, m.d))
    s = d - a
    if c == 0:
        return b / s
    disc = mpmath.sqrt(s * s + 4 * b * c)
    return 2 * b / (s + disc) if s >= 0 else (-s + disc) / (2 * c)


# ---------------------------------------------------------------------------
# interval-length families


def _log_squared_total(N: int = 1000) -> float:
    """sum_{m>=2} 1/(m log^2 m) by a partial sum plus an Euler-Maclaurin tail.

    The series converges like 1/log N, too slowly for extrapolating summation.
    The tail is int_N^inf g = 1/log N plus g(N)/2 - g'(N)/12 + g^(3)(N)/720.
    """
    with mpmath.workdps(30):
        g = lambda x: 1 / (x * mpmath.log(x) ** 2)
        head = mpmath.fsum(g(mpmath.mpf(m)) for m in range(2, N))
        tail = 1 / mpmath.log(N) + g(N) / 2 - mpmath.diff(g, N) / 12 + mpmath.diff(g, N, 3) / 720
        return float(head + tail)


@dataclass(frozen=True)
class LengthFamily:
    """Interval lengths |I_n| = scale * shape(n) for n >= 1.

    ``tail(s, N)`` returns an upper bound for sum_{n>N} |I_n|^s (``inf`` when
    the series diverges) and ``tail_lower(s, N)`` a lower bound.
    """

    name: str
    kind: str
    param: float = 0.0
    scale: float = 1.0

    @classmethod
    def gauss(cls):
        return cls("gauss", "gauss")

    @classmethod
    def power(cls, exponent: float):
        z = float(mpmath.zeta(exponent))
        return cls(f"power{exponent:g}", "power", float(exponent), 1.0 / z)

    @classmethod
    def log_squared(cls):
        """|I_n| = c0 / ((n+1) log^2(n+1)), normalised to total length 1."""
        return cls("log_squared", "log_squared", 0.0, 1.0 / _log_squared_total())

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        if self.kind == "gauss":
            return 1.0 / (n * (n + 1.0))
        if self.kind == "power":
            return self.scale * n ** (-self.param)
        return self.scale / ((n + 1.0) * np.log(n + 1.0) ** 2)

    def log(self, n):
        n = np.asarray(n, dtype=float)
        if self.kind == "gauss":
            return -np.log(n) - np.log1p(n)
        if self.kind == "power":
            return math.log(self.scale) - self.param * np.log(n)
        return math.log(self.scale) - np.log1p(n) - 2.0 * np.log(np.log1p(n))

    def log_at_exp(self, u):
        """log |I_x| at x = exp(u), stable when exp(u) overflows."""
        u = np.asarray(u, dtype=float)
        l1 = np.logaddexp(0.0, u)  # log(1 + x)
        if self.kind == "gauss":
            return -u - l1
        if self.kind == "power":
            return math.log(self.scale) - self.param * u
        return math.log(self.scale) - l1 - 2.0 * np.log(l1)

    def tail(self, s: float, N: int) -> float:
        """Upper bound on sum_{n>N} |I_n|^s via the integral test."""
        if self.kind == "gauss":
            # |I_n| <= n^-2
            return math.inf if 2 * s <= 1 else N ** (1 - 2 * s) / (2 * s - 1)
        if self.kind == "power":
            e = self.param * s
            return math.inf if e <= 1 else self.scale ** s * N ** (1 - e) / (e - 1)
        if s < 1:
            return math.inf
        if s == 1:
            return self.scale / math.log(N + 1)
        # (n+1)^-s log^-2s(n+1) <= (n+1)^-s; integral of x^-s from N+1
        return self.scale ** s * (N + 1) ** (1 - s) / ((s - 1) * math.log(N + 1) ** (2 * s))

    def tail_lower(self, s: float, N: int, upto: float = math.inf) -> float:
        """Lower bound on sum_{N<n<=upto} |I_n|^s via the integral test."""
        f = lambda x: float(np.exp(s * self.log(x)))
        if self.kind == "log_squared" and s <= 1 and upto == math.inf:
            return math.inf
        if self.kind == "gauss" and 2 * s <= 1 and upto == math.inf:
            return math.inf
        if self.kind == "power" and self.param * s <= 1 and upto == math.inf:
            return math.inf
        top = upto if upto != math.inf else mpmath.inf
        return float(mpmath.quad(lambda x: f(float(x)), [N + 1, top]))


def sum_condition(family: LengthFamily, s_grid=None, N: int = 10**4) -> dict:
    """Smallest s on a grid with sum |I_n|^s finite, with tail estimates.

    Divergence is detected by the integral lower bound; growth of partial sums
    at 10^2 ... 10^6 is reported alongside.
    """
    s_grid = np.round(np.arange(0.01, 1.5001, 0.01), 10) if s_grid is None else np.asarray(s_grid)
    rows = []
    for s in s_grid:
        tail = family.tail(float(s), N)
        rows.append((float(s), tail))
    finite = [s for s, tail in rows if math.isfinite(tail)]
    s_min = min(finite) if finite else None
    # partial-sum growth at the probe exponent (0.99 when no s < 1 works)
    s_probe = s_min if s_min is not None and s_min < 1 else 0.99
    partial = {}
    for e in range(2, 7):
        n = np.arange(1, 10**e + 1)
        partial[f"1e{e}"] = float(np.exp(s_probe * family.log(n)).sum())
    return {"s": s_min, "passes": s_min is not None and s_min < 1.0, "grid": rows, "partial_sums": partial}


def check_conditions(tmap: BranchMap = GAUSS, cut: int = 20) -> dict:
    """Report on the four structural conditions for an expanding map.

    Conditions: (1) some iterate uniformly expanding, (2) Renyi bound,
    (3) summable interval lengths for some s < 1, (4) nonzero nonlinearity.
    """
    l_meas, lam_meas = expansion_constant(tmap, cut=cut)
    l1_lam = expansion_constant(tmap, l_max=1, cut=cut)[1]
    decl = tmap.declared_expansion
    if decl is not None:
        l, lam = decl
        exp_pass = l_meas is not None and l_meas <= l and lam_meas >= lam - 1e-12
    else:
        l, lam = l_meas, lam_meas
        exp_pass = l_meas is not None
    kr = renyi_constant(tmap, cut=cut)
    fam = tmap.length_family()
    if fam is None:
        # finite alphabet: every s > 0 gives a finite sum
        cond3 = {"s": 0.01, "passes": True, "tail": 0.0}
    else:
        sc = sum_condition(fam)
        s = sc["s"]
        tail_s = 0.51 if fam.kind == "gauss" else s
        cond3 = {
            "s": tail_s,
            "passes": sc["passes"],
            "tail": fam.tail(tail_s, 10**4) if tail_s is not None else math.inf,
            "partial_sums": sc["partial_sums"],
        }
    th = nonlinearity_theta(tmap) if tmap.n_branches >= 2 else 0.0
    return {
        "map": tmap.to_json(),
        "expansion": {"l": l, "Lambda": lam, "measured_l": l_meas, "measured_inf": lam_meas,
                      "l1_inf": l1_lam, "l1_passes": l1_lam > 1.0, "passes": bool(exp_pass)},
        "renyi": {"kappa_R": kr, "passes": math.isfinite(kr)},
        "decay": cond3,
        "theta": {"theta": th, "passes": th > 1e-12},
    }
