"""Polynomial algebra: univariate and bivariate polynomials with exact or
complex coefficients, Aberth-Ehrlich root finding, Sylvester resultants and
series expansions of algebraic functions."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Iterable, Sequence

import numpy as np

from .errors import BranchAtOrigin, DegenerateInput, NonConvergence, NotABranchPoint

ABERTH_MAX_ITER = 500
CLUSTER_RADIUS = 1e-7

_EXACT_TYPES = (int, Fraction)


def _is_exact(c) -> bool:
    return isinstance(c, _EXACT_TYPES) and not isinstance(c, bool)


def _as_exact(c):
    """Convert a float/int that is exactly representable to Fraction, keep complex."""
    if _is_exact(c):
        return Fraction(c)
    return c


def _is_zero(c) -> bool:
    return c == 0


# ---------------------------------------------------------------------------
# univariate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexPoly:
    """Univariate polynomial, coefficients in ascending degree.

    Coefficients are kept exact (``Fraction``) when every input coefficient is
    an int or Fraction; any float or complex coefficient makes the whole
    polynomial numeric (complex).
    """

    coeffs: tuple

    def __init__(self, coeffs: Iterable):
        cs = list(coeffs)
        exact = all(_is_exact(c) for c in cs)
        if exact:
            cs = [Fraction(c) for c in cs]
        else:
            cs = [complex(c) for c in cs]
        while cs and _is_zero(cs[-1]):
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    # -- basic properties ---------------------------------------------------
    @property
    def degree(self) -> int:
        """Degree; the zero polynomial reports -1."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.coeffs)

    @property
    def leading(self):
        return self.coeffs[-1] if self.coeffs else 0

    def numeric(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs], dtype=complex)

    def __call__(self, z):
        c = self.numeric()
        if c.size == 0:
            return np.zeros_like(np.asarray(z, dtype=complex)) if np.ndim(z) else 0j
        return np.polyval(c[::-1], z)

    def eval_exact(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self) -> "ComplexPoly":
        return ComplexPoly([k * c for k, c in enumerate(self.coeffs)][1:])

    # -- arithmetic ---------------------------------------------------------
    @staticmethod
    def _coerce(other) -> "ComplexPoly":
        if isinstance(other, ComplexPoly):
            return other
        return ComplexPoly([other])

    def __add__(self, other):
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0] * (n - len(other.coeffs))
        return ComplexPoly([x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self):
        return ComplexPoly([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, ComplexPoly):
            return ComplexPoly([c * other for c in self.coeffs])
        if self.is_zero or other.is_zero:
            return ComplexPoly([])
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if _is_zero(a):
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return ComplexPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = ComplexPoly([1])
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def divmod(self, other: "ComplexPoly"):
        """Polynomial long division; returns (quotient, remainder)."""
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        lead = other.leading
        if len(rem) - 1 < dq:
            return ComplexPoly([]), self
        quot = [0] * (len(rem) - dq)
        for k in range(len(rem) - 1, dq - 1, -1):
            c = rem[k] / lead
            quot[k - dq] = c
            if _is_zero(c):
                continue
            for j, b in enumerate(other.coeffs):
                rem[k - dq + j] -= c * b
        return ComplexPoly(quot), ComplexPoly(rem[:dq])

    def exact_div(self, other: "ComplexPoly") -> "ComplexPoly":
        q, r = self.divmod(other)
        if not r.is_zero and self.is_exact and other.is_exact:
            raise ArithmeticError("division is not exact")
        return q

    def monic(self) -> "ComplexPoly":
        return ComplexPoly([c / self.leading for c in self.coeffs])

    @classmethod
    def from_roots(cls, roots: Sequence, lead=1) -> "ComplexPoly":
        out = cls([lead])
        for r in roots:
            out = out * cls([-r, 1])
        return out

    def scaled_argument(self, a, b=0) -> "ComplexPoly":
        """Return the polynomial z -> self(a*z + b)."""
        out = ComplexPoly([])
        lin = ComplexPoly([b, a])
        for c in reversed(self.coeffs):
            out = out * lin + c
        return out

    def __repr__(self):
        return f"ComplexPoly({list(self.coeffs)!r})"


def poly_gcd(a: ComplexPoly, b: ComplexPoly) -> ComplexPoly:
    """Monic gcd over the rationals (exact inputs only)."""
    if not (a.is_exact and b.is_exact):
        raise TypeError("poly_gcd requires exact coefficients")
    while not b.is_zero:
        a, b = b, a.divmod(b)[1]
    return a.monic() if not a.is_zero else a


def squarefree_decomposition(f: ComplexPoly) -> list[tuple[ComplexPoly, int]]:
    """Yun's algorithm over Q: f = lead * prod a_k^k with a_k squarefree, coprime."""
    if not f.is_exact:
        raise TypeError("squarefree_decomposition requires exact coefficients")
    if f.degree < 1:
        return []
    out = []
    fp = f.derivative()
    a = poly_gcd(f, fp)
    b = f.exact_div(a)
    c = fp.exact_div(a)
    d = c - b.derivative()
    k = 1
    while b.degree >= 1:
        a = poly_gcd(b, d)
        if a.degree >= 1:
            out.append((a, k))
        b = b.exact_div(a)
        c = d.exact_div(a)
        d = c - b.derivative()
        k += 1
    return out


# ---------------------------------------------------------------------------
# roots
# ---------------------------------------------------------------------------


def _aberth(c: np.ndarray, tol: float, max_iter: int = ABERTH_MAX_ITER) -> np.ndarray:
    """Simultaneous Aberth-Ehrlich iteration on ascending coefficients c."""
    n = len(c) - 1
    if n == 1:
        return np.array([-c[0] / c[1]])
    a = c[::-1] / c[-1]
    dc = np.polyder(a)
    # initial radius: geometric mean of the root moduli, bounded by Cauchy
    r0 = abs(c[0] / c[-1]) ** (1.0 / n) if c[0] != 0 else 0.0
    cauchy = 1 + np.max(np.abs(a[1:]))
    radius = r0 if r0 > 0 else 0.5 * cauchy
    radius = min(radius, cauchy)
    centre = -a[1] / n
    ang = 2 * np.pi * np.arange(n) / n + 0.4
    z = centre + radius * np.exp(1j * ang) * (1 + 0.01 * np.arange(n) / n)
    best = None
    for it in range(max_iter):
        pz = np.polyval(a, z)
        dpz = np.polyval(dc, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pz / dpz
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            w = ratio / (1 - ratio * inv.sum(axis=1))
        w = np.where(np.isfinite(w), w, 0.0)
        bad = ~np.isfinite(ratio)
        if bad.any():
            # exact hit of a critical point: nudge
            w[bad] = 1e-8 * (1 + np.abs(z[bad]))
        z = z - w
        step = np.max(np.abs(w) / (1 + np.abs(z)))
        if step < tol:
            return z
        if best is None or step < best[0]:
            best = (step, z.copy(), it)
        elif it - best[2] > 60 and best[0] < 1e-5:
            # stagnation at roundoff level (multiple roots); accept best iterate
            return best[1]
    res = np.max(np.abs(np.polyval(a, z)))
    raise NonConvergence(
        f"Aberth iteration did not converge in {max_iter} iterations", residual=float(res)
    )


def _polish(c: np.ndarray, z: np.ndarray, iters: int = 3) -> np.ndarray:
    a = c[::-1]
    da = np.polyder(a)
    for _ in range(iters):
        d = np.polyval(da, z)
        ok = np.abs(d) > 0
        step = np.zeros_like(z)
        step[ok] = np.polyval(a, z[ok]) / d[ok]
        z = z - step
    return z


def _cluster(z: np.ndarray, radius: float) -> list[tuple[complex, int]]:
    used = np.zeros(len(z), dtype=bool)
    out = []
    for i in range(len(z)):
        if used[i]:
            continue
        members = [i]
        used[i] = True
        grow = True
        while grow:
            grow = False
            for j in range(len(z)):
                if not used[j] and min(abs(z[j] - z[m]) for m in members) < radius:
                    members.append(j)
                    used[j] = True
                    grow = True
        out.append((complex(np.mean(z[members])), len(members)))
    return out


def root_clusters(poly: ComplexPoly, tol: float = 1e-12) -> list[tuple[complex, int]]:
    """Distinct roots with multiplicities.

    Exact polynomials are first split by a squarefree decomposition, so the
    multiplicities are exact; numeric polynomials are clustered with radius
    1e-7*(1 + max|root|).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if poly.is_zero:
        raise DegenerateInput("roots of the zero polynomial")
    if poly.degree < 1:
        raise ValueError("polynomial degree must be at least 1")
    if poly.is_exact:
        out = []
        for factor, mult in squarefree_decomposition(poly):
            c = factor.numeric()
            z = _polish(c, _aberth(c, tol))
            out.extend((complex(r), mult) for r in z)
        return _sorted_clusters(out)
    c = poly.numeric()
    # roots at the origin are split off exactly
    nzero = 0
    while c[nzero] == 0:
        nzero += 1
    c = c[nzero:]
    z = _aberth(c, tol) if len(c) > 1 else np.array([], dtype=complex)
    if len(z):
        z = _polish(c, z, 1)
    scale = 1 + (np.max(np.abs(z)) if len(z) else 0.0)
    out = _cluster(z, CLUSTER_RADIUS * scale)
    if nzero:
        out.append((0j, nzero))
    return _sorted_clusters(out)


def _sorted_clusters(cl):
    return sorted(cl, key=lambda rm: (round(rm[0].real, 12), round(rm[0].imag, 12)))


def roots(poly: ComplexPoly, tol: float = 1e-12) -> list[complex]:
    """All roots, each repeated according to its multiplicity.

    The result reconstructs ``poly`` to relative coefficient residual of order
    100*tol for well-conditioned inputs; failures raise NonConvergence.
    """
    out = []
    for r, m in root_clusters(poly, tol):
        out.extend([r] * m)
    return out


def reconstruction_residual(poly: ComplexPoly, rts: Sequence[complex]) -> float:
    """Relative coefficient residual of lead*prod(q - r) against poly."""
    c = poly.numeric()
    rec = complex(poly.leading) * np.poly(np.asarray(rts, dtype=complex))[::-1]
    return float(np.linalg.norm(rec - c) / np.linalg.norm(c))


# ---------------------------------------------------------------------------
# bivariate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BivariatePolynomial:
    """F(p, q) = sum_ij c[i][j] p^i q^j; rows indexed by the power of p."""

    rows: tuple  # tuple of ComplexPoly in q

    def __init__(self, grid):
        rows = []
        for r in grid:
            rows.append(r if isinstance(r, ComplexPoly) else ComplexPoly(r))
        exact = all(r.is_exact for r in rows)
        if not exact:
            rows = [ComplexPoly([complex(c) for c in r.coeffs]) for r in rows]
        while rows and rows[-1].is_zero:
            rows.pop()
        object.__setattr__(self, "rows", tuple(rows))

    # constructors ----------------------------------------------------------
    @classmethod
    def constant(cls, c) -> "BivariatePolynomial":
        return cls([[c]])

    @classmethod
    def var_p(cls) -> "BivariatePolynomial":
        return cls([[], [1]])

    @classmethod
    def var_q(cls) -> "BivariatePolynomial":
        return cls([[0, 1]])

    @classmethod
    def from_terms(cls, terms: dict) -> "BivariatePolynomial":
        """Build from {(i, j): coefficient} for monomials p^i q^j."""
        if not terms:
            return cls([])
        dp = max(i for i, _ in terms)
        dq = max(j for _, j in terms)
        grid = [[0] * (dq + 1) for _ in range(dp + 1)]
        for (i, j), c in terms.items():
            grid[i][j] += c
        return cls(grid)

    @classmethod
    def from_q_poly(cls, poly: ComplexPoly) -> "BivariatePolynomial":
        return cls([poly])

    # properties ------------------------------------------------------------
    @property
    def degree_p(self) -> int:
        return len(self.rows) - 1

    @property
    def degree_q(self) -> int:
        return max((r.degree for r in self.rows), default=-1)

    @property
    def is_zero(self) -> bool:
        return not self.rows

    @property
    def is_exact(self) -> bool:
        return all(r.is_exact for r in self.rows)

    @property
    def leading_p(self) -> ComplexPoly:
        """Coefficient of the highest power of p, a polynomial in q."""
        return self.rows[-1]

    def terms(self) -> dict:
        out = {}
        for i, r in enumerate(self.rows):
            for j, c in enumerate(r.coeffs):
                if c != 0:
                    out[(i, j)] = c
        return out

    def grid(self) -> np.ndarray:
        g = np.zeros((self.degree_p + 1, self.degree_q + 1), dtype=complex)
        for i, r in enumerate(self.rows):
            g[i, : len(r.coeffs)] = r.numeric()
        return g

    # evaluation ------------------------------------------------------------
    def p_coeffs(self, q) -> np.ndarray:
        """Ascending coefficients of F(., q) as a polynomial in p."""
        return np.array([r(q) for r in self.rows], dtype=complex)

    def __call__(self, p, q):
        out = 0
        for r in reversed(self.rows):
            out = out * p + r(q)
        return out

    def d_p(self) -> "BivariatePolynomial":
        return BivariatePolynomial([r * i for i, r in enumerate(self.rows)][1:])

    def d_q(self) -> "BivariatePolynomial":
        return BivariatePolynomial([r.derivative() for r in self.rows])

    def p_roots(self, q: complex, tol: float = 1e-13) -> np.ndarray:
        """All d sheet values p at fixed q (numeric)."""
        c = self.p_coeffs(q)
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        if len(c) <= 1:
            return np.array([], dtype=complex)
        if len(c) == 2:
            return np.array([-c[0] / c[1]])
        return _polish(c, _aberth(c, tol), 2)

    # arithmetic ------------------------------------------------------------
    @staticmethod
    def _coerce(other) -> "BivariatePolynomial":
        if isinstance(other, BivariatePolynomial):
            return other
        if isinstance(other, ComplexPoly):
            return BivariatePolynomial([other])
        return BivariatePolynomial.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        n = max(len(self.rows), len(other.rows))
        zero = ComplexPoly([])
        a = list(self.rows) + [zero] * (n - len(self.rows))
        b = list(other.rows) + [zero] * (n - len(other.rows))
        return BivariatePolynomial([x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self):
        return BivariatePolynomial([-r for r in self.rows])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, Number) and not isinstance(other, ComplexPoly):
            return BivariatePolynomial([r * other for r in self.rows])
        other = self._coerce(other)
        if self.is_zero or other.is_zero:
            return BivariatePolynomial([])
        out = [ComplexPoly([]) for _ in range(len(self.rows) + len(other.rows) - 1)]
        for i, a in enumerate(self.rows):
            for j, b in enumerate(other.rows):
                out[i + j] = out[i + j] + a * b
        return BivariatePolynomial(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = BivariatePolynomial.constant(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        return self.rows == self._coerce(other).rows

    def __hash__(self):
        return hash(self.rows)

    def swap_sign_symmetric(self) -> bool:
        """True if F(-p, -q) == F(p, q) exactly (coefficientwise)."""
        return all(c == 0 or (i + j) % 2 == 0 for (i, j), c in self.terms().items())

    def __repr__(self):
        return f"BivariatePolynomial({self.terms()!r})"


# ---------------------------------------------------------------------------
# resultant
# ---------------------------------------------------------------------------


def _sylvester_rows(F: BivariatePolynomial, G: BivariatePolynomial):
    m, n = F.degree_p, G.degree_p
    size = m + n
    zero = ComplexPoly([])
    M = [[zero] * size for _ in range(size)]
    for r in range(n):
        for i in range(m + 1):
            M[r][r + i] = F.rows[m - i]
    for r in range(m):
        for i in range(n + 1):
            M[n + r][r + i] = G.rows[n - i]
    return M


def _bareiss_det(M) -> ComplexPoly:
    """Fraction-free determinant of a matrix over Q[q]."""
    n = len(M)
    M = [row[:] for row in M]
    sign = 1
    prev = ComplexPoly([1])
    for k in range(n - 1):
        if M[k][k].is_zero:
            piv = next((i for i in range(k + 1, n) if not M[i][k].is_zero), None)
            if piv is None:
                return ComplexPoly([])
            M[k], M[piv] = M[piv], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]).exact_div(prev)
        prev = M[k][k]
    det = M[n - 1][n - 1]
    return det if sign > 0 else -det


def resultant_in_p(F: BivariatePolynomial, G: BivariatePolynomial) -> ComplexPoly:
    """Sylvester resultant Res_p(F, G) as a polynomial in q.

    Exact (Bareiss) when both inputs have rational coefficients, otherwise the
    resultant is sampled on a circle and interpolated.
    """
    if F.is_zero or G.is_zero:
        raise DegenerateInput("resultant of an identically zero polynomial")
    if F.degree_p < 1 or G.degree_p < 1:
        raise DegenerateInput("both polynomials need degree_p >= 1")
    M = _sylvester_rows(F, G)
    if F.is_exact and G.is_exact:
        return _bareiss_det(M)
    m, n = F.degree_p, G.degree_p
    bound = m * max(G.degree_q, 0) + n * max(F.degree_q, 0)
    npts = bound + 1
    # scale the circle to the coefficient growth to keep the DFT balanced
    radius = 1.0
    zs = radius * np.exp(2j * np.pi * np.arange(npts) / npts)
    vals = np.empty(npts, dtype=complex)
    for k, z in enumerate(zs):
        A = np.array([[e(z) if not e.is_zero else 0 for e in row] for row in M], dtype=complex)
        vals[k] = np.linalg.det(A)
    coeffs = np.fft.fft(vals) / npts
    coeffs = coeffs / radius ** np.arange(npts)
    # numeric noise trim
    tiny = 1e-13 * np.max(np.abs(coeffs))
    coeffs[np.abs(coeffs) < tiny] = 0
    return ComplexPoly(coeffs)


def discriminant_in_p(F: BivariatePolynomial) -> ComplexPoly:
    """Res_p(F, dF/dp); vanishes where two sheets meet or the leading p term drops."""
    return resultant_in_p(F, F.d_p())


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesExpansion:
    """p = sum_k coefficients[k] * t^(start + k), with t = (q - center)^(1/w).

    For ``center == "infinity"`` the local variable is eta = 1/q and
    t = eta^(1/w).
    """

    center: complex | str
    exponent_base: Fraction
    coefficients: tuple
    truncation_order: int
    start: int = 0

    @property
    def ramification(self) -> int:
        return self.exponent_base.denominator

    def exponents(self) -> list[Fraction]:
        return [(self.start + k) * self.exponent_base for k in range(len(self.coefficients))]

    def coefficient(self, exponent) -> complex:
        """Coefficient of (local variable)^exponent, 0 if absent."""
        n = Fraction(exponent) / self.exponent_base
        if n.denominator != 1:
            return 0j
        k = int(n) - self.start
        if 0 <= k < len(self.coefficients):
            return complex(self.coefficients[k])
        return 0j

    @property
    def has_negative_exponents(self) -> bool:
        return any(
            abs(c) > 0 and e < 0 for c, e in zip(self.coefficients, self.exponents())
        )

    @property
    def residue(self) -> complex:
        """Coefficient of the exponent -1 term; exactly 0 without negative terms."""
        if self.start >= 0:
            return 0j
        return self.coefficient(-1)

    def loop_integral(self) -> complex:
        """Integral of p dq once around the closed loop on the surface.

        Finite centre: the loop winds w times around q0 (counterclockwise).
        Infinity: one counterclockwise turn in eta, i.e. clockwise in q.
        """
        w = self.ramification
        if self.center == "infinity":
            # p dq = -p deta / eta^2: picks the eta^1 coefficient
            return -2j * math.pi * w * self.coefficient(1)
        return 2j * math.pi * w * self.residue

    def __call__(self, x):
        """Evaluate at the local variable value t (not at q)."""
        out = 0j
        for k, c in enumerate(self.coefficients):
            out += c * x ** (self.start + k)
        return out


def series_sqrt(poly_in_eta: ComplexPoly, order: int) -> SeriesExpansion:
    """Taylor coefficients C_0..C_order of sqrt(-W(eta)), W = poly_in_eta.

    The branch is the principal square root of -W(0).
    """
    c = list(poly_in_eta.coeffs)
    if not c or c[0] == 0:
        raise BranchAtOrigin("W(0) = 0: the square root is branched at the origin")
    a = [-complex(x) for x in c] + [0j] * max(0, order + 1 - len(c))
    s = [cmath.sqrt(a[0])]
    for n in range(1, order + 1):
        acc = a[n] - sum(s[k] * s[n - k] for k in range(1, n))
        s.append(acc / (2 * s[0]))
    return SeriesExpansion(0j, Fraction(1), tuple(s), order)


# power-series helpers (ascending numpy arrays truncated to length N)


def _ps_mul(a: np.ndarray, b: np.ndarray, N: int) -> np.ndarray:
    return np.convolve(a, b)[:N]


def _bivariate_taylor_shift(F: BivariatePolynomial, p0: complex, q0: complex) -> np.ndarray:
    """Coefficients f[i, j] of F(p0 + u, q0 + v) in u^i v^j."""
    g = F.grid()
    dp, dq = g.shape
    # shift in q for every row, then in p for every column
    out = np.zeros_like(g)
    for i in range(dp):
        out[i] = _shift_poly(g[i], q0)
    for j in range(dq):
        out[:, j] = _shift_poly(out[:, j], p0)
    return out


def _shift_poly(c: np.ndarray, x0: complex) -> np.ndarray:
    """Coefficients of c(x0 + u) in u (ascending)."""
    n = len(c)
    out = np.zeros(n, dtype=complex)
    binom = [math.comb(k, i) for k in range(n) for i in range(k + 1)]
    idx = 0
    for k in range(n):
        for i in range(k + 1):
            out[i] += c[k] * binom[idx] * x0 ** (k - i)
            idx += 1
    return out


def _compose(f: np.ndarray, U: np.ndarray, V: np.ndarray, N: int) -> np.ndarray:
    """sum f[i, j] U^i V^j truncated to N terms."""
    dp, dq = f.shape
    Upow = [np.eye(1, N, 0, dtype=complex)[0]]
    for _ in range(1, dp):
        Upow.append(_ps_mul(Upow[-1], U, N))
    Vpow = [np.eye(1, N, 0, dtype=complex)[0]]
    for _ in range(1, dq):
        Vpow.append(_ps_mul(Vpow[-1], V, N))
    out = np.zeros(N, dtype=complex)
    for i in range(dp):
        for j in range(dq):
            if f[i, j] != 0:
                out += f[i, j] * _ps_mul(Upow[i], Vpow[j], N)
    return out


def _square_root_branch_series(F, p0, q0, order):
    """Series p = p0 + sum a_n t^n, q = q0 + t^2 at a simple square-root branch."""
    f = _bivariate_taylor_shift(F, p0, q0)
    f20 = f[2, 0] if f.shape[0] > 2 else 0
    f01 = f[0, 1] if f.shape[1] > 1 else 0
    scale = max(1.0, float(np.max(np.abs(f))))
    if abs(f20) < 1e-10 * scale or abs(f01) < 1e-10 * scale:
        return None
    N = order + 2
    a = np.zeros(N, dtype=complex)
    a[1] = cmath.sqrt(-f01 / f20)
    V = np.zeros(N, dtype=complex)
    V[2] = 1
    lin = 2 * f20 * a[1]
    for n in range(2, order + 1):
        a[n] = 0
        resid = _compose(f, a, V, n + 2)[n + 1]
        a[n] = -resid / lin
    coeffs = [complex(p0)] + [complex(x) for x in a[1 : order + 1]]
    return SeriesExpansion(complex(q0), Fraction(1, 2), tuple(coeffs), order, start=0)


def puiseux_at_branch(
    F: BivariatePolynomial,
    q0: complex,
    order: int = 12,
    p0: complex | None = None,
    radius: float | None = None,
) -> SeriesExpansion:
    """Puiseux expansion of the sheet(s) permuted around the branch point q0.

    ``p0`` picks the cycle whose sheets meet nearest p0 (default: the first
    nontrivial cycle). Simple square-root branches are expanded algebraically
    order by order; other ramification types and poles fall back to a
    Fourier fit of continued sheet values on a circle of the given radius.
    """
    from .curve import local_cycles  # deferred: curve depends on this module

    cycles = local_cycles(F, q0, radius=radius)
    nontrivial = [c for c in cycles if len(c.sheets) > 1]
    if not nontrivial:
        raise NotABranchPoint(f"local monodromy at q0={q0} is trivial")
    if p0 is not None:
        cyc = min(nontrivial, key=lambda c: abs(c.centre_value - p0))
    else:
        cyc = nontrivial[0]
    w = len(cyc.sheets)
    if w == 2 and np.isfinite(cyc.centre_value):
        s = _square_root_branch_series(F, cyc.centre_value, q0, order)
        if s is not None:
            return s
    return _fourier_puiseux(cyc, q0, w, order)


def _fourier_puiseux(cyc, q0, w, order):
    t = cyc.t_samples
    vals = cyc.p_samples
    M = len(t)
    rho = abs(t[0])
    spec = np.fft.fft(vals) / M
    # spec[k] ~ c_k rho^k for k in [-M/2, M/2)
    ks = np.fft.fftfreq(M, d=1.0 / M).astype(int)
    coeff = {int(k): spec[i] / rho ** k for i, k in enumerate(ks)}
    neg = [k for k in coeff if k < 0 and abs(coeff[k]) * rho ** k > 1e-11 * np.max(np.abs(vals))]
    start = min(neg) if neg else 0
    cs = tuple(complex(coeff.get(k, 0)) for k in range(start, order + 1))
    if not neg:
        cs = tuple(complex(coeff[k]) for k in range(0, order + 1))
    return SeriesExpansion(complex(q0), Fraction(1, w), cs, order, start=start)


def hensel_series(G0: np.ndarray, f: np.ndarray, u0: complex, order: int) -> np.ndarray:
    """Lift a simple root u0 of sum_i f[i,0] u^i to a power series u(eta).

    ``f[i, j]`` are coefficients of u^i eta^j of G(u, eta); G0 is unused but
    kept for symmetry with the caller's bookkeeping.
    """
    N = order + 1
    dG = sum(i * f[i, 0] * u0 ** (i - 1) for i in range(1, f.shape[0]))
    if abs(dG) < 1e-14:
        raise ValueError("multiple root at the origin")
    U = np.zeros(N, dtype=complex)
    U[0] = u0
    V = np.zeros(N, dtype=complex)
    if N > 1:
        V[1] = 1
    for n in range(1, N):
        U[n] = 0
        r = _compose(f, U, V, n + 1)[n]
        U[n] = -r / dG
    return U
