"""Hamiltonian matrices: fourth-order finite differences on a symmetric grid
(potential models) and Weyl-ordered polynomials in the Fock basis.

Both builders return the two parity blocks in symmetric lower-band storage,
``band[i, j] = A[j + i, j]``, in either double or mpmath precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from ..polyalg import BivariatePolynomial, ComplexPoly

# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

_FD4 = (Fraction(-30, 12), Fraction(16, 12), Fraction(-1, 12))


@dataclass(frozen=True)
class GridSpec:
    half_points: int
    half_width: float

    @property
    def h(self) -> float:
        return self.half_width / self.half_points

    def nodes(self) -> np.ndarray:
        """Right-half nodes (k + 1/2) h; the left half is their mirror image."""
        return (np.arange(self.half_points) + 0.5) * self.h


def grid_blocks(V: ComplexPoly, hbar, spec: GridSpec, mp: bool = False):
    """Even/odd parity blocks of -hbar^2/2 d^2/dq^2 + V on a mirror-symmetric grid.

    Returns (band_even, band_odd); in mp mode lists of mpf diagonals.
    """
    n = spec.half_points
    if mp:
        hb = mpmath.mpf(hbar)
        h = mpmath.mpf(spec.half_width) / n
        kin = hb * hb / (2 * h * h)
        c0, c1, c2 = (-kin * mpmath.mpf(c.numerator) / c.denominator for c in _FD4)
        vcoef = [mpmath.mpf(c.numerator) / c.denominator if isinstance(c, Fraction) else mpmath.mpf(c.real) for c in V.coeffs]
        qs = [(k + mpmath.mpf(1) / 2) * h for k in range(n)]
        diag = [c0 + mpmath.polyval(vcoef[::-1], q) for q in qs]
        sub1 = [c1] * (n - 1)
        sub2 = [c2] * (n - 2)
        out = []
        for sgn in (1, -1):
            d = list(diag)
            s1 = list(sub1)
            d[0] += sgn * c1
            s1[0] += sgn * c2
            out.append([d, s1, list(sub2)])
        return out
    h = spec.h
    kin = hbar * hbar / (2 * h * h)
    c0, c1, c2 = (-kin * float(c) for c in _FD4)
    qs = spec.nodes()
    v = V(qs).real
    out = []
    for sgn in (1, -1):
        band = np.zeros((3, n))
        band[0] = c0 + v
        band[1, : n - 1] = c1
        band[2, : n - 2] = c2
        band[0, 0] += sgn * c1
        band[1, 0] += sgn * c2
        out.append(band)
    return out


def grid_full_matrix(V: ComplexPoly, hbar, spec: GridSpec) -> np.ndarray:
    """Dense matrix on the full 2n-point grid (for checks of the parity split)."""
    n = spec.half_points
    h = spec.h
    q = (np.arange(2 * n) - n + 0.5) * h
    kin = hbar * hbar / (2 * h * h)
    A = np.diag(V(q).real - kin * float(_FD4[0]))
    for k, c in ((1, _FD4[1]), (2, _FD4[2])):
        off = -kin * float(c) * np.ones(2 * n - k)
        A += np.diag(off, k) + np.diag(off, -k)
    return A


def grid_parity_vectors(spec: GridSpec, block_vecs: np.ndarray, parity: int) -> np.ndarray:
    """Embed half-grid block eigenvectors into the full grid (orthonormal)."""
    right = block_vecs / math.sqrt(2)
    left = parity * right[::-1]
    return np.concatenate([left, right], axis=0)


# ---------------------------------------------------------------------------
# Weyl -> normal ordering
# ---------------------------------------------------------------------------


def _symbol_terms(H: BivariatePolynomial) -> dict:
    """{(l, m): c} for monomials q^l p^m."""
    return {(j, i): c for (i, j), c in H.terms().items()}


@lru_cache(maxsize=32)
def normal_symbol(H: BivariatePolynomial) -> dict:
    """Normal (coherent-state) symbol exp((hbar/4)(d_q^2 + d_p^2)) W of the Weyl symbol W = H.

    Returns {(l, m, k): c} meaning c * hbar^k q^l p^m, with exact rational c
    when H is exact.
    """
    cur = {(l, m, 0): c for (l, m), c in _symbol_terms(H).items()}
    out = dict(cur)
    k = 0
    while cur:
        k += 1
        nxt = {}
        for (l, m, _), c in cur.items():
            if l >= 2:
                key = (l - 2, m, k)
                nxt[key] = nxt.get(key, 0) + c * l * (l - 1)
            if m >= 2:
                key = (l, m - 2, k)
                nxt[key] = nxt.get(key, 0) + c * m * (m - 1)
        # (hbar/4)^k / k! accumulated: divide by 4 k each round
        nxt = {key: c / (4 * k) if isinstance(c, (int, Fraction)) else c / (4.0 * k) for key, c in nxt.items()}
        nxt = {key: c for key, c in nxt.items() if c != 0}
        for key, c in nxt.items():
            out[key] = out.get(key, 0) + c
        cur = nxt
    return {key: c for key, c in out.items() if c != 0}


@lru_cache(maxsize=32)
def _alpha_expansion(H: BivariatePolynomial) -> dict:
    """{(j, k, e, m, hk): r}: r * (-i)^m * (hbar/2)^(e/2) * hbar^hk multiplies a+^j a^k."""
    out = {}
    for (l, m, hk), c in normal_symbol(H).items():
        for a in range(l + 1):
            ca = math.comb(l, a)
            for b in range(m + 1):
                coef = c * ca * math.comb(m, b) * (-1) ** (m - b)
                k = a + b
                j = (l - a) + (m - b)
                key = (j, k, l + m, m, hk)
                out[key] = out.get(key, 0) + coef
    return {key: c for key, c in out.items() if c != 0}


def normal_ordered_coefficients(H: BivariatePolynomial, hbar, mp: bool = False) -> dict:
    """{(j, k): c_jk} with H_Weyl = sum c_jk a+^j a^k, q = sqrt(hbar/2)(a + a+),
    p = -i sqrt(hbar/2)(a - a+)."""
    out = {}
    if mp:
        hb = mpmath.mpf(hbar)
        half = hb / 2
        for (j, k, e, m, hk), r in _alpha_expansion(H).items():
            rv = mpmath.mpf(r.numerator) / r.denominator if isinstance(r, Fraction) else mpmath.mpc(r)
            val = rv * (mpmath.mpc(0, -1) ** m) * mpmath.sqrt(half) ** e * hb**hk
            out[(j, k)] = out.get((j, k), 0) + val
    else:
        half = hbar / 2
        for (j, k, e, m, hk), r in _alpha_expansion(H).items():
            val = complex(r) * ((-1j) ** m) * math.sqrt(half) ** e * hbar**hk
            out[(j, k)] = out.get((j, k), 0) + val
    return out


def _is_real(coeffs: dict, mp: bool) -> bool:
    return all(abs(mpmath.im(c) if mp else complex(c).imag) < (mpmath.mpf(10) ** (-mpmath.mp.dps + 5) if mp else 1e-15) * (1 + abs(c)) for c in coeffs.values())


def fock_matrix_dense(H: BivariatePolynomial, hbar: float, N: int) -> np.ndarray:
    """Full N x N Weyl-ordered matrix in the Fock basis (double precision)."""
    c = normal_ordered_coefficients(H, hbar)
    A = np.zeros((N, N), dtype=complex)
    sq = np.sqrt(np.arange(N + 64, dtype=float))
    for (j, k), cjk in c.items():
        for m in range(k, N):
            n = m - k + j
            if n >= N:
                continue
            val = 1.0
            for t in range(m - k + 1, m + 1):
                val *= sq[t]
            for t in range(m - k + 1, n + 1):
                val *= sq[t]
            A[n, m] += cjk * val
    return A


def fock_blocks(H: BivariatePolynomial, hbar, N: int, mp: bool = False):
    """Even/odd Fock-index parity blocks in lower-band storage.

    Block index r corresponds to Fock state n = 2r (+1 for the odd block).
    Returns (band_even, band_odd, is_real).
    """
    c = normal_ordered_coefficients(H, hbar, mp)
    real = _is_real(c, mp)
    maxoff = max((abs(j - k) for j, k in c), default=0)
    if any((j - k) % 2 for j, k in c):
        from ..errors import NonSymmetricModel

        raise NonSymmetricModel("Hamiltonian mixes Fock parities")
    bw = maxoff // 2
    blocks = []
    for par in (0, 1):
        nb = (N - par + 1) // 2
        if mp:
            zero = mpmath.mpf(0) if real else mpmath.mpc(0)
            band = [[zero] * (nb - i) for i in range(bw + 1)]
            sq = [mpmath.sqrt(t) for t in range(N + maxoff + 2)]
        else:
            band = np.zeros((bw + 1, nb), dtype=float if real else complex)
            sq = np.sqrt(np.arange(N + maxoff + 2, dtype=float))
        for (j, k), cjk in c.items():
            if j < k:
                continue  # lower triangle: row index n >= column index m
            cv = (mpmath.re(cjk) if real else cjk) if mp else (cjk.real if real else cjk)
            off = (j - k) // 2
            for r in range(nb - off):
                m = 2 * r + par
                if m < k:
                    continue
                n = m - k + j
                if n >= N:
                    continue
                val = 1
                for t in range(m - k + 1, m + 1):
                    val = val * sq[t]
                for t in range(m - k + 1, n + 1):
                    val = val * sq[t]
                if mp:
                    band[off][r] += cv * val
                else:
                    band[off, r] += cv * val
        blocks.append(band)
    return blocks[0], blocks[1], real


def band_to_dense(band) -> np.ndarray:
    b = np.asarray(band)
    nb = b.shape[1]
    A = np.zeros((nb, nb), dtype=b.dtype)
    for i in range(b.shape[0]):
        idx = np.arange(nb - i)
        A[idx + i, idx] = b[i, : nb - i]
        if i:
            A[idx, idx + i] = np.conj(b[i, : nb - i])
    return A


# ---------------------------------------------------------------------------
# symmetrised-product construction (independent check of the ordering)
# ---------------------------------------------------------------------------


def weyl_matrix_symmetrized(H: BivariatePolynomial, hbar: float, N: int, pad: int = 40) -> np.ndarray:
    """Weyl quantisation via W(q^l p^m) = 2^-l sum_k C(l,k) q^k p^m q^(l-k),
    with q and p truncated at N + pad and the result cut back to N."""
    M = N + pad
    n = np.arange(1, M)
    a = np.diag(np.sqrt(n), 1)
    ad = a.T
    s = math.sqrt(hbar / 2)
    qm = s * (a + ad)
    pm = -1j * s * (a - ad)
    A = np.zeros((M, M), dtype=complex)
    powq = [np.eye(M)]
    powp = [np.eye(M)]
    terms = _symbol_terms(H)
    lmax = max((l for l, _ in terms), default=0)
    mmax = max((m for _, m in terms), default=0)
    for _ in range(lmax):
        powq.append(powq[-1] @ qm)
    for _ in range(mmax):
        powp.append(powp[-1] @ pm)
    for (l, m), c in terms.items():
        acc = np.zeros((M, M), dtype=complex)
        for k in range(l + 1):
            acc += math.comb(l, k) * powq[k] @ powp[m] @ powq[l - k]
        A += complex(c) * acc / 2**l
    return A[:N, :N]
