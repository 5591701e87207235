"""Multiprecision Rayleigh-quotient refinement of single eigenpairs of
symmetric banded matrices (lower-band storage as lists of mp diagonals)."""

from __future__ import annotations

import threading

import mpmath

from ..errors import NonConvergence

# mpmath precision is process-global, so multiprecision work is serialised
MP_LOCK = threading.RLock()


def band_matvec(band, x):
    n = len(x)
    y = [band[0][i] * x[i] for i in range(n)]
    for k in range(1, len(band)):
        d = band[k]
        for j in range(n - k):
            v = d[j]
            if v:
                y[j + k] += v * x[j]
                y[j] += mpmath.conj(v) * x[j + k] if isinstance(v, mpmath.mpc) else v * x[j + k]
    return y


def _dot(a, b):
    return mpmath.fsum(x * y for x, y in zip(a, b))


def band_shift_solve(band, sigma, rhs):
    """Solve (A - sigma I) y = rhs by banded Gaussian elimination with partial pivoting."""
    n = len(rhs)
    b = len(band) - 1
    # sparse rows {column: value}; fill stays within 2b above the diagonal
    rows = []
    for i in range(n):
        r = {}
        for c in range(max(0, i - b), min(n, i + b + 1)):
            if c <= i:
                v = band[i - c][c]
            else:
                v = band[c - i][i]
                if isinstance(v, mpmath.mpc):
                    v = mpmath.conj(v)
            if c == i:
                v = v - sigma
            r[c] = v
        rows.append(r)
    y = list(rhs)
    tiny = mpmath.mpf(10) ** (-mpmath.mp.dps)
    for k in range(n):
        last = min(n, k + b + 1)
        best = max(range(k, last), key=lambda i: abs(rows[i].get(k, 0)))
        if best != k:
            rows[k], rows[best] = rows[best], rows[k]
            y[k], y[best] = y[best], y[k]
        rk = rows[k]
        piv = rk.get(k, 0)
        if piv == 0:
            piv = rk[k] = tiny
        tail = [(c, v) for c, v in rk.items() if c > k]
        for i in range(k + 1, last):
            ri = rows[i]
            f = ri.pop(k, 0)
            if not f:
                continue
            f = f / piv
            for c, v in tail:
                ri[c] = ri.get(c, 0) - f * v
            y[i] -= f * y[k]
    x = [mpmath.mpf(0)] * n
    for k in range(n - 1, -1, -1):
        rk = rows[k]
        acc = y[k]
        for c, v in rk.items():
            if c > k:
                acc -= v * x[c]
        x[k] = acc / rk[k]
    return x


def rayleigh_refine(band, x0, sigma0=None, dps: int = 50, max_iter: int = 12):
    """Refine an approximate eigenpair to about ``dps`` digits.

    Returns (eigenvalue, vector, residual_norm). Raises NonConvergence if the
    iteration drifts away from the starting vector.
    """
    with MP_LOCK, mpmath.workdps(dps):
        x = [mpmath.mpf(float(v)) for v in x0]
        nrm = mpmath.sqrt(_dot(x, x))
        x = [v / nrm for v in x]
        Ax = band_matvec(band, x)
        sigma = _dot(x, Ax) if sigma0 is None else mpmath.mpf(sigma0)
        x_start = list(x)
        tol = mpmath.mpf(10) ** (-(dps - 8))
        prev = None
        for it in range(max_iter):
            y = band_shift_solve(band, sigma, x)
            nrm = mpmath.sqrt(_dot(y, y))
            x = [v / nrm for v in y]
            Ax = band_matvec(band, x)
            sigma_new = _dot(x, Ax)
            res = mpmath.sqrt(mpmath.fsum((a - sigma_new * b) ** 2 for a, b in zip(Ax, x)))
            done = prev is not None and abs(sigma_new - sigma) <= tol * (1 + abs(sigma_new))
            prev = sigma
            sigma = sigma_new
            if done and res < mpmath.mpf(10) ** (-(dps // 2)):
                break
        else:
            raise NonConvergence("Rayleigh quotient iteration did not settle", residual=float(res))
        overlap = abs(_dot(x, x_start))
        if overlap < 0.5:
            raise NonConvergence(
                f"refined eigenvector drifted away from the start vector (overlap {float(overlap):.3g})"
            )
        return sigma, x, res
