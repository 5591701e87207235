"""Independent reference computations used by the tests.

Nothing here imports the package's numerical core: actions come from
scipy quadrature of explicitly factored square roots, residues from
mpmath contour quadrature, and so on.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy import integrate, optimize


def poly_from_roots(roots):
    """Ascending coefficients of prod (q - r)."""
    c = np.array([1.0 + 0j])
    for r in roots:
        c = np.convolve(c, [-r, 1.0])
    return c


def V_factored(roots, q):
    return np.prod([q - r for r in roots], axis=0)


def well_action(roots, a, b, E=0.0):
    """2 * int_a^b sqrt(2 (E - V)) dq, V = prod (q - q_i)."""
    f = lambda q: math.sqrt(max(0.0, 2 * (E - float(np.real(V_factored(roots, q))))))  # noqa: E731
    val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)
    return 2 * val


def barrier_action(roots, a, b, E=0.0):
    """2 * int_a^b sqrt(2 (V - E)) dq (the modulus of S_beta)."""
    f = lambda q: math.sqrt(max(0.0, 2 * (float(np.real(V_factored(roots, q))) - E)))  # noqa: E731
    val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)
    return 2 * val


def real_turning_points(roots, E):
    c = poly_from_roots(roots)
    c[0] -= E
    r = np.roots(c[::-1])
    return sorted(float(x.real) for x in r if abs(x.imag) < 1e-9)


def infinity_loop(roots, R=60.0, dps=30):
    """|oint p dq| on |q| = R for p = i sqrt(2) q^(n/2) sqrt(prod (1 - q_i / q)).

    The inner square root stays near 1 on a large circle, so the principal
    branch is continuous; n even keeps q^(n/2) single valued.
    """
    n = len(roots)
    with mpmath.workdps(dps):
        rs = [mpmath.mpf(r) for r in roots]

        def f(t):
            q = R * mpmath.expj(t)
            prod = mpmath.mpf(1)
            for r in rs:
                prod *= 1 - r / q
            p = 1j * mpmath.sqrt(2) * q ** (n // 2) * mpmath.sqrt(prod)
            return p * 1j * q

        val = mpmath.quad(f, [0, mpmath.pi / 2, mpmath.pi, 3 * mpmath.pi / 2, 2 * mpmath.pi])
        return complex(val)


def sqrt_series(c, order):
    """Taylor coefficients of sqrt(-W) by mpmath.taylor, W with ascending c."""
    with mpmath.workdps(40):
        W = lambda x: sum(mpmath.mpc(ci) * x**k for k, ci in enumerate(c))  # noqa: E731
        s = mpmath.taylor(lambda x: mpmath.sqrt(-W(x)), 0, order)
        return [complex(x) for x in s]


# ---------------------------------------------------------------------------
# normal form: H is a function of u = p^2, so p^2 solves a quadratic
# ---------------------------------------------------------------------------


def nf_p2_roots(q, E):
    """Both roots u of H(u, q) = E for H = r/2 - r^2/2 - 2 x^2 u, r = u + x^2, x = 1 - q^2."""
    x2 = (1 - q * q) ** 2
    # -u^2/2 + u (1/2 - x^2 - 2 x^2) + (x^2/2 - x^4/2 - E) = 0
    a, b, c = -0.5, 0.5 - 3 * x2, 0.5 * x2 - 0.5 * x2 * x2 - E
    disc = b * b - 4 * a * c
    if disc < 0:
        return ()
    s = math.sqrt(disc)
    return tuple(sorted(((-b - s) / (2 * a), (-b + s) / (2 * a))))


def nf_branch_areas(E, q_lo=0.0, q_hi=1.6, n=4000):
    """Areas 2 int sqrt(u_k) dq of the two p^2 branches on q > 0.

    The small root bounds the inner oval and the large root the outer one,
    so these are the actions of the inner and outer real contours.
    Returns [(branch, lo, hi, area)].
    """
    qs = np.linspace(q_lo, q_hi, n)
    out = []
    for k in (0, 1):

        def u(q):
            r = nf_p2_roots(q, E)
            return r[k] if r else -1.0

        vals = np.array([u(q) for q in qs])
        pos = vals > 0
        i = 0
        while i < n:
            if not pos[i]:
                i += 1
                continue
            j = i
            while j + 1 < n and pos[j + 1]:
                j += 1
            lo = optimize.brentq(u, qs[i - 1], qs[i], xtol=1e-15) if i > 0 else qs[0]
            hi = optimize.brentq(u, qs[j], qs[j + 1], xtol=1e-15) if j < n - 1 else qs[-1]
            f = lambda q: math.sqrt(max(u(q), 0.0))  # noqa: E731
            val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=1e-14, epsrel=1e-13)
            out.append((k, lo, hi, 2 * val))
            i = j + 1
    return out


def ho_levels(hbar, n):
    return [hbar * (k + 0.5) for k in range(n)]


def two_level_trace_ratio(dE, T, hbar):
    """Closed form of the estimator for a two-level system: (2 hbar / T) tan(dE T / 2 hbar)."""
    return 2 * hbar / T * math.tan(dE * T / (2 * hbar))
