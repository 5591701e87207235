"""Sheet-tracked analytic continuation of p(q) and path integrals of p dq and
dq / (dH/dp) along piecewise-linear paths in the complex q-plane."""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    ExpansionFailure,
    NotAdjacent,
    PathThroughSingularity,
    SheetCollision,
    TimeSingularity,
)
from .polyalg import BivariatePolynomial, ComplexPoly, SeriesExpansion, hensel_series

log = logging.getLogger(__name__)

SAFETY_FACTOR = 10.0
CLEARANCE = 1e-6

# Gauss-Kronrod 7-15 nodes/weights on [-1, 1]
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss weights aligned with GK_NODES (Gauss nodes are the odd-indexed Kronrod nodes)
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[[1, 3, 5]] = _WG[:3]
G_WEIGHTS[7] = _WG[3]
G_WEIGHTS[[9, 11, 13]] = _WG[:3][::-1]


# ---------------------------------------------------------------------------
# fast numeric view of a curve
# ---------------------------------------------------------------------------


class CurveEval:
    """Vectorised evaluation of F, dF/dp and dF/dq for all sheets at once."""

    def __init__(self, F: BivariatePolynomial):
        self.F = F
        self.g = F.grid()
        self.d = F.degree_p
        nq = self.g.shape[1]
        self.jq = np.arange(nq)
        self.gp = (self.g * np.arange(self.d + 1)[:, None])[1:]
        self.gq = (self.g * self.jq[None, :])[:, 1:] if nq > 1 else np.zeros((self.d + 1, 1))

    def coeffs(self, q):
        return self.g @ (q ** self.jq)

    def all(self, P, q):
        """F, F_p, F_q at the sheet values P (array) and point q."""
        qp = q ** self.jq
        c = self.g @ qp
        cp = self.gp @ qp
        cq = self.gq @ qp[: self.gq.shape[1]] if self.gq.shape[1] else np.zeros(self.d + 1)
        # Horner on all three at once; np.polyval is slow for short arrays
        P = np.asarray(P)
        f = np.full(P.shape, c[-1], dtype=complex)
        fq = np.full(P.shape, cq[-1], dtype=complex)
        fp = np.full(P.shape, cp[-1], dtype=complex) if len(cp) else np.zeros(P.shape, dtype=complex)
        for k in range(self.d - 1, -1, -1):
            f = f * P + c[k]
            fq = fq * P + cq[k]
            if k < len(cp) - 1:
                fp = fp * P + cp[k]
        return f, fp, fq

    def all_many(self, P, q):
        """Like ``all`` for a stack of points: P has shape (K, d), q shape (K,)."""
        qp = np.asarray(q)[:, None] ** self.jq[None, :]
        c = qp @ self.g.T
        cp = qp @ self.gp.T
        cq = qp[:, : self.gq.shape[1]] @ self.gq.T if self.gq.shape[1] else np.zeros((len(q), self.d + 1))
        f = np.repeat(c[:, -1:], P.shape[1], axis=1).astype(complex)
        fq = np.repeat(cq[:, -1:], P.shape[1], axis=1).astype(complex)
        fp = np.repeat(cp[:, -1:], P.shape[1], axis=1).astype(complex)
        for k in range(self.d - 1, -1, -1):
            f = f * P + c[:, k : k + 1]
            fq = fq * P + cq[:, k : k + 1]
            if k < cp.shape[1] - 1:
                fp = fp * P + cp[:, k : k + 1]
        return f, fp, fq

    def newton_many(self, P, q, iters: int = 8):
        P = np.array(P, dtype=complex)
        for _ in range(iters):
            f, fp, _ = self.all_many(P, q)
            with np.errstate(divide="ignore", invalid="ignore"):
                dP = np.where(fp != 0, f / fp, 0)
            P = P - dP
            if np.all(np.abs(dP) <= 1e-15 * (1 + np.abs(P))):
                break
        return P

    def roots(self, q) -> np.ndarray:
        c = self.coeffs(q)
        if abs(c[-1]) == 0:
            raise PathThroughSingularity(f"leading p coefficient vanishes at q={q}")
        r = np.roots(c[::-1])
        return self.newton(r, q)

    def newton(self, P, q, iters: int = 8):
        P = np.array(P, dtype=complex)
        for _ in range(iters):
            f, fp, _ = self.all(P, q)
            with np.errstate(divide="ignore", invalid="ignore"):
                dP = np.where(fp != 0, f / fp, 0)
            P = P - dP
            if np.all(np.abs(dP) <= 1e-15 * (1 + np.abs(P))):
                break
        return P


@lru_cache(maxsize=64)
def curve_eval(F: BivariatePolynomial) -> CurveEval:
    return CurveEval(F)


def sort_sheets(P: np.ndarray) -> np.ndarray:
    """Indices sorting sheet values lexicographically by (Re, Im).

    Real parts are compared after rounding to a relative 1e-9 grid so that
    conjugate or mirror pairs with numerically equal real parts sort stably.
    """
    scale = 1 + float(np.max(np.abs(P))) if len(P) else 1.0
    key_r = np.round(P.real / (1e-9 * scale))
    key_i = P.imag
    return np.lexsort((key_i, key_r))


# ---------------------------------------------------------------------------
# tracking
# ---------------------------------------------------------------------------


def _min_pairwise(P: np.ndarray) -> float:
    if len(P) < 2:
        return math.inf
    D = np.abs(P[:, None] - P[None, :])
    np.fill_diagonal(D, np.inf)
    return float(D.min())


def _step(ce: CurveEval, P: np.ndarray, q0: complex, q1: complex):
    """Predictor-corrector move of all sheets from q0 to q1.

    Returns the new values or None if the step fails the safety test.
    """
    f, fp, fq = ce.all(P, q0)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = -fq / fp
    if not np.all(np.isfinite(slope)):
        return None
    pred = P + slope * (q1 - q0)
    Pn = pred.copy()
    ok = False
    for _ in range(10):
        f, fp, _ = ce.all(Pn, q1)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = f / fp
        if not np.all(np.isfinite(d)):
            return None
        Pn = Pn - d
        if np.all(np.abs(d) <= 1e-14 * (1 + np.abs(Pn))):
            ok = True
            break
    if not ok:
        return None
    sep = _min_pairwise(P)
    if np.max(np.abs(Pn - P)) >= sep / SAFETY_FACTOR:
        return None
    if _min_pairwise(Pn) < 1e-300:
        return None
    # the corrected values must stay nearest to their own predictors
    if len(P) > 1:
        D = np.abs(Pn[:, None] - pred[None, :])
        if np.any(np.argmin(D, axis=1) != np.arange(len(P))):
            return None
    return Pn


def track_segment(
    ce: CurveEval,
    P0: np.ndarray,
    z0: complex,
    z1: complex,
    h0: float = 0.05,
    hmin: float = 1e-13,
    record: bool = False,
):
    """Continue all sheet values P0 from z0 to z1 along the straight segment.

    Returns (P1, knots) where knots is a list of (s, P) when ``record``.
    """
    s = 0.0
    P = np.array(P0, dtype=complex)
    h = h0
    knots = [(0.0, P.copy())] if record else None
    L = z1 - z0
    while s < 1.0:
        h = min(h, 1.0 - s)
        q0 = z0 + s * L
        q1 = z0 + (s + h) * L if s + h < 1.0 else z1
        Pn = _step(ce, P, q0, q1)
        if Pn is None:
            h *= 0.5
            if h * abs(L) < hmin * (1 + abs(q0)):
                raise SheetCollision(
                    f"continuation stalled near q={q0}: sheets cannot be separated"
                )
            continue
        s = s + h if s + h < 1.0 else 1.0
        P = Pn
        if record:
            knots.append((s, P.copy()))
        h *= 1.6
    return P, knots


def _newton_at(ce: CurveEval, guess: np.ndarray, q: complex) -> np.ndarray:
    return ce.newton(guess, q)


def _gk_interval(ce, z0, L, sa, sb, Pa, want_time):
    """GK15 on s in [sa, sb] of p*L and L/F_p for all sheets.

    Node values are obtained by Newton from the first-order predictor at sa.
    """
    mid = 0.5 * (sa + sb)
    half = 0.5 * (sb - sa)
    qa = z0 + sa * L
    f, fp, fq = ce.all(Pa, qa)
    slope = -fq / fp
    qs = z0 + (mid + half * GK_NODES) * L
    acts = ce.newton_many(Pa[None, :] + slope[None, :] * (qs - qa)[:, None], qs)
    times = np.zeros((15, len(Pa)), dtype=complex)
    if want_time:
        _, fpk, _ = ce.all_many(acts, qs)
        if np.any(np.abs(fpk) < 1e-300):
            k = int(np.argmin(np.min(np.abs(fpk), axis=1)))
            raise TimeSingularity(f"dH/dp vanishes on the path at q={qs[k]}")
        times = 1.0 / fpk
    scale = half * L
    ia = scale * (GK_WEIGHTS @ acts)
    ga = scale * (G_WEIGHTS @ acts)
    it = scale * (GK_WEIGHTS @ times)
    gt = scale * (G_WEIGHTS @ times)
    return ia, it, np.abs(ia - ga), np.abs(it - gt)


def _integrate_step(ce, z0, L, sa, sb, Pa, Pb, tol, want_time, depth=0):
    ia, it, ea, et = _gk_interval(ce, z0, L, sa, sb, Pa, want_time)
    ok_a = np.all(ea <= max(tol * np.max(np.abs(ia)), 1e-15 * abs(L) * (sb - sa)))
    ok_t = (not want_time) or np.all(et <= max(tol * np.max(np.abs(it)), 1e-15))
    if (ok_a and ok_t) or depth >= 12:
        return ia, it, float(np.max(ea)), float(np.max(et)) if want_time else 0.0
    sm = 0.5 * (sa + sb)
    qa = z0 + sa * L
    qm = z0 + sm * L
    Pm, _ = track_segment(ce, Pa, qa, qm, h0=1.0)
    a1 = _integrate_step(ce, z0, L, sa, sm, Pa, Pm, tol, want_time, depth + 1)
    a2 = _integrate_step(ce, z0, L, sm, sb, Pm, Pb, tol, want_time, depth + 1)
    return a1[0] + a2[0], a1[1] + a2[1], a1[2] + a2[2], a1[3] + a2[3]


def integrate_segment(ce, P0, z0, z1, tol=1e-10, want_time=True):
    """Track P0 along [z0, z1] and integrate p dq and dq/F_p on every sheet."""
    P1, knots = track_segment(ce, P0, z0, z1, record=True)
    L = z1 - z0
    act = np.zeros(len(P0), dtype=complex)
    tim = np.zeros(len(P0), dtype=complex)
    ea = et = 0.0
    for (sa, Pa), (sb, Pb) in zip(knots[:-1], knots[1:]):
        a, t, e1, e2 = _integrate_step(ce, z0, L, sa, sb, Pa, Pb, tol, want_time)
        act += a
        tim += t
        ea += e1
        et += e2
    return P1, act, tim, ea, et


# ---------------------------------------------------------------------------
# public types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSpec:
    """Piecewise-linear path through ``waypoints``.

    ``start_sheet`` is either an index into the (Re, Im)-sorted sheet values
    at waypoints[0], or a complex number selecting the nearest sheet value.
    When ``closed`` is set the path returns to waypoints[0].
    """

    waypoints: tuple
    start_sheet: int | complex = 0
    closed: bool = False

    def __init__(self, waypoints, start_sheet=0, closed=False):
        wp = tuple(complex(z) for z in waypoints)
        for a, b in zip(wp[:-1], wp[1:]):
            if a == b:
                raise ValueError("consecutive waypoints must be distinct")
        object.__setattr__(self, "waypoints", wp)
        object.__setattr__(self, "start_sheet", start_sheet)
        object.__setattr__(self, "closed", bool(closed))

    def vertices(self) -> list[complex]:
        v = list(self.waypoints)
        if self.closed and v[-1] != v[0]:
            v.append(v[0])
        return v

    def reversed(self) -> "PathSpec":
        return PathSpec(self.vertices()[::-1], self.start_sheet, False)


@dataclass(frozen=True)
class ContinuationResult:
    end_sheet: int
    action: complex
    time: complex
    error_estimate: float
    start_value: complex = 0j
    end_value: complex = 0j
    end_values: tuple = ()
    permutation: tuple = ()


def singular_points(F: BivariatePolynomial) -> np.ndarray:
    from .curve import discriminant_points

    pts = discriminant_points(F)
    return np.array([z for z, _ in pts], dtype=complex)


def _spread(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 1.0
    return max(1.0, float(np.max(np.abs(pts[:, None] - pts[None, :]))))


def _seg_distance(a, b, z):
    d = b - a
    t = ((z - a) * np.conj(d)).real / (abs(d) ** 2)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(a + t * d - z)


def check_clearance(F: BivariatePolynomial, vertices: Sequence[complex], sing=None):
    if sing is None:
        sing = singular_points(F)
    if len(sing) == 0:
        return
    clr = CLEARANCE * _spread(sing)
    for a, b in zip(vertices[:-1], vertices[1:]):
        dist = _seg_distance(a, b, sing)
        if np.min(dist) < clr:
            z = sing[int(np.argmin(dist))]
            raise PathThroughSingularity(
                f"path segment {a}->{b} passes within {clr:g} of singular point {z}"
            )


def select_sheet(P: np.ndarray, start_sheet) -> int:
    order = sort_sheets(P)
    if isinstance(start_sheet, (int, np.integer)):
        return int(order[int(start_sheet)])
    return int(np.argmin(np.abs(P - complex(start_sheet))))


def label_of(P: np.ndarray, idx: int) -> int:
    order = sort_sheets(P)
    return int(np.nonzero(order == idx)[0][0])


def continue_along(
    F: BivariatePolynomial,
    path: PathSpec,
    tol: float = 1e-10,
    want_time: bool = True,
    integrate: bool = True,
    check: bool = True,
) -> ContinuationResult:
    """Continue p along ``path`` and integrate p dq and dq/F_p on the tracked sheet.

    The end sheet is reported in the sorted labeling at the final point; the
    full sheet permutation (sorted labels at start -> sorted labels at end)
    is returned as well.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ce = curve_eval(F)
    verts = path.vertices()
    if check:
        check_clearance(F, verts)
    P = ce.roots(verts[0])
    k = select_sheet(P, path.start_sheet)
    start_order = sort_sheets(P)
    P_start = P.copy()
    act = np.zeros(len(P), dtype=complex)
    tim = np.zeros(len(P), dtype=complex)
    err = 0.0
    for a, b in zip(verts[:-1], verts[1:]):
        if integrate:
            P, da, dt, ea, et = integrate_segment(ce, P, a, b, tol, want_time)
            act += da
            tim += dt
            err += ea + et
        else:
            P, _ = track_segment(ce, P, a, b)
    end_order = sort_sheets(P)
    # permutation in sorted labels: label i at start -> label perm[i] at end
    inv_end = np.empty_like(end_order)
    inv_end[end_order] = np.arange(len(end_order))
    perm = tuple(int(inv_end[start_order[i]]) for i in range(len(P)))
    return ContinuationResult(
        end_sheet=int(inv_end[k]),
        action=complex(act[k]),
        time=complex(tim[k]),
        error_estimate=float(err),
        start_value=complex(P_start[k]),
        end_value=complex(P[k]),
        end_values=tuple(complex(x) for x in P),
        permutation=perm,
    )


def continue_all(F, vertices, P0=None, tol=1e-10, want_time=True):
    """Low-level: continue every sheet along a vertex list, integrating on all.

    Returns (P_end, actions, times, error) with arrays indexed like P0.
    """
    ce = curve_eval(F)
    P = ce.roots(vertices[0]) if P0 is None else np.array(P0, dtype=complex)
    act = np.zeros(len(P), dtype=complex)
    tim = np.zeros(len(P), dtype=complex)
    err = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        P, da, dt, ea, et = integrate_segment(ce, P, a, b, tol, want_time)
        act += da
        tim += dt
        err += ea + et
    return P, act, tim, err


def track_points(F, vertices, P0=None):
    """Sheet values at every vertex (continuation along the polygon)."""
    ce = curve_eval(F)
    P = ce.roots(vertices[0]) if P0 is None else np.array(P0, dtype=complex)
    out = [P.copy()]
    for a, b in zip(vertices[:-1], vertices[1:]):
        P, _ = track_segment(ce, P, a, b)
        out.append(P.copy())
    return np.array(out)


# ---------------------------------------------------------------------------
# shapes
# ---------------------------------------------------------------------------


def circle(center: complex, radius: float, n: int = 64, start_angle: float = 0.0, clockwise=False):
    sgn = -1.0 if clockwise else 1.0
    ang = start_angle + sgn * 2 * np.pi * np.arange(n + 1) / n
    v = list(center + radius * np.exp(1j * ang))
    v[-1] = v[0]
    return v


def rectangle(x0: float, x1: float, half_height: float, clockwise=True, n_side: int = 8):
    """Closed rectangle [x0, x1] x [-h, h] starting at its right edge midpoint."""
    h = half_height
    corners = [complex(x1, 0), complex(x1, h), complex(x0, h), complex(x0, -h), complex(x1, -h)]
    if clockwise:
        corners = [complex(x1, 0), complex(x1, -h), complex(x0, -h), complex(x0, h), complex(x1, h)]
    v = []
    for a, b in zip(corners, corners[1:] + [corners[0]]):
        for t in np.arange(n_side) / n_side:
            v.append(a + t * (b - a))
    v.append(v[0])
    return v


def ellipse(a: complex, b: complex, width: float, n: int = 96, clockwise=False, start_angle=0.0):
    """Closed ellipse with foci-like ends beyond segment [a, b]."""
    c = 0.5 * (a + b)
    u = (b - a) / abs(b - a)
    ra = 0.5 * abs(b - a) + width
    rb = width
    sgn = -1.0 if clockwise else 1.0
    t = start_angle + sgn * 2 * np.pi * np.arange(n + 1) / n
    v = list(c + u * (ra * np.cos(t) + 1j * rb * np.sin(t)))
    v[-1] = v[0]
    return v


# ---------------------------------------------------------------------------
# segment integrals between turning points
# ---------------------------------------------------------------------------


def _real_branch_points(F):
    from .curve import discriminant_points

    return [z for z, _ in discriminant_points(F)]


def segment_action(
    F: BivariatePolynomial,
    q_a: complex,
    q_b: complex,
    branch_rule="real_positive",
    n_nodes: int = 48,
    want_time: bool = False,
    check_adjacent: bool = True,
):
    """Integral of p dq from turning point q_a to turning point q_b.

    The square-root endpoint behaviour is absorbed by q = m + h sin(theta).
    ``branch_rule`` chooses the sheet on the open segment among those that
    vanish-pair at both ends:

    * ``"real_positive"`` / ``"imag_positive"``: the member with positive
      real / imaginary part at the midpoint (well / barrier magnitudes);
    * ``"upper_lip"``: the value continued from the sheet with p = +i|p| on
      the real axis right of every branch point, travelling just above the
      real axis (the phase convention used for the residue-at-infinity
      relations);
    * a complex number: the sheet nearest that value at the midpoint.

    Returns the action, or (action, time) when ``want_time``.
    """
    q_a, q_b = complex(q_a), complex(q_b)
    ce = curve_eval(F)
    if check_adjacent:
        lo, hi = sorted([q_a.real, q_b.real])
        span = hi - lo
        for z in _real_branch_points(F):
            if abs(z.imag) < 1e-9 * (1 + abs(z)) and lo + 1e-9 * span < z.real < hi - 1e-9 * span:
                if abs(z - q_a) > 1e-9 * span and abs(z - q_b) > 1e-9 * span:
                    raise NotAdjacent(f"branch point {z} lies between {q_a} and {q_b}")
    m = 0.5 * (q_a + q_b)
    h = 0.5 * (q_b - q_a)
    Pm = ce.roots(m)
    k = _choose_segment_sheet(F, ce, Pm, m, q_a, q_b, branch_rule)
    x, w = _gauss_legendre(n_nodes)
    theta = 0.5 * np.pi * x
    wt = 0.5 * np.pi * w
    qs = m + h * np.sin(theta)
    vals = _track_to_nodes(ce, Pm, m, qs, k)
    jac = h * np.cos(theta)
    action = complex(np.sum(wt * vals * jac))
    if not want_time:
        return action
    fp = np.array([ce.all(np.array([v]), q)[1][0] for v, q in zip(vals, qs)])
    time = complex(np.sum(wt * jac / fp))
    return action, time


def segment_action_error(F, q_a, q_b, branch_rule="real_positive", n_nodes=48):
    """Difference between n and 2n node rules (quadrature error estimate)."""
    a1 = segment_action(F, q_a, q_b, branch_rule, n_nodes)
    a2 = segment_action(F, q_a, q_b, branch_rule, 2 * n_nodes)
    return a2, abs(a2 - a1)


@lru_cache(maxsize=8)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _track_to_nodes(ce, Pm, m, qs, k):
    """Values of sheet k at the nodes qs (sorted along the segment)."""
    vals = np.empty(len(qs), dtype=complex)
    order = np.argsort(np.abs(qs - m) * np.sign((qs - m).real + 1e-300))
    # walk outward from the midpoint in both directions
    s = ((qs - m) * np.conj(qs[-1] - qs[0])).real
    right = [i for i in np.argsort(s) if s[i] >= 0]
    left = [i for i in np.argsort(-s) if s[i] < 0]
    for chain in (right, left):
        P = Pm.copy()
        z = m
        for i in chain:
            P, _ = track_segment(ce, P, z, qs[i], h0=1.0)
            z = qs[i]
            vals[i] = P[k]
    return vals


def _choose_segment_sheet(F, ce, Pm, m, q_a, q_b, rule):
    # sheets that coalesce at both ends: track towards each end and look for
    # the pair that closes up
    cand = _vanishing_pair(ce, Pm, m, q_a) & _vanishing_pair(ce, Pm, m, q_b)
    cand = sorted(cand)
    if not cand:
        raise NotAdjacent(f"no sheet pair coalesces at both {q_a} and {q_b}")
    if isinstance(rule, complex) or isinstance(rule, (float, int)) and not isinstance(rule, bool):
        return min(cand, key=lambda i: abs(Pm[i] - complex(rule)))
    if rule == "real_positive":
        return max(cand, key=lambda i: Pm[i].real)
    if rule == "imag_positive":
        return max(cand, key=lambda i: Pm[i].imag)
    if rule == "upper_lip":
        target = _upper_lip_value(F, ce, m)
        return min(cand, key=lambda i: abs(Pm[i] - target))
    raise ValueError(f"unknown branch rule {rule!r}")


def _vanishing_pair(ce, Pm, m, q_end) -> set:
    """Sheet indices (in Pm's order) that coalesce when approaching q_end."""
    d = q_end - m
    P = Pm.copy()
    z = m
    for frac in (0.9, 0.99, 0.999):
        z1 = m + frac * d
        P, _ = track_segment(ce, P, z, z1, h0=1.0)
        z = z1
    D = np.abs(P[:, None] - P[None, :])
    np.fill_diagonal(D, np.inf)
    i, j = np.unravel_index(np.argmin(D), D.shape)
    # a square-root branch closes like sqrt(distance); demand clear separation
    others = np.delete(D[i], [i, j]) if len(P) > 2 else np.array([np.inf])
    if len(P) > 2 and not D[i, j] < 0.5 * np.min(others):
        return set()
    return {int(i), int(j)}


def _upper_lip_value(F, ce, m):
    """p at m continued from p = +i|p| right of all real branch points, above the axis."""
    pts = np.array(_real_branch_points(F))
    real_pts = pts[np.abs(pts.imag) < 1e-9 * (1 + np.abs(pts))].real
    xs = np.sort(real_pts)
    gaps = np.diff(xs)
    delta = 0.25 * (np.min(gaps) if len(gaps) else 1.0)
    nonreal = pts[np.abs(pts.imag) >= 1e-9 * (1 + np.abs(pts))]
    if len(nonreal):
        delta = min(delta, 0.5 * float(np.min(np.abs(nonreal.imag))))
    x_anchor = xs.max() + 1.0
    P = ce.roots(x_anchor)
    k = int(np.argmax(P.imag))
    verts = [complex(x_anchor), complex(x_anchor, delta), complex(m.real, delta), m]
    for a, b in zip(verts[:-1], verts[1:]):
        P, _ = track_segment(ce, P, a, b)
    return P[k]


# ---------------------------------------------------------------------------
# residue at infinity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InfinitySheet:
    """One unramified point at infinity: p = u(eta) / eta^k, eta = 1/q."""

    leading: complex
    exponent: int
    series: SeriesExpansion


def _newton_polygon_at_infinity(F: BivariatePolynomial):
    """Edges (slope k, points) of the upper hull governing p ~ c q^k, q -> oo."""
    pts = sorted({(i, j) for (i, j) in F.terms()})
    # for each candidate slope k the dominant terms maximise j + k i
    by_i = {}
    for i, j in pts:
        by_i[i] = max(by_i.get(i, -1), j)
    items = sorted(by_i.items())
    # upper convex hull over i
    hull = []
    for pt in items:
        while len(hull) >= 2:
            (i1, j1), (i2, j2) = hull[-2], hull[-1]
            if (j2 - j1) * (pt[0] - i1) <= (pt[1] - j1) * (i2 - i1):
                hull.pop()
            else:
                break
        hull.append(pt)
    edges = []
    for (i1, j1), (i2, j2) in zip(hull[:-1], hull[1:]):
        k = Fraction(j1 - j2, i2 - i1)
        on = [(i, j) for (i, j) in pts if Fraction(j) + k * i == j1 + k * i1]
        edges.append((k, on))
    return edges


def infinity_structure(F: BivariatePolynomial):
    """Describe the points at infinity from the Newton polygon in eta = 1/q.

    Returns a list of dicts {exponent k, leading c, ramification e, simple}.
    Points with non-integer slope are ramified (e = denominator of k).
    """
    out = []
    terms = F.terms()
    for k, on in _newton_polygon_at_infinity(F):
        e = k.denominator
        i0 = min(i for i, _ in on)
        i1 = max(i for i, _ in on)
        # edge polynomial in y = c^e, degree (i1 - i0)/e
        deg = (i1 - i0) // e
        coeff = np.zeros(deg + 1, dtype=complex)
        for i, j in on:
            coeff[(i - i0) // e] += complex(terms[(i, j)])
        ys = np.roots(coeff[::-1]) if deg > 0 else np.array([])
        ys_cl = []
        for y in ys:
            ys_cl.append(y)
        simple = all(
            min((abs(y - z) for z in ys if z is not y), default=np.inf) > 1e-8 * (1 + abs(y))
            for y in ys
        )
        for y in ys:
            c = y ** (1.0 / e) if e > 1 else y
            out.append({"exponent": k, "leading": complex(c), "ramification": e, "simple": simple})
    return out


def infinity_sheets(F: BivariatePolynomial, order: int = 8) -> list[InfinitySheet]:
    """Series of every unramified sheet at infinity (integer slopes, simple roots)."""
    sheets = []
    terms = F.terms()
    for k, on in _newton_polygon_at_infinity(F):
        if k.denominator != 1:
            raise ExpansionFailure(f"ramified point at infinity (slope {k})")
        kk = int(k)
        # G(u, eta) = eta^M F(u eta^-k, 1/eta), M = max(j + k i)
        M = max(j + kk * i for (i, j) in terms)
        dp = max(i for i, _ in terms)
        de = max(M - j - kk * i for (i, j) in terms)
        f = np.zeros((dp + 1, de + 1), dtype=complex)
        for (i, j), c in terms.items():
            f[i, M - j - kk * i] += complex(c)
        lead = [(i, f[i, 0]) for i in range(dp + 1) if f[i, 0] != 0]
        poly = np.zeros(dp + 1, dtype=complex)
        for i, c in lead:
            poly[i] = c
        nz = np.trim_zeros(poly, "f")
        shift = len(poly) - len(nz)
        u0s = np.roots(np.trim_zeros(poly, "b")[::-1]) if len(np.trim_zeros(poly, "b")) > 1 else []
        u0s = [u for u in u0s if abs(u) > 1e-12]
        for u0 in u0s:
            try:
                U = hensel_series(None, f, complex(u0), order + kk + 2)
            except ValueError as exc:
                raise ExpansionFailure(f"multiple root at infinity for slope {kk}") from exc
            s = SeriesExpansion("infinity", Fraction(1), tuple(complex(x) for x in U), order + kk + 2, start=-kk)
            sheets.append(InfinitySheet(complex(u0), kk, s))
    return sheets


def residue_at_infinity(F: BivariatePolynomial, sheet_selector=1j, order: int = 8) -> complex:
    """Integral of p dq once around the point at infinity (counterclockwise in eta).

    ``sheet_selector``: an int indexes the unramified sheets at infinity sorted
    by leading coefficient (Re, Im); a complex number picks the sheet whose
    leading coefficient (p ~ c q^k) is nearest to it.
    """
    sheets = infinity_sheets(F, order)
    if not sheets:
        raise ExpansionFailure("no unramified sheet at infinity")
    sheets = sorted(sheets, key=lambda s: (round(s.leading.real, 9), s.leading.imag))
    if isinstance(sheet_selector, (int, np.integer)):
        sh = sheets[int(sheet_selector)]
    else:
        sh = min(sheets, key=lambda s: abs(s.leading - complex(sheet_selector)))
    return sh.series.loop_integral()


def residue_at_infinity_quadrature(
    F: BivariatePolynomial, sheet_selector=1j, radius: float = 50.0, n: int = 512, tol=1e-12
) -> complex:
    """Same loop by sheet-tracked quadrature on the circle |q| = radius, clockwise in q."""
    ce = curve_eval(F)
    sheets = infinity_sheets(F)
    sheets = sorted(sheets, key=lambda s: (round(s.leading.real, 9), s.leading.imag))
    if isinstance(sheet_selector, (int, np.integer)):
        sh = sheets[int(sheet_selector)]
    else:
        sh = min(sheets, key=lambda s: abs(s.leading - complex(sheet_selector)))
    q0 = complex(radius)
    P = ce.roots(q0)
    guess = sh.leading * q0 ** sh.exponent
    k = int(np.argmin(np.abs(P - guess)))
    verts = circle(0j, radius, n, clockwise=True)
    _, act, _, _ = continue_all(F, verts, P, tol=tol, want_time=False)
    return complex(act[k])
