"""Homology bases, action catalogs and path composition.

Loop conventions
----------------
* alpha / beta loops are closed thin loops around two adjacent branch points,
  oriented so that the action has positive real part (alpha) or positive
  imaginary part (beta).
* gamma_branch loops circle one branch point w times (closed on the surface);
  gamma_puncture loops are single turns around a point at infinity, clockwise
  in q (counterclockwise in eta = 1/q).
* For the multi-well models the alpha, beta and gamma_branch loops are
  lassos from a common base point just above the real axis, so that loops can
  be concatenated into one continuous path.
* S^(+inf) is the loop around infinity on the sheet where p ~ -i|p| as
  q -> -inf; S^(-inf) is the same loop on the opposite sheet.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .contour import (
    PathSpec,
    check_clearance,
    circle,
    continue_along,
    curve_eval,
    ellipse,
    residue_at_infinity,
    residue_at_infinity_quadrature,
    segment_action,
    singular_points,
    track_points,
    track_segment,
)
from .curve import cycles, topology
from .errors import (
    EnergyOutOfRange,
    PathThroughSingularity,
    TunnelSplitError,
    UnknownLoop,
    UnsupportedModel,
)
from .models import Model, _exact
from .polyalg import puiseux_at_branch, root_clusters

log = logging.getLogger(__name__)

LOOP_KINDS = ("alpha", "beta", "gamma_branch", "gamma_puncture")
RELATION_TOL = 1e-8
QUANT_TOL = 1e-6


@dataclass(frozen=True)
class LoopSpec:
    name: str
    path: PathSpec
    kind: str  # alpha | beta | gamma_branch | gamma_puncture
    dependent: bool = False
    encloses: tuple = ()

    def __post_init__(self):
        if self.kind not in LOOP_KINDS:
            raise ValueError(f"unknown loop kind {self.kind!r}")


@dataclass(frozen=True)
class PathComposition:
    base: str
    windings: dict
    maslov: int
    action: complex
    base_action: complex
    contributions: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ActionCatalog:
    model: str
    energy: float
    actions: dict
    periods: dict
    loop_actions: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    symmetric: bool = False

    def __getitem__(self, key):
        if key in self.actions:
            return self.actions[key]
        if key in self.periods:
            return self.periods[key]
        raise KeyError(key)

    def __contains__(self, key):
        return key in self.actions or key in self.periods

    def rows(self):
        for k, v in self.actions.items():
            yield ("action", k, complex(v))
        for k, v in self.periods.items():
            yield ("period", k, complex(v))


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------


def _multiwell_order(model: Model) -> int:
    if model.kind == "double_well":
        return 2
    if model.kind == "triple_well":
        return 3
    raise UnsupportedModel(f"no homology basis for model kind {model.kind!r}")


def admissible_interval(model: Model) -> tuple[float, float]:
    """Energies for which every designated turning point is real and ordered."""
    if model.kind == "normal_form":
        return model.well_energy_range("in")
    mins, maxs = model.critical_points()
    lo = max(model.V(x) for x in mins)
    hi = min(model.V(x) for x in maxs)
    return float(lo), float(hi)


def multiwell_turning_points(model: Model, E) -> list[float]:
    m = _multiwell_order(model)
    lo, hi = admissible_interval(model)
    if not lo < float(E) < hi:
        raise EnergyOutOfRange(f"E={float(E)} outside the admissible interval ({lo:.6g}, {hi:.6g})", (lo, hi))
    tp = model.turning_points(E)
    if len(tp) != 2 * m:
        raise EnergyOutOfRange(f"expected {2 * m} real turning points at E={float(E)}", (lo, hi))
    return tp


def normal_form_turning_points(model: Model, E) -> dict:
    """Real zeros of H(0, q) - E grouped into inner and outer contours (q > 0 side)."""
    lo, hi = admissible_interval(model)
    if not lo < float(E) < hi:
        raise EnergyOutOfRange(f"E={float(E)} outside the admissible interval ({lo:.6g}, {hi:.6g})", (lo, hi))
    F = model.curve(E)
    row0 = F.rows[0]
    pts = sorted(
        z.real for z, m in root_clusters(row0, 1e-14) for _ in range(m) if abs(z.imag) < 1e-9 * (1 + abs(z))
    )
    right = [x for x in pts if x > 0]
    if len(right) != 4:
        raise EnergyOutOfRange(f"expected four positive turning points at E={float(E)}", (lo, hi))
    o1, i1, i2, o2 = right
    return {"inner": (i1, i2), "outer": (o1, o2), "all": pts}


def _seg_dist(a, b, z):
    d = b - a
    t = ((z - a) * np.conj(d)).real / (abs(d) ** 2)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(a + t * d - z)


def _lasso(base: complex, loop: list, top: complex) -> list:
    """base -> top, the closed loop (starting and ending at top), top -> base."""
    v = [base]
    if abs(top - base) > 0:
        v.append(top)
    v.extend(loop[1:])
    if abs(top - base) > 0:
        v.append(base)
    return v


def _repeat_loop(verts: list, turns: int) -> list:
    out = list(verts)
    for _ in range(turns - 1):
        out.extend(verts[1:])
    return out


def stub_action(F, z0: complex, b: complex, sheet_value: complex, n: int = 48) -> tuple[complex, complex]:
    """Integral of p dq from the branch point z0 to the regular point b.

    The sheet is the one whose value at b is nearest ``sheet_value``. The
    square-root endpoint is absorbed by q = z0 + (b - z0) s^2.
    Returns (action, value of p at b).
    """
    ce = curve_eval(F)
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    qs = z0 + (b - z0) * s * s
    P = ce.roots(b)
    k = int(np.argmin(np.abs(P - sheet_value)))
    pb = P[k]
    vals = np.empty(n, dtype=complex)
    z = b
    for i in np.argsort(-s):
        P, _ = track_segment(ce, P, z, qs[i])
        z = qs[i]
        vals[i] = P[k]
    return complex(np.sum(ws * vals * 2.0 * (b - z0) * s)), complex(pb)


# ---------------------------------------------------------------------------
# bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Basis:
    loops: tuple
    base_point: complex | None
    base_sheet: complex | None
    turning_points: tuple
    energy: float
    extra: dict = field(default_factory=dict, compare=False)

    def get(self, name: str) -> LoopSpec:
        for lp in self.loops:
            if lp.name == name:
                return lp
        raise UnknownLoop(f"no loop named {name!r}")

    def names(self, include_dependent: bool = False) -> list[str]:
        return [lp.name for lp in self.loops if include_dependent or not lp.dependent]

    def count(self, kind: str) -> int:
        return sum(1 for lp in self.loops if lp.kind == kind)

    def __iter__(self):
        return iter(self.loops)

    def __len__(self):
        return len(self.loops)


def _oriented(F, verts, sheet, want: str, tol=1e-10):
    """Flip the loop orientation if its action has the wrong sign."""
    r = continue_along(F, PathSpec(verts, sheet), tol=tol, want_time=False)
    val = r.action.real if want == "real" else r.action.imag
    if val < 0:
        # same sheet at the start, opposite orientation
        return _reverse_loop(verts), r
    return verts, r


def _reverse_loop(verts):
    """Reverse a lasso/closed loop keeping its start point."""
    return list(verts[::-1])


def _infinity_leading(F, m: int, plus: bool) -> complex:
    """Leading coefficient c of p ~ c q^m on the +inf (or -inf) puncture."""
    from .contour import infinity_sheets

    sheets = infinity_sheets(F)
    target = -1j * (-1) ** m if plus else 1j * (-1) ** m
    best = min(sheets, key=lambda s: abs(s.leading / abs(s.leading) - target))
    return best.leading


def _puncture_loop(F, centre: complex, R: float, c_lead: complex, m: int, n: int = 256):
    top = centre + 1j * R
    verts = circle(centre, R, n, start_angle=math.pi / 2, clockwise=True)
    ce = curve_eval(F)
    P = ce.roots(top)
    k = int(np.argmin(np.abs(P - c_lead * top**m)))
    return verts, complex(P[k])


def _multiwell_basis(model: Model, E) -> Basis:
    m = _multiwell_order(model)
    F = model.curve(E)
    tp = multiwell_turning_points(model, E)
    gaps = np.diff(tp)
    width = 0.3 * float(np.min(gaps))
    if m == 2:
        mid = 0.5 * (tp[1] + tp[2])
    else:
        mid = 0.5 * (tp[2] + tp[3])
    base = complex(mid, width)
    ce = curve_eval(F)
    Pb = ce.roots(base)
    # barrier sheet (p ~ +i|p|) for the double well, well sheet for the central well
    sheet = complex(Pb[np.argmax(Pb.imag)] if m == 2 else Pb[np.argmax(Pb.real)])
    loops = []
    pairs = []
    if m == 2:
        pairs = [("alpha", "alpha", 0), ("beta", "beta", 1)]
    else:
        pairs = [
            ("alpha1", "alpha", 0),
            ("beta1", "beta", 1),
            ("beta2", "beta", 3),
            ("alpha2", "alpha", 4),
        ]
    for name, kind, i in pairs:
        a, b = tp[i], tp[i + 1]
        ring = ellipse(complex(a), complex(b), width, n=96, start_angle=math.pi / 2)
        top = complex(0.5 * (a + b), width)
        verts = _lasso(base, ring, top)
        verts, _ = _oriented(F, verts, sheet, "real" if kind == "alpha" else "imag")
        loops.append(LoopSpec(name, PathSpec(verts, sheet), kind, False, (a, b)))
    n_tp = len(tp)
    for i, z in enumerate(tp):
        ring = _repeat_loop(circle(complex(z), width, 48, start_angle=math.pi / 2), 2)
        top = complex(z, width)
        verts = _lasso(base, ring, top)
        loops.append(
            LoopSpec(f"gamma{i + 1}", PathSpec(verts, sheet), "gamma_branch", i == n_tp - 1, (z,))
        )
    span = tp[-1] - tp[0]
    centre = 0.5 * (tp[0] + tp[-1])
    R = 1.5 * span + 2.0
    for plus in (True, False):
        c = _infinity_leading(F, m, plus)
        verts, pv = _puncture_loop(F, complex(centre), R, c, m)
        name = "gamma+inf" if plus else "gamma-inf"
        loops.append(LoopSpec(name, PathSpec(verts, pv), "gamma_puncture", False, ("infinity",)))
    return Basis(tuple(loops), base, sheet, tuple(tp), float(E), {"width": width, "radius": R})


# -- normal form ------------------------------------------------------------


def _thin_ellipse(a: complex, b: complex, width: float, n: int):
    """Uniformly parametrised ellipse around [a, b] with its derivative."""
    c = 0.5 * (a + b)
    u = (b - a) / abs(b - a)
    ra = 0.5 * abs(b - a) + width
    t = 2 * np.pi * np.arange(n) / n
    q = c + u * (ra * np.cos(t) + 1j * width * np.sin(t))
    dq = u * (-ra * np.sin(t) + 1j * width * np.cos(t)) * (2 * np.pi / n)
    return q, dq


def _sausage(points: np.ndarray, width: float, n_cap: int = 24) -> list:
    """Closed thin loop around a polyline (offset curves joined by half circles)."""
    pts = np.asarray(points, dtype=complex)
    tang = np.gradient(pts)
    tang = tang / np.abs(tang)
    nrm = 1j * tang
    upper = pts + width * nrm
    lower = pts - width * nrm
    th_end = np.angle(nrm[-1])
    th_start = np.angle(-nrm[0])
    cap_end = pts[-1] + width * np.exp(1j * (th_end - np.pi * np.arange(1, n_cap) / n_cap))
    cap_start = pts[0] + width * np.exp(1j * (th_start - np.pi * np.arange(1, n_cap) / n_cap))
    loop = list(upper) + list(cap_end) + list(lower[::-1]) + list(cap_start)
    loop.append(loop[0])
    return loop


def _clearance_width(sing, path_pts, exclude, frac=0.3):
    """Loop half-width keeping ``frac`` of the distance to the nearest foreign singular point."""
    others = np.array([z for z in sing if all(abs(z - e) > 1e-6 * (1 + abs(e)) for e in exclude)], dtype=complex)
    if len(others) == 0:
        return 0.1
    pts = np.asarray(path_pts, dtype=complex)
    d = np.inf
    for a, b in zip(pts[:-1], pts[1:]):
        d = min(d, float(np.min(_seg_dist(a, b, others))))
    return frac * d


_NF_FORMS = [(a, b) for b in range(4) for a in range(9)]
RANK_TOL = 1e-4


def _period_vector(F, q, dq, n_turns_sheet=None):
    """Periods of q^a p^b dq / F_p (and p dq) on every closed lift of a sampled loop.

    Returns a list of (cycle, vector, action, start value) for nontrivial lifts.
    """
    ce = curve_eval(F)
    verts = list(q) + [q[0]]
    P = track_points(F, verts)
    start, end = P[0], P[-1]
    d = len(start)
    perm = [int(np.argmin(np.abs(start - v))) for v in end]
    FP = np.array([ce.all(P[i], q[i])[1] for i in range(len(q))])
    out = []
    for cyc in cycles(tuple(perm)):
        vec = np.zeros(len(_NF_FORMS) + 1, dtype=complex)
        # follow the cycle: a lift that starts on sheet s continues on perm[s]
        for s in cyc:
            vals = P[:-1, s]
            fp = FP[:, s]
            for j, (a, b) in enumerate(_NF_FORMS):
                vec[j] += np.sum(q**a * vals**b / fp * dq)
            vec[-1] += np.sum(vals * dq)
        out.append((cyc, vec, complex(vec[-1]), complex(start[cyc[0]])))
    return out


def _nf_candidate_paths(model: Model, E, F, sing):
    tp = normal_form_turning_points(model, E)
    i1, i2 = tp["inner"]
    o1, o2 = tp["outer"]
    cands = []
    for sgn, tag in ((1, "R"), (-1, "L")):
        a, b = sorted((sgn * i1, sgn * i2))
        w = min(_clearance_width(sing, [a, b], [a, b]), 0.3 * (b - a))
        cands.append((f"inner_{tag}", "ellipse", (complex(a), complex(b), w)))
        a, b = sorted((sgn * o1, sgn * o2))
        w = _clearance_width(sing, [a, b], [a, b, sgn * i1, sgn * i2])
        cands.append((f"outer_{tag}", "ellipse", (complex(a), complex(b), w)))
    for sgn, tag in ((1, "R"), (-1, "L")):
        a, b = sgn * i2, sgn * o2
        arc = in_out_arc(a, b)
        w = _clearance_width(sing, arc, [a, b])
        cands.append((f"in_out_{tag}", "sausage", (arc, w)))
    a, b = -o1, o1
    w = min(_clearance_width(sing, [a, b], [a, b]), 0.3 * (b - a))
    cands.append(("out_out", "ellipse", (complex(a), complex(b), w)))
    # loops around single clusters and pairs of clusters of branch points
    groups = _clusters(sing)
    centres = [np.mean(g) for g in groups]
    for i, g in enumerate(groups):
        if len(g) < 2:
            continue
        others = [z for j, h in enumerate(groups) if j != i for z in h]
        r = 0.4 * float(np.min(np.abs(np.array(others) - centres[i])))
        cands.append((f"cluster_{i}", "ellipse", (centres[i] - 0.5 * r, centres[i] + 0.5 * r, 0.5 * r)))
    pairs = []
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            a, b = centres[i], centres[j]
            w = min(_clearance_width(sing, [a, b], groups[i] + groups[j]), 0.3 * abs(b - a))
            spread = max(_cluster_radius(groups[i]), _cluster_radius(groups[j]))
            if w < max(3 * spread, 1e-3 * abs(b - a)):
                continue
            pairs.append((abs(b - a), i, j, a, b, w))
    for _, i, j, a, b, w in sorted(pairs, key=lambda t: t[0]):
        cands.append((f"pair_{i}_{j}", "ellipse", (a, b, w)))
    return cands


def _clusters(points, radius: float = 1e-3) -> list[list[complex]]:
    groups = []
    for z in points:
        for g in groups:
            if min(abs(z - w) for w in g) < radius:
                g.append(complex(z))
                break
        else:
            groups.append([complex(z)])
    return groups


def _cluster_radius(g) -> float:
    c = np.mean(g)
    return float(max(abs(z - c) for z in g))


def in_out_arc(a: float, b: float, bump: float = 0.2, n: int = 64) -> np.ndarray:
    """Arc from the inner to the outer turning point through the upper half plane."""
    t = np.linspace(0.0, 1.0, n)
    return a + (b - a) * t + 1j * bump * np.sin(np.pi * t)


def _sampled(kind, args, n=192):
    if kind == "ellipse":
        a, b, w = args
        # the trapezoid rule converges like exp(-n w / |b - a|)
        n = int(min(2048, max(n, 20 * abs(b - a) / w)))
        return _thin_ellipse(a, b, w, n)
    arc, w = args
    verts = np.array(_sausage(arc, w)[:-1])
    # resample by arc length for the periodic trapezoid rule
    seg = np.abs(np.diff(np.append(verts, verts[0])))
    s = np.concatenate([[0], np.cumsum(seg)])
    L = s[-1]
    ts = np.linspace(0, L, 4 * n, endpoint=False)
    closed = np.append(verts, verts[0])
    q = np.interp(ts, s, closed.real) + 1j * np.interp(ts, s, closed.imag)
    dq = np.roll(q, -1) - q
    # midpoint values for the piecewise-linear rule
    return 0.5 * (q + np.roll(q, -1)), dq


def _real_row(vec):
    return np.concatenate([vec.real, vec.imag])


def _column_scale(rows):
    A = np.abs(np.array(rows))
    return np.maximum(A.max(axis=0), 1e-300)


class _Span:
    """Incremental Gram-Schmidt span of scaled, normalised period rows."""

    def __init__(self, scale, tol=RANK_TOL):
        self.scale = scale
        self.tol = tol
        self.basis = []

    @property
    def rank(self):
        return len(self.basis)

    def add(self, row) -> bool:
        v = np.asarray(row) / self.scale
        n = np.linalg.norm(v)
        if n == 0:
            return False
        v = v / n
        for _ in range(2):
            for b in self.basis:
                v = v - (b @ v) * b
        r = np.linalg.norm(v)
        if r < self.tol:
            return False
        self.basis.append(v / r)
        return True


def _select_lifts(span, item, chosen, target):
    name, kind, args, lifts = item
    for cyc, vec, act, sv in lifts:
        if span.rank >= target:
            return
        if np.max(np.abs(vec)) < 1e-10:
            continue
        if span.add(_real_row(vec)):
            chosen.append((name, kind, args, cyc, act, sv))


def _start_span(seed, lifted, target):
    scale = _column_scale(seed + [_real_row(v) for *_, ls in lifted for _, v, _, _ in ls])
    span = _Span(scale)
    for row in seed:
        span.add(row)
    chosen = []
    for item in lifted:
        _select_lifts(span, item, chosen, target)
    return span, chosen


def _nf_basis(model: Model, E, top=None) -> Basis:
    F = model.curve(E)
    if top is None:
        top = topology(F, warn=False)
    sing = singular_points(F)
    g = top.genus
    n_punct = sum(1 for p in top.punctures)
    target = 2 * g + n_punct - 1
    cands = _nf_candidate_paths(model, E, F, sing)
    # puncture periods seed the span so that alpha/beta classes are counted modulo punctures
    R = 3.0 * float(np.max(np.abs(sing))) + 2.0
    qc, dqc = _thin_ellipse(complex(-R), complex(R), R, 1024)
    # the puncture loops sum to zero, so one of them is dropped
    seed = [_real_row(v) for _, v, _, _ in _period_vector(F, qc, dqc)][: n_punct - 1]
    lifted = []
    for name, kind, args in cands:
        try:
            q, dq = _sampled(kind, args)
            check_clearance(F, list(q) + [q[0]], sing)
            lifts = _period_vector(F, q, dq)
        except TunnelSplitError as exc:
            log.debug("candidate %s rejected: %s", name, exc)
            continue
        lifts.sort(key=lambda t: (len(t[0]), -abs(t[2])))
        lifted.append((name, kind, args, lifts))
    # column scales come from every lift so that no single form dominates
    span, chosen = _start_span(seed, lifted, target)
    if len(chosen) < 2 * g:
        log.warning("normal-form basis: only %d of %d alpha/beta classes found", len(chosen), 2 * g)
    # name assignment: real-dominated actions are alpha, imaginary-dominated beta,
    # then balanced to g each
    alphas = [c for c in chosen if abs(c[4].real) >= abs(c[4].imag)]
    betas = [c for c in chosen if abs(c[4].real) < abs(c[4].imag)]
    while len(alphas) > g and len(betas) < g:
        betas.append(alphas.pop())
    while len(betas) > g and len(alphas) < g:
        alphas.append(betas.pop())
    loops = []
    for kind_name, group in (("alpha", alphas), ("beta", betas)):
        for i, (name, kind, args, cyc, act, sv) in enumerate(group, start=1):
            if kind == "ellipse":
                a, b, w = args
                ring = ellipse(a, b, w, n=128)
            else:
                ring = _sausage(*args)
            verts = _repeat_loop(ring, len(cyc))
            verts, _ = _oriented(F, verts, sv, "real" if kind_name == "alpha" else "imag")
            loops.append(LoopSpec(f"{kind_name}{i}", PathSpec(verts, sv), kind_name, False, (name,)))
    # gamma loops: every branch point (w-fold circle) and every puncture
    loops.extend(branch_loops(F, top, sing))
    ce = curve_eval(F)
    top_pt = complex(0, R)
    Ptop = ce.roots(top_pt)
    big = circle(0j, R, 512, start_angle=math.pi / 2, clockwise=True)
    for j, v in enumerate(sorted(Ptop, key=lambda x: (round(x.real, 9), x.imag))):
        loops.append(LoopSpec(f"gamma_inf{j + 1}", PathSpec(big, complex(v)), "gamma_puncture", False, ("infinity",)))
    # the last branch gamma is the dependent one
    for k in range(len(loops) - 1, -1, -1):
        if loops[k].kind == "gamma_branch":
            lp = loops[k]
            loops[k] = LoopSpec(lp.name, lp.path, lp.kind, True, lp.encloses)
            break
    tp = normal_form_turning_points(model, E)
    return Basis(tuple(loops), None, None, tuple(tp["all"]), float(E), {"rank_target": target, "selected": len(chosen), "rank": span.rank})


def branch_loops(F, top=None, sing=None) -> list:
    """One w-fold small circle per branch point, on a sheet taking part in the branching."""
    if top is None:
        top = topology(F, warn=False)
    if sing is None:
        sing = singular_points(F)
    ce = curve_eval(F)
    loops = []
    for i, bp in enumerate(top.branch_points):
        z = bp.location
        others = np.array([w for w in sing if abs(w - z) > 1e-9], dtype=complex)
        r = 0.4 * float(np.min(np.abs(others - z))) if len(others) else 0.5
        ring = circle(z, r, 64)
        sv = _branch_sheet(F, ring, ce.roots(ring[0]))
        verts = _repeat_loop(ring, bp.ramification)
        loops.append(LoopSpec(f"gamma{i + 1}", PathSpec(verts, sv), "gamma_branch", False, (z,)))
    return loops


@dataclass
class BranchCheck:
    location: complex
    ramification: int
    action: complex
    min_exponent: Fraction
    series_residue: complex

    @property
    def negative_exponents(self) -> bool:
        return self.min_exponent < 0


def gamma_branch_check(model: Model, E=None, tol: float = 1e-12, order: int = 8) -> list[BranchCheck]:
    """Small-circle action and Puiseux leading exponent at every branch point."""
    if E is None:
        E = model.reference_energy if model.kind != "normal_form" else _NF_DEFAULT_E
    F = model.curve(E)
    top = topology(F, warn=False)
    out = []
    for lp, bp in zip(branch_loops(F, top), top.branch_points):
        res = continue_along(F, lp.path, tol=tol, want_time=False)
        ser = puiseux_at_branch(F, bp.location, order=order, p0=complex(lp.path.start_sheet))
        lead = min(e for e, c in zip(ser.exponents(), ser.coefficients) if abs(c) > 0)
        out.append(BranchCheck(bp.location, bp.ramification, res.action, lead, ser.loop_integral()))
    return out


def _branch_sheet(F, ring, P):
    pts = track_points(F, list(ring))
    perm = [int(np.argmin(np.abs(pts[0] - v))) for v in pts[-1]]
    for cyc in cycles(tuple(perm)):
        if len(cyc) > 1:
            return complex(pts[0][cyc[0]])
    return complex(pts[0][0])


def build_basis(model: Model, topology_=None, E=None) -> Basis:
    """Concrete loop paths for alpha, beta and gamma classes of a model family."""
    if E is None:
        E = model.reference_energy if model.kind != "normal_form" else _NF_DEFAULT_E
    if model.kind in ("double_well", "triple_well"):
        return _multiwell_basis(model, E)
    if model.kind == "normal_form":
        return _nf_basis(model, E, topology_)
    raise UnsupportedModel(f"no homology basis for model kind {model.kind!r}")


from .models import NF_ENERGY as _NF_DEFAULT_E  # noqa: E402


# ---------------------------------------------------------------------------
# closed forms at infinity
# ---------------------------------------------------------------------------


def _elementary(roots):
    e = [1.0 + 0j]
    for r in roots:
        e = [a - r * b for a, b in zip(e + [0j], [0j] + e)]
    # e[k] = (-1)^k e_k
    return [((-1) ** k) * c for k, c in enumerate(e)]


def c3_printed(roots) -> complex:
    """C_3 in the displayed closed form (Taylor coefficient of sqrt(-prod(1 - q_i eta)))."""
    q1, q2, q3, q4 = roots
    s1 = q1 + q2 + q3 + q4
    s2 = q1 * q2 + q1 * q3 + q2 * q3 + q1 * q4 + q2 * q4 + q3 * q4
    s3 = q1 * q2 * q3 + q1 * q2 * q4 + q1 * q3 * q4 + q2 * q3 * q4
    return 1j * (0.25 * s1 * (s2 - 0.25 * s1 * s1) - 0.5 * s3)


def c_closed_form(roots, scale: float = 2.0) -> complex:
    """C_{m+1} of sqrt(-W), W = scale * prod(1 - q_i eta), for 2m = 4 or 6 roots."""
    e = _elementary(roots)
    a1, a2, a3, a4 = -e[1], e[2], -e[3], e[4] if len(e) > 4 else 0
    pref = 1j * math.sqrt(scale)
    if len(roots) == 4:
        c3 = a3 / 2 - a1 * a2 / 4 + a1**3 / 16
        return pref * c3
    if len(roots) == 6:
        c4 = a4 / 2 - a1 * a3 / 4 - a2 * a2 / 8 + 3 * a1 * a1 * a2 / 16 - 5 * a1**4 / 128
        return pref * c4
    raise UnsupportedModel("closed form available for quartic and sextic potentials only")


def residue_closed_form(roots) -> complex:
    """-2 pi i C_{m+1} for p^2/2 + prod(q - q_i) = 0 (sheet p ~ +i sqrt2 q^m)."""
    return -2j * math.pi * c_closed_form(roots, 2.0)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _evaluate_loops(F, basis: Basis, tol: float):
    out = {}
    for lp in basis:
        r = continue_along(F, lp.path, tol=tol, want_time=False)
        out[lp.name] = r.action
    return out


def _multiwell_catalog(model, E, tol, with_loops, checks=True):
    m = _multiwell_order(model)
    F = model.curve(E)
    tp = multiwell_turning_points(model, E)
    segs, times = [], []
    for i in range(len(tp) - 1):
        rule = "real_positive" if i % 2 == 0 else "imag_positive"
        s, t = segment_action(F, tp[i], tp[i + 1], rule, n_nodes=64, want_time=True)
        segs.append(2 * s)
        times.append(2 * t)
    A = {}
    Tp = {}
    if m == 2:
        A["S_L"] = A["S_alpha"] = segs[0]
        A["S_beta"] = segs[1]
        A["S_R"] = segs[2]
        A["S_Gamma0"] = segs[1] / 2
        Tp["T_L"], Tp["T_R"] = times[0], times[2]
    else:
        A["S_L"] = A["S_alpha1"] = segs[0]
        A["S_beta1"] = segs[1]
        A["S_C"] = segs[2]
        A["S_beta2"] = segs[3]
        A["S_R"] = A["S_alpha2"] = segs[4]
        A["S_Gamma0"] = (segs[1] + segs[2] + segs[3]) / 2
        Tp["T_L"], Tp["T_C"], Tp["T_R"] = times[0], times[2], times[4]
    s_inf = residue_at_infinity(F, 1j * math.sqrt(2), order=8)
    s_inf_q = residue_at_infinity_quadrature(F, 1j * math.sqrt(2), radius=50.0, n=1024) if checks else None
    roots_E = _roots_at_energy(model, E)
    A["S_inf"] = s_inf
    if checks:
        A["S_inf_quadrature"] = s_inf_q
    A["S_inf_closed"] = residue_closed_form(roots_E)
    if m == 2:
        A["S_inf_printed"] = -2j * math.pi * c3_printed(roots_E)
    sign = (-1) ** (m + 1)
    A["S_+inf"] = sign * s_inf
    A["S_-inf"] = -sign * s_inf
    diag = {"turning_points": tp}
    loops = {}
    if with_loops:
        basis = _multiwell_basis(model, E)
        loops = _evaluate_loops(F, basis, tol)
        gb = [abs(v) for k, v in loops.items() if basis.get(k).kind == "gamma_branch"]
        diag["gamma_branch_max"] = max(gb)
    return ActionCatalog(model.kind, float(E), A, Tp, loops, diag, model.symmetric and model.mirror_symmetric)


def _roots_at_energy(model: Model, E) -> list[complex]:
    poly = model.potential - _exact(E)
    out = []
    for z, k in root_clusters(poly, 1e-14):
        out.extend([complex(z)] * k)
    out.sort(key=lambda z: (z.real, z.imag))
    return out


def _best_lift(F, kind, args, want):
    q, dq = _sampled(kind, args)
    lifts = _period_vector(F, q, dq)
    closed = [t for t in lifts if len(t[0]) == 1]
    key = (lambda t: t[2].real) if want == "real" else (lambda t: abs(t[2].imag))
    return max(closed, key=key)


def nf_contour_action(model: Model, E, which: str = "in", tol: float = 1e-10) -> tuple[complex, complex]:
    """Action and period of the inner or outer real contour (q > 0 side)."""
    F = model.curve(E)
    tp = normal_form_turning_points(model, E)
    sing = singular_points(F)
    i1, i2 = tp["inner"]
    o1, o2 = tp["outer"]
    if which == "in":
        a, b = i1, i2
        w = min(_clearance_width(sing, [a, b], [a, b]), 0.3 * (b - a))
    elif which == "out":
        a, b = o1, o2
        w = _clearance_width(sing, [a, b], [a, b, i1, i2])
    else:
        raise UnknownLoop(f"unknown contour {which!r}; expected 'in' or 'out'")
    _, _, _, sv = _best_lift(F, "ellipse", (complex(a), complex(b), w), "real")
    ring = ellipse(complex(a), complex(b), w, n=192)
    ring, _ = _oriented(F, ring, sv, "real")
    r = continue_along(F, PathSpec(ring, sv), tol=tol, want_time=True)
    return r.action, r.time


def _nf_catalog(model, E, tol, with_loops):
    F = model.curve(E)
    tp = normal_form_turning_points(model, E)
    sing = singular_points(F)
    i1, i2 = tp["inner"]
    o1, o2 = tp["outer"]
    A, Tp, diag = {}, {}, {}

    for name in ("in", "out"):
        A[f"S_{name}"], Tp[f"T_{name}"] = nf_contour_action(model, E, name, tol)
    # in-out: thin loop around the arc joining the inner and outer turning points
    arc = in_out_arc(i2, o2)
    w = _clearance_width(sing, arc, [i2, o2])
    loop = _sausage(arc, w)
    cyc, vec, act, sv = _best_lift(F, "sausage", (arc, w), "imag")
    loop, _ = _oriented(F, loop, sv, "imag")
    r = continue_along(F, PathSpec(loop, sv), tol=tol, want_time=True)
    A["S_in-out"] = r.action
    Tp["T_in-out"] = r.time
    # out-out across q = 0
    w = min(_clearance_width(sing, [-o1, o1], [-o1, o1]), 0.3 * o1)
    ring = ellipse(complex(-o1), complex(o1), w, n=128)
    cyc, vec, act, sv = _best_lift(F, "ellipse", (complex(-o1), complex(o1), w), "imag")
    ring, _ = _oriented(F, ring, sv, "imag")
    r = continue_along(F, PathSpec(ring, sv), tol=tol, want_time=True)
    A["S_out-out"] = r.action
    Tp["T_out-out"] = r.time
    # independent route for the out-out action along the real axis
    A["S_out-out_segment"] = 2 * segment_action(F, -o1, o1, "imag_positive", n_nodes=64)
    A["S_Gamma0"] = 1j * (A["S_in-out"].imag + 0.5 * A["S_out-out"].imag)
    diag["turning_points"] = tp["all"]
    diag["S_in-out_real_part"] = A["S_in-out"].real
    diag["S_out-out_real_part"] = A["S_out-out"].real
    # residues at the points at infinity
    res = []
    from .contour import infinity_sheets

    for s in infinity_sheets(F):
        res.append(s.series.loop_integral())
    diag["puncture_residues"] = res
    loops = {}
    if with_loops:
        basis = _nf_basis(model, E)
        loops = _evaluate_loops(F, basis, tol)
        gb = [abs(v) for k, v in loops.items() if basis.get(k).kind == "gamma_branch"]
        gp = [abs(v) for k, v in loops.items() if basis.get(k).kind == "gamma_puncture"]
        diag["gamma_branch_max"] = max(gb)
        diag["gamma_puncture_max"] = max(gp)
        diag["alpha_count"] = basis.count("alpha")
        diag["beta_count"] = basis.count("beta")
    return ActionCatalog(model.kind, float(E), A, Tp, loops, diag, model.symmetric)


@lru_cache(maxsize=64)
def _catalog_cached(model, E, tol, with_loops, checks):
    if model.kind == "normal_form":
        return _nf_catalog(model, E, tol, with_loops)
    return _multiwell_catalog(model, E, tol, with_loops, checks)


def evaluate_catalog(model: Model, E, tol: float = 1e-10, loops: bool = False, checks: bool = True) -> ActionCatalog:
    """Named actions and periods at energy E.

    With ``loops`` every basis loop is integrated as well (alpha/beta loops
    cross-check the segment quadratures, gamma loops check the vanishing
    of branch-point and puncture contributions). ``checks=False`` skips the
    large-circle quadrature of the residue at infinity.
    """
    if model.kind not in ("double_well", "triple_well", "normal_form"):
        raise UnsupportedModel(f"no action catalog for model kind {model.kind!r}")
    return _catalog_cached(model, float(E), float(tol), bool(loops), bool(checks))


# ---------------------------------------------------------------------------
# relations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Relation:
    name: str
    lhs: complex
    rhs: complex
    residual: float
    threshold: float
    passed: bool


def _rel(name, lhs, rhs, scale, tol=RELATION_TOL):
    res = abs(complex(lhs) - complex(rhs))
    thr = tol * (1 + scale)
    return Relation(name, complex(lhs), complex(rhs), res, thr, res < thr)


def verify_relations(cat: ActionCatalog, tol: float = RELATION_TOL) -> list[Relation]:
    """Residuals of the action relations valid for the catalog's model."""
    A = cat.actions
    scale = max(abs(complex(v)) for v in A.values())
    out = []
    if cat.model == "double_well":
        out.append(_rel("S_L = S_R - S^(+inf)", A["S_L"], A["S_R"] - A["S_+inf"], scale, tol))
        out.append(_rel("S^(inf) = S_L - S_R", A["S_inf"], A["S_L"] - A["S_R"], scale, tol))
        if "S_inf_quadrature" in A:
            out.append(_rel("S^(inf) series = quadrature", A["S_inf"], A["S_inf_quadrature"], scale, tol))
        out.append(_rel("S^(inf) = -2 pi i C_3", A["S_inf"], A["S_inf_closed"], scale, tol))
        out.append(_rel("Im S_alpha = 0", A["S_L"].imag, 0, scale, tol))
        out.append(_rel("Re S_beta = 0", A["S_beta"].real, 0, scale, tol))
        if cat.symmetric:
            out.append(_rel("S_L = S_R", A["S_L"], A["S_R"], scale, tol))
            out.append(_rel("S^(+inf) = 0", A["S_+inf"], 0, scale, tol))
    elif cat.model == "triple_well":
        out.append(
            _rel("S_C = S_L + S_R + S^(+inf)", A["S_C"], A["S_L"] + A["S_R"] + A["S_+inf"], scale, tol)
        )
        out.append(
            _rel("S^(inf) = -S_L + S_C - S_R", A["S_inf"], -A["S_L"] + A["S_C"] - A["S_R"], scale, tol)
        )
        if "S_inf_quadrature" in A:
            out.append(_rel("S^(inf) series = quadrature", A["S_inf"], A["S_inf_quadrature"], scale, tol))
        out.append(_rel("S^(inf) = -2 pi i C_4", A["S_inf"], A["S_inf_closed"], scale, tol))
        for k in ("S_L", "S_C", "S_R"):
            out.append(_rel(f"Im {k} = 0", A[k].imag, 0, scale, tol))
        for k in ("S_beta1", "S_beta2"):
            out.append(_rel(f"Re {k} = 0", A[k].real, 0, scale, tol))
        if cat.symmetric:
            out.append(_rel("S_L = S_R", A["S_L"], A["S_R"], scale, tol))
            out.append(_rel("S_beta1 = S_beta2", A["S_beta1"], A["S_beta2"], scale, tol))
            out.append(_rel("S_C = 2 S_L + S^(+inf)", A["S_C"], 2 * A["S_L"] + A["S_+inf"], scale, tol))
    elif cat.model == "normal_form":
        for i, r in enumerate(cat.diagnostics.get("puncture_residues", [])):
            out.append(_rel(f"residue at infinity #{i + 1} = 0", r, 0, scale, tol))
        out.append(_rel("S_out-out loop = segment", A["S_out-out"], A["S_out-out_segment"], scale, tol))
        out.append(_rel("Re S_in-out = 0", A["S_in-out"].real, 0, scale, tol))
        out.append(_rel("Re S_out-out = 0", A["S_out-out"].real, 0, scale, tol))
    if "gamma_branch_max" in cat.diagnostics:
        out.append(_rel("gamma_branch loops vanish", cat.diagnostics["gamma_branch_max"], 0, 0.0, 1e-9))
    if cat.loop_actions and cat.model in ("double_well", "triple_well"):
        L = cat.loop_actions
        names = {"double_well": [("alpha", "S_alpha"), ("beta", "S_beta")],
                 "triple_well": [("alpha1", "S_alpha1"), ("alpha2", "S_alpha2"),
                                 ("beta1", "S_beta1"), ("beta2", "S_beta2")]}[cat.model]
        for ln, an in names:
            out.append(_rel(f"loop {ln} = {an}", L[ln], A[an], scale, tol))
        out.append(_rel("loop gamma+inf = S^(+inf)", L["gamma+inf"], A["S_+inf"], scale, tol))
    return out


def relations_report(rels: list[Relation]) -> str:
    lines = ["relation | lhs | rhs | residual | threshold | status"]
    for r in rels:
        lines.append(
            f"{r.name} | {_c(r.lhs)} | {_c(r.rhs)} | {r.residual:.3e} | {r.threshold:.3e} | "
            f"{'pass' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines) + "\n"


def _c(z):
    z = complex(z)
    return f"{z.real:.15g}{z.imag:+.15g}j"


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

_ACTION_OF = {
    "double_well": {"alpha": "S_alpha", "beta": "S_beta", "gamma+inf": "S_+inf", "gamma-inf": "S_-inf"},
    "triple_well": {
        "alpha1": "S_alpha1",
        "alpha2": "S_alpha2",
        "beta1": "S_beta1",
        "beta2": "S_beta2",
        "gamma+inf": "S_+inf",
        "gamma-inf": "S_-inf",
    },
}
_DEPENDENT = {"double_well": "gamma4", "triple_well": "gamma6"}


def loop_names(model_kind: str) -> list[str]:
    if model_kind not in _ACTION_OF:
        raise UnsupportedModel(f"composition not available for {model_kind!r}")
    n_branch = 4 if model_kind == "double_well" else 6
    return list(_ACTION_OF[model_kind]) + [f"gamma{i}" for i in range(1, n_branch)]


def maslov_index(model_kind: str, windings: dict) -> int:
    n = lambda k: int(windings.get(k, 0))  # noqa: E731
    if model_kind == "double_well":
        return 2 * n("alpha") + 2 * n("beta") + 1
    n_c = n("gamma+inf") - n("gamma-inf")
    n_l = n("alpha1") + n("alpha2") - 2 * n_c
    return 2 * n_l + 2 * n_c + 3 + 2 * (n("beta1") + n("beta2"))


def compose(cat: ActionCatalog, windings: dict, base: str = "Gamma0") -> PathComposition:
    """S_Gamma = S_Gamma0 + sum n_loop S_loop with the model's Maslov counting."""
    names = loop_names(cat.model)
    for k in windings:
        if k == _DEPENDENT[cat.model]:
            raise UnknownLoop(f"{k} is the dependent gamma loop and carries no winding number")
        if k not in names:
            raise UnknownLoop(f"unknown loop {k!r}; expected one of {names}")
    if base != "Gamma0":
        raise UnknownLoop(f"unknown base path {base!r}")
    S0 = complex(cat.actions["S_Gamma0"])
    contrib = {}
    total = S0
    for k, n in windings.items():
        act = cat.actions[_ACTION_OF[cat.model][k]] if k in _ACTION_OF[cat.model] else 0j
        contrib[k] = n * complex(act)
        total += contrib[k]
    return PathComposition(base, dict(windings), maslov_index(cat.model, windings), total, S0, contrib)


def integrate_composed_path(model: Model, E, windings: dict, tol: float = 1e-11) -> complex:
    """Direct route for the double well: endpoint stubs plus the concatenated lassos.

    Gamma0 runs from q_2 to q_3 through the base point above the barrier; the
    loops are traversed (n > 0) or reversed (n < 0) at the base point in the
    order alpha, beta, gamma1..gamma3.
    """
    if model.kind != "double_well":
        raise UnsupportedModel("direct composition is implemented for the double well")
    F = model.curve(E)
    basis = _multiwell_basis(model, E)
    tp = basis.turning_points
    b = basis.base_point
    s1, pb = stub_action(F, complex(tp[1]), b, basis.base_sheet)
    verts = [b]
    for name in ("alpha", "beta", "gamma1", "gamma2", "gamma3"):
        n = int(windings.get(name, 0))
        lp = basis.get(name).path.vertices()
        seg = lp if n >= 0 else lp[::-1]
        for _ in range(abs(n)):
            verts.extend(seg[1:])
    total = s1
    p_end = pb
    if len(verts) > 1:
        r = continue_along(F, PathSpec(verts, pb), tol=tol, want_time=False)
        total += r.action
        p_end = r.end_value
    s2, _ = stub_action(F, complex(tp[2]), b, p_end)
    return complex(total - s2)


# ---------------------------------------------------------------------------
# simultaneous quantisation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantizationReport:
    hbar: float
    m_L: float
    m_inf: float
    m_R: float
    left_quantized: bool
    infinity_integer: bool
    right_quantized: bool
    symmetric_forces_equal: bool | None
    status: str


def simultaneous_quantization_check(cat: ActionCatalog, hbar: float, tol: float = QUANT_TOL) -> QuantizationReport:
    if cat.model not in ("double_well", "triple_well"):
        raise UnsupportedModel("simultaneous quantisation applies to the multi-well models")
    two_pi_h = 2 * math.pi * hbar
    SL = cat.actions["S_L"].real
    SR = cat.actions["S_R"].real
    Sp = cat.actions["S_+inf"]
    m_L = SL / two_pi_h - 0.5
    m_R = SR / two_pi_h - 0.5
    m_inf = (Sp / two_pi_h).real if abs(Sp.imag) < 1e-9 * (1 + abs(Sp)) else float("nan")
    near = lambda x: abs(x - round(x)) < tol  # noqa: E731
    left = near(m_L)
    inf_int = not math.isnan(m_inf) and near(m_inf)
    right = near(m_R)
    sym = None
    if cat.model == "triple_well":
        sym = bool(cat.symmetric and abs(SL - SR) < 1e-8 * (1 + abs(SL)))
    if left and inf_int and cat.model == "double_well":
        status = "simultaneously quantized"
    elif left and right:
        status = "simultaneously quantized"
    else:
        status = "not simultaneously quantized"
    return QuantizationReport(hbar, m_L, m_inf, m_R, left, inf_int, right, sym, status)


def solve_simultaneous(model: Model, m_L: int, m_inf: int, E_bracket=None, tol: float = 1e-12):
    """(E, hbar) with S_L = (m_L + 1/2) 2 pi hbar and S^(+inf) = 2 pi hbar m_inf."""
    if m_inf == 0:
        raise ValueError("m_inf = 0 requires S_L = S_R; use a symmetric model")
    lo, hi = E_bracket or admissible_interval(model)
    eps = 1e-6 * (hi - lo)

    def g(E):
        c = evaluate_catalog(model, E)
        return c.actions["S_L"].real * m_inf - c.actions["S_+inf"].real * (m_L + 0.5)

    Es = np.linspace(lo + eps, hi - eps, 41)
    vals = [g(E) for E in Es]
    for a, b, fa, fb in zip(Es[:-1], Es[1:], vals[:-1], vals[1:]):
        if fa == 0 or fa * fb < 0:
            E = brentq(g, a, b, xtol=tol * max(1.0, abs(a)))
            c = evaluate_catalog(model, E)
            return E, c.actions["S_L"].real / (2 * math.pi * (m_L + 0.5))
    raise EnergyOutOfRange("no energy satisfies both quantisation conditions", (lo, hi))
