"""Riemann-surface data of an algebraic curve F(p, q) = 0: branch points,
monodromy permutations, points at infinity and genus."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .contour import (
    check_clearance,
    circle,
    curve_eval,
    infinity_sheets,
    infinity_structure,
    sort_sheets,
    track_segment,
)
from .errors import DiscriminantDegenerate, ExpansionFailure, IntransitiveMonodromy
from .polyalg import BivariatePolynomial, ComplexPoly, discriminant_in_p, root_clusters

log = logging.getLogger(__name__)

Permutation = tuple


# ---------------------------------------------------------------------------
# permutations: perm[i] is the label reached from label i
# ---------------------------------------------------------------------------


def identity(n: int) -> Permutation:
    return tuple(range(n))


def compose(a: Permutation, b: Permutation) -> Permutation:
    """Traverse a, then b."""
    return tuple(b[a[i]] for i in range(len(a)))


def inverse(a: Permutation) -> Permutation:
    out = [0] * len(a)
    for i, j in enumerate(a):
        out[j] = i
    return tuple(out)


def cycles(a: Permutation) -> list[tuple[int, ...]]:
    seen = set()
    out = []
    for i in range(len(a)):
        if i in seen:
            continue
        c = [i]
        seen.add(i)
        j = a[i]
        while j != i:
            c.append(j)
            seen.add(j)
            j = a[j]
        out.append(tuple(c))
    return out


def is_transitive(perms, n: int) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p in perms:
        for i, j in enumerate(p):
            parent[find(i)] = find(j)
    return len({find(i) for i in range(n)}) == 1


# ---------------------------------------------------------------------------
# discriminant
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def discriminant(F: BivariatePolynomial) -> ComplexPoly:
    if F.degree_p < 1:
        raise DiscriminantDegenerate("curve has no p dependence")
    D = discriminant_in_p(F)
    if D.is_zero or all(abs(complex(c)) == 0 for c in D.coeffs):
        raise DiscriminantDegenerate("p-discriminant vanishes identically (non-reduced curve)")
    return D


@lru_cache(maxsize=64)
def discriminant_points(F: BivariatePolynomial) -> tuple:
    """Distinct zeros of the p-discriminant, with multiplicities.

    Zeros of the leading p-coefficient are included (they divide the
    resultant) and are told apart later.
    """
    D = discriminant(F)
    if D.degree < 1:
        return ()
    cl = root_clusters(D, 1e-13)
    return tuple((complex(z), m) for z, m in cl)


@lru_cache(maxsize=64)
def leading_zeros(F: BivariatePolynomial) -> tuple:
    lead = F.leading_p
    if lead.degree < 1:
        return ()
    return tuple(complex(z) for z, _ in root_clusters(lead, 1e-13))


def spread(F: BivariatePolynomial) -> float:
    pts = np.array([z for z, _ in discriminant_points(F)])
    if len(pts) < 2:
        return 1.0
    return max(1.0, float(np.max(np.abs(pts[:, None] - pts[None, :]))))


def monodromy_radius(F: BivariatePolynomial, q0: complex) -> float:
    """0.4 x distance to the nearest other discriminant root / puncture."""
    pts = np.array([z for z, _ in discriminant_points(F)] + list(leading_zeros(F)))
    if len(pts):
        dist = np.abs(pts - q0)
        dist = dist[dist > 1e-9 * (1 + abs(q0))]
    else:
        dist = np.array([])
    if len(dist) == 0:
        return 0.4
    return 0.4 * float(np.min(dist))


# ---------------------------------------------------------------------------
# local monodromy
# ---------------------------------------------------------------------------


def _circle_track(F, q0, radius, start_angle=0.0, n=48, P0=None, turns=1, samples=False):
    ce = curve_eval(F)
    verts = circle(q0, radius, n * turns, start_angle)
    # circle() closes after one turn for n*turns points; rebuild for several turns
    ang = start_angle + 2 * np.pi * np.arange(n * turns + 1) / n
    verts = list(q0 + radius * np.exp(1j * ang))
    P = ce.roots(verts[0]) if P0 is None else np.array(P0, dtype=complex)
    start = P.copy()
    trace = [P.copy()]
    for a, b in zip(verts[:-1], verts[1:]):
        P, _ = track_segment(ce, P, a, b)
        if samples:
            trace.append(P.copy())
    return start, P, (np.array(verts), np.array(trace)) if samples else None


def _match(start: np.ndarray, end: np.ndarray) -> Permutation:
    """Permutation i -> index j of start nearest to end[i]."""
    perm = []
    for v in end:
        perm.append(int(np.argmin(np.abs(start - v))))
    if len(set(perm)) != len(perm):
        from .errors import SheetCollision

        raise SheetCollision("sheet matching after the loop is ambiguous")
    return tuple(perm)


def _to_sorted_labels(P: np.ndarray, perm_idx: Permutation) -> Permutation:
    order = sort_sheets(P)  # label -> index
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))  # index -> label
    return tuple(int(inv[perm_idx[order[l]]]) for l in range(len(order)))


def monodromy_at(F: BivariatePolynomial, q0: complex, radius: float | None = None) -> Permutation:
    """Sheet permutation for one counterclockwise turn around q0.

    Labels are the (Re, Im)-sorted sheet values at the circle's start point
    q0 + radius.
    """
    q0 = complex(q0)
    if radius is None:
        radius = monodromy_radius(F, q0)
    start, end, _ = _circle_track(F, q0, radius)
    return _to_sorted_labels(start, _match(start, end))


@dataclass
class LocalCycle:
    sheets: tuple  # indices into the start values on the circle
    centre_value: complex  # sheet value at q0 shared by the cycle (inf for poles)
    t_samples: np.ndarray = field(repr=False, default=None)
    p_samples: np.ndarray = field(repr=False, default=None)


def local_cycles(F: BivariatePolynomial, q0: complex, radius: float | None = None, n: int = 64):
    """Cycles of the local monodromy at q0 with sampled values for Fourier fits."""
    q0 = complex(q0)
    if radius is None:
        radius = monodromy_radius(F, q0)
    start, end, _ = _circle_track(F, q0, radius, n=n)
    perm = _match(start, end)
    ce = curve_eval(F)
    lead = ce.coeffs(q0)[-1]
    out = []
    for cyc in cycles(perm):
        w = len(cyc)
        # sample the w-fold loop for this cycle
        _, _, (verts, trace) = _circle_track(
            F, q0, radius, n=n, P0=start, turns=w, samples=True
        )
        vals = trace[:, cyc[0]]
        phis = 2 * np.pi * np.arange(n * w + 1) / (n * w)
        t = radius ** (1.0 / w) * np.exp(1j * phis)
        mean = np.mean(vals[:-1])
        centre = complex(mean) if abs(lead) > 1e-12 * (1 + np.max(np.abs(ce.coeffs(q0)))) else complex(np.inf)
        out.append(LocalCycle(tuple(cyc), centre, t[:-1], vals[:-1]))
    return out


# ---------------------------------------------------------------------------
# global monodromy from a base point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchPoint:
    location: complex
    ramification: int
    monodromy: Permutation  # the cycle acting on the base labeling
    kind: str = "finite"  # finite | at_infinity
    local_monodromy: Permutation = ()
    sheets: tuple = ()


@dataclass(frozen=True)
class Puncture:
    location: complex | str  # complex or "infinity"
    residue: complex  # integral of p dq around it (2 pi i Res)
    ramification: int = 1
    leading: complex | None = None


@dataclass(frozen=True)
class SurfaceTopology:
    sheet_count: int
    ramification_index: int
    genus: int
    branch_points: tuple
    punctures: tuple
    genus_riemann_hurwitz: int
    monodromy_infinity: Permutation
    finite_monodromies: tuple  # (location, permutation) in product order
    base_point: complex
    anchor: complex
    transitive: bool
    discarded: tuple = ()

    @property
    def holes(self) -> int:
        return len(self.branch_points) + len(self.punctures)

    def product_is_identity(self) -> bool:
        acc = identity(self.sheet_count)
        for _, perm in self.finite_monodromies:
            acc = compose(acc, perm)
        acc = compose(acc, self.monodromy_infinity)
        return acc == identity(self.sheet_count)


@dataclass
class _Layout:
    base: complex
    points: list  # all finite singular points
    radii: list
    big_radius: float
    centre: complex


def _layout(F: BivariatePolynomial) -> _Layout:
    pts = [z for z, _ in discriminant_points(F)]
    for z in leading_zeros(F):
        if all(abs(z - w) > 1e-9 * (1 + abs(z)) for w in pts):
            pts.append(z)
    pts_a = np.array(pts, dtype=complex)
    centre = complex(np.mean(pts_a)) if len(pts) else 0j
    R = float(np.max(np.abs(pts_a - centre))) if len(pts) else 1.0
    R = max(R, 0.5)
    radii = [monodromy_radius(F, z) for z in pts]
    # base point below the cloud, with an irrational real offset so that no two
    # singular points are aligned with it
    offsets = [0.3819660112501051, -0.2360679774997897, 0.1458980337503155, 0.5278640450004206]
    for off in offsets:
        base = centre + R * complex(off, -2.0)
        ok = True
        for i, z in enumerate(pts):
            a = z + radii[i] * (base - z) / abs(base - z)
            for j, w in enumerate(pts):
                if j == i:
                    continue
                d = _seg_dist(base, a, w)
                if d < 0.25 * radii[j]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            break
    big = 1.5 * abs(base - centre)
    return _Layout(base, pts, radii, abs(base - centre), centre)


def _seg_dist(a, b, z):
    d = b - a
    t = ((z - a) * np.conj(d)).real / (abs(d) ** 2)
    t = min(max(t, 0.0), 1.0)
    return abs(a + t * d - z)


def _lasso(F, base, z, r, P_base, n=48):
    """Permutation of the base values for the lasso around z."""
    ce = curve_eval(F)
    u = (base - z) / abs(base - z)
    a = z + r * u
    P, _ = track_segment(ce, P_base, base, a)
    ang0 = np.angle(u)
    ang = ang0 + 2 * np.pi * np.arange(n + 1) / n
    verts = z + r * np.exp(1j * ang)
    verts[-1] = a
    for s, t in zip(verts[:-1], verts[1:]):
        P, _ = track_segment(ce, P, s, t)
    P, _ = track_segment(ce, P, a, base)
    return _match(P_base, P)


def _infinity_loop(F, lay: _Layout, P_base, n=256):
    """Clockwise circle through the base point enclosing every finite point."""
    ce = curve_eval(F)
    c = lay.centre
    R = lay.big_radius
    ang0 = np.angle(lay.base - c)
    ang = ang0 - 2 * np.pi * np.arange(n + 1) / n
    verts = c + R * np.exp(1j * ang)
    verts[0] = verts[-1] = lay.base
    P = P_base.copy()
    for s, t in zip(verts[:-1], verts[1:]):
        P, _ = track_segment(ce, P, s, t)
    return _match(P_base, P)


@lru_cache(maxsize=32)
def global_monodromy(F: BivariatePolynomial):
    """Lasso permutations for every finite singular point and the loop at infinity.

    Labels are the sorted sheet values at the anchor (a real point right of
    every singular point), transported to the base point along a straight
    segment. Lassos are ordered counterclockwise by their angle seen from the
    base point, so that traversing them in order equals one big
    counterclockwise loop; the loop at infinity is that big loop reversed.
    """
    lay = _layout(F)
    ce = curve_eval(F)
    xs = [z.real for z in lay.points] or [0.0]
    anchor = complex(max(xs) + 1.0 + 0.1 * (max(xs) - min(xs)), 0.0)
    # anchor labels transported to the base point
    P_anchor = ce.roots(anchor)
    order = sort_sheets(P_anchor)
    P_anchor = P_anchor[order]
    mid = complex(anchor.real, lay.base.imag)
    P = P_anchor.copy()
    for a, b in ((anchor, mid), (mid, lay.base)):
        P, _ = track_segment(ce, P, a, b)
    P_base = P
    angs = [np.angle(z - lay.base) for z in lay.points]
    idx = sorted(range(len(lay.points)), key=lambda i: angs[i])
    finite = []
    for i in idx:
        perm = _lasso(F, lay.base, lay.points[i], lay.radii[i], P_base)
        finite.append((lay.points[i], perm))
    inf_perm = _infinity_loop(F, lay, P_base)
    return lay, anchor, finite, inf_perm


def branch_points(F: BivariatePolynomial) -> list[BranchPoint]:
    """Discriminant zeros with nontrivial monodromy, one entry per nontrivial cycle."""
    if F.degree_p < 2:
        raise DiscriminantDegenerate("need degree_p >= 2 for branching")
    discriminant(F)
    lay, anchor, finite, _ = global_monodromy(F)
    lz = leading_zeros(F)
    out = []
    for z, perm in finite:
        if any(abs(z - w) < 1e-9 * (1 + abs(z)) for w in lz):
            continue
        for cyc in cycles(perm):
            if len(cyc) < 2:
                continue
            c = list(range(len(perm)))
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                c[a] = b
            out.append(
                BranchPoint(
                    location=z,
                    ramification=len(cyc),
                    monodromy=tuple(c),
                    kind="finite",
                    local_monodromy=perm,
                    sheets=tuple(sorted(cyc)),
                )
            )
    return out


def _finite_residue(F, z, r):
    """Integral of p dq around a small circle at z, summed per sheet group."""
    from .contour import continue_all

    verts = circle(z, r, 64)
    P, act, _, _ = continue_all(F, verts, want_time=False)
    return act


def topology(F: BivariatePolynomial, warn: bool = True) -> SurfaceTopology:
    """Sheet count, ramification, genus, branch points and punctures of F = 0."""
    d = F.degree_p
    bps = branch_points(F)
    lay, anchor, finite, inf_perm = global_monodromy(F)
    perms = [p for _, p in finite] + [inf_perm]
    transitive = is_transitive(perms, d)
    if not transitive and warn:
        warnings.warn(
            "monodromy group is intransitive: the curve is reducible (disconnected surface)",
            IntransitiveMonodromy,
            stacklevel=2,
        )
    # ramification at infinity from the eta = 1/q Newton polygon
    inf_info = infinity_structure(F)
    w_inf_series = sum(x["ramification"] - 1 for x in inf_info) // 1
    # each ramified point shows up e times in infinity_structure (one per root)
    w_inf_series = 0
    groups = {}
    for x in inf_info:
        groups.setdefault(x["exponent"], []).append(x)
    for k, xs in groups.items():
        e = k.denominator
        npts = len(xs) // e if e > 1 else len(xs)
        w_inf_series += npts * (e - 1)
    w_inf_perm = sum(len(c) - 1 for c in cycles(inf_perm))
    if w_inf_perm != w_inf_series:
        log.warning(
            "ramification at infinity: permutation %d vs Newton polygon %d", w_inf_perm, w_inf_series
        )
    w_finite = sum(b.ramification - 1 for b in bps)
    w = w_finite + w_inf_series
    genus_formula = w // 2 - d + 1 if w % 2 == 0 else (w / 2 - d + 1)
    # Riemann-Hurwitz from the full permutation data
    w_rh = sum(d - len(cycles(p)) for p in perms)
    genus_rh = (w_rh - 2 * d + 2) // 2
    # punctures: points at infinity and zeros of the leading p coefficient
    punct = []
    try:
        sheets_inf = infinity_sheets(F)
        for s in sheets_inf:
            punct.append(Puncture("infinity", s.series.loop_integral(), 1, s.leading))
    except ExpansionFailure:
        for c in cycles(inf_perm):
            punct.append(Puncture("infinity", complex("nan"), len(c), None))
    lz = leading_zeros(F)
    discarded = []
    for z in lz:
        r = monodromy_radius(F, z)
        act = _finite_residue(F, z, r)
        punct.append(Puncture(z, complex(np.sum(np.abs(act))), 1, None))
    # discriminant zeros with trivial monodromy that are not poles
    for z, perm in finite:
        if perm == identity(d) and all(abs(z - w) > 1e-9 * (1 + abs(z)) for w in lz):
            act = _finite_residue(F, z, monodromy_radius(F, z))
            if np.max(np.abs(act)) > 1e-9 * (1 + spread(F)):
                punct.append(Puncture(z, complex(act[np.argmax(np.abs(act))]), 1, None))
            else:
                log.info("discarding node at q=%s (trivial monodromy, zero residue)", z)
                discarded.append(z)
    return SurfaceTopology(
        sheet_count=d,
        ramification_index=w,
        genus=genus_formula,
        branch_points=tuple(bps),
        punctures=tuple(punct),
        genus_riemann_hurwitz=genus_rh,
        monodromy_infinity=inf_perm,
        finite_monodromies=tuple(finite),
        base_point=lay.base,
        anchor=anchor,
        transitive=transitive,
        discarded=tuple(discarded),
    )


def topology_report(top: SurfaceTopology) -> str:
    lines = [
        f"sheets: {top.sheet_count}",
        f"ramification_index: {top.ramification_index}",
        f"genus: {top.genus}",
        f"genus_riemann_hurwitz: {top.genus_riemann_hurwitz}",
        f"branch_points: {len(top.branch_points)}",
        f"punctures: {len(top.punctures)}",
        f"holes: {top.holes}",
        f"transitive: {str(top.transitive).lower()}",
        f"monodromy_product_identity: {str(top.product_is_identity()).lower()}",
        f"anchor: {_fmt(top.anchor)}",
        f"base_point: {_fmt(top.base_point)}",
        f"monodromy_infinity: {list(top.monodromy_infinity)}",
        "branch_point_list:",
    ]
    for b in top.branch_points:
        lines.append(
            f"  - q: {_fmt(b.location)}  w: {b.ramification}  sheets: {list(b.sheets)}  "
            f"monodromy: {list(b.monodromy)}"
        )
    lines.append("puncture_list:")
    for p in top.punctures:
        loc = p.location if isinstance(p.location, str) else _fmt(p.location)
        lines.append(f"  - at: {loc}  loop_integral: {_fmt(p.residue)}  e: {p.ramification}")
    return "\n".join(lines) + "\n"


def _fmt(z: complex) -> str:
    z = complex(z)
    return f"{z.real:.12g}{z.imag:+.12g}j"
