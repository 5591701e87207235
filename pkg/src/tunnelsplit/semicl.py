"""Bohr-Sommerfeld quantisation of single wells and the closed-form
tunnelling-splitting predictions for the double well, the triple well and
the normal-form Hamiltonian."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .contour import segment_action
from .errors import (
    DivergentSum,
    NoBoundState,
    ResonanceSingularity,
    TunnelSplitError,
    UnsupportedModel,
)
from .homology import evaluate_catalog, nf_contour_action
from .models import NF_ENERGY, Model
from .qref.spectrum import SplittingPoint

log = logging.getLogger(__name__)

RESONANCE_FLAG = 1e-3
TRACE_RATIO_ARG = 0.02
RESONANCE_SINGULAR = 1e-8
DEFAULT_CUTOFF = 200
TAIL_TOL = 1e-12
VARIANTS = ("red", "blue")
SOURCES = ("semiclassical", "exact", "trace_ratio")


@dataclass(frozen=True)
class QuantizationSolution:
    well: str
    N: int
    energy: float
    action: float
    hbar: float
    residual: float


# ---------------------------------------------------------------------------
# well actions and quantisation
# ---------------------------------------------------------------------------


def _default_well(model: Model) -> str:
    names = model.well_names()
    return names[0]


_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def potential_well_action(model: Model, a: float, b: float, E: float, want_time: bool = False):
    """2 * integral of sqrt(2 (E - V)) over [a, b], q = m + h sin(theta)."""
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    th = 0.5 * np.pi * _GL_X
    q = m + h * np.sin(th)
    jac = 0.5 * np.pi * _GL_W * h * np.cos(th)
    p = np.sqrt(np.maximum(2 * (float(E) - model.V(q)), 0.0))
    S = 2 * float(np.sum(jac * p))
    if not want_time:
        return S
    with np.errstate(divide="ignore"):
        T = 2 * float(np.sum(np.where(p > 0, jac / p, 0.0)))
    return S, T


def well_action(model: Model, well: str, E: float, want_time: bool = False, tracked: bool = False):
    """Closed-orbit action S(E) (and period) of the named well.

    Potential models use p = sqrt(2 (E - V)) directly unless ``tracked``,
    which integrates on the sheet-tracked curve instead.
    """
    if model.kind == "normal_form":
        S, T = nf_contour_action(model, E, well)
        return (S.real, abs(T.real)) if want_time else S.real
    a, b = model.well_interval(well, E)
    if not tracked:
        return potential_well_action(model, a, b, E, want_time)
    out = segment_action(model.curve(E), a, b, "real_positive", n_nodes=64, want_time=want_time, check_adjacent=False)
    if want_time:
        return 2 * out[0].real, 2 * out[1].real
    return 2 * out.real


def quantize_well(model: Model, well: str | None, N: int, hbar: float, tol: float = 1e-13) -> QuantizationSolution:
    """Energy with S(E) = (N + 1/2) 2 pi hbar in the named well."""
    if N < 0:
        raise ValueError("N must be non-negative")
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    well = well or _default_well(model)
    lo, hi = model.well_energy_range(well)
    target = (N + 0.5) * 2 * math.pi * hbar
    span = hi - lo if math.isfinite(hi) else max(1.0, abs(lo))
    e_lo = lo + 1e-8 * span
    if math.isfinite(hi):
        e_hi = hi - 1e-9 * span
        if well_action(model, well, e_hi) < target:
            raise NoBoundState(f"well {well!r} holds no state N={N} at hbar={hbar}")
    else:
        e_hi = lo + span
        while well_action(model, well, e_hi) < target:
            e_hi = lo + 2 * (e_hi - lo)
            if e_hi - lo > 1e12 * span:
                raise NoBoundState(f"action of well {well!r} does not reach the target")
    f = lambda E: well_action(model, well, E) - target  # noqa: E731
    E = brentq(f, e_lo, e_hi, xtol=tol * max(1.0, abs(e_hi)), rtol=4 * np.finfo(float).eps, maxiter=200)
    S = well_action(model, well, E)
    return QuantizationSolution(well, int(N), float(E), float(S), float(hbar), abs(S - target))


def _energy(model, hbar, N, E, well=None):
    if E is not None:
        return float(E)
    if N is None:
        N = 0
    return quantize_well(model, well, N, hbar).energy


# ---------------------------------------------------------------------------
# resummation of winding sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SumResult:
    value: complex
    closed_form: complex
    terms_used: int
    tail: float


def euler_sum(w: complex, power: int = 1, cutoff: int = DEFAULT_CUTOFF, tol: float = TAIL_TOL) -> SumResult:
    """Sum_n C(n + power - 1, power - 1) w^n for |w| = 1, w != 1.

    The series is Euler transformed, u = (1 + w)/2, which converges
    geometrically away from w = 1. The closed form (1 - w)^-power is
    returned alongside. DivergentSum is raised when the tail after
    ``cutoff`` terms is not below ``tol`` relative to the head.
    """
    u = 0.5 * (1 + w)
    acc = 0j
    term = 1.0 + 0j
    last = 0.0
    for k in range(cutoff + 1):
        c = math.comb(k + power - 1, power - 1)
        t = c * term
        acc += t
        last = abs(t)
        term *= u
    acc *= 0.5**power
    head = max(abs(acc), 1e-300)
    # geometric tail bound after the last term
    r = abs(u)
    tail = 0.5**power * last * r / max(1e-300, 1 - r) if r < 1 else math.inf
    closed = (1 - w) ** (-power) if w != 1 else complex(math.inf)
    if not tail < tol * head:
        raise DivergentSum(f"winding sum does not settle within {cutoff} terms (|u| = {r:.12g})")
    return SumResult(acc, closed, cutoff + 1, tail / head)


def pairwise_cancellation(phase: complex, cutoff: int = 5) -> dict:
    """Sum of phase^n over complete adjacent pairs (n, n + 1) with |n| <= cutoff, plus n = 0.

    Under S_alpha = (N + 1/2) 2 pi hbar the phase is -1 and each pair
    cancels, leaving the n = 0 term.
    """
    total = 1.0 + 0j
    pairs = []
    for sgn in (1, -1):
        for n in range(1, cutoff, 2):
            p = phase ** (sgn * n) + phase ** (sgn * (n + 1))
            pairs.append(p)
            total += p
    return {"sum": total, "residual": abs(total - 1), "max_pair": max(abs(p) for p in pairs) if pairs else 0.0}


# ---------------------------------------------------------------------------
# splitting formulas
# ---------------------------------------------------------------------------


def _default_T(cat) -> float:
    return abs(cat.periods["T_L"].real) / 4


def split_double_well(model: Model, hbar: float, N: int | None = 0, E: float | None = None, T: float | None = None) -> SplittingPoint:
    """(hbar / 2T) exp(-|S_beta| / 2 hbar) at the quantised energy of the left well."""
    if model.kind != "double_well":
        raise UnsupportedModel("split_double_well needs a double-well model")
    E = _energy(model, hbar, N, E, "L")
    cat = evaluate_catalog(model, E, checks=False)
    T = _default_T(cat) if T is None else float(T)
    Sb = abs(cat.actions["S_beta"].imag)
    SL = cat.actions["S_L"].real
    delta = hbar / (2 * T) * math.exp(-Sb / (2 * hbar))
    check = pairwise_cancellation(complex(np.exp(1j * SL / hbar)), 5)
    extra = {
        "T": T,
        "S_beta": Sb,
        "S_L": SL,
        "slope": -Sb / 2,
        "dDelta_dT": -delta / T,
        "winding_sum": check["sum"],
        "winding_residual": check["residual"],
    }
    return SplittingPoint(1 / hbar, delta, "semiclassical", "", 1, E, "", extra)


def triple_well_sum(S_C: float, hbar: float, cutoff: int = DEFAULT_CUTOFF) -> SumResult:
    """Sum over the central winding n_C >= 0 with the Maslov phase of each central loop.

    sum_n exp(i (n + 1/2) S_C / hbar - i n pi); |closed form| = 1 / (2 |cos(S_C / 2 hbar)|).
    """
    w = complex(np.exp(1j * (S_C / hbar - math.pi)))
    pref = complex(np.exp(0.5j * S_C / hbar))
    r = euler_sum(w, 1, cutoff)
    return SumResult(pref * r.value, pref * r.closed_form, r.terms_used, r.tail)


def resonance_measure(S_C: float, hbar: float) -> float:
    """|sin((S_C / hbar - pi) / 2)|: zero when the central well holds a level at E."""
    return abs(math.sin(0.5 * (S_C / hbar - math.pi)))


def split_triple_well(
    model: Model,
    hbar: float,
    N: int | None = 0,
    E: float | None = None,
    T: float | None = None,
    winding_cutoff: int = DEFAULT_CUTOFF,
) -> SplittingPoint:
    """(hbar / 2T) exp(-|S_beta1| / hbar) |sum_{n_L, n_C} (-1)^(mu+1) e^{i(n_L S_L + (n_C + 1/2) S_C)/hbar}|.

    The n_L sum collapses to n_L = 0 under quantisation of the outer wells
    (checked by pairwise cancellation); the n_C sum is Euler resummed.
    """
    if model.kind != "triple_well":
        raise UnsupportedModel("split_triple_well needs a triple-well model")
    if winding_cutoff < 1:
        raise ValueError("winding_cutoff must be >= 1")
    E = _energy(model, hbar, N, E, "L")
    cat = evaluate_catalog(model, E, checks=False)
    T = _default_T(cat) if T is None else float(T)
    Sb = abs(cat.actions["S_beta1"].imag)
    SC = cat.actions["S_C"].real
    SL = cat.actions["S_L"].real
    res = resonance_measure(SC, hbar)
    extra = {"T": T, "S_beta1": Sb, "S_C": SC, "S_L": SL, "resonance_measure": res, "resonance": res < RESONANCE_FLAG}
    extra["n_L_check"] = pairwise_cancellation(complex(np.exp(1j * SL / hbar)), 5)["residual"]
    pref = hbar / (2 * T) * math.exp(-Sb / hbar)
    closed = pref / (2 * math.cos(0.5 * SC / hbar)) if res > 0 else math.inf
    extra["closed_form"] = abs(closed)
    if res < RESONANCE_SINGULAR:
        raise DivergentSum(f"resonance: |sin((S_C/hbar - pi)/2)| = {res:.3g}")
    try:
        s = triple_well_sum(SC, hbar, winding_cutoff)
        value = pref * abs(s.value)
        extra["series"] = value
        extra["series_minus_closed"] = value - abs(closed)
        extra["tail"] = s.tail
    except DivergentSum:
        # slow convergence near a resonance: report the resummed value
        value = abs(closed)
        extra["series"] = math.nan
    code = "resonance_flag" if extra["resonance"] else ""
    return SplittingPoint(1 / hbar, float(value), "semiclassical", "", 1, E, code, extra)


@dataclass(frozen=True)
class NormalFormConstants:
    S_in: float
    S_out: float
    T_in: float
    T_out: float
    S_io: float  # |Im| of the in-out loop action
    S_oo: float  # |Im| of the out-out loop action


def normal_form_constants(model: Model, E=NF_ENERGY) -> NormalFormConstants:
    cat = evaluate_catalog(model, float(E))
    A, P = cat.actions, cat.periods
    return NormalFormConstants(
        A["S_in"].real,
        A["S_out"].real,
        abs(P["T_in"].real),
        abs(P["T_out"].real),
        abs(A["S_in-out"].imag),
        abs(A["S_out-out"].imag),
    )


def nf_phase(c: NormalFormConstants) -> float:
    """a in sin(a / hbar): ((T_out / T_in) S_in - S_out) / 2."""
    return 0.5 * (c.T_out / c.T_in * c.S_in - c.S_out)


def split_normal_form(model: Model, hbar: float, variant: str = "blue", E=NF_ENERGY) -> SplittingPoint:
    """(2 hbar / T_in) (e^{-S_io / 2hbar} / sin(a / hbar))^2 e^{-S_oo / 2hbar}.

    ``red`` adds one more out-out traversal, e^{-S_oo / hbar}.
    """
    if model.kind != "normal_form":
        raise UnsupportedModel("split_normal_form needs the normal-form model")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    c = normal_form_constants(model, E)
    x = 1 / hbar
    a = nf_phase(c)
    s = math.sin(a * x)
    if abs(s) < RESONANCE_SINGULAR:
        raise ResonanceSingularity(f"sin factor {s:.3g} vanishes at 1/hbar = {x}")
    expo = -c.S_io * x - 0.5 * c.S_oo * x
    slope = -1 / x - c.S_io - 0.5 * c.S_oo - 2 * a / math.tan(a * x)
    if variant == "red":
        expo -= c.S_oo * x
        slope -= c.S_oo
    delta = (2 / (x * c.T_in)) * math.exp(expo) / (s * s)
    extra = {"slope": slope, "sin": s, "a": a, "resonance": abs(s) < RESONANCE_FLAG}
    code = "resonance_flag" if extra["resonance"] else ""
    return SplittingPoint(x, delta, "semiclassical", variant, 1, float(E), code, extra)


def nf_series_check(theta: float, cutoff: int = 500) -> dict:
    """Double winding sum with degeneracy factors 4(n + 1) 4(n' + 1).

    Each sum is sum_n 4 (n + 1) w^n with w = e^{2 i theta} and resums to
    1 / sin^2(theta) in magnitude; the double sum gives 1 / sin^4.
    """
    w = complex(np.exp(2j * theta))
    single = euler_sum(w, 2, cutoff)
    one = 4 * single.value
    return {
        "single": abs(one),
        "double": abs(one) ** 2,
        "single_closed": 1 / math.sin(theta) ** 2,
        "double_closed": 1 / math.sin(theta) ** 4,
        "tail": single.tail,
    }


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SplittingSeries:
    model: str
    points: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def rows(self):
        for p in self.points:
            yield p

    def select(self, source: str, variant: str = "") -> list:
        return [p for p in self.points if p.source == source and p.variant == variant]

    def to_csv(self) -> str:
        lines = ["inv_hbar,source,variant,delta_E,sign_flag,error_code"]
        for p in self.points:
            lines.append(f"{p.inv_hbar:.17g},{p.source},{p.variant},{p.delta_E:.17g},{p.sign_flag},{p.error_code}")
        return "\n".join(lines) + "\n"


def geometric_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def _error_point(x, source, variant, exc):
    return SplittingPoint(x, math.nan, source, variant, 0, math.nan, type(exc).__name__, {"message": str(exc)})


def _semiclassical(model, hbar, N, E, variants, T, cutoff):
    if model.kind == "double_well":
        return [split_double_well(model, hbar, N, E, T)]
    if model.kind == "triple_well":
        return [split_triple_well(model, hbar, N, E, T, cutoff)]
    if model.kind == "normal_form":
        out = []
        for v in variants:
            try:
                out.append(split_normal_form(model, hbar, v, NF_ENERGY if E is None else E))
            except TunnelSplitError as exc:
                out.append(_error_point(1 / hbar, "semiclassical", v, exc))
        return out
    raise UnsupportedModel(f"no splitting formula for model kind {model.kind!r}")


def _exact(model, hbar, N, E, source, exact_opts):
    from .qref.spectrum import diagonalize, splitting_at_energy, trace_ratio_splitting

    opts = dict(exact_opts or {})
    if E is None:
        E = NF_ENERGY if model.kind == "normal_form" else quantize_well(model, "L", N or 0, hbar).energy
    E = float(E)
    if source == "trace_ratio":
        spec = diagonalize(model, hbar, energy=E, all_levels=True, **opts)
        direct = splitting_at_energy(spec, E, refine=False)
        # real T keeps U unitary; |T| dE / 2 hbar = TRACE_RATIO_ARG is well inside validity
        T = 2 * hbar * TRACE_RATIO_ARG / max(direct.delta_E, 1e-300)
        est = trace_ratio_splitting(spec, T_complex=T, E_target=E)
        sign = 1 if est.real >= 0 else -1
        extra = {"T": T, "direct": direct.delta_E * direct.sign_flag, "imag": est.imag}
        return SplittingPoint(1 / hbar, abs(est.real), "trace_ratio", "", sign, direct.mean_energy, "", extra)
    spec = diagonalize(model, hbar, energy=E, **opts)
    return splitting_at_energy(spec, E)


def sweep(
    model: Model,
    inv_hbar_grid,
    sources=("semiclassical",),
    variants=VARIANTS,
    N: int | None = 0,
    E: float | None = None,
    T: float | None = None,
    winding_cutoff: int = DEFAULT_CUTOFF,
    threads: int = 1,
    exact_opts: dict | None = None,
) -> SplittingSeries:
    """One SplittingPoint per (grid point, source, variant); errors recorded in-row."""
    grid = [float(x) for x in inv_hbar_grid]
    if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
        raise ValueError("grid must be strictly increasing in 1/hbar")
    if any(x <= 0 for x in grid):
        raise ValueError("grid values must be positive")
    for s in sources:
        if s not in SOURCES:
            raise ValueError(f"unknown source {s!r}")
    variants = tuple(variants) if model.kind == "normal_form" else ("",)

    def run(x):
        hbar = 1 / x
        out = []
        for src in sources:
            if src == "semiclassical":
                try:
                    out.extend(_semiclassical(model, hbar, N, E, variants, T, winding_cutoff))
                except TunnelSplitError as exc:
                    out.extend(_error_point(x, src, v, exc) for v in variants)
            else:
                try:
                    p = _exact(model, hbar, N, E, src, exact_opts)
                    out.append(SplittingPoint(x, p.delta_E, src, "", p.sign_flag, p.mean_energy, p.error_code, p.extra))
                except TunnelSplitError as exc:
                    out.append(_error_point(x, src, "", exc))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, grid))
    else:
        results = [run(x) for x in grid]
    # grid values are reported as given, not as 1/(1/x)
    pts = [dataclasses.replace(p, inv_hbar=x) for x, r in zip(grid, results) for p in r]
    if model.kind == "triple_well":
        pts = flag_resonance_crossings(pts)
    return SplittingSeries(model.kind, pts, {"sources": list(sources), "variants": list(variants), "N": N, "E": E})


def flag_resonance_crossings(points) -> list:
    """Mark semiclassical grid points nearest each zero of cos(S_C / 2 hbar).

    On a finite grid the resonance measure rarely dips below RESONANCE_FLAG,
    so a sign change of cos(S_C / 2 hbar) between neighbours also flags the
    neighbour with the smaller measure.
    """
    sc = [p for p in points if p.source == "semiclassical" and "S_C" in p.extra]
    sc.sort(key=lambda p: p.inv_hbar)
    c = [math.cos(0.5 * p.extra["S_C"] * p.inv_hbar) for p in sc]
    hit = set()
    for i in range(len(sc) - 1):
        if c[i] == 0 or c[i] * c[i + 1] < 0:
            hit.add(i if abs(c[i]) <= abs(c[i + 1]) else i + 1)
    marked = {id(sc[i]) for i in hit}
    out = []
    for p in points:
        if id(p) in marked and not p.error_code:
            p = dataclasses.replace(p, error_code="resonance_flag")
        out.append(p)
    return out


def fitted_slope(points) -> float:
    """Least-squares slope of log(delta_E) against 1/hbar over finite rows."""
    xs = np.array([p.inv_hbar for p in points if p.delta_E > 0 and math.isfinite(p.delta_E)])
    ys = np.array([math.log(p.delta_E) for p in points if p.delta_E > 0 and math.isfinite(p.delta_E)])
    if len(xs) < 2:
        return math.nan
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# normal-form island doublets
# ---------------------------------------------------------------------------


def nf_island_point(model: Model, n: int, E=NF_ENERGY, tol: float = 1e-14, max_iter: int = 12) -> SplittingPoint:
    """Exact doublet of the n-th inner-island level, at the 1/hbar placing its mean at E.

    The doublet energies drift with hbar, so 1/hbar is adjusted by secant
    iteration starting from S_in = (n + 1/2) 2 pi hbar.
    """
    from .qref.spectrum import diagonalize, splitting_at_energy

    E = float(E)
    S_in = well_action(model, "in", E)
    x = (n + 0.5) * 2 * math.pi / S_in
    size = int(1.8 * x) + 200
    window = 0.5 * E
    xs, fs = [], []
    for _ in range(max_iter):
        spec = diagonalize(model, 1 / x, basis_size=size, energy=E, window=window, auto=False)
        p = splitting_at_energy(spec, E, refine=False)
        f = p.mean_energy - E
        xs.append(x)
        fs.append(f)
        if abs(f) < tol:
            break
        if len(xs) < 2:
            x = x * (1 + 20 * f)
        else:
            x = xs[-1] - fs[-1] * (xs[-1] - xs[-2]) / (fs[-1] - fs[-2])
    spec = diagonalize(model, 1 / x, basis_size=size, energy=E, window=window, auto=False)
    p = splitting_at_energy(spec, E)
    extra = dict(p.extra)
    extra.update({"n": n, "basis_size": size, "mean_offset": p.mean_energy - E})
    return SplittingPoint(x, p.delta_E, "exact", "", p.sign_flag, p.mean_energy, p.error_code, extra)
