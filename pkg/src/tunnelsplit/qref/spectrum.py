"""Exact quantum reference: parity-resolved spectra, tunnelling doublets and
the trace-ratio estimate of the splitting."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.linalg import eig_banded

from ..errors import (
    NonConvergence,
    ConvergenceWarning,
    NoDoubletNearTarget,
    NonSymmetricModel,
    ValidityViolation,
)
from ..models import Model
from .operators import (
    GridSpec,
    fock_blocks,
    grid_blocks,
    grid_parity_vectors,
)
from .refine import MP_LOCK, rayleigh_refine

log = logging.getLogger(__name__)

GRID_PADDING = 2.0
FOCK_START = 400
FOCK_CAP = 1600
DOUBLET_RATIO = 0.25


@dataclass(frozen=True)
class QuantumSpectrum:
    hbar: float
    energies_plus: np.ndarray
    energies_minus: np.ndarray
    basis: str  # grid | oscillator
    basis_size: int
    convergence_estimate: float
    model: Model = field(repr=False, default=None)
    grid: GridSpec | None = None
    vectors_plus: np.ndarray | None = field(repr=False, default=None)
    vectors_minus: np.ndarray | None = field(repr=False, default=None)
    all_eigenpairs: bool = False

    def blocks(self, mp: bool = False):
        """The even/odd parity blocks in lower-band storage."""
        return _blocks(self.model, self.hbar, self.basis, self.basis_size, self.grid, mp)

    def levels(self) -> list[tuple[int, str, float]]:
        """(index, parity, energy) rows sorted by energy."""
        rows = [(e, "+") for e in self.energies_plus] + [(e, "-") for e in self.energies_minus]
        rows.sort()
        return [(i, par, float(e)) for i, (e, par) in enumerate(rows)]

    def to_csv(self) -> str:
        lines = ["index,parity,energy"]
        for i, par, e in self.levels():
            lines.append(f"{i},{par},{e:.17g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SplittingPoint:
    inv_hbar: float
    delta_E: float
    source: str  # semiclassical | exact | trace_ratio
    variant: str = ""
    sign_flag: int = 1
    mean_energy: float = float("nan")
    error_code: str = ""
    extra: dict = field(default_factory=dict, compare=False, repr=False)


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------


def _check_symmetric(model: Model):
    if not model.symmetric:
        raise NonSymmetricModel("H(p, q) != H(-p, -q): parity sectors are not defined")


def _blocks(model, hbar, basis, size, grid, mp):
    if basis == "grid":
        return grid_blocks(model.potential, hbar, grid, mp=mp)
    even, odd, _ = fock_blocks(model.hamiltonian, hbar, size, mp=mp)
    return [even, odd]


def default_grid(model: Model, hbar: float, energy: float | None = None, resolution: float = 0.35):
    """Symmetric grid covering the outer turning points at ``energy`` plus padding."""
    E = model.reference_energy if energy is None else energy
    tp = model.turning_points(E)
    if not tp:
        mins, _ = model.critical_points()
        tp = [min(mins), max(mins)]
    L = max(abs(tp[0]), abs(tp[-1])) + GRID_PADDING
    xs = np.linspace(-L, L, 2001)
    vmin = float(np.min(model.V(xs)))
    pmax = math.sqrt(max(2 * (float(E) - vmin), 1e-12))
    # fourth-order stencil: h p / hbar ~ resolution
    n = int(math.ceil(L * pmax / (resolution * hbar)))
    return GridSpec(max(32, n), L)


def _solve_block(band, select, vectors):
    kw = dict(lower=True, eigvals_only=not vectors, check_finite=False)
    if select is None:
        out = eig_banded(band, select="a", **kw)
    elif select[0] == "i":
        lo, hi = select[1]
        hi = min(hi, band.shape[1] - 1)
        out = eig_banded(band, select="i", select_range=(lo, hi), **kw)
    else:
        out = eig_banded(band, select="v", select_range=select[1], **kw)
    if vectors:
        return out[0], out[1]
    return out, None


def _diag_once(model, hbar, basis, size, grid, select, vectors):
    even, odd = _blocks(model, hbar, basis, size, grid, mp=False)
    ep, vp = _solve_block(even, select, vectors)
    em, vm = _solve_block(odd, select, vectors)
    return ep, em, vp, vm


def diagonalize(
    model: Model,
    hbar: float,
    basis_size: int | None = None,
    basis: str = "auto",
    energy: float | None = None,
    n_levels: int = 8,
    window: float | None = None,
    vectors: bool = False,
    tol: float = 1e-4,
    auto: bool | None = None,
    all_levels: bool = False,
) -> QuantumSpectrum:
    """Parity-resolved spectrum of the quantised Hamiltonian.

    Potential models use fourth-order finite differences on a mirror-symmetric
    grid (``basis_size`` = number of grid points); other models use the
    Weyl-ordered Hamiltonian in the oscillator (Fock) basis. Without an
    explicit ``basis_size`` the size is doubled until the tracked levels move
    less than ``tol`` relative (grid) or the Fock cap is reached.

    Levels: the lowest ``n_levels`` per parity, or those within ``window`` of
    ``energy`` when both are given.
    """
    _check_symmetric(model)
    if basis == "auto":
        basis = "grid" if model.is_potential and model.kind != "potential" else "oscillator"
    if basis_size is not None and basis_size < 64:
        raise ValueError("basis_size must be at least 64")
    if auto is None:
        auto = basis_size is None
    if all_levels and auto:
        # size the basis on the tracked levels, then take the full eigensystem once
        sized = diagonalize(model, hbar, None, basis, energy, n_levels, window, False, tol, True, False)
        return diagonalize(model, hbar, sized.basis_size, sized.basis, energy, all_levels=True, auto=False)
    if energy is not None and window is not None:
        select = ("v", (energy - window, energy + window))
    else:
        select = ("i", (0, n_levels - 1))
    if all_levels:
        select = None
        vectors = True

    def build(size):
        if basis == "grid":
            g = default_grid(model, hbar, energy if energy is not None else None)
            if size is not None:
                g = GridSpec(size // 2, g.half_width)
            return g.half_points * 2, g
        return (size if size is not None else FOCK_START), None

    size, grid = build(basis_size)
    ep, em, vp, vm = _diag_once(model, hbar, basis, size, grid, select, vectors)
    conv = float("nan")
    if auto:
        for _ in range(6):
            size2 = 2 * size
            if basis == "oscillator" and size2 > FOCK_CAP:
                break
            grid2 = GridSpec(size2 // 2, grid.half_width) if grid is not None else None
            ep2, em2, vp2, vm2 = _diag_once(model, hbar, basis, size2, grid2, select, vectors)
            k = min(len(ep), len(ep2), len(em), len(em2))
            if k == 0:
                size, grid, ep, em, vp, vm = size2, grid2, ep2, em2, vp2, vm2
                continue
            moved = max(
                np.max(np.abs(ep2[:k] - ep[:k])), np.max(np.abs(em2[:k] - em[:k]))
            )
            scale = max(1e-300, float(np.max(np.abs(np.concatenate([ep2[:k], em2[:k]])))))
            size, grid, ep, em, vp, vm = size2, grid2, ep2, em2, vp2, vm2
            conv = float(moved)
            if moved <= tol * scale:
                break
        else:
            warnings.warn("basis doubling did not converge the target levels", ConvergenceWarning)
    return QuantumSpectrum(
        hbar=hbar,
        energies_plus=np.asarray(ep),
        energies_minus=np.asarray(em),
        basis=basis,
        basis_size=size,
        convergence_estimate=conv,
        model=model,
        grid=grid,
        vectors_plus=vp,
        vectors_minus=vm,
        all_eigenpairs=select is None,
    )


# ---------------------------------------------------------------------------
# doublets
# ---------------------------------------------------------------------------


def find_doublets(spec: QuantumSpectrum):
    """Mutually nearest (even, odd) pairs whose splitting is small compared
    with the level spacing inside each parity block."""
    ep = np.sort(spec.energies_plus)
    em = np.sort(spec.energies_minus)
    out = []
    if len(ep) == 0 or len(em) == 0:
        return out
    for i, e in enumerate(ep):
        j = int(np.argmin(np.abs(em - e)))
        o = em[j]
        i_back = int(np.argmin(np.abs(ep - o)))
        if i_back != i:
            continue
        gaps = []
        if i > 0:
            gaps.append(e - ep[i - 1])
        if i + 1 < len(ep):
            gaps.append(ep[i + 1] - e)
        if j > 0:
            gaps.append(o - em[j - 1])
        if j + 1 < len(em):
            gaps.append(em[j + 1] - o)
        spacing = min(gaps) if gaps else np.inf
        if abs(o - e) < DOUBLET_RATIO * spacing:
            out.append((i, j, float(e), float(o), float(spacing)))
    return out


def splitting_at_energy(
    spec: QuantumSpectrum,
    E_target: float,
    refine: str | bool = "auto",
    dps: int | None = None,
) -> SplittingPoint:
    """Doublet whose mean is nearest E_target; |E- - E+| with the sign flag.

    With ``refine`` the two members are recomputed by multiprecision
    Rayleigh-quotient iteration on the same discretised blocks (needed once
    the splitting drops below double-precision resolution).
    """
    dbl = find_doublets(spec)
    if not dbl:
        raise NoDoubletNearTarget("spectrum contains no tunnelling doublets")
    best = min(dbl, key=lambda t: abs(0.5 * (t[2] + t[3]) - E_target))
    i, j, e, o, spacing = best
    mean = 0.5 * (e + o)
    if abs(mean - E_target) > 5 * spacing:
        raise NoDoubletNearTarget(
            f"nearest doublet at {mean:.6g} is more than 5 level spacings from {E_target:.6g}"
        )
    dE = o - e
    resolved = abs(dE) > 1e-7 * max(spacing, 1e-300) and abs(dE) > 1e-11 * max(1.0, abs(mean))
    extra = {"spacing": spacing, "refined": False}
    if refine is True or (refine == "auto" and not resolved):
        e, o = refine_doublet(spec, i, j, e, o, spacing, dps)
        dE = o - e
        extra["refined"] = True
    return SplittingPoint(
        inv_hbar=1.0 / spec.hbar,
        delta_E=abs(float(dE)) if not isinstance(dE, mpmath.mpf) else float(abs(dE)),
        source="exact",
        sign_flag=1 if dE >= 0 else -1,
        mean_energy=float(mean),
        extra=extra | {"E_plus": e, "E_minus": o},
    )


def _block_vector(spec, parity, target):
    """Double-precision eigenpair of the given parity block nearest ``target``."""
    band = spec.blocks(mp=False)[0 if parity > 0 else 1]
    d = 1e-6 * (1 + abs(target))
    w, v = eig_banded(band, lower=True, select="v", select_range=(target - d, target + d))
    if len(w) == 0:
        w, v = eig_banded(band, lower=True)
    k = int(np.argmin(np.abs(w - target)))
    return w[k], v[:, k]


def refine_doublet(spec, i, j, e, o, spacing, dps=None, max_dps=1200):
    """Both doublet members to multiprecision on the same discretisation.

    The working precision is raised until the splitting is resolved with at
    least 12 significant digits to spare.
    """
    ev, xv = _block_vector(spec, +1, e)
    ov, xo = _block_vector(spec, -1, o)
    # a lone doublet in a narrow window has infinite spacing
    scale = max(abs(e), abs(o), spacing if math.isfinite(spacing) else 0.0, 1e-300)
    dps = dps or 40
    while True:
        with MP_LOCK, mpmath.workdps(dps):
            even, odd = spec.blocks(mp=True)
            lam_e, _, _ = rayleigh_refine(even, xv, ev, dps=dps)
            lam_o, _, _ = rayleigh_refine(odd, xo, ov, dps=dps)
            dE = lam_o - lam_e
            if dE != 0 and abs(dE) > mpmath.mpf(10) ** (12 - dps) * scale:
                return lam_e, lam_o
            if dps >= max_dps:
                raise NonConvergence(f"splitting unresolved at {dps} digits")
            if dE != 0:
                need = int(-mpmath.log10(abs(dE) / scale)) + 30
                dps = max(need, 2 * dps)
            else:
                dps *= 2
            dps = min(dps, max_dps)


# ---------------------------------------------------------------------------
# trace-ratio estimator
# ---------------------------------------------------------------------------


def _full_eigensystem(spec: QuantumSpectrum):
    even, odd = spec.blocks(mp=False)
    we, ve = eig_banded(even, lower=True)
    wo, vo = eig_banded(odd, lower=True)
    return we, ve, wo, vo


def _embed(spec, ve, vo):
    """Block eigenvectors in a common full basis plus the parity operator diagonal."""
    if spec.basis == "grid":
        Ve = grid_parity_vectors(spec.grid, ve, +1)
        Vo = grid_parity_vectors(spec.grid, vo, -1)
        n = spec.grid.half_points
        # parity q -> -q reverses the full grid
        S = None
        return Ve, Vo, S, "reverse"
    N = spec.basis_size
    Ve = np.zeros((N, ve.shape[1]), dtype=ve.dtype)
    Vo = np.zeros((N, vo.shape[1]), dtype=vo.dtype)
    Ve[0::2] = ve
    Vo[1::2] = vo
    S = np.where(np.arange(N) % 2 == 0, 1.0, -1.0)
    return Ve, Vo, S, "diag"


def trace_ratio_splitting(
    spec_or_model,
    hbar: float | None = None,
    n: int = 0,
    T_complex: complex = None,
    basis_size: int | None = None,
    E_target: float | None = None,
) -> complex:
    """(2 hbar / iT) Tr(S Pi_n U) / Tr(Pi_n U) with U = exp(-i (H - Ebar) T / hbar).

    Pi_n projects on the n-th doublet (or the doublet nearest E_target);
    both traces use the full propagator of the truncated basis, applied to
    the doublet vectors through the complete eigen-decomposition.
    """
    if isinstance(spec_or_model, QuantumSpectrum):
        spec = spec_or_model
        if not spec.all_eigenpairs:
            spec = diagonalize(spec.model, spec.hbar, spec.basis_size, spec.basis, all_levels=True, auto=False)
    else:
        spec = diagonalize(spec_or_model, hbar, basis_size, all_levels=True, auto=basis_size is None)
        if basis_size is None:
            spec = diagonalize(spec_or_model, hbar, spec.basis_size, spec.basis, all_levels=True, auto=False)
    hbar = spec.hbar
    we, ve, wo, vo = _full_eigensystem(spec)
    dbl = find_doublets(
        QuantumSpectrum(hbar, we, wo, spec.basis, spec.basis_size, 0.0, spec.model, spec.grid)
    )
    if not dbl:
        raise NoDoubletNearTarget("no doublets for the trace-ratio estimate")
    if E_target is not None:
        i, j, e, o, spacing = min(dbl, key=lambda t: abs(0.5 * (t[2] + t[3]) - E_target))
    else:
        i, j, e, o, spacing = dbl[n]
    # eigenvalue arrays were sorted; find the matching indices
    ie = int(np.argmin(np.abs(we - e)))
    jo = int(np.argmin(np.abs(wo - o)))
    dE_direct = o - e
    T = complex(T_complex)
    if abs(T) * abs(dE_direct) / (2 * hbar) >= 0.1:
        raise ValidityViolation(
            f"|T| dE / 2 hbar = {abs(T) * abs(dE_direct) / (2 * hbar):.3g} >= 0.1"
        )
    Ebar = 0.5 * (e + o)
    Ve, Vo, S, mode = _embed(spec, ve, vo)
    V = np.concatenate([Ve, Vo], axis=1)
    lam = np.concatenate([we, wo])
    phase = np.exp(-1j * (lam - Ebar) * T / hbar)
    num = 0j
    den = 0j
    for vec in (Ve[:, ie], Vo[:, jo]):
        c = V.T.conj() @ vec
        Uv = V @ (phase * c)
        Sv = vec[::-1] if mode == "reverse" else S * vec
        # Tr(S Pi U) = sum_v <v| U S |v>, Tr(Pi U) = sum_v <v| U |v>
        cS = V.T.conj() @ Sv
        USv = V @ (phase * cS)
        num += np.vdot(vec, USv)
        den += np.vdot(vec, Uv)
    return complex((2 * hbar / (1j * T)) * num / den)
