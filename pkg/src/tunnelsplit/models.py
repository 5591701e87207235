"""Model Hamiltonians: multi-well potentials p^2/2 + V(q) and the two-parameter
family of normal-form Hamiltonians built from powers of p^2 + q^2."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import EnergyOutOfRange, UnsupportedModel
from .polyalg import BivariatePolynomial, ComplexPoly, root_clusters

P = BivariatePolynomial.var_p()
Q = BivariatePolynomial.var_q()

NF_ENERGY = Fraction(619, 100000)


def _exact(x):
    """Keep ints/Fractions exact; turn floats into exact binary fractions only if asked."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return x


def _exact_root(x):
    # float roots are read as the decimal they print as, so 1.3 -> 13/10;
    # this keeps symmetric root sets exactly symmetric
    if isinstance(x, float) and math.isfinite(x):
        return Fraction(repr(x))
    return _exact(x)


@dataclass(frozen=True)
class Model:
    """A one-dimensional polynomial Hamiltonian H(p, q).

    kind: double_well | triple_well | potential | normal_form | custom
    For potential-type models ``potential`` holds V(q) and H = p^2/2 + V.
    """

    kind: str
    hamiltonian: BivariatePolynomial
    potential: ComplexPoly | None = None
    roots: tuple | None = None
    reference_energy: float = 0.0
    name: str = ""

    @property
    def is_potential(self) -> bool:
        return self.potential is not None

    def curve(self, E) -> BivariatePolynomial:
        """F(p, q) = H(p, q) - E."""
        return self.hamiltonian - _exact(E)

    @property
    def symmetric(self) -> bool:
        """H(p, q) == H(-p, -q)."""
        return self.hamiltonian.swap_sign_symmetric()

    @property
    def mirror_symmetric(self) -> bool:
        """H(p, q) == H(p, -q) (the parity used by the grid basis)."""
        return all(j % 2 == 0 for (i, j) in self.hamiltonian.terms())

    # -- potentials ---------------------------------------------------------
    def V(self, q):
        return self.potential(q).real if self.potential is not None else None

    def turning_points(self, E) -> list[float]:
        """Real zeros of V - E (potential models), sorted."""
        if self.potential is None:
            raise UnsupportedModel("turning points need a potential model")
        cl = root_clusters(self.potential - _exact(E), 1e-14)
        pts = sorted(z.real for z, m in cl for _ in range(m) if abs(z.imag) < 1e-9 * (1 + abs(z)))
        return pts

    def wells(self, E) -> list[tuple[float, float]]:
        """Classically allowed intervals at energy E, left to right."""
        tp = self.turning_points(E)
        out = []
        for a, b in zip(tp[:-1], tp[1:]):
            if self.V(0.5 * (a + b)) < float(E):
                out.append((a, b))
        return out

    def barriers(self, E) -> list[tuple[float, float]]:
        tp = self.turning_points(E)
        out = []
        for a, b in zip(tp[:-1], tp[1:]):
            if self.V(0.5 * (a + b)) > float(E):
                out.append((a, b))
        return out

    def well_names(self) -> list[str]:
        if self.kind == "double_well":
            return ["L", "R"]
        if self.kind == "triple_well":
            return ["L", "C", "R"]
        if self.kind == "normal_form":
            return ["in", "out"]
        return [f"W{i}" for i in range(len(self.critical_points()[0]))]

    def critical_points(self):
        """Local minima and maxima of V on the real axis."""
        dV = self.potential.derivative()
        crit = sorted(
            z.real for z, _ in root_clusters(dV, 1e-14) if abs(z.imag) < 1e-9 * (1 + abs(z))
        )
        d2 = dV.derivative()
        mins = [x for x in crit if d2(x).real > 0]
        maxs = [x for x in crit if d2(x).real < 0]
        return mins, maxs

    def well_energy_range(self, well: str) -> tuple[float, float]:
        """Open energy interval on which the named well exists as a closed orbit."""
        if self.kind == "normal_form":
            return (0.0, 1.0 / 16.0)
        mins, maxs = self.critical_points()
        names = self.well_names()
        i = names.index(well)
        x = mins[i]
        vmin = self.V(x)
        left = [m for m in maxs if m < x]
        right = [m for m in maxs if m > x]
        tops = [self.V(m) for m in (left[-1:] + right[:1])]
        top = min(tops) if tops else np.inf
        return (float(vmin), float(top))

    def well_interval(self, well: str, E) -> tuple[float, float]:
        """Turning points bounding the named well at energy E."""
        lo, hi = self.well_energy_range(well)
        if not lo < float(E) < hi:
            raise EnergyOutOfRange(f"E={float(E)} outside well {well!r} range", (lo, hi))
        mins, _ = self.critical_points()
        x = mins[self.well_names().index(well)]
        for a, b in self.wells(E):
            if a < x < b:
                return a, b
        raise EnergyOutOfRange(f"well {well!r} not found at E={float(E)}", (lo, hi))


def multiwell(roots: Sequence, reference_energy=0, kind: str | None = None) -> Model:
    """H = p^2/2 + E_ref + prod (q - q_i): branch points sit at q_i when E = E_ref."""
    rts = tuple(_exact_root(r) for r in roots)
    n = len(rts)
    if n not in (4, 6) and kind is None:
        kind = "potential"
    if kind is None:
        kind = "double_well" if n == 4 else "triple_well"
    if list(rts) != sorted(rts):
        raise ValueError("roots must be given in increasing order")
    V = ComplexPoly.from_roots(rts) + _exact(reference_energy)
    H = P * P * Fraction(1, 2) + BivariatePolynomial.from_q_poly(V)
    return Model(kind, H, V, rts, reference_energy, name=f"{kind}{list(map(float, rts))}")


def double_well(roots=(-2, -1, 1, 2), reference_energy=0) -> Model:
    if len(roots) != 4:
        raise ValueError("double well needs four roots")
    return multiwell(roots, reference_energy, "double_well")


def triple_well(roots=(-3, -2, -1, 1, 2, 3), reference_energy=0) -> Model:
    if len(roots) != 6:
        raise ValueError("triple well needs six roots")
    return multiwell(roots, reference_energy, "triple_well")


def potential_model(coeffs: Sequence) -> Model:
    """H = p^2/2 + V(q), V given by ascending coefficients."""
    V = ComplexPoly([_exact(c) for c in coeffs])
    H = P * P * Fraction(1, 2) + BivariatePolynomial.from_q_poly(V)
    return Model("potential", H, V, None, 0.0, name="potential")


def harmonic_oscillator(omega=1) -> Model:
    w = _exact(omega)
    return potential_model([0, 0, w * w * Fraction(1, 2)])


def normal_form_general(a: Sequence, b: dict, shift: bool = True) -> Model:
    """H = sum_k a_k (p^2 + x^2)^k + sum b_lm x^l p^m with x = 1 - q^2 if ``shift``
    (x = q otherwise)."""
    x = (1 - Q * Q) if shift else Q
    r2 = P * P + x * x
    H = BivariatePolynomial([])
    for k, ak in enumerate(a, start=1):
        if ak != 0:
            H = H + (r2**k) * _exact(ak)
    for (l, m), c in b.items():
        if c != 0:
            H = H + (x**l) * (P**m) * _exact(c)
    return Model("normal_form" if shift else "custom", H, None, None, 0.0, name="normal_form")


def normal_form() -> Model:
    """H = (p^2 + x^2)/2 - (p^2 + x^2)^2/2 - 2 x^2 p^2, x = 1 - q^2."""
    return normal_form_general([Fraction(1, 2), Fraction(-1, 2)], {(2, 2): -2})


def custom(terms: dict, kind: str = "custom") -> Model:
    H = BivariatePolynomial.from_terms({k: _exact(v) for k, v in terms.items()})
    return Model(kind, H, None, None, 0.0, name="custom")
