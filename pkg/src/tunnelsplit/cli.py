"""Command-line driver.

    python -m tunnelsplit <command> --config run.json [--out DIR] [--threads N] [--tol X]

Commands: topology, actions, splitting, quantum, compare. Every run writes a
``manifest.json`` next to its data files. Data files contain no wall-clock
content, so an identical config gives byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curve import topology, topology_report
from .errors import (
    ConfigError,
    IntransitiveMonodromy,
    NonSymmetricModel,
    NumericalError,
    TunnelSplitError,
    UnsupportedModel,
    ValidityViolation,
)
from .models import NF_ENERGY, Model, custom, double_well, normal_form, normal_form_general, triple_well

log = logging.getLogger("tunnelsplit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VALIDITY = 4

MODELS = ("double_well", "triple_well", "normal_form", "custom_polynomial")
COMMANDS = ("topology", "actions", "splitting", "quantum", "compare")
CONFIG_KEYS = {
    "model",
    "parameters",
    "energy",
    "quantum_number",
    "hbar_grid",
    "variants",
    "sources",
    "output_dir",
    "tolerances",
    "threads",
    "winding_cutoff",
    "T",
}
GRID_KEYS = {"min", "max", "points", "spacing"}
TOL_KEYS = {"action", "relation", "quantum"}
DEFAULT_TOL = {"action": 1e-10, "relation": 1e-8, "quantum": 1e-4}


@dataclass
class RunConfig:
    model: str
    parameters: dict = field(default_factory=dict)
    energy: float | None = None
    quantum_number: int | None = None
    hbar_grid: dict | None = None
    variants: tuple = ("red", "blue")
    sources: tuple = ("semiclassical", "exact")
    output_dir: str | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOL))
    threads: int = 1
    winding_cutoff: int = 200
    T: float | None = None

    def inv_hbar_grid(self) -> np.ndarray:
        if self.hbar_grid is None:
            raise ConfigError("this command needs an hbar_grid")
        g = self.hbar_grid
        lo, hi, n = float(g["min"]), float(g["max"]), int(g["points"])
        if n == 1:
            return np.array([lo])
        if g.get("spacing", "linear") == "geometric":
            return np.geomspace(lo, hi, n)
        return np.linspace(lo, hi, n)

    def normalized(self) -> dict:
        return {
            "model": self.model,
            "parameters": self.parameters,
            "energy": self.energy,
            "quantum_number": self.quantum_number,
            "hbar_grid": self.hbar_grid,
            "variants": list(self.variants),
            "sources": list(self.sources),
            "tolerances": self.tolerances,
            "winding_cutoff": self.winding_cutoff,
            "T": self.T,
        }


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded JSON config. Raises ConfigError on any problem."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    model = data.get("model")
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    has_e = data.get("energy") is not None
    has_n = data.get("quantum_number") is not None
    if has_e == has_n:
        raise ConfigError("supply exactly one of energy / quantum_number")
    cfg = RunConfig(model=model, parameters=dict(data.get("parameters") or {}))
    if has_e:
        e = data["energy"]
        if not isinstance(e, (int, float, str)) or isinstance(e, bool):
            raise ConfigError("energy must be a number")
        cfg.energy = e
    else:
        n = data["quantum_number"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise ConfigError("quantum_number must be a non-negative integer")
        if model == "normal_form":
            raise ConfigError("the normal form is addressed by energy, not quantum number")
        cfg.quantum_number = n
    if data.get("hbar_grid") is not None:
        g = data["hbar_grid"]
        if not isinstance(g, dict) or set(g) - GRID_KEYS or not {"min", "max", "points"} <= set(g):
            raise ConfigError("hbar_grid needs min, max, points (1/hbar values) and optional spacing")
        try:
            lo, hi, n = float(g["min"]), float(g["max"]), int(g["points"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad hbar_grid: {exc}") from None
        if lo <= 0 or n < 1 or (n > 1 and hi <= lo):
            raise ConfigError("hbar_grid must be positive and strictly increasing in 1/hbar")
        if g.get("spacing", "linear") not in ("linear", "geometric"):
            raise ConfigError("hbar_grid spacing must be linear or geometric")
        cfg.hbar_grid = dict(g)
    for key in ("variants", "sources"):
        if key in data:
            v = data[key]
            if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
                raise ConfigError(f"{key} must be a list of strings")
            setattr(cfg, key, tuple(v))
    if set(cfg.variants) - {"red", "blue"}:
        raise ConfigError("variants must be drawn from red, blue")
    if set(cfg.sources) - {"semiclassical", "exact", "trace_ratio"}:
        raise ConfigError("sources must be drawn from semiclassical, exact, trace_ratio")
    if "tolerances" in data:
        t = data["tolerances"]
        if not isinstance(t, dict) or set(t) - TOL_KEYS:
            raise ConfigError(f"tolerances keys must be among {sorted(TOL_KEYS)}")
        cfg.tolerances.update({k: float(v) for k, v in t.items()})
    if "output_dir" in data:
        cfg.output_dir = str(data["output_dir"])
    if "threads" in data:
        cfg.threads = int(data["threads"])
    if "winding_cutoff" in data:
        cfg.winding_cutoff = int(data["winding_cutoff"])
    if data.get("T") is not None:
        cfg.T = float(data["T"])
    # building the model validates the parameters
    build_model(cfg)
    return cfg


def build_model(cfg: RunConfig) -> Model:
    p = cfg.parameters
    try:
        if cfg.model == "double_well":
            _only(p, {"roots"})
            return double_well(tuple(p.get("roots", (-2, -1, 1, 2))))
        if cfg.model == "triple_well":
            _only(p, {"roots"})
            return triple_well(tuple(p.get("roots", (-3, -2, -1, 1, 2, 3))))
        if cfg.model == "normal_form":
            _only(p, {"a", "b"})
            if not p:
                return normal_form()
            b = {(int(l), int(m)): c for l, m, c in p.get("b", [])}
            return normal_form_general(list(p.get("a", [0.5, -0.5])), b)
        _only(p, {"coefficients"})
        terms = p.get("coefficients")
        if not terms:
            raise ConfigError("custom_polynomial needs parameters.coefficients = [[i, j, c], ...] for c p^i q^j")
        return custom({(int(i), int(j)): c for i, j, c in terms})
    except ConfigError:
        raise
    except (TypeError, ValueError, TunnelSplitError) as exc:
        raise ConfigError(f"bad parameters for {cfg.model}: {exc}") from None


def _only(p, allowed):
    extra = set(p) - allowed
    if extra:
        raise ConfigError(f"unknown parameters: {sorted(extra)}")


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# energy resolution
# ---------------------------------------------------------------------------


def _energy(cfg: RunConfig, model: Model):
    if cfg.energy is not None:
        if model.kind == "normal_form" and float(cfg.energy) == float(NF_ENERGY):
            return NF_ENERGY
        return cfg.energy
    from .semicl import quantize_well

    if cfg.hbar_grid is None:
        raise ConfigError("quantum_number needs an hbar_grid to fix hbar")
    hbar = 1.0 / float(cfg.inv_hbar_grid()[0])
    return quantize_well(model, None, cfg.quantum_number, hbar).energy


def _c(z: complex) -> str:
    z = complex(z)
    return f"{z.real:.17g}{z.imag:+.17g}j"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_topology(cfg: RunConfig, out: Path, tol: float, threads: int) -> tuple[int, dict]:
    model = build_model(cfg)
    E = _energy(cfg, model)
    F = model.curve(E)
    status = EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntransitiveMonodromy)
        top = topology(F)
    text = topology_report(top)
    head = (
        f"model: {model.name or model.kind}\nenergy: {float(E):.17g}\n"
        f"summary: d={top.sheet_count}, w={len(top.branch_points)}, genus: {top.genus}, holes: {top.holes}\n"
    )
    for w in caught:
        if issubclass(w.category, IntransitiveMonodromy):
            head += f"warning: intransitive monodromy: {w.message}\n"
            log.warning("intransitive monodromy: %s", w.message)
            status = EXIT_VALIDITY
    (out / "topology.txt").write_text(head + text)
    info = {
        "sheets": top.sheet_count,
        "branch_points": len(top.branch_points),
        "genus": top.genus,
        "holes": top.holes,
        "anchor": _c(top.anchor),
        "base_point": _c(top.base_point),
    }
    return status, info


def cmd_actions(cfg: RunConfig, out: Path, tol: float, threads: int) -> tuple[int, dict]:
    from .homology import evaluate_catalog, relations_report, simultaneous_quantization_check, verify_relations

    model = build_model(cfg)
    if model.kind not in ("double_well", "triple_well", "normal_form"):
        raise UnsupportedModel(f"no action catalog for model {cfg.model}")
    E = _energy(cfg, model)
    cat = evaluate_catalog(model, E, tol=tol)
    rels = verify_relations(cat, cfg.tolerances["relation"])
    lines = [f"model: {cat.model}", f"energy: {float(E):.17g}", "", "actions:"]
    for kind, name, v in cat.rows():
        lines.append(f"  {kind:7s} {name:22s} {_c(v)}")
    lines += ["", "relations:", relations_report(rels)]
    if model.kind in ("double_well", "triple_well") and cfg.hbar_grid is not None:
        lines.append("simultaneous quantization:")
        for x in cfg.inv_hbar_grid():
            r = simultaneous_quantization_check(cat, 1.0 / x)
            lines.append(
                f"  inv_hbar={x:.17g} m_L={r.m_L:.12g} m_inf={r.m_inf:.12g} m_R={r.m_R:.12g} status={r.status}"
            )
    (out / "actions.txt").write_text("\n".join(lines) + "\n")
    csv = ["kind,name,re,im"] + [f"{k},{n},{v.real:.17g},{v.imag:.17g}" for k, n, v in cat.rows()]
    (out / "actions.csv").write_text("\n".join(csv) + "\n")
    failed = [r.name for r in rels if not r.passed]
    info = {"relations_failed": failed, "actions": len(cat.actions)}
    return EXIT_OK, info


def _series(cfg, model, tol, threads, sources):
    from .semicl import sweep

    E = None
    N = cfg.quantum_number
    if cfg.energy is not None:
        E = _energy(cfg, model)
        N = None
    opts = {"tol": cfg.tolerances["quantum"]}
    return sweep(
        model,
        cfg.inv_hbar_grid(),
        sources=sources,
        variants=cfg.variants,
        N=N,
        E=E,
        T=cfg.T,
        winding_cutoff=cfg.winding_cutoff,
        threads=threads,
        exact_opts=opts,
    )


def _series_status(series) -> int:
    codes = {p.error_code for p in series.points if p.error_code and p.error_code != "resonance_flag"}
    if not codes:
        return EXIT_OK
    if {"ValidityViolation", "NonSymmetricModel"} & codes:
        return EXIT_VALIDITY
    return EXIT_NUMERIC


def cmd_splitting(cfg: RunConfig, out: Path, tol: float, threads: int) -> tuple[int, dict]:
    model = build_model(cfg)
    series = _series(cfg, model, tol, threads, cfg.sources)
    (out / "splitting.csv").write_text(series.to_csv())
    return _series_status(series), {"points": len(series.points), "settings": series.settings}


def cmd_quantum(cfg: RunConfig, out: Path, tol: float, threads: int) -> tuple[int, dict]:
    from .qref.spectrum import diagonalize

    model = build_model(cfg)
    if not model.symmetric:
        raise NonSymmetricModel("quantum reference needs H(p, q) = H(-p, -q)")
    sizes = {}
    for k, x in enumerate(cfg.inv_hbar_grid()):
        spec = diagonalize(model, 1.0 / x, tol=cfg.tolerances["quantum"])
        (out / f"spectrum_{k:03d}.csv").write_text(spec.to_csv())
        sizes[f"{x:.17g}"] = {"basis": spec.basis, "basis_size": spec.basis_size}
    series = _series(cfg, model, tol, threads, ("exact",))
    (out / "splitting.csv").write_text(series.to_csv())
    return _series_status(series), {"basis_sizes": sizes}


def cmd_compare(cfg: RunConfig, out: Path, tol: float, threads: int) -> tuple[int, dict]:
    from .semicl import fitted_slope

    model = build_model(cfg)
    sources = tuple(dict.fromkeys(("semiclassical", "exact") + tuple(cfg.sources)))
    series = _series(cfg, model, tol, threads, sources)
    (out / "compare.csv").write_text(series.to_csv())
    groups = sorted({(p.source, p.variant) for p in series.points})
    lines = ["fitted slopes of log|delta_E| against 1/hbar:"]
    slopes = {}
    for src, var in groups:
        pts = [p for p in series.select(src, var) if math.isfinite(p.delta_E) and p.delta_E > 0]
        s = fitted_slope(pts) if len(pts) >= 2 else float("nan")
        slopes[f"{src}/{var}" if var else src] = s
        lines.append(f"  {src:14s} {var or '-':5s} {s:.12g}")
    exact = {p.inv_hbar: p.delta_E for p in series.select("exact")}
    lines.append("ratio semiclassical / exact:")
    for src, var in groups:
        if src != "semiclassical":
            continue
        for p in series.select(src, var):
            e = exact.get(p.inv_hbar)
            r = p.delta_E / e if e and math.isfinite(p.delta_E) and math.isfinite(e) else float("nan")
            lines.append(f"  inv_hbar={p.inv_hbar:.17g} {var or '-':5s} ratio={r:.6g} {p.error_code}")
    (out / "compare.txt").write_text("\n".join(lines) + "\n")
    return _series_status(series), {"slopes": {k: f"{v:.12g}" for k, v in slopes.items()}}


HANDLERS = {
    "topology": cmd_topology,
    "actions": cmd_actions,
    "splitting": cmd_splitting,
    "quantum": cmd_quantum,
    "compare": cmd_compare,
}


def _conventions(model: Model) -> dict:
    return {
        "anchor_sheet": "sheet values sorted by (Re, Im) at the base point; loops start on the recorded sheet",
        "orientation": "alpha loops oriented so Re S > 0, beta loops so Im S > 0; loops at infinity clockwise",
        "delta_E": "E_minus - E_plus, magnitude in delta_E, sign in sign_flag",
        "operator_ordering": "Weyl" if not model.is_potential else "finite differences, fourth order",
        "inv_hbar": "grid values are 1/hbar",
    }


def write_manifest(out: Path, command: str, cfg: RunConfig, model: Model, tol: float, threads: int, status: int, info: dict):
    man = {
        "tool": "tunnelsplit",
        "version": __version__,
        "command": command,
        "config": cfg.normalized(),
        "tolerances": dict(cfg.tolerances, action=tol),
        "threads_requested": threads,
        "conventions": _conventions(model),
        "exit_code": status,
        "result": info,
    }
    # threads do not influence data, so they stay out of the deterministic part
    (out / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True, default=str) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tunnelsplit", description="Tunnelling splittings from complex actions.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads for sweeps")
        sp.add_argument("--tol", type=float, default=None, help="integration tolerance for actions")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.output_dir or ".")
        out.mkdir(parents=True, exist_ok=True)
        threads = args.threads if args.threads is not None else cfg.threads
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        tol = args.tol if args.tol is not None else cfg.tolerances["action"]
        if not tol > 0:
            raise ConfigError("--tol must be positive")
        model = build_model(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status, info = HANDLERS[args.command](cfg, out, tol, threads)
    except (ConfigError, UnsupportedModel) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidityViolation, NonSymmetricModel) as exc:
        print(f"validity violation: {exc}", file=sys.stderr)
        status, info = EXIT_VALIDITY, {"error": f"{type(exc).__name__}: {exc}"}
    except (NumericalError, TunnelSplitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status, info = EXIT_NUMERIC, {"error": f"{type(exc).__name__}: {exc}"}
    write_manifest(out, args.command, cfg, model, tol, threads, status, info)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
