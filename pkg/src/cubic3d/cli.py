"""Command-line front end.

Every subcommand reads an effective configuration built from built-in
defaults, an optional TOML file (``--config``) and command-line flags, in
that order of precedence.  Results are written as CSV (sequences) or JSON
(structured results) into ``--out``; each file starts with a header that
records the effective configuration.

Exit codes: 0 success, 1 computation failure (``diagnostics.json`` is
written), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import enum
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from ._kernel import BACKEND
from .errors import ConfigError, Cubic3dError
from .integrator import PlaneEvent, Tolerances, crossings, integrate, write_crossings_csv, write_trajectory_csv
from .systems import SystemDef, system_from_config

__all__ = ["RunConfig", "DEFAULTS", "load_config", "run", "main"]

COMMANDS = ("simulate", "equilibria", "manifold", "orbit", "lyapunov", "section", "scan", "bisect")

DEFAULTS: dict[str, dict[str, Any]] = {
    "system": {"family": "cubic2"},
    "tolerances": {"abs_tol": 1e-10, "rel_tol": 1e-10, "max_step": 1.0, "min_step": 1e-12,
                   "escape_radius": 10.0, "max_time": 2000.0},
    "output": {"out": ".", "stride": 1, "jobs": os.cpu_count() or 1},
    "simulate": {"seed": [1.2, 0.0, -1.5], "t0": 0.0, "t1": 200.0, "section_axis": "", "section_value": 0.0},
    "equilibria": {},
    "manifold": {"point": "p1", "stability": "unstable", "dim": 0, "branch": 0, "seeds": 8,
                 "radius": 1e-4, "seed_offset": 1e-6, "horizon": 200.0},
    "orbit": {"seed": [1.2, 0.0, -1.5], "transient": 300.0, "tail": 400.0, "search_time": 3000.0},
    "lyapunov": {"seed": [0.0, 0.0, 0.1], "t_total": 5000.0, "renorm_dt": 1.0, "transient": 200.0},
    "section": {"axis": "x", "value": 0.0, "n_seeds": 8, "transient": 300.0, "sample_time": 500.0,
                "cloud": False},
    "scan": {"from": 0.30, "to": 0.50, "step": 0.005},
    "bisect": {"kind": "rotation", "lo": None, "hi": None, "resolution": None},
}

BISECT_BRACKETS = {"rotation": (0.318, 0.32, 2e-4), "fate": (0.202, 0.3, 1e-3), "merge": (0.4, 0.5, 1e-3)}
CHOICES = {
    ("simulate", "section_axis"): ("", "x", "y", "z"),
    ("manifold", "stability"): ("stable", "unstable"),
    ("manifold", "branch"): (-1, 0, 1),
    ("manifold", "dim"): (0, 1, 2),
    ("section", "axis"): ("x", "y", "z"),
    ("bisect", "kind"): tuple(BISECT_BRACKETS),
}
POSITIVE = {
    ("simulate", "t1"), ("manifold", "radius"), ("manifold", "seed_offset"), ("manifold", "horizon"),
    ("orbit", "transient"), ("orbit", "tail"), ("orbit", "search_time"), ("lyapunov", "t_total"),
    ("lyapunov", "renorm_dt"), ("section", "sample_time"), ("scan", "step"), ("bisect", "resolution"),
    ("output", "stride"), ("output", "jobs"), ("manifold", "seeds"),
}
NONNEGATIVE = {("orbit", "transient"), ("lyapunov", "transient"), ("section", "transient")}


@dataclass(frozen=True)
class RunConfig:
    command: str
    system: SystemDef
    tolerances: Tolerances
    options: dict
    output: dict
    effective: dict

    @property
    def out(self) -> Path:
        return Path(self.output["out"])

    def header(self) -> dict:
        return {"build": build_id(), "command": self.command, "config": self.effective}

    def header_lines(self) -> list[str]:
        h = self.header()
        return [f"build: {h['build']}", f"command: {h['command']}",
                "config: " + json.dumps(h["config"], sort_keys=True, separators=(",", ":"))]


def build_id() -> str:
    return f"cubic3d {__version__} ({BACKEND} kernel)"


# -- configuration ------------------------------------------------------------

def _check_value(section: str, key: str, value, default):
    name = f"{section}.{key}"
    if default is None or isinstance(default, float):
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(name, f"expected a finite number, got {value!r}")
        value = float(value)
    elif isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected true/false, got {value!r}")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
    elif isinstance(default, list):
        if (not isinstance(value, (list, tuple)) or len(value) != 3
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) for v in value)):
            raise ConfigError(name, f"expected three finite numbers, got {value!r}")
        value = [float(v) for v in value]
    if (section, key) in CHOICES and value not in CHOICES[(section, key)]:
        raise ConfigError(name, f"must be one of {list(CHOICES[(section, key)])}, got {value!r}")
    if (section, key) in POSITIVE and not value > 0:
        raise ConfigError(name, f"must be positive, got {value!r}")
    if (section, key) in NONNEGATIVE and not value >= 0:
        raise ConfigError(name, f"must be non-negative, got {value!r}")
    return value


def _merge(base: dict, layer: Mapping, origin: str) -> None:
    for section, table in layer.items():
        if section not in base:
            raise ConfigError(section, f"unknown section in {origin}")
        if not isinstance(table, Mapping):
            raise ConfigError(section, f"expected a table in {origin}")
        for key, value in table.items():
            if value is None:
                continue
            if section != "system" and key not in base[section]:
                raise ConfigError(f"{section}.{key}", f"unknown key in {origin}")
            base[section][key] = value


def load_config(path: str | os.PathLike | None, overrides: Mapping | None = None,
                command: str = "simulate") -> RunConfig:
    """Effective configuration: defaults < TOML file < ``overrides`` (flags)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"invalid TOML in {path}: {exc}") from None
        _merge(cfg, data, str(path))
    if overrides:
        _merge(cfg, overrides, "command line")

    system = system_from_config(cfg["system"])
    cfg["system"] = system.describe()
    for section in DEFAULTS:
        if section == "system":
            continue
        for key, value in cfg[section].items():
            cfg[section][key] = _check_value(section, key, value, DEFAULTS[section][key])
    try:
        tol = Tolerances(**cfg["tolerances"])
    except ValueError as exc:
        raise ConfigError("tolerances", str(exc)) from None
    bis = cfg["bisect"]
    lo, hi, res = BISECT_BRACKETS[bis["kind"]]
    bis["lo"] = lo if bis["lo"] is None else bis["lo"]
    bis["hi"] = hi if bis["hi"] is None else bis["hi"]
    bis["resolution"] = res if bis["resolution"] is None else bis["resolution"]
    if not bis["lo"] < bis["hi"]:
        raise ConfigError("bisect.lo", "must be below bisect.hi")
    if not cfg["scan"]["from"] <= cfg["scan"]["to"]:
        raise ConfigError("scan.from", "must not exceed scan.to")
    effective = {"system": cfg["system"], "tolerances": cfg["tolerances"], command: cfg[command]}
    return RunConfig(command, system, tol, cfg[command], cfg["output"], effective)


# -- output helpers -----------------------------------------------------------

def _plain(obj):
    """JSON-safe copy: enums to values, arrays to lists, non-finite floats to None."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, cfg: RunConfig, result) -> None:
    doc = {"header": cfg.header(), "result": result}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_plain(doc), sort_keys=True, indent=2, ensure_ascii=False))
        fh.write("\n")


def write_rows_csv(path: Path, cfg: RunConfig, columns, rows) -> None:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, (float, np.floating)):
            return format(float(v), ".17g")
        return str(_plain(v))

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in cfg.header_lines():
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def _atlas_settings(cfg: RunConfig, **kw):
    from .atlas import AtlasSettings
    fam = cfg.system.family.value
    return AtlasSettings(a=cfg.system.params.a, family=fam, tol=cfg.tolerances, **kw)


def _require_jerk(cfg: RunConfig):
    if cfg.system.family.value not in ("cubic2", "cubic2prime"):
        raise ConfigError("system.family", f"{cfg.command} needs cubic2 or cubic2prime")


# -- subcommands --------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> list[str]:
    o = cfg.options
    tol = cfg.tolerances if abs(o["t1"] - o["t0"]) <= cfg.tolerances.max_time else \
        Tolerances(**{**cfg.effective["tolerances"], "max_time": abs(o["t1"] - o["t0"])})
    traj = integrate(cfg.system, o["seed"], (o["t0"], o["t1"]), tol)
    path = cfg.out / "trajectory.csv"
    write_trajectory_csv(path, traj, stride=cfg.output["stride"], header=cfg.header_lines())
    lines = [f"simulate: {len(traj.times)} steps to t={traj.t_final:.6g} "
             f"({traj.termination.kind.value}) -> {path}"]
    if o["section_axis"]:
        plane = PlaneEvent.coordinate(o["section_axis"], o["section_value"])
        items = crossings(cfg.system, o["seed"], plane, (o["t0"], o["t1"]), tol)
        cpath = cfg.out / "crossings.csv"
        write_crossings_csv(cpath, items, header=cfg.header_lines())
        lines.append(f"simulate: {len(items)} crossings of {o['section_axis']}={o['section_value']} -> {cpath}")
    return lines


def cmd_equilibria(cfg: RunConfig) -> list[str]:
    from .spectral import equilibria
    records = []
    for eq in equilibria(cfg.system):
        records.append({
            "name": eq.name,
            "location": eq.location,
            "eigenvalues": [[z.real, z.imag] for z in eq.eigenvalues],
            "eigenvectors": [[[c.real, c.imag] for c in v] for v in eq.eigenvectors],
            "kind": eq.kind.value,
            "stable_dim": eq.kind.stable_dim,
            "residuals": eq.residuals(),
        })
    path = cfg.out / "equilibria.json"
    write_json(path, cfg, {"equilibria": records})
    return [f"equilibria: {r['name']} at {np.round(r['location'], 6).tolist()} is {r['kind']}" for r in records] \
        + [f"equilibria: -> {path}"]


def cmd_manifold(cfg: RunConfig) -> list[str]:
    from .errors import StructureMismatchError
    from .manifolds import Stability, expand_2d, trace_1d
    from .spectral import equilibrium
    o = cfg.options
    eq = equilibrium(cfg.system, o["point"])
    stability = Stability(o["stability"])
    sign = -1 if stability is Stability.STABLE else 1
    n_dim = sum(1 for z in eq.eigenvalues if np.sign(z.real) == sign)
    dim = o["dim"] or n_dim
    if dim != n_dim:
        raise StructureMismatchError(f"{eq.name}: {stability.value} manifold is {n_dim}-dimensional, not {dim}")
    tol = Tolerances(**{**cfg.effective["tolerances"], "max_time": max(cfg.tolerances.max_time, o["horizon"])})
    if dim == 1:
        tags = (1, -1) if o["branch"] == 0 else (o["branch"],)
        branches = [trace_1d(eq, stability, t, o["seed_offset"], tol, max_time=o["horizon"]) for t in tags]
    else:
        branches = expand_2d(eq, stability, o["seeds"], o["radius"], tol, max_time=o["horizon"])
    lines, records = [], []
    for k, br in enumerate(branches):
        label = f"b{br.branch_tag:+d}" if br.branch_tag is not None else f"ring{k:02d}"
        path = cfg.out / f"manifold_{eq.name}_{stability.value}_{label}.csv"
        write_trajectory_csv(path, br.trajectory, stride=cfg.output["stride"], header=cfg.header_lines())
        f = br.fate
        records.append({"label": label, "branch_tag": br.branch_tag, "seed_angle": br.seed_angle, "seed": br.seed,
                        "fate": f.kind.value, "equilibrium": f.equilibrium, "exit_time": f.exit_time,
                        "exit_state": f.exit_state, "file": path.name})
        lines.append(f"manifold: {eq.name} {stability.value} {label}: {f.kind.value} -> {path}")
    path = cfg.out / f"manifold_{eq.name}_{stability.value}.json"
    write_json(path, cfg, {"equilibrium": eq.name, "stability": stability.value, "dim": dim, "branches": records})
    lines.append(f"manifold: summary -> {path}")
    return lines


def cmd_orbit(cfg: RunConfig) -> list[str]:
    from .orbits import OrbitSettings, annotate, detect_closed_orbit, reference_curve
    o = cfg.options
    settings = OrbitSettings(transient=o["transient"], tail=o["tail"], max_time=o["search_time"])
    orbit = detect_closed_orbit(cfg.system, o["seed"], settings, cfg.tolerances)
    orbit = annotate(orbit, reference_curve(cfg.system, cfg.tolerances))
    result = orbit.summary()
    result["linking"] = orbit.diagnostics["linking"]
    result["winding"] = orbit.diagnostics["winding"]
    result["samples_file"] = "orbit.csv"
    path = cfg.out / "orbit.json"
    write_json(path, cfg, result)
    ts = np.linspace(0.0, orbit.period, len(orbit.samples) + 1)[:-1]
    write_rows_csv(cfg.out / "orbit.csv", cfg, ["t", "x", "y", "z"],
                   np.column_stack([ts, orbit.samples])[::cfg.output["stride"]])
    return [f"orbit: period={orbit.period:.10g} rotation={orbit.rotation_number} "
            f"symmetry={orbit.symmetry.value} -> {path}"]


def cmd_lyapunov(cfg: RunConfig) -> list[str]:
    from .orbits import lyapunov_spectrum
    o = cfg.options
    spec = lyapunov_spectrum(cfg.system, o["seed"], o["t_total"], o["renorm_dt"], cfg.tolerances, o["transient"])
    result = spec.summary()
    result["convergence_history"] = {"columns": ["t", "l1", "l2", "l3"], "rows": spec.convergence_history}
    path = cfg.out / "lyapunov.json"
    write_json(path, cfg, result)
    ex = ", ".join(f"{v:.4f}" for v in spec.exponents)
    return [f"lyapunov: exponents ({ex}), sum {spec.exponents.sum():.4f}, divergence {spec.divergence:.4f} -> {path}"]


def cmd_section(cfg: RunConfig) -> list[str]:
    from .atlas import cross_section, sample_attractor_class
    _require_jerk(cfg)
    o = cfg.options
    settings = _atlas_settings(cfg, n_seeds=o["n_seeds"], transient=o["transient"], sample_time=o["sample_time"])
    sample = sample_attractor_class(cfg.system.params.b, settings, cfg.system)
    summary = {"bounded": sample.bounded, "bounding_radius": sample.bounding_radius,
               "n_points": len(sample.points),
               "escapes": [{"seed_index": e.seed_index, "time": e.time, "state": e.state} for e in sample.escapes]}
    lines = []
    if sample.bounded:
        pts = cross_section(sample, PlaneEvent.coordinate(o["axis"], o["value"]))
        cols = {"x": ["y", "z"], "y": ["u", "v"], "z": ["u", "v"]}[o["axis"]]
        path = cfg.out / "section.csv"
        write_rows_csv(path, cfg, cols, pts)
        summary["n_section_points"] = len(pts)
        lines.append(f"section: {len(pts)} crossings of {o['axis']}={o['value']} -> {path}")
    else:
        lines.append(f"section: sample is unbounded ({len(sample.escapes)} seeds escaped); no section written")
    if o["cloud"]:
        cpath = cfg.out / "cloud.csv"
        write_rows_csv(cpath, cfg, ["x", "y", "z"], sample.points[::cfg.output["stride"]])
        lines.append(f"section: attractor cloud -> {cpath}")
    path = cfg.out / "attractor.json"
    write_json(path, cfg, summary)
    lines.append(f"section: summary -> {path}")
    return lines


def cmd_scan(cfg: RunConfig) -> list[str]:
    from .atlas import scan
    _require_jerk(cfg)
    o = cfg.options
    n = int(math.floor((o["to"] - o["from"]) / o["step"] + 1e-9)) + 1
    bs = [round(o["from"] + k * o["step"], 12) for k in range(n)]
    rows = scan(bs, _atlas_settings(cfg), jobs=cfg.output["jobs"])
    evid = cfg.out / "evidence"
    evid.mkdir(parents=True, exist_ok=True)
    table, lines = [], []
    for row in rows:
        rel = f"evidence/scan_b{row.b:.6f}.json"
        if row.classification is None:
            write_json(cfg.out / rel, cfg, {"b": row.b, "error": row.error})
            table.append([row.b, "Error", None, None, rel])
            lines.append(f"scan: b={row.b:.6g} error {row.error}")
            continue
        c = row.classification
        write_json(cfg.out / rel, cfg, c.summary())
        table.append([row.b, c.verdict.value, c.rotation, c.arrangement.value if c.arrangement else None, rel])
        lines.append(f"scan: b={row.b:.6g} {c.verdict.value}"
                     + (f" rotation={c.rotation} {c.arrangement.value}" if c.rotation else ""))
    path = cfg.out / "scan.csv"
    write_rows_csv(path, cfg, ["b", "verdict", "rotation", "arrangement", "evidence_path"], table)
    lines.append(f"scan: {len(rows)} points -> {path}")
    return lines


def cmd_bisect(cfg: RunConfig) -> list[str]:
    from .atlas import bisect_branch_fate, bisect_rotation, bisect_twin_merge
    _require_jerk(cfg)
    o = cfg.options
    fn = {"rotation": bisect_rotation, "fate": bisect_branch_fate, "merge": bisect_twin_merge}[o["kind"]]
    res = fn(o["lo"], o["hi"], o["resolution"], _atlas_settings(cfg))
    path = cfg.out / "bisect.json"
    write_json(path, cfg, res.summary())
    lo, hi = res.bracket
    extra = f" ({len(res.anomalies)} anomalous midpoints)" if res.anomalies else ""
    return [f"bisect: {res.kind.value} in [{lo:.8g}, {hi:.8g}], resolved {res.resolved:.8g}{extra} -> {path}"]


HANDLERS = {
    "simulate": cmd_simulate, "equilibria": cmd_equilibria, "manifold": cmd_manifold, "orbit": cmd_orbit,
    "lyapunov": cmd_lyapunov, "section": cmd_section, "scan": cmd_scan, "bisect": cmd_bisect,
}


# -- argument parsing ---------------------------------------------------------

def _triple(text: str) -> list[float]:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(parts) != 3 or not all(math.isfinite(v) for v in parts):
        raise argparse.ArgumentTypeError(f"expected three finite numbers x,y,z, got {text!r}")
    return parts


# (flag, section, key, type) for options shared by all subcommands
COMMON_FLAGS = [
    ("--family", "system", "family", str), ("--a", "system", "a", float), ("--b", "system", "b", float),
    ("--sigma", "system", "sigma", float), ("--rho", "system", "rho", float), ("--beta", "system", "beta", float),
    ("--alpha", "system", "alpha", float), ("--gamma", "system", "gamma", float),
    ("--delta", "system", "delta", float),
    ("--abs-tol", "tolerances", "abs_tol", float), ("--rel-tol", "tolerances", "rel_tol", float),
    ("--max-step", "tolerances", "max_step", float), ("--min-step", "tolerances", "min_step", float),
    ("--escape-radius", "tolerances", "escape_radius", float), ("--max-time", "tolerances", "max_time", float),
    ("--out", "output", "out", str), ("--stride", "output", "stride", int), ("--jobs", "output", "jobs", int),
]

COMMAND_FLAGS = {
    "simulate": [("--seed", "seed", _triple), ("--t0", "t0", float), ("--t1", "t1", float),
                 ("--section-axis", "section_axis", str), ("--section-value", "section_value", float)],
    "equilibria": [],
    "manifold": [("--point", "point", str), ("--stability", "stability", str), ("--dim", "dim", int),
                 ("--branch", "branch", int), ("--seeds", "seeds", int), ("--radius", "radius", float),
                 ("--seed-offset", "seed_offset", float), ("--horizon", "horizon", float)],
    "orbit": [("--seed", "seed", _triple), ("--transient", "transient", float), ("--tail", "tail", float),
              ("--search-time", "search_time", float)],
    "lyapunov": [("--seed", "seed", _triple), ("--t-total", "t_total", float),
                 ("--renorm-dt", "renorm_dt", float), ("--transient", "transient", float)],
    "section": [("--axis", "axis", str), ("--value", "value", float), ("--n-seeds", "n_seeds", int),
                ("--transient", "transient", float), ("--sample-time", "sample_time", float),
                ("--cloud", "cloud", "flag")],
    "scan": [("--from", "from", float), ("--to", "to", float), ("--step", "step", float)],
    "bisect": [("--kind", "kind", str), ("--lo", "lo", float), ("--hi", "hi", float),
               ("--resolution", "resolution", float)],
}

HELP = {
    "simulate": "integrate one trajectory (CSV), optionally with plane crossings",
    "equilibria": "equilibria, eigenvalues and saddle-focus classification (JSON)",
    "manifold": "trace 1D branches or a 2D fan of an equilibrium's manifold (CSV per branch)",
    "orbit": "detect and refine a closed orbit; rotation number, symmetry, multipliers (JSON + CSV)",
    "lyapunov": "Lyapunov spectrum with convergence history (JSON)",
    "section": "attractor-class sample and its plane section (CSV)",
    "scan": "classify the regime over a range of b (CSV table + JSON evidence)",
    "bisect": "locate a rotation-number change, homoclinic fate flip or twin merge (JSON)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubic3d", description="Numerical study of the cubic jerk system "
                                     "x' = y, y' = z, z' = x^3 - a^2 x - y - b z and its relatives.")
    parser.add_argument("--version", action="version", version=build_id())
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", metavar="PATH", help="TOML file; flags override its values")
        for flag, section, key, typ in COMMON_FLAGS:
            p.add_argument(flag, dest=f"{section}.{key}", type=typ, default=None, metavar=key.upper())
        for flag, key, typ in COMMAND_FLAGS[name]:
            if typ == "flag":
                p.add_argument(flag, dest=f"{name}.{key}", action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=f"{name}.{key}", type=typ, default=None,
                               metavar="X,Y,Z" if typ is _triple else key.upper())
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    out: dict[str, dict] = {}
    for dest, value in vars(ns).items():
        if "." not in dest or value is None:
            continue
        section, key = dest.split(".", 1)
        out.setdefault(section, {})[key] = value
    return out


def _diagnostics(exc: Exception) -> dict:
    info = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("diagnostics", "last_time", "last_state", "status", "time", "state", "value"):
        if hasattr(exc, attr):
            info[attr] = getattr(exc, attr)
    return info


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(ns.config, _overrides(ns), ns.command)
        cfg.out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"cubic3d {ns.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cubic3d {ns.command}: cannot create output directory: {exc}", file=sys.stderr)
        return 2
    try:
        lines = HANDLERS[ns.command](cfg)
    except ConfigError as exc:
        print(f"cubic3d {ns.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except Cubic3dError as exc:
        path = cfg.out / "diagnostics.json"
        write_json(path, cfg, _diagnostics(exc))
        print(f"cubic3d {ns.command}: {type(exc).__name__}: {exc} (diagnostics in {path})", file=sys.stderr)
        return 1
    for line in lines:
        print(line)
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
