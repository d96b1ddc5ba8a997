"""Command-line driver writing CSV/JSON figure data with provenance headers.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure (a
diagnostics JSON file is written next to the outputs).
"""

import argparse
import csv
import datetime
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigurationError, PTMetaError

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("capacitance", "dimer-spectrum", "band", "screen-scatter", "extraordinary",
               "cavity", "green-check")

# parameter name -> (type, default); shared by flags and JSON configs
PARAMS: Dict[str, tuple] = {
    "shape": (str, None),
    "radius": (float, None),
    "gap": (float, None),
    "a": (float, 2e-4),
    "b": (float, 0.0),
    "v": (float, 1.0),
    "L": (float, 1.0),
    "dim": (int, None),
    "alpha": (float, None),
    "b_min": (float, 0.0),
    "b_max": (float, 1e-4),
    "n_b": (int, 51),
    "muller": (bool, False),
    "n_alpha": (int, 200),
    "w": (list, None),
    "omega_min": (float, None),
    "omega_max": (float, None),
    "n_omega": (int, 400),
    "N_list": (list, [125, 343, 1000]),
    "epsilon1": (float, 0.5),
    "Lambda": (float, 1.0),
    "omega_radius": (float, 1.0),
    "mode": (str, "grid"),
    "n_points": (int, 10),
    "n_pairs": (int, 5),
    "basis_order": (int, None),
}

SUBCOMMAND_DEFAULTS = {
    "capacitance": {"shape": "sphere", "radius": 1.0, "gap": 2.0},
    "dimer-spectrum": {"shape": "sphere", "radius": 1.0, "gap": 2.0},
    "band": {"shape": "disk", "radius": 0.15, "gap": 0.5, "b": 1e-4},
    "screen-scatter": {"shape": "disk", "radius": 0.15, "gap": 0.5, "b": 1e-4},
    "extraordinary": {"shape": "disk", "radius": 0.15, "gap": 0.5, "b_max": 3e-4, "n_b": 31,
                      "n_omega": 200},
    "cavity": {"a": 1.0 / 3.0, "b": -1.0},
    "green-check": {"dim": 2},
}


@dataclass
class RunConfig:
    subcommand: str
    params: Dict[str, object] = field(default_factory=dict)
    output: str = "."
    seed: int = 0
    tag: Optional[str] = None

    def config_hash(self) -> str:
        blob = json.dumps({"subcommand": self.subcommand, "params": self.params, "seed": self.seed},
                          sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ResultRecord:
    name: str
    columns: List[str]
    rows: List[Sequence[float]]
    summary: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError("result rows must match the column count")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
def _coerce(name: str, value):
    if name not in PARAMS:
        raise ConfigurationError(f"unknown config field {name!r}")
    typ, _ = PARAMS[name]
    if value is None:
        return None
    try:
        if typ is bool:
            if isinstance(value, str):
                return value.lower() in ("1", "true", "yes")
            return bool(value)
        if typ is list:
            if isinstance(value, str):
                value = json.loads(value) if value.strip().startswith("[") else value.split(",")
            return [float(x) for x in value]
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"field {name!r}: cannot interpret {value!r}") from exc


def _flatten(cfg: dict) -> dict:
    """Map the JSON schema {"shape": {"kind", "radius"}, ...} to flat params."""
    out = {}
    for key, val in cfg.items():
        if key == "shape" and isinstance(val, dict):
            for k2, v2 in val.items():
                if k2 == "kind":
                    out["shape"] = v2
                elif k2 == "radius":
                    out["radius"] = v2
                else:
                    raise ConfigurationError(f"unknown config field 'shape.{k2}'")
        else:
            out[key.replace("-", "_")] = val
    return out


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    return _flatten(data)


def resolve_params(subcommand: str, flags: dict, config: Optional[dict] = None) -> dict:
    """Defaults, then subcommand defaults, then flags, then the JSON config."""
    params = {k: v[1] for k, v in PARAMS.items()}
    params.update(SUBCOMMAND_DEFAULTS.get(subcommand, {}))
    for k, v in flags.items():
        if v is not None:
            params[k] = _coerce(k, v)
    for k, v in (config or {}).items():
        if k in ("subcommand", "seed", "output", "tag"):
            continue
        params[k] = _coerce(k, v)
    if params.get("shape") not in (None, "disk", "sphere"):
        raise ConfigurationError(f"field 'shape': unknown kind {params['shape']!r}")
    if params.get("dim") is not None:
        if params["dim"] not in (2, 3):
            raise ConfigurationError("field 'dim': must be 2 or 3")
        if subcommand != "green-check":
            params["shape"] = "disk" if params["dim"] == 2 else "sphere"
    for key in ("n_b", "n_alpha", "n_omega"):
        if params[key] is not None and params[key] < 2:
            raise ConfigurationError(f"field {key!r}: sweeps need at least 2 points")
    if params["b_max"] < params["b_min"]:
        raise ConfigurationError("field 'b_max': range is empty")
    return params


def figure_recipe(tag: str) -> RunConfig:
    """Ready-made configuration for one of the reproduced figures."""
    fig4 = {"shape": "disk", "radius": 0.15, "gap": 0.5, "L": 1.0, "a": 2e-4, "b": 1e-4, "v": 1.0}
    w = [-np.sqrt(3.0) / 2.0, 0.5]
    recipes = {
        "fig2": RunConfig("dimer-spectrum", {"shape": "sphere", "radius": 1.0, "gap": 2.0,
                                             "a": 2e-4, "v": 1.0, "b_min": 0.0, "b_max": 1e-4,
                                             "n_b": 101}),
        "fig4": RunConfig("band", dict(fig4, n_alpha=200)),
        "fig5": RunConfig("screen-scatter", dict(fig4, w=w, omega_min=0.002, omega_max=0.13,
                                                 n_omega=400)),
        "fig6": RunConfig("extraordinary", dict(fig4, w=w, b_min=0.0, b_max=3e-4, n_b=31,
                                                n_omega=200)),
    }
    if tag not in recipes:
        raise ConfigurationError(f"unknown figure tag {tag!r}; expected one of {sorted(recipes)}")
    cfg = recipes[tag]
    cfg.params = resolve_params(cfg.subcommand, {}, cfg.params)
    cfg.tag = tag
    return cfg


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------
def _dimer(p):
    from .geometry import DimerConfig, MaterialParams, ResonatorShape, build_pt_dimer

    if p["shape"] is None or p["radius"] is None or p["gap"] is None:
        raise ConfigurationError("fields 'shape', 'radius' and 'gap' are required")
    mat = MaterialParams(p["a"], p["b"], p["v"])
    return build_pt_dimer(DimerConfig(ResonatorShape(p["shape"], p["radius"]), p["gap"], mat))


def _lattice(p, dimer):
    from .geometry import LatticeConfig

    lat = LatticeConfig(p["L"], dimer.dim)
    lat.check_dimer(dimer)
    return lat


def _cplx(z):
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def cmd_capacitance(p, seed) -> List[ResultRecord]:
    from .capacitance import (CapacitanceSet, c1_matrix, capacitance_matrix, dipole_coefficient,
                              periodic_capacitance, weighted_capacitance)

    dimer = _dimer(p)
    cs = CapacitanceSet()
    cs.C = capacitance_matrix(dimer, p["basis_order"])
    cs.Cv = weighted_capacitance(cs.C, dimer.materials)
    if p["alpha"] is not None or p["dim"] is not None:
        lat = _lattice(p, dimer)
        pc = periodic_capacitance(dimer, lat, p["basis_order"])
        cs.C0_11 = pc.C0_11
        cs.c = dipole_coefficient(pc.psi1_0, dimer.axis)
        cs.C1_matrix = c1_matrix(lat, np.zeros(lat.lattice_dim), cs.c)
        if p["alpha"] is not None:
            cs.C_alpha(dimer, lat, np.full(lat.lattice_dim, p["alpha"]))
    cs.check_invariants()
    return [ResultRecord("capacitance", [], [], cs.as_dict())]


def cmd_dimer_spectrum(p, seed) -> List[ResultRecord]:
    from .capacitance import capacitance_matrix
    from .geometry import MaterialParams
    from .spectra import capacitance_eigs, exceptional_gain, leading_order_frequencies, muller_resonances

    dimer = _dimer(p)
    C = capacitance_matrix(dimer, p["basis_order"])
    b0 = exceptional_gain(p["a"], C[0, 0], C[0, 1])
    rows, mrows = [], []
    for b in np.linspace(p["b_min"], p["b_max"], p["n_b"]):
        lams = capacitance_eigs(p["a"], b, C[0, 0], C[0, 1])
        w = leading_order_frequencies(lams, dimer.volume)
        rows.append([b, *_cplx(w.omega1), *_cplx(w.omega2)])
        if p["muller"]:
            mw = muller_resonances(dimer, MaterialParams(p["a"], b, p["v"]), w)
            mrows.append([b, *_cplx(mw.omega1), *_cplx(mw.omega2)])
    cols = ["b", "re_omega1", "im_omega1", "re_omega2", "im_omega2"]
    summary = {"b0": b0, "C11": C[0, 0], "C12": C[0, 1]}
    out = [ResultRecord("dimer_spectrum", cols, rows, summary)]
    if mrows:
        out.append(ResultRecord("dimer_spectrum_muller", cols, mrows, summary))
    return out


def cmd_band(p, seed) -> List[ResultRecord]:
    from .spectra import band_structure, exceptional_quasimomentum, gamma_m_path

    dimer = _dimer(p)
    lat = _lattice(p, dimer)
    path = gamma_m_path(lat, p["n_alpha"])
    pts = band_structure(dimer, lat, path, p["a"], p["b"])
    rows = [[float(np.linalg.norm(bp.alpha)), *_cplx(bp.omega1), *_cplx(bp.omega2),
             float(bp.below_ep)] for bp in pts]
    a0 = exceptional_quasimomentum(dimer, lat, p["a"], p["b"])
    summary = {"alpha0": None if a0 is None else float(np.linalg.norm(a0))}
    cols = ["alpha", "re_omega1", "im_omega1", "re_omega2", "im_omega2", "below_ep"]
    return [ResultRecord("band", cols, rows, summary)]


def _direction(p, dim):
    w = p["w"]
    if w is None:
        w = [-np.sqrt(3.0) / 2.0, 0.5] if dim == 2 else [-np.sqrt(3.0) / 2.0, 0.0, 0.5]
    w = np.asarray(w, dtype=float)
    if len(w) != dim:
        raise ConfigurationError(f"field 'w': needs {dim} components")
    return tuple(w / np.linalg.norm(w))


def cmd_screen_scatter(p, seed) -> List[ResultRecord]:
    from .layer_potentials import discretize
    from .metascreen import (IncidentWave, energy_relation_residual, reflection_zero_frequencies,
                             refine_extremum, screen_model, screen_operators)

    dimer = _dimer(p)
    lat = _lattice(p, dimer)
    model = screen_model(dimer, lat, p["basis_order"])
    w2 = model.omega2_0()
    lo = p["omega_min"] if p["omega_min"] is not None else 0.9 * w2
    hi = p["omega_max"] if p["omega_max"] is not None else 1.1 * w2
    direction = _direction(p, dimer.dim)
    disc = discretize(dimer.resonators, p["basis_order"])

    def solve(w):
        return screen_operators(dimer, lat, IncidentWave(direction, float(w)), disc).solve(dimer.materials)

    omegas = np.linspace(lo, hi, p["n_omega"])
    mats = [solve(w) for w in omegas]
    rows = [[w, S.T_plus, S.T_minus, S.R_plus, S.R_minus, energy_relation_residual(S)]
            for w, S in zip(omegas, mats)]
    summary = {"omega2_0": w2, "c": model.c, "C0_11": model.C0_11}
    for attr in ("R_plus", "R_minus"):
        x, val = refine_extremum(lambda w: getattr(solve(w), attr), omegas,
                                 [getattr(S, attr) for S in mats])
        summary[f"argmin_{attr}"] = x
        summary[f"min_{attr}"] = val
    pz = reflection_zero_frequencies(model.lambda2_0, dimer.volume, abs(direction[-1]),
                                     p["b"], model.c)
    summary["predicted_zero_r_plus"], summary["predicted_zero_r_minus"] = pz
    cols = ["omega", "T_plus", "T_minus", "R_plus", "R_minus", "residual"]
    return [ResultRecord("screen_scatter", cols, rows, summary)]


def cmd_extraordinary(p, seed) -> List[ResultRecord]:
    from .metascreen import band_window, extraordinary_gain, extraordinary_scan, screen_model

    dimer = _dimer(p)
    lat = _lattice(p, dimer)
    model = screen_model(dimer, lat, p["basis_order"])
    window = (p["omega_min"], p["omega_max"])
    if None in window:
        window = band_window(model, 0.02)
    b_grid = np.linspace(p["b_min"], p["b_max"], p["n_b"])
    res = extraordinary_scan(dimer, lat, p["a"], b_grid, window, _direction(p, dimer.dim),
                             p["n_omega"], p["basis_order"])
    best = max(res, key=lambda t: t[1])
    summary = {"b_star_predicted": extraordinary_gain(p["a"], model.c, p["L"], dimer.dim),
               "b_peak": best[0], "peak_T": best[1]}
    return [ResultRecord("extraordinary", ["b", "peak_T"], [list(r) for r in res], summary)]


def cmd_cavity(p, seed) -> List[ResultRecord]:
    from .homogenization import cavity_convergence

    res = cavity_convergence([int(n) for n in p["N_list"]], p["omega_radius"], p["Lambda"], p["a"],
                             p["b"], p["epsilon1"], p["mode"], seed)
    rows = [[r.N, r.sup_error, r.Lambda, r.condition] for r in res]
    return [ResultRecord("cavity", ["N", "sup_error", "Lambda", "condition"], rows, {})]


def cmd_green_check(p, seed) -> List[ResultRecord]:
    from .geometry import LatticeConfig
    from .greens import green_quasi_spatial, green_quasi_spectral

    dim = p["dim"] or 2
    lat = LatticeConfig(p["L"], dim)
    rng = np.random.default_rng(seed)
    L = p["L"]
    rows = []
    for _ in range(p["n_pairs"]):
        alpha = rng.uniform(0.1, 0.9, dim - 1) * np.pi / L
        k = rng.uniform(0.2, 0.8) * (2 * np.pi / L - np.linalg.norm(alpha))
        for _ in range(p["n_points"]):
            x = np.append(rng.uniform(-0.5, 0.5, dim - 1) * L,
                          rng.choice([-1, 1]) * rng.uniform(0.1, 0.6) * L)
            sp = green_quasi_spatial(x, alpha, k, lat)
            sc = green_quasi_spectral(x, alpha, k, lat)
            rows.append([*x, *alpha, k, sp.real, sp.imag, sc.real, sc.imag, abs(sp - sc)])
    xs = [f"x{i + 1}" for i in range(dim)]
    als = [f"alpha{i + 1}" for i in range(dim - 1)]
    cols = xs + als + ["k", "re_spatial", "im_spatial", "re_spectral", "im_spectral", "abs_diff"]
    summary = {"max_abs_diff": max(r[-1] for r in rows)}
    return [ResultRecord("green_check", cols, rows, summary)]


COMMANDS = {
    "capacitance": cmd_capacitance,
    "dimer-spectrum": cmd_dimer_spectrum,
    "band": cmd_band,
    "screen-scatter": cmd_screen_scatter,
    "extraordinary": cmd_extraordinary,
    "cavity": cmd_cavity,
    "green-check": cmd_green_check,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------
def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_outputs(cfg: RunConfig, records: List[ResultRecord]) -> List[Path]:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    paths = []
    for rec in records:
        if rec.columns:
            path = out / f"{rec.name}.csv"
            with open(path, "w", newline="") as fh:
                fh.write(f"# version: ptmeta {__version__}\n")
                fh.write(f"# subcommand: {cfg.subcommand}\n")
                fh.write(f"# figure: {cfg.tag or '-'}\n")
                fh.write(f"# config_hash: {h}\n")
                fh.write(f"# created: {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n")
                w = csv.writer(fh)
                w.writerow(rec.columns)
                for row in rec.rows:
                    w.writerow([repr(float(v)) for v in row])
            paths.append(path)
        jpath = out / f"{rec.name}.json"
        with open(jpath, "w") as fh:
            json.dump(_jsonable({"config_hash": h, "subcommand": cfg.subcommand, "figure": cfg.tag,
                                 "params": cfg.params, "seed": cfg.seed, "summary": rec.summary}),
                      fh, indent=2, sort_keys=True)
        paths.append(jpath)
    return paths


def run(cfg: RunConfig) -> int:
    """Execute a configuration; returns the process exit status."""
    try:
        records = COMMANDS[cfg.subcommand](cfg.params, cfg.seed)
        paths = write_outputs(cfg, records)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return exc.exit_code
    except PTMetaError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        diag = {"error": type(exc).__name__, "message": str(exc), "config_hash": cfg.config_hash(),
                "params": cfg.params}
        for attr in ("condition", "history"):
            if hasattr(exc, attr):
                diag[attr] = getattr(exc, attr)
        with open(out / "diagnostics.json", "w") as fh:
            json.dump(_jsonable(diag), fh, indent=2, default=str)
        return exc.exit_code
    for rec in records:
        if rec.summary and not rec.columns:
            print(json.dumps(_jsonable(rec.summary), indent=2))
    for pth in paths:
        print(pth)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptmeta", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config; its fields override flags")
        sp.add_argument("--output", default=".")
        sp.add_argument("--seed", type=int, default=0)

    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        common(sp)
        for key in PARAMS:
            flag = "--" + key.replace("_", "-")
            if key == "N_list":
                flag = "--N-list"
            sp.add_argument(flag, dest=key, default=None)
    fig = sub.add_parser("figure")
    common(fig)
    fig.add_argument("--tag", required=True)
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    file_cfg = load_config(args.config) if args.config else {}
    if args.subcommand == "figure":
        cfg = figure_recipe(args.tag)
        if file_cfg:
            cfg.params = resolve_params(cfg.subcommand, {}, {**cfg.params, **file_cfg})
    else:
        flags = {k: getattr(args, k) for k in PARAMS}
        cfg = RunConfig(args.subcommand, resolve_params(args.subcommand, flags, file_cfg))
    cfg.output = file_cfg.get("output", args.output)
    cfg.seed = int(file_cfg.get("seed", args.seed))
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
