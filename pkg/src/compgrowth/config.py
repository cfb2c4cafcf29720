"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored. Lists use commas; point lists
separate points with semicolons (``sites = 1, 0; -1, 0``). Every key, its
type and default is listed in ``SCHEMA``; ``resolved_text`` writes the
configuration back with all defaults filled in.
"""
import hashlib
import os

import numpy as np

EXPERIMENTS = ("territories", "norm", "theorem11", "theorem12", "coexistence", "line", "audit")
FORMATS = ("json", "csv", "ppm", "grid")


class ConfigError(ValueError):
    """Validation failure; ``errors`` is a list of ``(field, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))


def _bool(s):
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _points(s):
    pts = [_floats(p) for p in s.split(";") if p.strip()]
    if not pts or len({len(p) for p in pts}) != 1:
        raise ValueError("points must share one dimension")
    return pts


def _words(s):
    return [w.strip() for w in s.split(",") if w.strip()]


def _choice(*options):
    def parse(s):
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _optional_float(s):
    s = s.strip()
    return None if s.lower() in ("", "auto", "none") else float(s)


# key: (parser, default, required)
SCHEMA = {
    "model": (_choice("lattice", "continuum"), None, True),
    "experiment": (_choice(*EXPERIMENTS), None, True),
    "distribution": (_choice("exponential", "constant", "uniform", "atom-mixture"), "exponential", False),
    "rate": (float, 1.0, False),
    "value": (float, 1.0, False),
    "low": (float, 0.0, False),
    "high": (float, 1.0, False),
    "p_zero": (float, 0.0, False),
    "radius_law": (_choice("constant", "exponential", "truncated-exponential"), "constant", False),
    "radius": (float, 1.0, False),
    "radius_rate": (float, 1.0, False),
    "radius_cap": (float, 3.0, False),
    "t_cap": (_optional_float, None, False),
    "slowness": (float, 1.6, False),
    "mesh_pitch": (float, 0.1, False),
    "sites": (_points, [[1.0, 0.0], [-1.0, 0.0]], False),
    "on_sphere": (_bool, False, False),
    "ladder": (_floats, [8.0, 16.0], False),
    "reps": (int, 10, False),
    "epsilon": (float, 0.15, False),
    "delta": (float, 0.0, False),
    "box_multiplier": (float, 3.0, False),
    "guard": (float, 0.25, False),
    "pitch": (float, 1.0, False),
    "shell_rho": (float, 0.5, False),
    "shell_factor": (float, 1.0, False),
    "bootstrap": (int, 200, False),
    "norm": (str, "auto", False),
    "directions": (lambda s: None if s.strip() in ("", "auto") else _points(s), None, False),
    "k_max": (int, 8, False),
    "step": (float, 8.0, False),
    "lambda_samples": (int, 8, False),
    "line_x": (_floats, [32.0, 0.0], False),
    "line_lambda": (float, 8.0, False),
    "line_points": (int, 21, False),
    "audit_samples": (int, 100, False),
    "seed": (int, 0, False),
    "output_dir": (str, "out", False),
    "formats": (_words, ["json", "csv", "ppm", "grid"], False),
    "workers": (int, 1, False),
}


def _render(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        if v and isinstance(v[0], list):
            return "; ".join(", ".join(f"{c:g}" for c in p) for p in v)
        return ", ".join(f"{c:g}" if isinstance(c, float) else str(c) for c in v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


class RunConfig(dict):
    """Validated configuration; a dict with every schema key present."""

    def resolved_text(self):
        return "".join(f"{k} = {_render(self[k])}\n" for k in SCHEMA)

    def digest(self):
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()

    def with_overrides(self, **kw):
        out = RunConfig(self)
        out.update(kw)
        return out


def parse_text(text, env=None):
    """Parse and validate; raises ``ConfigError`` listing every bad field."""
    env = os.environ if env is None else env
    raw, errors = {}, []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append((f"line {n}", "expected key = value"))
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            errors.append((key, "unknown key"))
        elif key in raw:
            errors.append((key, "given twice"))
        else:
            raw[key] = val
    if env.get("COMPGROWTH_OUTPUT_DIR"):
        raw["output_dir"] = env["COMPGROWTH_OUTPUT_DIR"]
    if env.get("COMPGROWTH_WORKERS"):
        raw["workers"] = env["COMPGROWTH_WORKERS"]

    cfg = RunConfig()
    for key, (parse, default, required) in SCHEMA.items():
        if key not in raw:
            if required:
                errors.append((key, "required field missing"))
            cfg[key] = default
            continue
        try:
            cfg[key] = parse(raw[key])
        except ValueError as exc:
            errors.append((key, str(exc)))
            cfg[key] = default
    if not errors:
        errors += _cross_checks(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def _cross_checks(cfg):
    errors = []
    if cfg["experiment"] == "theorem11" and cfg["model"] != "lattice":
        errors.append(("experiment", "theorem11 runs on the lattice model"))
    if cfg["experiment"] == "theorem12" and cfg["model"] != "continuum":
        errors.append(("experiment", "theorem12 runs on the continuum model"))
    sites = cfg["sites"]
    if len(sites) < 2:
        errors.append(("sites", "at least two sites are required"))
    elif len({tuple(p) for p in sites}) != len(sites):
        errors.append(("sites", "sites must be distinct"))
    if len(sites[0]) < 2:
        errors.append(("sites", "dimension must be at least 2"))
    lad = cfg["ladder"]
    if not lad or any(b <= a for a, b in zip(lad, lad[1:])) or lad[0] <= 0:
        errors.append(("ladder", "scales must be positive and strictly increasing"))
    if not 0 < cfg["epsilon"] < 1:
        errors.append(("epsilon", "must lie in (0, 1)"))
    for key in ("reps", "workers", "k_max", "lambda_samples", "line_points", "audit_samples"):
        if cfg[key] < 1:
            errors.append((key, "must be at least 1"))
    if cfg["experiment"] == "norm" and cfg["k_max"] < 4:
        errors.append(("k_max", "must be at least 4"))
    if cfg["reps"] < 2 and cfg["experiment"] == "norm":
        errors.append(("reps", "norm estimation needs at least two replicates"))
    for f in cfg["formats"]:
        if f not in FORMATS:
            errors.append(("formats", f"unknown format {f!r}"))
    if cfg["model"] == "lattice" and cfg["pitch"] != int(cfg["pitch"]):
        errors.append(("pitch", "lattice grids use an integer stride"))
    if cfg["distribution"] == "atom-mixture" and not 0 <= cfg["p_zero"] < 1:
        errors.append(("p_zero", "must lie in [0, 1)"))
    if cfg["directions"] is not None and len(cfg["directions"][0]) != len(sites[0]):
        errors.append(("directions", "dimension differs from the sites"))
    if len(cfg["line_x"]) != len(sites[0]):
        errors.append(("line_x", "dimension differs from the sites"))
    return errors


def load(path, env=None):
    with open(path) as fh:
        return parse_text(fh.read(), env)


def distribution_of(cfg):
    from .lattice import EdgeWeightDistribution as E

    kind = cfg["distribution"]
    if kind == "constant":
        return E.constant(cfg["value"])
    if kind == "uniform":
        return E.uniform(cfg["low"], cfg["high"])
    if kind == "atom-mixture":
        return E.atom_mixture(cfg["p_zero"], cfg["rate"])
    return E.exponential(cfg["rate"])


def law_of(cfg):
    from .continuum import RadiusLaw

    kind = cfg["radius_law"]
    if kind == "exponential":
        return RadiusLaw.exponential(cfg["radius_rate"])
    if kind == "truncated-exponential":
        return RadiusLaw.truncated_exponential(cfg["radius_rate"], cfg["radius_cap"])
    return RadiusLaw.constant(cfg["radius"])


def model_of(cfg):
    from .models import ContinuumModel, LatticeModel

    dim = len(cfg["sites"][0])
    if cfg["model"] == "lattice":
        return LatticeModel(distribution_of(cfg), dim=dim)
    return ContinuumModel(law_of(cfg), dim=dim, pitch=cfg["mesh_pitch"], t_cap=cfg["t_cap"],
                          slowness=cfg["slowness"])


def plan_of(cfg):
    from .experiments import ExperimentPlan

    return ExperimentPlan(
        model=cfg["model"], sites=np.array(cfg["sites"]), ladder=cfg["ladder"],
        n_reps=cfg["reps"], epsilon=cfg["epsilon"], delta=cfg["delta"],
        on_sphere=cfg["on_sphere"], box_multiplier=cfg["box_multiplier"], guard=cfg["guard"],
        pitch=cfg["pitch"], seed=cfg["seed"], distribution=distribution_of(cfg),
        law=law_of(cfg), t_cap=cfg["t_cap"], slowness=cfg["slowness"],
        shell_rho=cfg["shell_rho"], shell_factor=cfg["shell_factor"],
        bootstrap=cfg["bootstrap"])
