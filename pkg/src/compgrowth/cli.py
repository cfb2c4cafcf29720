"""Command line: ``run``, ``render``, ``validate`` and ``seed-scan``."""
import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__, config as config_mod
from ._accel import backend_name
from .config import ConfigError
from .geometry import GeometryPreconditionError, Norm, SiteConfiguration
from .territory import from_binary, territory_image, to_binary, to_csv, to_ppm

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3


class RunWriter:
    """Single writer per run directory; remembers a hash of everything written."""

    def __init__(self, directory):
        self.directory = directory
        self.files = {}
        os.makedirs(directory, exist_ok=True)

    def write(self, name, data):
        if isinstance(data, str):
            data = data.encode()
        with open(os.path.join(self.directory, name), "wb") as fh:
            fh.write(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        return name

    def json(self, name, obj):
        return self.write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _versions():
    import scipy

    out = {"python": platform.python_version(), "numpy": np.__version__,
           "scipy": scipy.__version__, "compgrowth": __version__, "backend": backend_name()}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:
        pass
    return out


def resolve_norm(cfg, model, writer=None):
    """Norm used for Voronoi cells and N(x), as a ``Norm``."""
    from .norm_estimation import NormEstimate, estimate_norm

    choice = cfg["norm"]
    dim = len(cfg["sites"][0])
    if choice == "auto":
        if cfg["model"] == "continuum":
            return Norm.euclidean(dim)
        if cfg["distribution"] == "constant":
            return Norm.p(1, dim, cfg["value"])
        choice = "estimate"
    if choice in ("l1", "l2", "linf"):
        return Norm(choice, dim=dim)
    if choice == "estimate":
        est, _ = estimate_norm(model, cfg["directions"], cfg["k_max"], cfg["step"],
                               max(2, cfg["reps"]), cfg["seed"], workers=cfg["workers"])
        if writer is not None:
            writer.json("norm.json", est.to_dict())
        return est.to_norm()
    with open(choice) as fh:
        data = json.load(fh)
    if data.get("kind") == "norm-estimate":
        return NormEstimate.from_dict(data).to_norm()
    return Norm.from_dict(data)


def _snapshot(writer, cfg, tag, tmap, sites, norm):
    formats = cfg["formats"]
    record = {"kind": "territory-snapshot", "shape": list(tmap.shape), "k": tmap.k,
              "seed": tmap.seed, "sites": np.asarray(sites).tolist(), "norm": norm.to_dict(),
              "counts": {str(k): v for k, v in tmap.counts().items()}}
    if "grid" in formats:
        record["grid"] = writer.write(f"snapshot_{tag}.cgtm", to_binary(tmap))
    if "csv" in formats and cfg["experiment"] == "territories":
        writer.write(f"snapshot_{tag}.csv", to_csv(tmap))
    if "ppm" in formats and tmap.dim == 2:
        cfg_sites = SiteConfiguration(np.asarray(sites))
        writer.write(f"snapshot_{tag}.ppm", to_ppm(territory_image(tmap, overlay=(cfg_sites, norm))))
    writer.json(f"snapshot_{tag}.json", record)


def _tag(R):
    return f"R{R:g}"


def execute(cfg, writer):
    """Run the configured experiment, writing its report(s); returns the headline dict."""
    from . import experiments as ex
    from .norm_estimation import estimate_norm, kingman_diagnostics, lambda_estimate

    model = config_mod.model_of(cfg)
    kind = cfg["experiment"]
    formats = cfg["formats"]
    workers = cfg["workers"]

    if kind == "norm":
        est, samples = estimate_norm(model, cfg["directions"], cfg["k_max"], cfg["step"],
                                     cfg["reps"], cfg["seed"], workers=workers)
        lam = lambda_estimate(model, cfg["lambda_samples"], cfg["seed"], workers=workers)
        est.lambda_hat, est.lambda_se = lam["lambda_hat"], lam["lambda_se"]
        writer.json("norm.json", est.to_dict())
        diag = {"kind": "norm-diagnostics", "lambda": lam,
                "samples": [s.to_dict() for s in samples],
                "kingman": [kingman_diagnostics(s) for s in samples]}
        writer.json("report.json", diag)
        if "csv" in formats:
            writer.write("norm.csv", norm_csv(est.to_dict()))
        return {"values": [o["value"] for o in est.orbits], "flags": est.flags}

    if kind == "audit":
        rep = ex.assumption_audit(model, cfg["audit_samples"], cfg["seed"], workers=workers)
        writer.json("report.json", rep)
        return {"passed": rep["passed"]}

    norm = resolve_norm(cfg, model, writer)

    if kind == "line":
        x = np.asarray(cfg["line_x"])
        alphas = np.linspace(0.0, cfg["line_lambda"], cfg["line_points"])
        rep = ex.line_competition_experiment(model, x, cfg["line_lambda"], cfg["epsilon"],
                                             cfg["reps"], float(norm(x)), alphas, cfg["seed"],
                                             workers)
        writer.json("report.json", rep)
        if "csv" in formats:
            writer.write("line.csv", line_csv(rep))
        return {"passing_fraction": rep["passing_fraction"]}

    plan = config_mod.plan_of(cfg)
    if kind == "coexistence":
        rep = ex.coexistence_experiment(plan, norm, workers)
        writer.json("report.json", rep)
        if "csv" in formats:
            writer.write("coexistence.csv", coexistence_csv(rep))
        return {"p_hat": [r["p_hat"] for r in rep["rows"]]}

    if kind == "territories":
        plan.validate()
        plan.n_reps = 1
        rows = []
        for g, R in enumerate(plan.ladder):
            rung = ex.run_rung(plan, R, g, norm, keep_times=plan.delta > 0, workers=workers)
            tmap = rung.snapshot
            _snapshot(writer, cfg, _tag(R), tmap, rung.cfg.points, norm)
            rows.append({"R": R, "counts": {str(k): v for k, v in tmap.counts().items()}})
        writer.json("report.json", {"kind": "territory-report", "plan": plan.to_dict(),
                                    "rows": rows})
        return {"rows": rows}

    report = ex.density_experiment(plan, norm, workers)
    writer.json("report.json", report.to_dict())
    if "csv" in formats:
        writer.write("report.csv", report.to_csv())
    for R, (tmap, scfg) in report.snapshots.items():
        _snapshot(writer, cfg, _tag(R), tmap, scfg.points, norm)
    return {"facet_a_top": {r["site"]: r["facet_a"] for r in report.rows
                            if r["R"] == plan.ladder[-1]},
            "trend": report.trend["passed"]}


def _error_record(exc):
    rec = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        rec["fields"] = [{"field": k, "message": m} for k, m in exc.errors]
    if isinstance(exc, GeometryPreconditionError):
        rec["pair"] = list(exc.pair) if exc.pair else None
    return rec


def _exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, GeometryPreconditionError):
        return EXIT_PRECONDITION
    return EXIT_FAIL


def run_config(cfg, out_dir=None):
    """Execute one validated config into ``out_dir``; returns (exit code, headline)."""
    writer = RunWriter(out_dir or cfg["output_dir"])
    writer.write("config.resolved", cfg.resolved_text())
    start = time.perf_counter()
    try:
        headline = execute(cfg, writer)
        code = EXIT_OK
    except (ValueError, ArithmeticError) as exc:
        writer.json("error.json", _error_record(exc))
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        headline, code = None, _exit_code(exc)
    files = dict(writer.files)
    manifest = {"config_sha256": cfg.digest(), "seed": cfg["seed"], "versions": _versions(),
                "wall_time_s": round(time.perf_counter() - start, 3), "exit_code": code,
                "files": files}
    writer.json("manifest.json", manifest)
    return code, headline


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def _csv(cols, rows):
    def fmt(v):
        return f"{v:.10g}" if isinstance(v, float) else str(v)
    return "\n".join([",".join(cols)] + [",".join(fmt(r[c]) for c in cols) for r in rows]) + "\n"


def norm_csv(data):
    rows = []
    for o in data["orbits"]:
        rows.append({"orbit": " ".join(f"{v:g}" for v in o["key"]) if o["key"] != ["all"] else "all",
                     "direction": " ".join(f"{v:.6g}" for v in o["members"][0]),
                     "value": o["value"], "se": o["se"], "members": len(o["members"])})
    return _csv(["orbit", "direction", "value", "se", "members"], rows)


def line_csv(rep):
    rows = [{"alpha": a, "probability": p, "mean_curve": m}
            for a, p, m in zip(rep["alphas"], rep["probability"], rep["mean_curve"])]
    return _csv(["alpha", "probability", "mean_curve"], rows)


def coexistence_csv(rep):
    return _csv(["R", "n", "coexist", "p_hat", "wilson_low", "wilson_high"], rep["rows"])


def render(path, out_dir=None):
    """Turn a report into plotting data and rasters; returns the written paths."""
    out_dir = out_dir or os.path.dirname(os.path.abspath(path))
    writer = RunWriter(out_dir)
    base = os.path.splitext(os.path.basename(path))[0]
    if path.endswith(".cgtm"):
        with open(path, "rb") as fh:
            tmap = from_binary(fh.read())
        name = writer.write(base + ".ppm", to_ppm(territory_image(tmap)))
        _record_rendered(out_dir, os.path.basename(path), writer.files)
        return [os.path.join(out_dir, name)]
    with open(path) as fh:
        data = json.load(fh)
    kind = data.get("kind") if isinstance(data, dict) else None
    written = []
    if kind == "theorem-report":
        cols = ["R", "facet_a", "facet_a_se", "facet_b_mean", "facet_b_se", "all_pass_fraction"]
        for i in data["sites_in_I"]:
            rows = [r for r in data["rows"] if r["site"] == i]
            written.append(writer.write(f"density_site{i}.csv", _csv(cols, rows)))
    elif kind == "norm-estimate":
        written.append(writer.write(f"{base}_orbits.csv", norm_csv(data)))
    elif kind == "territory-snapshot":
        if "grid" not in data:
            raise ValueError("snapshot record has no grid file")
        with open(os.path.join(os.path.dirname(os.path.abspath(path)), data["grid"]), "rb") as fh:
            tmap = from_binary(fh.read())
        overlay = (SiteConfiguration(np.asarray(data["sites"])), Norm.from_dict(data["norm"]))
        written.append(writer.write(f"{base}_overlay.ppm",
                                    to_ppm(territory_image(tmap, overlay=overlay))))
    elif kind == "coexistence-report":
        written.append(writer.write(f"{base}_coexistence.csv", coexistence_csv(data)))
    elif kind == "line-report":
        written.append(writer.write(f"{base}_line.csv", line_csv(data)))
    else:
        raise ValueError(f"unrecognized report schema {kind!r}")
    _record_rendered(out_dir, os.path.basename(path), writer.files)
    return [os.path.join(out_dir, w) for w in written]


def _record_rendered(out_dir, source, files):
    """Add rendered files to the run manifest, if the directory has one."""
    path = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(path):
        manifest = {"files": {}}
    else:
        with open(path) as fh:
            manifest = json.load(fh)
    rendered = manifest.setdefault("rendered", {})
    for name, digest in sorted(files.items()):
        rendered[name] = {"sha256": digest, "source": source}
    with open(path, "w") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _seed_range(text):
    a, sep, b = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError("seed range must look like a..b")
    a, b = int(a), int(b)
    if b < a:
        raise argparse.ArgumentTypeError("empty seed range")
    return range(a, b + 1)


def build_parser():
    p = argparse.ArgumentParser(prog="compgrowth", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run the experiment described by a config file")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    d = sub.add_parser("render", help="emit CSV curves and PPM rasters from a report")
    d.add_argument("report")
    d.add_argument("--out")
    s = sub.add_parser("seed-scan", help="run one config over a range of seeds")
    s.add_argument("config")
    s.add_argument("--seeds", required=True, type=_seed_range)
    s.add_argument("--out")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "render":
            for path in render(args.report, args.out):
                print(path)
            return EXIT_OK
        cfg = config_mod.load(args.config)
    except (ConfigError, ValueError, OSError) as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return _exit_code(exc) if isinstance(exc, ValueError) else EXIT_FAIL

    if args.verb == "validate":
        sys.stdout.write(cfg.resolved_text())
        return EXIT_OK
    if args.verb == "run":
        code, headline = run_config(cfg, args.out)
        if headline is not None:
            print(json.dumps(headline, sort_keys=True, default=float))
        return code

    root = args.out or cfg["output_dir"]
    writer = RunWriter(root)
    buf = io.StringIO()
    table = csv.writer(buf, lineterminator="\n")
    table.writerow(["seed", "exit_code", "headline"])
    worst = EXIT_OK
    for seed in args.seeds:
        code, headline = run_config(cfg.with_overrides(seed=seed), os.path.join(root, f"seed_{seed}"))
        worst = max(worst, code)
        table.writerow([seed, code, json.dumps(headline, sort_keys=True, default=float)])
    writer.write("seed_scan.csv", buf.getvalue())
    return worst


if __name__ == "__main__":
    sys.exit(main())
