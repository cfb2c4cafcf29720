"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also repeated in the terminal summary. Runtime on one core is
several minutes; the slowest parts are the density, coexistence, line and
KS runs.
"""
import itertools
import json
import os

import numpy as np
import pytest

from compgrowth import _accel
from compgrowth.cli import main as cli_main
from compgrowth.continuum import (Ball, OutburstEventSet, RadiusLaw, ball_point_gaps, continuum_passage_time,
                                  simulate_outbursts)
from compgrowth.experiments import (ExperimentPlan, coexistence_experiment, density_experiment,
                                    ks_audit, line_competition_experiment, triangle_audit)
from compgrowth.geometry import (GeometryPreconditionError, Norm, SiteConfiguration,
                                 homothety_stability_check, translate_stability_check,
                                 voronoi_delta_member)
from compgrowth.hashing import quantize
from compgrowth.lattice import EdgeWeightDistribution as E, PassageTimeField, first_passage_time
from compgrowth.models import ContinuumModel, LatticeModel
from compgrowth.norm_estimation import (directional_time_constant, estimate_norm, fit_norm,
                                        kingman_diagnostics)
from compgrowth.seeding import replicate_seed
from oracles import continuum_chain_min, lattice_paths_min

VERDICTS = []
EXPO = E.exponential(1.0)
PAIR = [[1.0, 0.0], [-1.0, 0.0]]
L2 = Norm.euclidean(2)
HERE = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(HERE, "data", "baseline.json")) as _fh:
    BASELINE = json.load(_fh)


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def test_criterion_1_oracle_equivalence():
    laws = [EXPO, E.atom_mixture(0.3, 1.0), E.uniform(0.0, 2.0), E.constant(1.0)]
    pairs = mismatches = 0
    for shape in itertools.product((1, 2, 3), repeat=2):
        pts = list(itertools.product(*[range(s) for s in shape]))
        for law, seed in itertools.product(laws, range(3)):
            f = PassageTimeField(law, seed, ([0, 0], np.array(shape) - 1))
            for s in pts:
                got = first_passage_time(f, s)
                for t in pts:
                    pairs += 1
                    mismatches += got[t] != lattice_paths_min(f, s, t)
    rng = np.random.default_rng(1)
    queries = cmis = 0
    for n in range(6):
        for _ in range(40):
            ev = OutburstEventSet.from_arrays(rng.uniform(0, 4, (n, 2)),
                                              quantize(rng.uniform(0.1, 2.0, n)),
                                              rng.uniform(0.5, 2.5, n), [0, 0], [4, 4])
            c, r = rng.uniform(0, 4, 2), rng.uniform(0.3, 1.5)
            ys = np.vstack([rng.uniform(-1, 5, (6, 2)), ev.centers])
            got, _ = continuum_passage_time(ev, Ball(c, r), ys)
            for y, g in zip(ys, got):
                queries += 1
                cmis += g != continuum_chain_min(ev, c, r, y)
    verdict(1, mismatches == 0 and cmis == 0,
            f"lattice {pairs} pairs, {mismatches} mismatches; "
            f"continuum {queries} queries, {cmis} mismatches")


def _ball_point_pairs(n_real=10, n_y=1000):
    """Violations of T(x+B, y) <= T(x+B, y+B) over random continuum configurations."""
    rng = np.random.default_rng(2)
    gaps = []
    for r in range(n_real):
        ev = simulate_outbursts(([-12, -12], [12, 12]), 60.0, RadiusLaw.constant(1.0),
                                replicate_seed(22, r))
        rep = ball_point_gaps(ev, rng.uniform(-2, 2, 2), rng.uniform(-8, 8, (n_y, 2)))
        gaps.append(rep["gaps"])
    gaps = np.concatenate(gaps)
    return gaps.size, int(np.sum(gaps < 0)), np.percentile(gaps, [5, 50, 95])


def _cell_stability(trials=10000):
    """Shrunken two-site cells V(0, x): homotheties centred at x and translation by -x."""
    tab = estimate_norm(LatticeModel(E.constant(1.0)), k_max=4, step=4, n_reps=2)[0].to_norm()
    checked = bad = 0
    for norm, x in itertools.product((L2, Norm.p(1, 2), tab), ([2.0, -1.0], [1.0, 1.0])):
        cfg = SiteConfiguration(np.array([[0.0, 0.0], x]))
        for delta in (0.0, 0.3):
            pred = lambda z: voronoi_delta_member(z, 1, cfg, norm, delta)  # noqa: E731
            bad += len(homothety_stability_check(pred, x, trials, seed=3))
            bad += len(translate_stability_check(x, delta, norm, trials, seed=4))
            checked += 2 * trials
    return checked, bad


def test_criterion_2_structural_invariants():
    lat = triangle_audit(LatticeModel(EXPO), n_points=30, n_realizations=14, seed=5)
    con = triangle_audit(ContinuumModel(), n_points=22, n_realizations=1, seed=5, spread=5.0)
    stab_n, stab_bad = _cell_stability()
    bp_n, bp_bad, bp_q = _ball_point_pairs()
    ok = (lat["triples"] >= 10**4 and con["triples"] >= 10**4 and lat["values"] >= 10**4
          and lat["violations"] == lat["negatives"] == 0 and lat["max_asymmetry"] == 0
          and con["violations"] == con["negatives"] == 0
          and stab_n >= 10**4 and stab_bad == 0 and bp_n >= 10**4 and bp_bad == 0)
    verdict(2, ok,
            f"lattice {lat['triples']} triples, {lat['violations']} triangle, "
            f"{lat['negatives']} negative, asymmetry {lat['max_asymmetry']} over {lat['values']} pairs; "
            f"continuum {con['triples']} triples, {con['violations']} triangle, "
            f"{con['negatives']} negative; cells {stab_n} trials, {stab_bad} unstable; "
            f"ball-vs-point {bp_n} pairs, {bp_bad} violations, "
            f"gap 5/50/95% {np.round(bp_q, 3).tolist()}")


def test_criterion_3_constant_weight_calibration():
    c = 1.75
    model = LatticeModel(E.constant(c))
    e1 = directional_time_constant(model, [1, 0], 8, 8, 4, 0)
    diag = directional_time_constant(model, [1, 1], 8, 8, 4, 1)
    est = fit_norm([e1, diag, directional_time_constant(model, [0, -1], 8, 8, 4, 2)])
    x = np.random.default_rng(3).normal(size=(2000, 2))
    l1_exact = bool(np.all(np.abs(est.to_norm()(x) - c * np.abs(x).sum(axis=1))
                           <= 1e-12 * c * np.abs(x).sum(axis=1)))
    plan = ExperimentPlan("lattice", PAIR, [8, 16], n_reps=4, distribution=E.constant(c),
                          bootstrap=0)
    rep = density_experiment(plan, Norm.p(1, 2), keep_snapshots=False)
    facets = [(r["facet_a"], r["facet_b_min"]) for r in rep.rows]
    ok = (e1.estimate == c and e1.estimate_se == 0 and diag.estimate_se == 0
          and abs(diag.estimate - c * np.sqrt(2)) <= 1e-12 and l1_exact
          and all(a == 1.0 and b == 1.0 for a, b in facets))
    verdict(3, ok, f"a(e1) = {e1.estimate} se {e1.estimate_se}, a(diag) = {diag.estimate:.15f} "
                   f"se {diag.estimate_se}, fitted norm equals c*l1: {l1_exact}, facets {facets}")


def test_criterion_4_norm_statistics():
    model = LatticeModel(EXPO)
    e1 = directional_time_constant(model, [1, 0], BASELINE["k_max"], BASELINE["step"],
                                   BASELINE["n_reps"] // 10, 4)
    kd = kingman_diagnostics(e1)
    z_base = abs(e1.estimate - BASELINE["estimate"]) / np.hypot(e1.estimate_se,
                                                                 BASELINE["estimate_se"])
    lat, _ = estimate_norm(model, k_max=24, step=8, n_reps=32, seed=41)
    cm = ContinuumModel()
    th = np.arange(8) * np.pi / 4 + np.pi / 16
    cont = [directional_time_constant(cm, [np.cos(a), np.sin(a)], 6, 4.0, 24,
                                      replicate_seed(42, j)) for j, a in enumerate(th)]
    rot = fit_norm(cont, "rotational")
    ok = (kd["non_increasing"] and z_base <= 3 and lat.orbits_consistent
          and rot.orbits_consistent)
    verdict(4, ok,
            f"e1 ratio curve non-increasing within 3 SE: {kd['non_increasing']}; "
            f"a(e1) = {e1.estimate:.4f} +- {e1.estimate_se:.4f} vs frozen "
            f"{BASELINE['estimate']:.4f} +- {BASELINE['estimate_se']:.4f} (z = {z_base:.2f}); "
            f"lattice orbits max z {max(o['max_z'] for o in lat.orbits):.2f}; "
            f"continuum 8 directions max pairwise z {rot.orbits[0]['max_z']:.2f}")


def test_criterion_5_density_trend():
    plan = ExperimentPlan("lattice", PAIR, [16, 32, 64], n_reps=100, epsilon=0.15, seed=55)
    rep = density_experiment(plan, L2, keep_snapshots=False)
    top = rep.facet_a(1)[-1], rep.facet_a(2)[-1]
    ok = (rep.trend["passed"] and min(top) >= 0.85 and rep.per_realization_trend["passed"])
    verdict(5, ok,
            f"facet (a) site 1 {np.round(rep.facet_a(1), 3).tolist()}, "
            f"site 2 {np.round(rep.facet_a(2), 3).tolist()}; per-realization "
            f"{np.round(rep.facet_b_fraction(), 3).tolist()}; trends "
            f"{rep.trend['passed']}/{rep.per_realization_trend['passed']}")


def test_criterion_6_coexistence():
    plan = ExperimentPlan("lattice", PAIR, [16, 32, 64], n_reps=200, seed=66)
    rep = coexistence_experiment(plan, L2)
    rows = rep["rows"]
    try:
        coexistence_experiment(ExperimentPlan("lattice", [[1.0, 0.0], [0.0, 1.0]], [16],
                                              n_reps=2), Norm.p(1, 2))
        rejected = None
    except GeometryPreconditionError as exc:
        rejected = exc.pair
    ok = rep["trend"]["passed"] and rows[-1]["p_hat"] >= 0.8 and rejected == (1, 2)
    verdict(6, ok,
            f"P(coex) {[r['p_hat'] for r in rows]}, Wilson 95% lower at R = 64 "
            f"{rows[-1]['wilson_low']:.3f}; l1 flat face rejected with pair {rejected}")


def test_criterion_6_continuum_supplement():
    """Reduced-scale continuum run; informational, not part of the gate."""
    plan = ExperimentPlan("continuum", PAIR, [3, 6], n_reps=20, seed=67, pitch=0.5)
    rep = coexistence_experiment(plan, L2)
    line = ("criterion 6 (continuum supplement, informational): P(coex) "
            f"{[r['p_hat'] for r in rep['rows']]} at R = 3, 6 with 20 replicates")
    VERDICTS.append(line)
    print(line)


def test_criterion_7_line_competition():
    x = np.array([32.0, 0.0])
    n_x = 32.0 * BASELINE["estimate"]
    rep = line_competition_experiment(LatticeModel(EXPO), x, 8.0, 0.2, 200, n_x, seed=77)
    ok = rep["passing_fraction"] >= 0.8 and rep["upper_bound_violations"] == 0
    verdict(7, ok, f"passing fraction {rep['passing_fraction']:.3f} over "
                   f"{len(rep['alphas'])} alphas, {rep['upper_bound_violations']} bound violations")


def test_criterion_8_ks_audits():
    lat = ks_audit(LatticeModel(EXPO), 100, 20, seed=8)
    cm = ContinuumModel()
    tr = ks_audit(cm, 100, 20, seed=8)
    rot = ks_audit(cm, 100, 20, seed=9, kind="rotation")
    ok = min(lat["fraction"], tr["fraction"], rot["fraction"]) >= 0.9
    verdict(8, ok, f"fraction above p = 0.01: lattice translations {lat['fraction']:.2f}, "
                   f"continuum translations {tr['fraction']:.2f}, "
                   f"continuum rotations {rot['fraction']:.2f}")


CONFIGS = {
    "theorem11": "model = lattice\nexperiment = theorem11\nladder = 8, 16\nreps = 12\n",
    "theorem12": "model = continuum\nexperiment = theorem12\nladder = 3, 5\nreps = 4\npitch = 0.5\n",
    "coexistence": "model = lattice\nexperiment = coexistence\nladder = 8, 16\nreps = 12\non_sphere = true\nk_max = 4\n",
    "line": "model = lattice\nexperiment = line\nline_x = 16, 0\nline_lambda = 4\nreps = 12\nk_max = 4\n",
    "norm": "model = lattice\nexperiment = norm\nk_max = 4\nreps = 6\nlambda_samples = 4\n",
    "territories": "model = lattice\nexperiment = territories\nladder = 6, 12\n",
}


def _run_dir(tmp_path, name, text, workers, tag):
    cfg = tmp_path / f"{name}_{tag}.cfg"
    cfg.write_text(text + f"seed = 9\nworkers = {workers}\n")
    out = tmp_path / f"{name}_{tag}"
    code = cli_main(["run", str(cfg), "--out", str(out)])
    files = {p.name: p.read_bytes() for p in out.iterdir()
             if p.name not in ("manifest.json", "config.resolved")}
    return code, files


def test_criterion_9_reproducibility(tmp_path):
    diffs, codes, n_files = [], [], 0
    for name, text in CONFIGS.items():
        runs = [_run_dir(tmp_path, name, text, w, t) for w, t in ((1, "a"), (1, "b"), (3, "c"))]
        codes += [c for c, _ in runs]
        base = runs[0][1]
        n_files += len(base)
        for _, files in runs[1:]:
            if files != base:
                diffs.append(name)
    ok = not diffs and all(c == 0 for c in codes)
    verdict(9, ok, f"{len(CONFIGS)} experiment kinds, {n_files} report files, "
                   f"3 runs each (workers 1, 1, 3), differing: {diffs or 'none'}, "
                   f"exit codes {sorted(set(codes))}")
