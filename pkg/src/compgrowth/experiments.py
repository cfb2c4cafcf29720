"""Desk-scale experiment drivers: territory density against Voronoi cells,
coexistence, competition along a line, and an audit of the abstract
assumptions on T.

Replicate ``r`` at rung ``R`` always uses ``replicate_seed(seed, rung, r)``,
and every aggregate is a fold over replicates in index order, so reports do
not depend on the worker count.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .continuum import RadiusLaw, continuum_territories, simulate_outbursts
from .geometry import (GeometryError, GeometryPreconditionError, Norm, SiteConfiguration,
                       coexistence_geometry_check, relative_density, voronoi_labels)
from .lattice import EdgeWeightDistribution, PassageTimeField, competing_territories, psi_round
from .norm_estimation import NormEstimate, directional_time_constant, kingman_diagnostics, lambda_estimate
from .seeding import replicate_seed, run_replicates
from .territory import labels_from_times


class ExperimentError(ValueError):
    pass


# ---------------------------------------------------------------------------
# small statistics helpers
# ---------------------------------------------------------------------------

def wilson_interval(successes, n, confidence=0.95):
    if n == 0:
        return (0.0, 1.0)
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def trend_check(values, ses, z=3.0):
    """Non-decreasing trend test for a curve over an increasing ladder.

    Fails on any successive drop larger than ``z`` combined SE, or on a
    negative Spearman rank correlation whose overall decline (first to
    last rung) is itself larger than ``z`` combined SE. ``monotone`` reports
    the raw, noise-free comparison.
    """
    values = np.asarray(values, dtype=float)
    ses = np.asarray(ses, dtype=float)
    if values.size < 2:
        return {"spearman": 0.0, "drops": [], "monotone": True, "passed": True}
    if np.all(values == values[0]):
        rho = 0.0
    else:
        rho = float(stats.spearmanr(np.arange(values.size), values).statistic)
    drops = []
    for a in range(values.size - 1):
        tol = z * np.hypot(ses[a], ses[a + 1])
        if values[a + 1] < values[a] - tol:
            drops.append({"index": a + 1, "from": float(values[a]), "to": float(values[a + 1]),
                          "tolerance": float(tol)})
    decline = values[0] - values[-1] > z * np.hypot(ses[0], ses[-1])
    return {"spearman": rho, "drops": drops,
            "monotone": bool(np.all(np.diff(values) >= 0)),
            "passed": bool(not drops and (rho >= 0 or not decline))}


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------

@dataclass
class ExperimentPlan:
    """Everything needed to reproduce a territory experiment.

    ``box_multiplier`` m sets the box edge to m * R * extent, where extent is
    the largest sup-norm distance of a site from the site centroid (1 for
    the antipodal pair). ``guard`` shrinks the box on every side by
    guard * R * extent to get the measurement window.
    """

    model: str
    sites: np.ndarray
    ladder: list
    n_reps: int = 20
    epsilon: float = 0.15
    delta: float = 0.0
    on_sphere: bool = False
    box_multiplier: float = 3.0
    guard: float = 0.25
    pitch: float = 1.0
    seed: int = 0
    distribution: EdgeWeightDistribution = None
    law: RadiusLaw = None
    t_cap: float = None
    slowness: float = 1.6
    shell_rho: float = 0.5
    shell_factor: float = 1.0
    bootstrap: int = 200

    def __post_init__(self):
        self.sites = np.atleast_2d(np.asarray(self.sites, dtype=float))
        self.ladder = [float(r) for r in self.ladder]
        if self.distribution is None:
            self.distribution = EdgeWeightDistribution.exponential(1.0)
        if self.law is None:
            self.law = RadiusLaw.constant(1.0)

    def validate(self):
        if self.model not in ("lattice", "continuum"):
            raise ExperimentError(f"model must be lattice or continuum, got {self.model!r}")
        try:
            SiteConfiguration(self.sites)
        except GeometryError as exc:
            raise ExperimentError(f"sites: {exc}") from exc
        if not self.ladder:
            raise ExperimentError("ladder: at least one scale required")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])) or self.ladder[0] <= 0:
            raise ExperimentError("ladder: scales must be positive and strictly increasing")
        if not 0 < self.epsilon < 1:
            raise ExperimentError("epsilon: must lie in (0, 1)")
        if self.delta < 0:
            raise ExperimentError("delta: must be nonnegative")
        if self.n_reps < 1:
            raise ExperimentError("reps: need at least one replicate")
        if not self.box_multiplier > 2 * self.guard:
            raise ExperimentError("guard: margin leaves an empty measurement window")
        if not self.pitch > 0:
            raise ExperimentError("pitch: must be positive")
        if self.model == "lattice" and self.pitch != int(self.pitch):
            raise ExperimentError("pitch: lattice grids use an integer stride")
        return self

    @property
    def dim(self):
        return self.sites.shape[1]

    def to_dict(self):
        return {"model": self.model, "sites": self.sites.tolist(), "ladder": self.ladder,
                "n_reps": self.n_reps, "epsilon": self.epsilon, "delta": self.delta,
                "on_sphere": self.on_sphere, "box_multiplier": self.box_multiplier,
                "guard": self.guard, "pitch": self.pitch, "seed": self.seed,
                "distribution": self.distribution.to_dict(), "law": self.law.to_dict(),
                "t_cap": self.t_cap, "slowness": self.slowness, "shell_rho": self.shell_rho,
                "shell_factor": self.shell_factor, "bootstrap": self.bootstrap}


def as_norm(norm):
    if isinstance(norm, NormEstimate):
        return norm.to_norm()
    if isinstance(norm, Norm):
        return norm
    raise ExperimentError("a Norm or NormEstimate is required")


def sphere_sites(sites, norm):
    """Sites rescaled onto the unit sphere of ``norm``."""
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    return sites / np.asarray(norm(sites))[:, None]


def positive_density_sites(cfg, norm, threshold=1e-3, seed=0):
    """1-based indices whose Voronoi cell has positive density.

    Sites on the unit sphere of ``norm`` use the segment criterion; other
    configurations use a Monte Carlo density at large radii.
    """
    on_sphere = np.allclose(norm(cfg.points), 1.0, atol=1e-9)
    if on_sphere:
        res = coexistence_geometry_check(cfg, norm)
        return [i + 1 for i, ok in enumerate(res.per_site) if ok], "segment"
    scale = float(np.abs(cfg.points).max())
    radii = scale * np.array([1e3, 3e3, 1e4])
    out = []
    for i in range(1, cfg.k + 1):
        pred = (lambda i: lambda z: voronoi_labels(z, cfg, norm) == i)(i)
        rep = relative_density(pred, None, radii, samples=20000, seed=seed, dim=cfg.dim)
        if rep.lower_estimate > threshold:
            out.append(i)
    return out, "density"


# ---------------------------------------------------------------------------
# realizations on one rung
# ---------------------------------------------------------------------------

@dataclass
class Rung:
    """Grid, cells and replicate outcomes for one scale."""

    R: float
    cfg: SiteConfiguration
    coords: np.ndarray
    window: np.ndarray
    cells: np.ndarray
    margin: float
    box: tuple
    wins: list = field(default_factory=list)
    snapshot: object = None


def _geometry(plan, R):
    cfg = SiteConfiguration(plan.sites).scaled(R)
    c = cfg.points.mean(axis=0)
    extent = float(np.abs(cfg.points - c).max())
    if extent == 0:
        raise ExperimentError("sites coincide")
    half = 0.5 * plan.box_multiplier * extent
    margin = plan.guard * extent
    lo, hi = c - half, c + half
    return cfg, lo, hi, margin


def run_rung(plan, R, rung_index, norm, keep_times=False, workers=None):
    """All replicates at scale ``R``; per-replicate labels restricted to the window."""
    cfg, lo, hi, margin = _geometry(plan, R)
    if plan.model == "lattice":
        lo_b, hi_b = np.ceil(lo).astype(np.int64), np.floor(hi).astype(np.int64)
        src = psi_round(cfg.points)
        if np.any(src < lo_b) or np.any(src > hi_b):
            raise ExperimentError("box too small: a source lies outside")
    else:
        lo_b, hi_b = lo, hi

    def one(seed):
        if plan.model == "lattice":
            f = PassageTimeField(plan.distribution, seed, (lo_b, hi_b), plan.dim)
            return competing_territories(f, cfg, keep_times=keep_times)
        span = float(np.linalg.norm(hi_b - lo_b))
        t_cap = plan.t_cap if plan.t_cap is not None else plan.slowness * span + 8.0
        ev = simulate_outbursts((lo_b, hi_b), t_cap, plan.law, seed)
        shape = np.floor((hi_b - lo_b) / plan.pitch + 1e-9).astype(int) + 1
        return continuum_territories(ev, cfg, lo_b, plan.pitch, shape, keep_times=keep_times)

    seeds = [replicate_seed(plan.seed, rung_index, r) for r in range(plan.n_reps)]
    maps = run_replicates(one, seeds, workers)

    tm = maps[0]
    coords = tm.coords()
    stride = int(plan.pitch) if plan.model == "lattice" else 1
    sel = np.all((coords >= lo + margin) & (coords <= hi - margin), axis=1)
    if stride > 1:
        sel &= np.all(np.mod(coords - tm.origin, stride) == 0, axis=1)
    if not sel.any():
        raise ExperimentError("box too small for the guard margin: empty measurement window")
    window = coords[sel]
    cells = voronoi_labels(window, cfg, norm)
    rung = Rung(R, cfg, coords, window, cells, margin, (lo_b, hi_b))
    for m in maps:
        if plan.delta > 0:
            if m.type_times is None:
                raise ExperimentError("delta variant needs per-type times")
            rung.wins.append(delta_labels(m.type_times.reshape(cfg.k, -1)[:, sel], plan.delta))
        else:
            rung.wins.append(m.winner.ravel()[sel].astype(np.int16))
    rung.snapshot = maps[0]
    return rung


def delta_labels(type_times, delta):
    """Label i where T_i < T_j - delta for every j != i, else 0."""
    type_times = np.asarray(type_times, dtype=float)
    winner, best = labels_from_times(type_times)
    second = np.sort(type_times, axis=0)[1]
    out = np.where((winner > 0) & (best < second - delta), winner, 0).astype(np.int16)
    return out


# ---------------------------------------------------------------------------
# density against Voronoi cells
# ---------------------------------------------------------------------------

@dataclass
class TheoremReport:
    plan: dict
    norm: dict
    sites_in_I: list
    I_method: str
    rows: list
    trend: dict
    per_realization_trend: dict
    snapshots: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {"kind": "theorem-report", "plan": self.plan, "norm": self.norm,
                "sites_in_I": self.sites_in_I, "I_method": self.I_method, "rows": self.rows,
                "trend": self.trend, "per_realization_trend": self.per_realization_trend}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        cols = ["R", "site", "margin", "window_points", "cell_points", "facet_a", "facet_a_se",
                "fragile_fraction", "facet_b_mean", "facet_b_se", "facet_b_min",
                "all_pass_fraction", "all_pass_low", "all_pass_high"]
        lines = [",".join(cols)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in cols))
        return "\n".join(lines) + "\n"

    def facet_a(self, site):
        return [r["facet_a"] for r in self.rows if r["site"] == site]

    def facet_b_fraction(self):
        seen = {}
        for r in self.rows:
            seen.setdefault(r["R"], r["all_pass_fraction"])
        return list(seen.values())


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _density_rows(plan, rung, I, rng):
    eps = plan.epsilon
    wins = np.stack(rung.wins)
    n = wins.shape[0]
    rows = []
    per_rep = {}
    for i in I:
        cell = rung.cells == i
        n_cell = int(cell.sum())
        if n_cell == 0:
            raise ExperimentError(f"box too small: no measured point of cell {i} at R = {rung.R:g}")
        hit = (wins[:, cell] == i)
        p_hat = hit.mean(axis=0)
        facet_a = float(np.mean(p_hat >= 1 - eps))
        p_se = np.sqrt(p_hat * (1 - p_hat) / n)
        fragile = float(np.mean(np.abs(p_hat - (1 - eps)) < 2 * p_se))
        if plan.bootstrap > 0 and n > 1:
            counts = rng.multinomial(n, np.full(n, 1.0 / n), size=plan.bootstrap)
            boot = (counts @ hit) / n
            facet_a_se = float(np.std(np.mean(boot >= 1 - eps, axis=1), ddof=1))
        else:
            facet_a_se = 0.0
        dens = hit.mean(axis=1)
        per_rep[i] = dens
        rows.append({"R": rung.R, "site": i, "margin": rung.margin,
                     "window_points": int(len(rung.window)), "cell_points": n_cell,
                     "facet_a": facet_a, "facet_a_se": facet_a_se, "fragile_fraction": fragile,
                     "facet_b_mean": float(dens.mean()),
                     "facet_b_se": float(dens.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
                     "facet_b_min": float(dens.min()),
                     "facet_b_quantiles": np.quantile(dens, [0.05, 0.25, 0.5, 0.75, 0.95]).tolist()})
    ok = np.all(np.stack([per_rep[i] >= 1 - eps for i in I]), axis=0)
    frac = float(ok.mean())
    low, high = wilson_interval(int(ok.sum()), n)
    for row in rows:
        row.update(all_pass_fraction=frac, all_pass_low=low, all_pass_high=high,
                   all_pass_se=float(np.sqrt(frac * (1 - frac) / n)))
    return rows


def density_experiment(plan, norm, workers=None, keep_snapshots=True):
    """Density of {z : P(z in D_i) >= 1 - eps} and of per-realization D_i inside V_i."""
    plan.validate()
    norm_obj = as_norm(norm)
    base = SiteConfiguration(plan.sites)
    I, method = positive_density_sites(base, norm_obj, seed=plan.seed)
    if not I:
        raise ExperimentError("no site has a Voronoi cell of positive density")
    rng = np.random.default_rng(replicate_seed(plan.seed, 7777))
    rows, snaps = [], {}
    for g, R in enumerate(plan.ladder):
        rung = run_rung(plan, R, g, norm_obj, keep_times=plan.delta > 0, workers=workers)
        rows += _density_rows(plan, rung, I, rng)
        if keep_snapshots:
            snaps[R] = (rung.snapshot, rung.cfg)
    trend = {}
    for i in I:
        sub = [r for r in rows if r["site"] == i]
        trend[i] = trend_check([r["facet_a"] for r in sub], [r["facet_a_se"] for r in sub])
    by_r = [r for r in rows if r["site"] == I[0]]
    per_real = trend_check([r["all_pass_fraction"] for r in by_r], [r["all_pass_se"] for r in by_r])
    trend = {str(k): v for k, v in trend.items()}
    trend["passed"] = all(v["passed"] for v in trend.values())
    return TheoremReport(plan.to_dict(), norm_obj.to_dict(), I, method, rows, trend, per_real,
                         snaps)


# ---------------------------------------------------------------------------
# coexistence
# ---------------------------------------------------------------------------

def coexistence_proxy(rung, rho, shell_factor):
    """Per replicate: does every type win a measured point far out in its own cell?"""
    out = []
    dist = np.stack([np.linalg.norm(rung.window - p, axis=1) for p in rung.cfg.points])
    shells = [(rung.cells == i) & (dist[i - 1] >= rho * shell_factor * rung.R)
              for i in range(1, rung.cfg.k + 1)]
    for w in rung.wins:
        out.append(all(np.any(w[s] == i) for i, s in enumerate(shells, start=1)))
    return np.array(out, dtype=bool)


def check_coexistence_sites(plan, norm):
    """Sites actually used (rescaled if requested) after the geometric precondition."""
    sites = plan.sites
    if plan.model == "continuum":
        sites = sphere_sites(sites, Norm.euclidean(plan.dim)) if plan.on_sphere else sites
        if not np.allclose(np.linalg.norm(sites, axis=1), 1.0, atol=1e-9):
            raise GeometryPreconditionError("continuum sites must lie on the Euclidean unit sphere")
        return sites
    if plan.on_sphere:
        sites = sphere_sites(sites, norm)
    res = coexistence_geometry_check(SiteConfiguration(sites), norm)
    if not res.passed:
        pair = res.failing_pair()
        raise GeometryPreconditionError(
            f"sites {pair[0]} and {pair[1]}: the segment between them stays on the unit sphere",
            pair=pair)
    return sites


def coexistence_experiment(plan, norm, workers=None):
    """P(every type reaches the outer shell of its own cell), per rung, with Wilson bounds."""
    plan.validate()
    norm_obj = as_norm(norm)
    sites = check_coexistence_sites(plan, norm_obj)
    plan = ExperimentPlan(**{**plan.__dict__, "sites": sites})
    rows, flags = [], []
    for g, R in enumerate(plan.ladder):
        rung = run_rung(plan, R, g, norm_obj, workers=workers)
        coex = coexistence_proxy(rung, plan.shell_rho, plan.shell_factor)
        flags.append(coex.tolist())
        n, s = coex.size, int(coex.sum())
        low, high = wilson_interval(s, n)
        p = s / n
        rows.append({"R": R, "n": n, "coexist": s, "p_hat": p,
                     "se": float(np.sqrt(p * (1 - p) / n)), "wilson_low": low, "wilson_high": high})
    trend = trend_check([r["p_hat"] for r in rows], [r["se"] for r in rows])
    return {"kind": "coexistence-report", "plan": plan.to_dict(), "norm": norm_obj.to_dict(),
            "sites_used": np.asarray(sites).tolist(),
            "proxy": {"shell_rho": plan.shell_rho, "shell_factor": plan.shell_factor},
            "rows": rows, "trend": trend, "per_replicate": flags}


# ---------------------------------------------------------------------------
# competition along a line
# ---------------------------------------------------------------------------

def line_competition_experiment(model, x, lam, epsilon, n_reps, n_x, alphas=None, seed=0,
                                workers=None):
    """Advantage of the source at 0 over the source at -x at points alpha * x.

    ``n_x`` is N(x). For each alpha the report gives the frequency of
    T(-x, alpha x) - T(0, alpha x) >= (1 - eps) N(x), the passing fraction of
    the alpha grid (frequency >= 1 - eps), the mean advantage over N(x), and
    an exact audit of the advantage against T(-x, 0).
    """
    if n_x is None or not np.isfinite(n_x) or n_x <= 0:
        raise ExperimentError("N(x) unavailable: supply a positive norm value")
    x = np.asarray(x, dtype=float)
    if alphas is None:
        alphas = np.linspace(0.0, lam, 21)
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas < 0) or np.any(alphas > lam):
        raise ExperimentError("alpha grid must lie in [0, lambda]")
    targets = np.vstack([alphas[:, None] * x, np.zeros((1, x.size))])

    def one(s):
        t = model.times_multi(s, np.stack([-x, np.zeros_like(x)]), targets)
        return t[0, :-1] - t[1, :-1], t[0, -1]

    seeds = [replicate_seed(seed, r) for r in range(n_reps)]
    res = run_replicates(one, seeds, workers)
    adv = np.stack([r[0] for r in res])
    bound = np.array([r[1] for r in res])
    prob = np.mean(adv >= (1 - epsilon) * n_x, axis=0)
    violations = int(np.sum(adv > bound[:, None]))
    return {"kind": "line-report", "x": x.tolist(), "lambda": lam, "epsilon": epsilon,
            "n_reps": n_reps, "norm_value": float(n_x), "alphas": alphas.tolist(),
            "probability": prob.tolist(),
            "passing_fraction": float(np.mean(prob >= 1 - epsilon)),
            "mean_curve": (adv.mean(axis=0) / n_x).tolist(),
            "mean_curve_se": (adv.std(axis=0, ddof=1) / np.sqrt(n_reps) / n_x).tolist()
            if n_reps > 1 else [0.0] * len(alphas),
            "upper_bound_violations": violations}


# ---------------------------------------------------------------------------
# assumption audit
# ---------------------------------------------------------------------------

def _random_points(rng, n, dim, spread, lattice):
    pts = rng.uniform(-spread, spread, size=(n, dim))
    return psi_round(pts).astype(float) if lattice else pts


def triangle_audit(model, n_points=30, n_realizations=1, seed=0, spread=8.0):
    """Exact check of T(a, c) <= T(a, b) + T(b, c) and T >= 0 on all triples."""
    rng = np.random.default_rng(replicate_seed(seed, 1))
    triples = negatives = violations = values = 0
    symmetric_gap = 0.0
    for r in range(n_realizations):
        pts = _random_points(rng, n_points, model.dim, spread, model.kind == "lattice")
        if model.kind == "lattice":
            pts = np.unique(pts, axis=0)
        T = model.times_matrix(replicate_seed(seed, 2, r), pts)
        negatives += int(np.sum(T < 0))
        lhs = T[:, None, :]
        rhs = T[:, :, None] + T[None, :, :]
        violations += int(np.sum(lhs > rhs))
        triples += T.shape[0] ** 3
        values += T.size
        symmetric_gap = max(symmetric_gap, float(np.nanmax(np.abs(T - T.T))))
    return {"triples": triples, "violations": violations, "negatives": negatives,
            "values": values, "max_asymmetry": symmetric_gap}


def ks_audit(model, n_samples=100, n_shifts=20, distance=None, seed=0, kind="translation",
             workers=None, p_floor=0.01):
    """Two-sample KS of T(v, v + L u) against T(0, L u) over shifts (or rotations of u)."""
    dim = model.dim
    if distance is None:
        distance = 16.0 if model.kind == "lattice" else 8.0
    rng = np.random.default_rng(replicate_seed(seed, 3))
    u = np.zeros(dim)
    u[0] = 1.0

    def sample(start, end, stream):
        seeds = [replicate_seed(seed, stream, r) for r in range(n_samples)]
        return np.array(run_replicates(lambda s: model.times_from(s, start, end[None, :])[0],
                                       seeds, workers))

    base = sample(np.zeros(dim), distance * u, 199)
    pvals = []
    for j in range(n_shifts):
        if kind == "translation":
            v = rng.uniform(-50, 50, size=dim)
            if model.kind == "lattice":
                v = np.round(v)
            start, end = v, v + distance * u
        elif kind == "rotation":
            if dim != 2:
                raise ExperimentError("rotation audit is planar")
            th = rng.uniform(0, 2 * np.pi)
            start, end = np.zeros(dim), distance * np.array([np.cos(th), np.sin(th)])
        else:
            raise ExperimentError(f"unknown audit kind {kind!r}")
        other = sample(start, end, 200 + j)
        pvals.append(float(stats.ks_2samp(base, other).pvalue))
    passing = int(np.sum(np.array(pvals) > p_floor))
    return {"kind": kind, "pvalues": pvals, "passing": passing, "total": n_shifts,
            "fraction": passing / n_shifts, "p_floor": p_floor}


def assumption_audit(model, n_samples=100, seed=0, workers=None, n_points=30,
                     ks_fraction=0.9):
    """One verdict per assumption on T, each with its evidence."""
    tri = triangle_audit(model, n_points=n_points, seed=seed)
    lam = lambda_estimate(model, n_samples=max(4, n_samples // 10), seed=seed, workers=workers)
    ks = ks_audit(model, n_samples=n_samples, seed=seed, workers=workers)
    checks = {
        "nonnegativity": {"passed": tri["negatives"] == 0, "evidence": tri},
        "triangle": {"passed": tri["violations"] == 0, "evidence": tri},
        "lambda_finite": {"passed": bool(np.isfinite(lam["lambda_hat"])), "evidence": lam},
        "stationarity": {"passed": ks["fraction"] >= ks_fraction, "evidence": ks},
    }
    if model.kind == "continuum":
        rot = ks_audit(model, n_samples=n_samples, seed=seed + 1, kind="rotation", workers=workers)
        checks["isotropy"] = {"passed": rot["fraction"] >= ks_fraction, "evidence": rot}
    step = 8.0 if model.kind == "lattice" else 4.0
    sample = directional_time_constant(model, np.eye(model.dim)[0], 8, step,
                                       max(8, n_samples // 4), replicate_seed(seed, 4), workers)
    kd = kingman_diagnostics(sample)
    checks["convergence"] = {"passed": bool(kd["non_increasing"] and kd["subadditive"]
                                            and sample.estimate > 0), "evidence": kd}
    return {"kind": "audit-report", "model": model.describe(), "checks": checks,
            "passed": all(c["passed"] for c in checks.values())}
