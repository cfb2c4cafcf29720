"""Directional time constants, norm fitting and subadditivity diagnostics.

Every estimate is a Monte Carlo mean with a standard error; a realization is
addressed by ``replicate_seed(seed, rep)`` so results do not depend on the
number of workers.
"""
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import Norm, grid_in_ball
from .lattice import psi_round
from .seeding import replicate_seed, run_replicates


class EstimationError(ValueError):
    pass


TRUNCATION_LIMIT = 0.01


def _unit(u):
    u = np.asarray(u, dtype=float)
    n = np.linalg.norm(u)
    if not n > 0:
        raise EstimationError("direction must be non-zero")
    return u / n


def _se(x, axis=0):
    x = np.asarray(x, dtype=float)
    n = np.sum(np.isfinite(x), axis=axis)
    return np.nanstd(x, axis=axis, ddof=1) / np.sqrt(n)


@dataclass
class DirectionalSample:
    """Replicate passage times from the origin to k * step * u, k = 1..k_max.

    ``distances`` are the realized Euclidean lengths of the targets (after
    rounding to the lattice, if any), so ratios are exact along directions
    whose rounded multiples stay on the ray.
    """

    direction: np.ndarray
    step: float
    distances: np.ndarray
    times: np.ndarray
    model: str = ""
    seed: int = 0

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=float)
        self.distances = np.asarray(self.distances, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 2 or self.times.shape[0] < 2:
            raise EstimationError("at least two replicates per distance are required")
        if self.times.shape[1] != self.distances.size:
            raise EstimationError("times and distances disagree in length")
        if np.any(self.times < 0):
            raise EstimationError("negative passage time")

    @property
    def k_max(self):
        return self.distances.size

    @property
    def n_reps(self):
        return self.times.shape[0]

    @property
    def ratios(self):
        return self.times / self.distances

    @property
    def mean_times(self):
        return np.nanmean(self.times, axis=0)

    @property
    def se_times(self):
        return _se(self.times)

    @property
    def mean_ratio(self):
        return np.nanmean(self.ratios, axis=0)

    @property
    def se_ratio(self):
        return _se(self.ratios)

    def _tail(self):
        return np.nanmean(self.ratios[:, -2:], axis=1)

    @property
    def estimate(self):
        """Tail estimate: per-replicate mean ratio over the two largest k."""
        return float(np.nanmean(self._tail()))

    @property
    def estimate_se(self):
        return float(_se(self._tail()))

    @property
    def fekete_lower(self):
        """min over k of the mean ratio: the infimum diagnostic."""
        return float(np.min(self.mean_ratio))

    def to_dict(self):
        return {"direction": self.direction.tolist(), "step": self.step,
                "distances": self.distances.tolist(), "model": self.model, "seed": self.seed,
                "mean_ratio": self.mean_ratio.tolist(), "se_ratio": self.se_ratio.tolist(),
                "estimate": self.estimate, "estimate_se": self.estimate_se,
                "fekete_lower": self.fekete_lower, "n_reps": self.n_reps}


def directional_time_constant(model, u, k_max=16, step=8.0, n_reps=32, seed=0, workers=None):
    """Ratio curve T(0, k s u) / |k s u| for k = 1..k_max along ``u``."""
    if k_max < 4:
        raise EstimationError("k_max must be at least 4")
    if n_reps < 2:
        raise EstimationError("need at least two replicates")
    u = _unit(u)
    targets = np.outer(step * np.arange(1, k_max + 1), u)
    if model.kind == "lattice":
        distances = np.linalg.norm(psi_round(targets), axis=1).astype(float)
        if np.any(distances == 0):
            raise EstimationError("step too small: a target rounds onto the origin")
    else:
        distances = step * np.arange(1, k_max + 1, dtype=float)
    origin = np.zeros_like(u)
    seeds = [replicate_seed(seed, r) for r in range(n_reps)]
    times = np.stack(run_replicates(lambda s: model.times_from(s, origin, targets), seeds, workers))
    bad = np.mean(~np.isfinite(times), axis=0)
    if np.any(bad > TRUNCATION_LIMIT):
        k = int(np.argmax(bad > TRUNCATION_LIMIT))
        raise EstimationError(
            f"{bad[k]:.1%} of replicates unreached at distance {distances[k]:g}; "
            "enlarge the delay horizon or the box")
    times = np.where(np.isfinite(times), times, np.nan)
    return DirectionalSample(u, float(step), distances, times, model.kind, int(seed))


def default_directions(model_kind, dim=2):
    """Signed axes plus diagonals for lattices; 16 equiangular directions in the plane otherwise."""
    if model_kind == "lattice":
        out = []
        for a in range(dim):
            e = np.zeros(dim)
            e[a] = 1.0
            out += [e, -e]
        for a, b in itertools.combinations(range(dim), 2):
            for sa, sb in itertools.product((1.0, -1.0), repeat=2):
                v = np.zeros(dim)
                v[a], v[b] = sa, sb
                out.append(v / np.sqrt(2.0))
        return np.array(out)
    if dim != 2:
        raise EstimationError("default continuum mesh is planar only")
    th = 2 * np.pi * np.arange(16) / 16
    return np.stack([np.cos(th), np.sin(th)], axis=1)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

SYMMETRIES = ("lattice", "rotational", "none")
_KEY_DIGITS = 9


def _orbit_key(u, symmetry):
    if symmetry == "rotational":
        return ("all",)
    if symmetry == "lattice":
        return tuple(sorted(np.round(np.abs(u), _KEY_DIGITS).tolist()))
    return tuple(np.round(u, _KEY_DIGITS).tolist())


def hyperoctahedral_images(u):
    """All images of ``u`` under coordinate permutations and sign flips."""
    u = np.asarray(u, dtype=float)
    seen = {}
    for perm in itertools.permutations(range(u.size)):
        for signs in itertools.product((1.0, -1.0), repeat=u.size):
            v = np.asarray(signs) * u[list(perm)]
            v = v + 0.0
            seen.setdefault(tuple(np.round(v, _KEY_DIGITS).tolist()), v)
    return list(seen.values())


def _pool(values, ses):
    values = np.asarray(values, dtype=float)
    ses = np.asarray(ses, dtype=float)
    if np.all(ses > 0):
        w = 1.0 / ses**2
    else:
        w = np.ones_like(values)
    w = w / w.sum()
    return float(np.sum(w * values)), float(np.sqrt(np.sum(w**2 * ses**2)))


@dataclass
class NormEstimate:
    dim: int
    symmetry: str
    directions: np.ndarray
    values: np.ndarray
    ses: np.ndarray
    orbits: list
    lambda_hat: float = float("nan")
    lambda_se: float = float("nan")
    subadditivity: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def lipschitz(self):
        return 2.0 * self.lambda_hat

    @property
    def orbits_consistent(self):
        return all(o["consistent"] for o in self.orbits)

    @property
    def subadditive(self):
        return all(c["holds"] for c in self.subadditivity)

    @property
    def degenerate(self):
        return any(f.startswith("degenerate") for f in self.flags)

    def value(self, u):
        """Pooled a(u) for a stored direction (KeyError otherwise)."""
        u = _unit(u)
        key = tuple(np.round(u, _KEY_DIGITS).tolist())
        for d, v in zip(self.directions, self.values):
            if tuple(np.round(d, _KEY_DIGITS).tolist()) == key:
                return float(v)
        raise KeyError(f"direction {u.tolist()} not tabulated")

    def to_norm(self, interpolation="hull"):
        if self.symmetry == "rotational":
            return Norm.euclidean(self.dim, scale=float(self.values[0]))
        return Norm.tabulated(self.directions, self.values, self.lipschitz, interpolation)

    def to_dict(self):
        return {"kind": "norm-estimate", "dim": self.dim, "symmetry": self.symmetry,
                "directions": self.directions.tolist(), "values": self.values.tolist(),
                "ses": self.ses.tolist(), "orbits": self.orbits,
                "lambda_hat": self.lambda_hat, "lambda_se": self.lambda_se,
                "lipschitz": self.lipschitz, "subadditivity": self.subadditivity,
                "flags": self.flags}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if data.get("kind") != "norm-estimate":
            raise EstimationError("not a norm estimate record")
        return cls(int(data["dim"]), data["symmetry"], np.asarray(data["directions"], dtype=float),
                   np.asarray(data["values"], dtype=float), np.asarray(data["ses"], dtype=float),
                   list(data["orbits"]), float(data["lambda_hat"]), float(data["lambda_se"]),
                   list(data["subadditivity"]), list(data["flags"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fit_norm(samples, symmetry="lattice", lambda_hat=float("nan"), lambda_se=float("nan"),
             z=3.0):
    """Pool directional estimates over symmetry orbits and audit the result."""
    if symmetry not in SYMMETRIES:
        raise EstimationError(f"symmetry must be one of {SYMMETRIES}")
    samples = list(samples)
    if not samples:
        raise EstimationError("no directional samples")
    dims = {s.direction.size for s in samples}
    if len(dims) != 1:
        raise EstimationError("samples have inconsistent dimensions")
    dim = dims.pop()

    groups = {}
    for s in samples:
        groups.setdefault(_orbit_key(s.direction, symmetry), []).append(s)

    orbits, dirs, vals, ses, flags = [], [], [], [], []
    for key in sorted(groups):
        members = groups[key]
        mv = [m.estimate for m in members]
        ms = [m.estimate_se for m in members]
        v, se = _pool(mv, ms)
        worst = 0.0
        for (a, sa), (b, sb) in itertools.combinations(zip(mv, ms), 2):
            comb = np.hypot(sa, sb)
            worst = max(worst, abs(a - b) / comb if comb > 0 else (0.0 if a == b else np.inf))
        orbits.append({"key": list(key), "members": [m.direction.tolist() for m in members],
                       "member_values": mv, "member_ses": ms, "value": v, "se": se,
                       "max_z": worst, "consistent": bool(worst <= z)})
        if v - z * se <= 0:
            flags.append(f"degenerate orbit {list(key)}: value {v:.4g} within {z} SE of 0")
        if symmetry == "lattice":
            images = [im for m in members for im in hyperoctahedral_images(m.direction)]
        else:
            images = [m.direction for m in members]
        uniq = {tuple(np.round(im, _KEY_DIGITS).tolist()): im for im in images}
        for im in uniq.values():
            dirs.append(im)
            vals.append(v)
            ses.append(se)
    order = np.lexsort(np.array(dirs).T[::-1])
    est = NormEstimate(dim, symmetry, np.array(dirs)[order], np.array(vals)[order],
                       np.array(ses)[order], orbits, float(lambda_hat), float(lambda_se),
                       flags=flags)
    if symmetry == "rotational":
        est.directions = np.array([s.direction for s in samples])
        est.values = np.full(len(samples), orbits[0]["value"])
        est.ses = np.full(len(samples), orbits[0]["se"])
    est.subadditivity = subadditivity_audit(est, z=z)
    return est


def subadditivity_audit(est, z=3.0):
    """a(u + v) <= a(u) + a(v) + z SE for stored pairs whose sum direction is stored."""
    table = {tuple(np.round(d, _KEY_DIGITS).tolist()): (v, s)
             for d, v, s in zip(est.directions, est.values, est.ses)}
    checks = []
    for (i, u), (j, v) in itertools.combinations(enumerate(est.directions), 2):
        w = u + v
        n = np.linalg.norm(w)
        if n < 1e-12:
            continue
        key = tuple(np.round(w / n, _KEY_DIGITS).tolist())
        if key not in table:
            continue
        aw, sw = table[key]
        lhs = n * aw
        rhs = est.values[i] + est.values[j]
        tol = z * np.sqrt((n * sw) ** 2 + est.ses[i] ** 2 + est.ses[j] ** 2)
        tol += 1e-12 * max(abs(rhs), 1.0)  # rounding in |u + v|
        checks.append({"u": u.tolist(), "v": v.tolist(), "lhs": float(lhs), "rhs": float(rhs),
                       "tolerance": float(tol), "holds": bool(lhs <= rhs + tol)})
    return checks


def estimate_norm(model, directions=None, k_max=16, step=8.0, n_reps=32, seed=0,
                  symmetry=None, workers=None):
    """Sample every direction with its own seed stream, then fit."""
    if directions is None:
        directions = default_directions(model.kind, model.dim)
    if symmetry is None:
        symmetry = "lattice" if model.kind == "lattice" else "rotational"
    samples = [directional_time_constant(model, u, k_max, step, n_reps,
                                         replicate_seed(seed, 1000 + j), workers)
               for j, u in enumerate(directions)]
    return fit_norm(samples, symmetry), samples


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def kingman_diagnostics(sample, z=3.0, splits=None):
    """Subadditivity of the mean sequence and monotonicity of the ratio curve.

    E T(0, n) is compared with E T(0, m) + E T(0, n - m) (stationarity gives
    the second term) over all splits 1 <= m < n unless ``splits`` lists
    ``(m, n)`` pairs in units of the step.
    """
    mean, se = sample.mean_times, sample.se_times
    K = sample.k_max
    if splits is None:
        splits = [(m, n) for n in range(2, K + 1) for m in range(1, n)]
    checks = []
    for m, n in splits:
        if not 1 <= m < n <= K:
            raise EstimationError(f"split ({m}, {n}) outside 1..{K}")
        lhs = mean[n - 1]
        rhs = mean[m - 1] + mean[n - m - 1]
        tol = z * np.sqrt(se[n - 1] ** 2 + se[m - 1] ** 2 + se[n - m - 1] ** 2)
        checks.append({"m": m, "n": n, "lhs": float(lhs), "rhs": float(rhs),
                       "tolerance": float(tol), "holds": bool(lhs <= rhs + tol),
                       "equal": bool(lhs == rhs)})
    r, rs = sample.mean_ratio, sample.se_ratio
    rises = []
    for k in range(K - 1):
        tol = z * np.hypot(rs[k], rs[k + 1])
        if r[k + 1] > r[k] + tol:
            rises.append({"k": k + 1, "from": float(r[k]), "to": float(r[k + 1]),
                          "tolerance": float(tol)})
    return {"splits": checks, "subadditive": all(c["holds"] for c in checks),
            "ratio_curve": r.tolist(), "ratio_se": rs.tolist(),
            "non_increasing": not rises, "rises": rises,
            "fekete_lower": sample.fekete_lower, "tail_estimate": sample.estimate,
            "gap_to_lower": sample.estimate - sample.fekete_lower}


def lambda_estimate(model, n_samples=32, seed=0, mesh_pitch=None, audit_pairs=8,
                    audit_distance=10.0, z=3.0, workers=None):
    """Max over a unit-ball mesh of the mean of T(0, x), plus the linear-growth bound audit.

    The audit checks mean T(x, y) <= (|y - x| + 1) * max + z SE on random
    pairs at distance ``audit_distance``.
    """
    dim = model.dim
    if mesh_pitch is None:
        mesh_pitch = 0.1 if model.kind == "lattice" else 0.25
    mesh = grid_in_ball(1.0, mesh_pitch, dim)
    th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    if dim == 2:
        mesh = np.vstack([mesh, np.stack([np.cos(th), np.sin(th)], axis=1)])
    origin = np.zeros(dim)
    seeds = [replicate_seed(seed, r) for r in range(n_samples)]
    times = np.stack(run_replicates(lambda s: model.times_from(s, origin, mesh), seeds, workers))
    means = times.mean(axis=0)
    j = int(np.argmax(means))
    lam = float(means[j])
    lam_se = float(_se(times[:, j])) if n_samples > 1 else 0.0

    rng = np.random.default_rng(replicate_seed(seed, 99))
    audits = []
    for p in range(audit_pairs):
        x = rng.uniform(-audit_distance, audit_distance, size=dim)
        v = rng.normal(size=dim)
        y = x + audit_distance * v / np.linalg.norm(v)
        ps = [replicate_seed(seed, 100 + p, r) for r in range(n_samples)]
        t = np.array(run_replicates(lambda s: model.times_from(s, x, y[None, :])[0], ps, workers))
        m = float(t.mean())
        se = float(_se(t)) if n_samples > 1 else 0.0
        bound = (np.linalg.norm(y - x) + 1.0) * lam
        audits.append({"x": x.tolist(), "y": y.tolist(), "mean": m, "se": se,
                       "bound": float(bound), "holds": bool(m <= bound + z * se)})
    return {"lambda_hat": lam, "lambda_se": lam_se, "argmax": mesh[j].tolist(),
            "mesh_points": int(len(mesh)), "audits": audits,
            "audit_holds": all(a["holds"] for a in audits)}
