"""Norms, Voronoi cells, cones and relative-density estimators.

Site indices are 1-based throughout the package (type ``i`` is the
infection started at ``sites[i - 1]``), matching the winner labels stored in
territory maps.
"""
import json
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


class GeometryPreconditionError(GeometryError):
    """Raised when sites violate a geometric precondition; carries the culprit."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

_BUILTIN = ("l1", "l2", "linf")


@dataclass(frozen=True, eq=False)
class Norm:
    """A norm on R^d.

    ``kind`` is one of ``l1``, ``l2``, ``linf`` (each multiplied by
    ``scale``; ``l2`` with a scale is the scaled-Euclidean norm) or
    ``tabulated``: values on stored unit directions, extended by
    homogeneity. With ``interpolation="nearest"`` a query uses the nearest
    stored direction; with ``"hull"`` it is the gauge of the convex hull of
    the points u / a(u), which is a true norm whenever the table is
    centrally symmetric.
    """

    kind: str
    dim: int = 2
    scale: float = 1.0
    directions: np.ndarray = None
    values: np.ndarray = None
    lipschitz: float = float("nan")
    interpolation: str = "nearest"

    def __post_init__(self):
        if self.dim < 2:
            raise GeometryError("dimension must be at least 2")
        if self.kind in _BUILTIN:
            if not self.scale > 0:
                raise GeometryError("norm scale must be positive")
        elif self.kind == "tabulated":
            dirs = np.asarray(self.directions, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            if dirs.ndim != 2 or dirs.shape[1] != self.dim or dirs.shape[0] != vals.shape[0]:
                raise GeometryError("tabulated norm needs (m, d) directions and m values")
            if np.any(vals <= 0):
                raise GeometryError("tabulated norm values must be positive")
            dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
            object.__setattr__(self, "directions", dirs)
            object.__setattr__(self, "values", vals)
            if self.interpolation == "hull":
                object.__setattr__(self, "_facets", _gauge_facets(dirs / vals[:, None]))
            elif self.interpolation != "nearest":
                raise GeometryError(f"unknown interpolation {self.interpolation!r}")
        else:
            raise GeometryError(f"unknown norm kind {self.kind!r}")

    @classmethod
    def p(cls, p, dim=2, scale=1.0):
        key = {1: "l1", 2: "l2", np.inf: "linf", "inf": "linf"}.get(p)
        if key is None:
            raise GeometryError(f"unsupported exponent {p!r}")
        return cls(key, dim=dim, scale=float(scale))

    @classmethod
    def euclidean(cls, dim=2, scale=1.0):
        return cls("l2", dim=dim, scale=float(scale))

    @classmethod
    def tabulated(cls, directions, values, lipschitz=float("nan"), interpolation="nearest"):
        directions = np.asarray(directions, dtype=float)
        return cls("tabulated", dim=directions.shape[1], directions=directions,
                   values=np.asarray(values, dtype=float), lipschitz=float(lipschitz),
                   interpolation=interpolation)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "l1":
            return self.scale * np.abs(x).sum(axis=-1)
        if self.kind == "l2":
            return self.scale * np.sqrt((x * x).sum(axis=-1))
        if self.kind == "linf":
            return self.scale * np.abs(x).max(axis=-1)
        if self.interpolation == "hull":
            return np.maximum((x @ self._facets.T).max(axis=-1), 0.0)
        r = np.sqrt((x * x).sum(axis=-1))
        return r * self.values[self._nearest(x)]

    def _nearest(self, x):
        return np.argmax(x @ self.directions.T, axis=-1)

    def angular_gap(self, x):
        """Angle between ``x`` and the stored direction used to evaluate it."""
        if self.kind != "tabulated":
            return np.zeros(np.shape(x)[:-1])
        x = np.asarray(x, dtype=float)
        u = self.directions[self._nearest(x)]
        r = np.linalg.norm(x, axis=-1)
        par = (x * u).sum(axis=-1)
        perp = np.linalg.norm(x - par[..., None] * u, axis=-1)
        return np.where(r > 0, np.arctan2(perp, par), 0.0)

    def error_bound(self, x):
        """Lipschitz bound on the tabulation error at ``x`` (0 for built-ins)."""
        if self.kind != "tabulated":
            return np.zeros(np.shape(x)[:-1])
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return self.lipschitz * self.angular_gap(x) * r

    def triangle_violations(self, n=10000, seed=0, tol=0.0):
        """Sampled triples (x, y) with N(x + y) > N(x) + N(y) + tol."""
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, self.dim))
        y = rng.normal(size=(n, self.dim))
        lhs = self(x + y)
        rhs = self(x) + self(y)
        if self.kind == "tabulated" and np.isfinite(self.lipschitz):
            rhs = rhs + self.error_bound(x + y) + self.error_bound(x) + self.error_bound(y)
        bad = lhs > rhs + tol
        return [(x[i], y[i], float(lhs[i] - rhs[i])) for i in np.flatnonzero(bad)]

    def to_dict(self):
        out = {"kind": self.kind, "dim": self.dim, "scale": self.scale}
        if self.kind == "tabulated":
            out.update(directions=self.directions.tolist(), values=self.values.tolist(),
                       lipschitz=self.lipschitz, interpolation=self.interpolation)
        return out

    @classmethod
    def from_dict(cls, data):
        if data["kind"] == "tabulated":
            return cls.tabulated(data["directions"], data["values"],
                                 data.get("lipschitz", float("nan")),
                                 data.get("interpolation", "nearest"))
        return cls(data["kind"], dim=int(data.get("dim", 2)), scale=float(data.get("scale", 1.0)))

    def __repr__(self):
        if self.kind == "tabulated":
            return f"Norm(tabulated, dim={self.dim}, m={len(self.values)})"
        return f"Norm({self.kind}, dim={self.dim}, scale={self.scale:g})"


def _gauge_facets(points):
    """Facet normals n_f scaled so that the hull is {y : n_f . y <= 1}."""
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise GeometryError("tabulated directions do not surround the origin") from exc
    normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
    if np.any(offsets >= 0):
        raise GeometryError("origin is not interior to the tabulated unit ball")
    return normals / -offsets[:, None]


@dataclass
class SiteConfiguration:
    sites: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.sites, dtype=float))
        if s.shape[0] < 2:
            raise GeometryError("need at least two sites")
        if s.shape[1] < 2:
            raise GeometryError("sites must live in dimension >= 2")
        if not self.scale > 0:
            raise GeometryError("scale must be positive")
        diff = s[:, None, :] - s[None, :, :]
        same = np.all(diff == 0, axis=-1)
        np.fill_diagonal(same, False)
        if same.any():
            i, j = np.argwhere(same)[0]
            raise GeometryError(f"sites {i + 1} and {j + 1} coincide")
        self.sites = s

    @property
    def k(self):
        return self.sites.shape[0]

    @property
    def dim(self):
        return self.sites.shape[1]

    @property
    def points(self):
        return self.scale * self.sites

    def scaled(self, R):
        return SiteConfiguration(self.sites, self.scale * R)


def _check_index(i, cfg):
    if not 1 <= i <= cfg.k:
        raise IndexError(f"site index {i} outside 1..{cfg.k}")


def voronoi_delta_member(z, i, cfg, norm, delta=0.0):
    """Membership in the shrunken cell {N(z - x_i) < N(z - x_j) - delta, j != i}."""
    _check_index(i, cfg)
    z = np.asarray(z, dtype=float)
    pts = cfg.points
    own = norm(z - pts[i - 1])
    ok = np.ones(np.shape(own), dtype=bool)
    for j in range(cfg.k):
        if j != i - 1:
            ok &= own < norm(z - pts[j]) - delta
    return ok if ok.ndim else bool(ok)


def voronoi_member(z, i, cfg, norm):
    """Strict Voronoi cell membership; points on a bisector belong to no cell."""
    return voronoi_delta_member(z, i, cfg, norm, 0.0)


def voronoi_labels(z, cfg, norm, delta=0.0):
    """Cell label 1..k for each point of ``z`` (n, d); 0 where no cell claims it."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    dist = np.stack([norm(z - p) for p in cfg.points], axis=0)
    best = np.argmin(dist, axis=0)
    dmin = dist[best, np.arange(z.shape[0])]
    others = dist.copy()
    others[best, np.arange(z.shape[0])] = np.inf
    second = others.min(axis=0)
    return np.where(dmin < second - delta, best + 1, 0)


# ---------------------------------------------------------------------------
# cones H(K)
# ---------------------------------------------------------------------------

@dataclass
class Cone:
    """apex + union over lambda >= 1 of lambda * S * u, u in ``directions``."""

    directions: np.ndarray
    radius: float
    apex: np.ndarray = None

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.directions, dtype=float))
        norms = np.linalg.norm(u, axis=1)
        if np.any(norms == 0):
            raise GeometryError("cone base points must be nonzero")
        if not self.radius > 0:
            raise GeometryError("cone radius must be positive")
        self.directions = u / norms[:, None]
        self.apex = np.zeros(u.shape[1]) if self.apex is None else np.asarray(self.apex, dtype=float)

    @classmethod
    def from_points(cls, base, apex=None, rtol=1e-12):
        base = np.atleast_2d(np.asarray(base, dtype=float))
        r = np.linalg.norm(base, axis=1)
        if np.ptp(r) > rtol * r.max():
            raise GeometryError("cone base points must share one Euclidean norm")
        return cls(base, float(r[0]), apex)


def cone_member(z, cone, theta=1e-9):
    """Angular-tolerance membership in apex + H(K).

    True when the direction of ``z - apex`` is within ``theta`` radians of a
    stored direction and ``|z - apex| >= S``. The default tolerance makes
    this the exact ray test up to rounding.
    """
    v = np.asarray(z, dtype=float) - cone.apex
    scalar = v.ndim == 1
    v = np.atleast_2d(v)
    r = np.linalg.norm(v, axis=1)
    par = v @ cone.directions.T
    perp = np.empty_like(par)
    for m, u in enumerate(cone.directions):
        perp[:, m] = np.linalg.norm(v - par[:, m, None] * u, axis=1)
    ang = np.arctan2(perp, par)
    out = np.any(ang <= theta, axis=1) & (r >= cone.radius * (1 - 1e-12))
    return bool(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# stability audits for shrunken cells
# ---------------------------------------------------------------------------

def _sample_members(predicate, center, n, rng, spread, dim):
    """Rejection-sample ``n`` points with predicate true from a box around center."""
    got = []
    total = 0
    tries = 0
    while total < n and tries < 200:
        z = center + rng.uniform(-spread, spread, size=(4 * n + 64, dim))
        z = z[np.asarray(predicate(z), dtype=bool)]
        got.append(z)
        total += len(z)
        tries += 1
    z = np.concatenate(got)[:n] if got else np.empty((0, dim))
    return z


def homothety_stability_check(predicate, center, trials=10000, seed=0, spread=10.0,
                              max_ratio=20.0):
    """Look for z in the set and lambda >= 1 with center + lambda (z - center) outside it.

    ``predicate`` maps an (n, d) array to booleans. Returns the list of
    violating ``(z, lambda)`` pairs.
    """
    center = np.asarray(center, dtype=float)
    rng = np.random.default_rng(seed)
    z = _sample_members(predicate, center, trials, rng, spread, center.size)
    lam = 1.0 + rng.uniform(0.0, max_ratio - 1.0, size=len(z))
    img = center + lam[:, None] * (z - center)
    bad = ~np.asarray(predicate(img), dtype=bool)
    return [(z[i], float(lam[i])) for i in np.flatnonzero(bad)]


def translate_stability_check(x, delta, norm, trials=10000, seed=0, spread=10.0,
                              predicate=None):
    """Points z of V_1^delta(0, x) whose translate z - x leaves the set.

    ``predicate`` replaces the cell membership test (negative controls).
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x != 0):
        raise GeometryError("x must be nonzero")
    if predicate is None:
        cfg = SiteConfiguration(np.stack([np.zeros_like(x), x]))
        predicate = lambda z: voronoi_delta_member(z, 1, cfg, norm, delta)  # noqa: E731
    rng = np.random.default_rng(seed)
    z = _sample_members(predicate, x, trials, rng, spread, x.size)
    bad = ~np.asarray(predicate(z - x), dtype=bool)
    return [z[i] for i in np.flatnonzero(bad)]


@dataclass
class CoexistenceGeometry:
    passed: bool
    per_site: list
    witnesses: dict = field(default_factory=dict)

    def failing_pair(self):
        for pair, (_, _, value, ok) in sorted(self.witnesses.items()):
            if not ok:
                return pair
        return None


def segment_minimum(norm, a, b, tol=1e-10):
    """Golden-section minimum of t -> N((1 - t) a + t b) on [0, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    f = lambda t: float(norm((1 - t) * a + t * b))  # noqa: E731
    g = (np.sqrt(5.0) - 1) / 2
    lo, hi = 0.0, 1.0
    c = hi - g * (hi - lo)
    d = lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
    t = 0.5 * (lo + hi)
    best = min((f(t), t), (f(0.0), 0.0), (f(1.0), 1.0))
    return best[1], (1 - best[1]) * a + best[1] * b, best[0]


def coexistence_geometry_check(cfg, norm, sphere_tol=1e-9, margin=1e-9):
    """Segment criterion: every [x_i, x_j] must contain a point with N < 1.

    Sites must lie on the unit sphere of ``norm``. Returns the verdict, a
    per-site pass flag and, per ordered pair, ``(t, point, value, ok)`` for
    the minimiser found on the segment.
    """
    pts = cfg.points
    for i, p in enumerate(pts):
        v = float(norm(p))
        if abs(v - 1.0) > sphere_tol:
            raise GeometryPreconditionError(
                f"site {i + 1} has norm {v:.12g}, not on the unit sphere "
                "(on_sphere = true rescales the sites)", pair=(i + 1, i + 1))
    witnesses = {}
    per_site = [True] * cfg.k
    for i in range(cfg.k):
        for j in range(i + 1, cfg.k):
            t, z, value = segment_minimum(norm, pts[i], pts[j])
            ok = value < 1.0 - margin
            witnesses[(i + 1, j + 1)] = (t, z, value, ok)
            witnesses[(j + 1, i + 1)] = (1 - t, z, value, ok)
            if not ok:
                per_site[i] = per_site[j] = False
    return CoexistenceGeometry(all(per_site), per_site, witnesses)


# ---------------------------------------------------------------------------
# relative density
# ---------------------------------------------------------------------------

@dataclass
class DensityReport:
    radii: np.ndarray
    ratios: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray
    lower_estimate: float
    upper_estimate: float
    estimator: str
    pitch: float = float("nan")
    tail_fraction: float = 0.25

    @property
    def defined(self):
        return np.isfinite(self.ratios)

    def to_dict(self):
        return {
            "kind": "density",
            "estimator": self.estimator,
            "pitch": self.pitch,
            "tail_fraction": self.tail_fraction,
            "lower_estimate": self.lower_estimate,
            "upper_estimate": self.upper_estimate,
            "radii": [float(r) for r in self.radii],
            "ratios": [None if not np.isfinite(r) else float(r) for r in self.ratios],
            "stderr": [None if not np.isfinite(s) else float(s) for s in self.stderr],
            "samples": [int(s) for s in self.samples],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        nan = float("nan")
        return cls(
            radii=np.asarray(data["radii"], dtype=float),
            ratios=np.array([nan if r is None else r for r in data["ratios"]]),
            stderr=np.array([nan if s is None else s for s in data["stderr"]]),
            samples=np.asarray(data["samples"], dtype=np.int64),
            lower_estimate=data["lower_estimate"],
            upper_estimate=data["upper_estimate"],
            estimator=data["estimator"],
            pitch=data.get("pitch", nan),
            tail_fraction=data.get("tail_fraction", 0.25),
        )

    def to_csv(self):
        lines = ["radius,ratio,stderr,samples"]
        for r, q, s, n in zip(self.radii, self.ratios, self.stderr, self.samples):
            lines.append(f"{r:.17g},{q:.17g},{s:.17g},{int(n)}")
        return "\n".join(lines) + "\n"


def uniform_in_ball(rng, n, radius, dim, center=None):
    g = rng.normal(size=(n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.uniform(size=n) ** (1.0 / dim)
    out = g * r[:, None]
    return out if center is None else out + center


def grid_in_ball(radius, pitch, dim, center=None):
    """Points of pitch * Z^d inside the closed ball."""
    m = int(np.floor(radius / pitch))
    axis = np.arange(-m, m + 1) * pitch
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    mesh = mesh[(mesh ** 2).sum(axis=1) <= radius ** 2]
    return mesh if center is None else mesh + center


def relative_density(C, D, radii, estimator="monte-carlo", dim=2, pitch=0.1,
                     samples=100000, seed=0, tail_fraction=0.25, center=None):
    """Ratio |C n D n B_R| / |D n B_R| for each radius.

    ``C`` and ``D`` are vectorised predicates on (n, d) arrays (``None``
    stands for the whole space). The grid estimator counts points of
    ``pitch * Z^d``; the Monte Carlo one draws ``samples`` uniform points per
    radius and attaches a binomial standard error. The lower/upper estimates
    are the min/max of the defined ratios over the last ``tail_fraction`` of
    radii.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise GeometryError("radii must be positive and strictly increasing")
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    all_true = lambda z: np.ones(len(z), dtype=bool)  # noqa: E731
    C = all_true if C is None else C
    D = all_true if D is None else D
    ratios = np.full(radii.size, np.nan)
    stderr = np.full(radii.size, np.nan)
    counts = np.zeros(radii.size, dtype=np.int64)

    if estimator == "grid":
        pts = grid_in_ball(radii[-1], pitch, dim, center)
        r = np.linalg.norm(pts - center, axis=1)
        in_d = np.asarray(D(pts), dtype=bool)
        in_cd = in_d & np.asarray(C(pts), dtype=bool)
        for n, R in enumerate(radii):
            sel = r <= R
            nd = int(in_d[sel].sum())
            counts[n] = nd
            if nd:
                ratios[n] = in_cd[sel].sum() / nd
    elif estimator == "monte-carlo":
        rng = np.random.default_rng(seed)
        for n, R in enumerate(radii):
            pts = uniform_in_ball(rng, samples, R, dim, center)
            in_d = np.asarray(D(pts), dtype=bool)
            nd = int(in_d.sum())
            counts[n] = nd
            if nd:
                p = (in_d & np.asarray(C(pts), dtype=bool)).sum() / nd
                ratios[n] = p
                stderr[n] = np.sqrt(p * (1 - p) / nd)
        pitch = float("nan")
    else:
        raise GeometryError(f"unknown estimator {estimator!r}")

    if not np.isfinite(ratios).any():
        raise GeometryError("D has no mass in any of the requested balls")
    n_tail = max(1, int(np.ceil(tail_fraction * radii.size)))
    tail = ratios[-n_tail:]
    tail = tail[np.isfinite(tail)]
    if tail.size == 0:
        tail = ratios[np.isfinite(ratios)][-1:]
    return DensityReport(radii, ratios, stderr, counts, float(tail.min()), float(tail.max()),
                         estimator, float(pitch), tail_fraction)
