"""Poisson outburst growth in R^d and competition between unit-ball seeds.

An event ``(X, delay, R)`` fires ``delay`` after its centre is infected and
infects the closed ball of radius ``R`` around ``X`` (the centre excepted).
Passage times are computed by a time-ordered sweep over events, which is a
label-setting search on the event graph with node-exit weights.
"""
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import SiteConfiguration
from .hashing import quantize
from .territory import TerritoryMap, labels_from_times


class ContinuumError(ValueError):
    pass


class TruncatedPathError(ContinuumError):
    pass


@dataclass(frozen=True)
class RadiusLaw:
    """Radius distribution: ``constant`` r0, ``exponential`` (rate) or
    ``truncated-exponential`` (rate, conditioned on R <= cap)."""

    kind: str
    r0: float = 1.0
    rate: float = 1.0
    cap: float = np.inf

    def __post_init__(self):
        if self.kind == "constant":
            if not self.r0 > 0:
                raise ContinuumError("constant radius must be positive")
        elif self.kind in ("exponential", "truncated-exponential"):
            if not self.rate > 0:
                raise ContinuumError("rate must be positive")
            if self.kind == "truncated-exponential" and not (0 < self.cap < np.inf):
                raise ContinuumError("truncated law needs a finite positive cap")
        else:
            raise ContinuumError(f"unknown radius law {self.kind!r}")

    @classmethod
    def constant(cls, r0=1.0):
        return cls("constant", r0=float(r0))

    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exponential", rate=float(rate))

    @classmethod
    def truncated_exponential(cls, rate, cap):
        return cls("truncated-exponential", rate=float(rate), cap=float(cap))

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return (r >= self.r0).astype(float)
        base = -np.expm1(-self.rate * np.maximum(r, 0.0))
        if self.kind == "exponential":
            return base
        return np.clip(base / -np.expm1(-self.rate * self.cap), 0.0, 1.0)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "constant":
            return np.full(q.shape, self.r0)
        if self.kind == "truncated-exponential":
            q = q * -np.expm1(-self.rate * self.cap)
        return -np.log1p(-q) / self.rate

    def default_cap(self):
        """The 1 - 1e-6 quantile (or the law's own cap if smaller)."""
        if self.kind == "constant":
            return self.r0
        return float(min(self.ppf(1 - 1e-6), self.cap))

    def tail_mass(self, r_cap):
        return float(1.0 - self.cdf(r_cap))

    def to_dict(self):
        return {"kind": self.kind, "r0": self.r0, "rate": self.rate,
                "cap": None if not np.isfinite(self.cap) else self.cap}


@dataclass
class OutburstEventSet:
    centers: np.ndarray
    delays: np.ndarray
    radii: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    t_cap: float
    r_cap: float
    truncated_mass: float
    seed: int

    @property
    def count(self):
        return self.delays.shape[0]

    @property
    def dim(self):
        return self.lo.size

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def __eq__(self, other):
        return (isinstance(other, OutburstEventSet)
                and np.array_equal(self.centers, other.centers)
                and np.array_equal(self.delays, other.delays)
                and np.array_equal(self.radii, other.radii)
                and self.t_cap == other.t_cap and self.seed == other.seed)

    @classmethod
    def from_arrays(cls, centers, delays, radii, lo, hi, t_cap=np.inf, seed=0):
        """Hand-built event sets (tests, replays)."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        delays = np.asarray(delays, dtype=float).reshape(-1)
        radii = np.asarray(radii, dtype=float).reshape(-1)
        lo = np.asarray(lo, dtype=float)
        if centers.size == 0:
            centers = np.empty((0, lo.size))
        return cls(centers, delays, radii, lo, np.asarray(hi, dtype=float), float(t_cap),
                   float(radii.max()) if radii.size else 0.0, 0.0, int(seed))


def simulate_outbursts(box, t_cap, law, seed, r_cap=None):
    """Poisson events in ``box`` x [0, t_cap] x radii, intensity Lebesgue x Lebesgue x law.

    Radii are capped at ``r_cap`` (default: the law's 1 - 1e-6 quantile);
    the neglected tail mass is recorded on the result.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ContinuumError("box must be nonempty")
    if not t_cap > 0:
        raise ContinuumError("t_cap must be positive")
    r_cap = law.default_cap() if r_cap is None else float(r_cap)
    rng = np.random.default_rng(seed)
    n = rng.poisson(np.prod(hi - lo) * t_cap)
    centers = lo + (hi - lo) * rng.uniform(size=(n, lo.size))
    delays = quantize(t_cap * rng.uniform(size=n))
    radii = np.minimum(law.ppf(rng.uniform(size=n)), r_cap)
    return OutburstEventSet(centers, delays, radii, lo, hi, float(t_cap), r_cap,
                            law.tail_mass(r_cap), int(seed))


class EventGraphIndex:
    """Uniform cell grid over event centres (cell size >= largest radius)."""

    def __init__(self, events, cell=None):
        self.events = events
        self.cell = max(float(events.r_cap), 1e-9) if cell is None else float(cell)
        if self.cell < events.radii.max(initial=0.0):
            raise ContinuumError("cell size must be at least the largest radius")
        self.origin = events.lo.copy()
        self.dims = np.maximum(np.ceil((events.hi - events.lo) / self.cell).astype(np.int64), 1)
        keys = self._cell_of(events.centers)
        self._cells = {}
        for i, key in enumerate(map(tuple, keys)):
            self._cells.setdefault(key, []).append(i)

    def _cell_of(self, pts):
        c = np.floor((np.atleast_2d(pts) - self.origin) / self.cell).astype(np.int64)
        return np.clip(c, 0, self.dims - 1)

    def covering(self, y):
        """Indices of events whose ball contains ``y`` (and whose centre is not ``y``)."""
        y = np.asarray(y, dtype=float)
        base = self._cell_of(y)[0]
        ev = self.events
        out = []
        for off in np.ndindex(*([3] * ev.dim)):
            key = tuple(base + np.asarray(off) - 1)
            for i in self._cells.get(key, ()):
                d2 = ((ev.centers[i] - y) ** 2).sum()
                if 0.0 < d2 <= ev.radii[i] ** 2:
                    out.append(i)
        return sorted(out)

    def covering_linear(self, y):
        ev = self.events
        d2 = ((ev.centers - np.asarray(y, dtype=float)) ** 2).sum(axis=1)
        return np.flatnonzero((d2 > 0) & (d2 <= ev.radii ** 2)).tolist()


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float = 1.0


def _as_balls(A):
    if isinstance(A, Ball):
        return [A]
    if isinstance(A, (list, tuple)) and A and isinstance(A[0], Ball):
        return list(A)
    return [Ball(np.asarray(A, dtype=float), 1.0)]


def _check_source(events, balls):
    for b in balls:
        c = np.asarray(b.center, dtype=float)
        gap = np.maximum(events.lo - c, 0) + np.maximum(c - events.hi, 0)
        if np.linalg.norm(gap) >= b.radius:
            raise ContinuumError("source region does not meet the simulation box")


def sweep_times(events, sources, targets, t_stop=None):
    """Infection times of event centres and of ``targets`` from a union of balls."""
    balls = _as_balls(sources)
    _check_source(events, balls)
    targets = np.asarray(targets, dtype=float).reshape(-1, events.dim)
    t_stop = events.t_cap if t_stop is None else float(t_stop)
    pts = np.concatenate([events.centers, targets]) if targets.size else events.centers
    if pts.shape[0]:
        origin = np.minimum(pts.min(axis=0), events.lo)
        top = np.maximum(pts.max(axis=0), events.hi)
    else:
        origin, top = events.lo, events.hi
    # cells must be at least the largest radius; a floor keeps the grid small
    floor = float((top - origin).max()) / 4_000_000 ** (1.0 / events.dim)
    cell = max(float(events.r_cap), floor, 1e-9)
    dims = np.maximum(np.ceil((top - origin) / cell).astype(np.int64) + 1, 1)
    if np.prod(dims) > 50_000_000:
        raise ContinuumError("cell grid too fine for the box; raise the radius cap")
    time = kernels.burst_sweep(pts, events.count, events.delays, events.radii,
                               np.stack([np.asarray(b.center, dtype=float) for b in balls]),
                               np.array([b.radius for b in balls]), t_stop, origin, cell, dims)
    return time[:events.count], time[events.count:]


def continuum_passage_time(events, A, targets):
    """T(A, c) for each target point c; ``inf`` marks targets not reached by t_cap.

    Returns ``(times, truncated)`` where ``truncated`` flags the ``inf`` entries.
    """
    _, t = sweep_times(events, A, targets)
    return t, ~np.isfinite(t)


def ball_mesh(center, pitch=0.1, radius=1.0):
    """Points of the global lattice pitch * Z^d inside the closed ball, plus its centre."""
    center = np.asarray(center, dtype=float)
    lo = np.ceil((center - radius) / pitch).astype(np.int64)
    hi = np.floor((center + radius) / pitch).astype(np.int64)
    axes = [np.arange(l, h + 1) * pitch for l, h in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, center.size)
    mesh = mesh[((mesh - center) ** 2).sum(axis=1) <= radius * radius]
    return np.concatenate([center[None, :], mesh])


def ball_sup_times(events, A, target_centers, pitch=0.1, radius=1.0):
    """sup over each target ball of T(A, .), evaluated on its mesh and on the
    event centres it contains (the latter keeps the triangle inequality exact)."""
    target_centers = np.atleast_2d(np.asarray(target_centers, dtype=float))
    meshes = [ball_mesh(c, pitch, radius) for c in target_centers]
    sizes = [len(m) for m in meshes]
    ev_t, tg_t = sweep_times(events, A, np.concatenate(meshes))
    out = np.empty(len(meshes))
    bounds = np.cumsum([0] + sizes)
    for n, c in enumerate(target_centers):
        vals = tg_t[bounds[n]:bounds[n + 1]]
        inside = ((events.centers - c) ** 2).sum(axis=1) <= radius * radius
        best = vals.max()
        if inside.any():
            best = max(best, ev_t[inside].max())
        out[n] = best
    return out


def continuum_territories(events, cfg, origin, pitch, shape, keep_times=False):
    """Winner among the unit-ball seeds ``cfg.points[i] + B`` on a regular grid."""
    if not isinstance(cfg, SiteConfiguration):
        cfg = SiteConfiguration(cfg)
    pts = cfg.points
    d = pts.shape[1]
    gaps = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() <= 2.0:
        raise ContinuumError("seed balls overlap")
    origin = np.asarray(origin, dtype=float)
    shape = tuple(int(s) for s in shape)
    top = origin + pitch * (np.asarray(shape) - 1)
    if np.any(origin < events.lo) or np.any(top > events.hi):
        raise ContinuumError("evaluation grid exceeds the simulation box")
    axes = [origin[a] + pitch * np.arange(shape[a]) for a in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    per = np.stack([sweep_times(events, Ball(p, 1.0), grid)[1] for p in pts])
    winner, best = labels_from_times(per)
    return TerritoryMap(origin, float(pitch), winner.reshape(shape), best.reshape(shape),
                        cfg.k, events.seed,
                        per.reshape((cfg.k,) + shape) if keep_times else None)


def ball_vs_point_gap(events, x, y, pitch=0.1):
    """(T(x + B, y), T(x + B, y + B), difference); raises if either is truncated."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    point, _ = continuum_passage_time(events, Ball(x), y[None, :])
    ball = ball_sup_times(events, Ball(x), y[None, :], pitch)
    if not (np.isfinite(point[0]) and np.isfinite(ball[0])):
        raise TruncatedPathError("passage time truncated at t_cap")
    return float(point[0]), float(ball[0]), float(ball[0] - point[0])


def ball_point_gaps(events, x, ys, pitch=0.1, q=(5, 25, 50, 75, 95)):
    """Gaps T(x + B, y + B) - T(x + B, y) over many targets, with percentiles.

    The constant separating the two is only known to exist, so the gap
    distribution is reported as is. Truncated targets are dropped.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    point, _ = continuum_passage_time(events, Ball(x), ys)
    ball = ball_sup_times(events, Ball(x), ys, pitch)
    ok = np.isfinite(point) & np.isfinite(ball)
    gaps = ball[ok] - point[ok]
    pct = np.percentile(gaps, q).tolist() if gaps.size else [float("nan")] * len(q)
    return {"gaps": gaps, "n": int(gaps.size), "dropped": int((~ok).sum()),
            "percentiles": dict(zip(q, pct))}


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

EVENT_MAGIC = b"CGEV"


def events_to_binary(ev):
    """Header (magic, version, d, seed, box, t_cap, r_cap, tail mass, count) then
    one record of d + 2 little-endian doubles per event: centre, delay, radius."""
    d = ev.dim
    head = EVENT_MAGIC + struct.pack("<HHQ", 1, d, ev.seed & 0xFFFFFFFFFFFFFFFF)
    head += struct.pack(f"<{d}d", *ev.lo) + struct.pack(f"<{d}d", *ev.hi)
    head += struct.pack("<dddQ", ev.t_cap, ev.r_cap, ev.truncated_mass, ev.count)
    rec = np.column_stack([ev.centers, ev.delays, ev.radii]).astype("<f8")
    return head + rec.tobytes()


def events_from_binary(data):
    if data[:4] != EVENT_MAGIC:
        raise ValueError("not an event file (bad magic)")
    version, d, seed = struct.unpack_from("<HHQ", data, 4)
    if version != 1:
        raise ValueError(f"unsupported event file version {version}")
    off = 16
    lo = np.array(struct.unpack_from(f"<{d}d", data, off))
    off += 8 * d
    hi = np.array(struct.unpack_from(f"<{d}d", data, off))
    off += 8 * d
    t_cap, r_cap, mass, n = struct.unpack_from("<dddQ", data, off)
    off += 32
    rec = np.frombuffer(data, dtype="<f8", count=n * (d + 2), offset=off).reshape(n, d + 2)
    return OutburstEventSet(rec[:, :d].copy(), rec[:, d].copy(), rec[:, d + 1].copy(), lo, hi,
                            t_cap, r_cap, mass, seed)


def events_to_csv(ev):
    names = ["x", "y", "z"][:ev.dim] if ev.dim <= 3 else [f"x{a}" for a in range(ev.dim)]
    lines = [",".join(names + ["delay", "radius"])]
    for c, t, r in zip(ev.centers, ev.delays, ev.radii):
        lines.append(",".join(f"{v:.17g}" for v in c) + f",{t:.17g},{r:.17g}")
    return "\n".join(lines) + "\n"
