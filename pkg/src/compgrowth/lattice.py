"""First-passage percolation on Z^d and k-type competition on a shared weight field."""
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import SiteConfiguration
from .hashing import hash_keys, quantize, uniform01
from .territory import TerritoryMap, labels_from_mask, labels_from_times


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeWeightDistribution:
    """Law of a single edge passage time.

    ``constant``: always ``value``. ``exponential``: rate ``rate``.
    ``uniform``: on [low, high]. ``atom-mixture``: 0 with probability
    ``p_zero``, otherwise exponential(``rate``).
    """

    kind: str
    value: float = 1.0
    rate: float = 1.0
    low: float = 0.0
    high: float = 1.0
    p_zero: float = 0.0

    def __post_init__(self):
        k = self.kind
        if k == "constant":
            if not self.value > 0:
                raise LatticeError("constant weight must be positive")
        elif k in ("exponential", "atom-mixture"):
            if not self.rate > 0:
                raise LatticeError("rate must be positive")
            if k == "atom-mixture" and not 0 <= self.p_zero < 1:
                raise LatticeError("atom probability must lie in [0, 1)")
        elif k == "uniform":
            if not 0 <= self.low < self.high:
                raise LatticeError("uniform law needs 0 <= low < high")
        else:
            raise LatticeError(f"unknown distribution {k!r}")

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", value=float(c))

    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exponential", rate=float(rate))

    @classmethod
    def uniform(cls, low, high):
        return cls("uniform", low=float(low), high=float(high))

    @classmethod
    def atom_mixture(cls, p_zero, rate=1.0):
        return cls("atom-mixture", rate=float(rate), p_zero=float(p_zero))

    @property
    def atomless(self):
        return self.kind in ("exponential", "uniform")

    def mean(self):
        if self.kind == "constant":
            return self.value
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high)
        return (1.0 - self.p_zero) / self.rate

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "constant":
            return np.full(u.shape, self.value)
        if self.kind == "exponential":
            return -np.log1p(-u) / self.rate
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * u
        p = self.p_zero
        tail = np.clip((u - p) / (1.0 - p), 0.0, None)
        return np.where(u < p, 0.0, -np.log1p(-tail) / self.rate)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return (x >= self.value).astype(float)
        if self.kind == "exponential":
            return np.where(x < 0, 0.0, -np.expm1(-self.rate * np.maximum(x, 0)))
        if self.kind == "uniform":
            return np.clip((x - self.low) / (self.high - self.low), 0.0, 1.0)
        p = self.p_zero
        return np.where(x < 0, 0.0, p + (1 - p) * -np.expm1(-self.rate * np.maximum(x, 0)))

    def check_subcritical(self, dim, threshold=None):
        """Advisory check of P(tau = 0) against a percolation threshold.

        The default threshold is 1/2 in the plane; other dimensions need an
        explicit value. Returns True when the check passes (warns otherwise).
        """
        if self.kind != "atom-mixture":
            return True
        if threshold is None:
            if dim != 2:
                warnings.warn("no default zero-atom threshold outside d = 2", stacklevel=2)
                return True
            threshold = 0.5
        if self.p_zero >= threshold:
            warnings.warn(f"P(tau = 0) = {self.p_zero} is not below the threshold {threshold}",
                          stacklevel=2)
            return False
        return True

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "rate": self.rate,
                "low": self.low, "high": self.high, "p_zero": self.p_zero}


def psi_round(x):
    """Nearest lattice point, halves rounded toward +infinity."""
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)


class PassageTimeField:
    """Seed-addressed i.i.d. edge weights on Z^d, restricted to a box for searches.

    ``box`` is ``(lo, hi)`` with inclusive integer corners. The weight of an
    edge depends only on the seed and the edge itself, never on the box.
    """

    def __init__(self, distribution, seed, box, dim=None, zero_threshold=None):
        lo = np.asarray(box[0], dtype=np.int64)
        hi = np.asarray(box[1], dtype=np.int64)
        if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi < lo):
            raise LatticeError("box must be a pair of ordered integer corners")
        self.dim = lo.size if dim is None else int(dim)
        if self.dim < 2 or lo.size != self.dim:
            raise LatticeError("box dimension mismatch (d >= 2 required)")
        self.distribution = distribution
        self.seed = int(seed)
        self.lo = lo
        self.hi = hi
        distribution.check_subcritical(self.dim, zero_threshold)
        self._weights = None

    @property
    def shape(self):
        return tuple(int(v) for v in self.hi - self.lo + 1)

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def flat_index(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        if not self.contains(pts).all():
            raise LatticeError("point outside the field's box")
        return np.ravel_multi_index(tuple((pts - self.lo).T), self.shape)

    def point(self, flat):
        return np.stack(np.unravel_index(flat, self.shape), axis=-1) + self.lo

    def _weights_from_keys(self, axis, lower):
        h = hash_keys(self.seed, axis, *[lower[..., a] for a in range(self.dim)])
        return quantize(self.distribution.ppf(uniform01(h)))

    def edge_weight(self, x, y):
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        diff = y - x
        if np.abs(diff).sum() != 1:
            raise LatticeError(f"{x.tolist()} and {y.tolist()} are not lattice neighbours")
        axis = int(np.flatnonzero(diff)[0])
        lower = np.minimum(x, y)
        return float(self._weights_from_keys(axis, lower[None, :])[0])

    def box_weights(self):
        """(d, N) array: weight of the edge from each box site to its +e_a neighbour."""
        if self._weights is None:
            shape = self.shape
            axes = [np.arange(l, h + 1) for l, h in zip(self.lo, self.hi)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
            w = np.empty((self.dim, grid.shape[0]))
            for a in range(self.dim):
                w[a] = self._weights_from_keys(a, grid)
                at_edge = grid[:, a] == self.hi[a]
                w[a, at_edge] = np.inf
            self._weights = w
            self._shape = shape
        return self._weights


def first_passage_time(field, source, targets=None):
    """Box-restricted passage times T(source, .).

    With ``targets`` (m, d) the result is an (m,) array; without, an array
    over the whole box.
    """
    src = field.flat_index(psi_round(source) if np.asarray(source).dtype.kind == "f" else source)
    w = field.box_weights()
    if targets is None:
        dist, _ = kernels.lattice_search(w, field.shape, src)
        return dist.reshape(field.shape)
    targets = np.atleast_2d(np.asarray(targets, dtype=np.int64))
    if not field.contains(targets).all():
        raise LatticeError("target outside box")
    tidx = field.flat_index(targets)
    dist, _ = kernels.lattice_search(w, field.shape, src, targets=tidx)
    return dist[tidx]


def rounded_sources(cfg):
    """psi-rounded source points of a configuration; rejects collisions."""
    if isinstance(cfg, SiteConfiguration):
        pts = psi_round(cfg.points)
    else:
        pts = np.atleast_2d(np.asarray(cfg))
        pts = psi_round(pts) if pts.dtype.kind == "f" else pts.astype(np.int64)
    if pts.shape[0] < 2:
        raise LatticeError("competition needs at least two sources")
    uniq = np.unique(pts, axis=0)
    if uniq.shape[0] != pts.shape[0]:
        raise LatticeError("sources collapse onto the same lattice site after rounding")
    return pts


def competing_territories(field, cfg, keep_times=False):
    """Winner of every box site among k sources sharing one weight field."""
    src_pts = rounded_sources(cfg)
    if not field.contains(src_pts).all():
        raise LatticeError("source outside box")
    src = field.flat_index(src_pts)
    w = field.box_weights()
    type_times = None
    if keep_times:
        per = np.stack([kernels.lattice_search(w, field.shape, [s])[0] for s in src])
        winner, best = labels_from_times(per)
        type_times = per.reshape((len(src),) + field.shape)
    else:
        best, mask = kernels.lattice_search(w, field.shape, src)
        winner = labels_from_mask(mask)
    return TerritoryMap(
        origin=field.lo.astype(float),
        pitch=1.0,
        winner=winner.reshape(field.shape),
        time=best.reshape(field.shape),
        k=len(src),
        seed=field.seed,
        type_times=type_times,
    )
