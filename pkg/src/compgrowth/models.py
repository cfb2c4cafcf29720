"""Uniform T(x, y) interface over both growth models.

``times_from(seed, x, ys)`` returns T(x, y) for every row of ``ys`` in one
fresh realization keyed by ``seed``: ψ-rounded lattice passage times, or
T(x + B, y + B) for the continuum model.
"""
import numpy as np

from .continuum import Ball, RadiusLaw, ball_sup_times, simulate_outbursts
from .lattice import EdgeWeightDistribution, PassageTimeField, first_passage_time, psi_round


class LatticeModel:
    kind = "lattice"

    def __init__(self, distribution=None, dim=2, margin=16, margin_fraction=0.25,
                 zero_threshold=None):
        self.distribution = distribution or EdgeWeightDistribution.exponential(1.0)
        self.dim = dim
        self.margin = margin
        self.margin_fraction = margin_fraction
        self.zero_threshold = zero_threshold

    def box_for(self, points):
        pts = psi_round(np.atleast_2d(points))
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = int(max(self.margin, np.ceil(self.margin_fraction * (hi - lo).max())))
        return lo - pad, hi + pad

    def field(self, seed, points):
        return PassageTimeField(self.distribution, seed, self.box_for(points), self.dim,
                                self.zero_threshold)

    def times_multi(self, seed, xs, ys):
        """(len(xs), len(ys)) passage times, all in one realization."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        f = self.field(seed, np.vstack([xs, ys]))
        ry = psi_round(ys)
        return np.stack([first_passage_time(f, x, ry) for x in psi_round(xs)])

    def times_from(self, seed, x, ys):
        return self.times_multi(seed, np.asarray(x, dtype=float)[None, :], ys)[0]

    def times_matrix(self, seed, points):
        """T(p_a, p_b) for all pairs in one shared realization."""
        return self.times_multi(seed, points, points)

    def describe(self):
        return {"model": "lattice", "distribution": self.distribution.to_dict(), "dim": self.dim}


class ContinuumModel:
    kind = "continuum"

    def __init__(self, law=None, dim=2, pitch=0.1, margin=6.0, t_cap=None, slowness=1.6,
                 t_pad=8.0):
        self.law = law or RadiusLaw.constant(1.0)
        self.dim = dim
        self.pitch = pitch
        self.margin = margin
        self.t_cap = t_cap
        self.slowness = slowness
        self.t_pad = t_pad

    def horizon(self, span):
        """Delay horizon: explicit ``t_cap`` or slowness x (span + 2 margin) + pad."""
        if self.t_cap is not None:
            return float(self.t_cap)
        return float(self.slowness * (span + 2 * self.margin) + self.t_pad)

    def events(self, seed, points):
        pts = np.atleast_2d(points)
        lo = pts.min(axis=0) - self.margin
        hi = pts.max(axis=0) + self.margin
        span = float(np.linalg.norm(hi - lo))
        return simulate_outbursts((lo, hi), self.horizon(span), self.law, seed)

    def times_multi(self, seed, xs, ys):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        ev = self.events(seed, np.vstack([xs, ys]))
        return np.stack([ball_sup_times(ev, Ball(x, 1.0), ys, self.pitch) for x in xs])

    def times_from(self, seed, x, ys):
        return self.times_multi(seed, np.asarray(x, dtype=float)[None, :], ys)[0]

    def times_matrix(self, seed, points):
        return self.times_multi(seed, points, points)

    def describe(self):
        return {"model": "continuum", "law": self.law.to_dict(), "dim": self.dim,
                "pitch": self.pitch, "margin": self.margin, "t_cap": self.t_cap}
