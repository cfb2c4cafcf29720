"""Territory maps shared by the lattice and continuum models, and their export formats.

Binary layout (all little-endian)::

    magic  b"CGTM"
    u16    format version (1)
    u16    dimension d
    u16    number of types k
    u16    flags (bit 0: winning times follow the labels)
    u64    seed
    u64[d] grid shape
    f64[d] grid origin (coordinates of index 0)
    f64    grid pitch
    i16[N] winner labels, row-major over the shape
    f64[N] winning times (only if flag bit 0)
"""
import io
import struct
from dataclasses import dataclass

import numpy as np

TIE = 0
UNREACHED = -1

MAGIC = b"CGTM"
VERSION = 1

_PALETTE = np.array([
    [228, 26, 28], [55, 126, 184], [77, 175, 74], [152, 78, 163],
    [255, 127, 0], [166, 86, 40], [247, 129, 191], [153, 153, 153],
], dtype=np.uint8)
TIE_COLOR = np.array([255, 255, 255], dtype=np.uint8)
UNREACHED_COLOR = np.array([0, 0, 0], dtype=np.uint8)
OVERLAY_COLOR = np.array([255, 255, 0], dtype=np.uint8)


@dataclass
class TerritoryMap:
    """Winner label per grid point: 1..k, ``TIE`` or ``UNREACHED``."""

    origin: np.ndarray
    pitch: float
    winner: np.ndarray
    time: np.ndarray
    k: int
    seed: int = 0
    type_times: np.ndarray = None

    @property
    def shape(self):
        return self.winner.shape

    @property
    def dim(self):
        return self.winner.ndim

    def coords(self):
        """Grid point coordinates, (N, d), in row-major order."""
        axes = [self.origin[a] + self.pitch * np.arange(n) for a, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def counts(self):
        w = self.winner
        out = {i: int((w == i).sum()) for i in range(1, self.k + 1)}
        out["tie"] = int((w == TIE).sum())
        out["unreached"] = int((w == UNREACHED).sum())
        return out

    def __eq__(self, other):
        return (isinstance(other, TerritoryMap) and self.k == other.k
                and self.seed == other.seed and self.pitch == other.pitch
                and np.array_equal(self.origin, other.origin)
                and np.array_equal(self.winner, other.winner)
                and np.array_equal(self.time, other.time))


def labels_from_times(type_times):
    """Winner labels from per-type times (k, ...): strict argmin, TIE, or UNREACHED."""
    type_times = np.asarray(type_times, dtype=float)
    best = type_times.min(axis=0)
    n_best = (type_times == best).sum(axis=0)
    winner = (np.argmin(type_times, axis=0) + 1).astype(np.int16)
    winner[n_best > 1] = TIE
    winner[~np.isfinite(best)] = UNREACHED
    return winner, best


def labels_from_mask(mask):
    """Winner labels from bitmasks of the sources attaining the minimum."""
    mask = np.asarray(mask, dtype=np.uint64)
    winner = np.full(mask.shape, UNREACHED, dtype=np.int16)
    single = (mask != 0) & ((mask & (mask - np.uint64(1))) == 0)
    pos = np.zeros(mask.shape, dtype=np.int16)
    m = mask.copy()
    while np.any(m > 1):
        big = m > 1
        pos[big] += 1
        m[big] >>= np.uint64(1)
    winner[single] = pos[single] + 1
    winner[(mask != 0) & ~single] = TIE
    return winner


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def to_binary(tmap, with_times=True):
    d = tmap.dim
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HHHH", VERSION, d, tmap.k, 1 if with_times else 0))
    buf.write(struct.pack("<Q", int(tmap.seed) & 0xFFFFFFFFFFFFFFFF))
    buf.write(struct.pack(f"<{d}Q", *tmap.shape))
    buf.write(struct.pack(f"<{d}d", *np.asarray(tmap.origin, dtype=float)))
    buf.write(struct.pack("<d", float(tmap.pitch)))
    buf.write(np.ascontiguousarray(tmap.winner, dtype="<i2").tobytes())
    if with_times:
        buf.write(np.ascontiguousarray(tmap.time, dtype="<f8").tobytes())
    return buf.getvalue()


def from_binary(data):
    if data[:4] != MAGIC:
        raise ValueError("not a territory grid (bad magic)")
    version, d, k, flags = struct.unpack_from("<HHHH", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported territory grid version {version}")
    off = 12
    (seed,) = struct.unpack_from("<Q", data, off)
    off += 8
    shape = struct.unpack_from(f"<{d}Q", data, off)
    off += 8 * d
    origin = np.array(struct.unpack_from(f"<{d}d", data, off))
    off += 8 * d
    (pitch,) = struct.unpack_from("<d", data, off)
    off += 8
    n = int(np.prod(shape))
    winner = np.frombuffer(data, dtype="<i2", count=n, offset=off).astype(np.int16).reshape(shape)
    off += 2 * n
    if flags & 1:
        time = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(float).reshape(shape)
    else:
        time = np.full(shape, np.nan)
    return TerritoryMap(origin, pitch, winner, time, k, seed)


def to_csv(tmap):
    names = ["x", "y", "z"] if tmap.dim <= 3 else [f"x{a}" for a in range(tmap.dim)]
    lines = [",".join(names[:tmap.dim] + ["winner", "time"])]
    pts = tmap.coords()
    for p, w, t in zip(pts, tmap.winner.ravel(), tmap.time.ravel()):
        lines.append(",".join(f"{c:.17g}" for c in p) + f",{int(w)},{t:.17g}")
    return "\n".join(lines) + "\n"


def territory_image(tmap, palette=None, overlay=None):
    """RGB raster (rows top to bottom = decreasing y, columns = increasing x).

    ``overlay`` is an optional ``(SiteConfiguration, Norm)`` pair; grid
    points claimed by no Voronoi cell, and cell changes between neighbours,
    are painted with the overlay colour.
    """
    if tmap.dim != 2:
        raise ValueError("raster export needs a planar map")
    pal = _PALETTE if palette is None else np.asarray(palette, dtype=np.uint8)
    w = tmap.winner
    img = np.empty(w.shape + (3,), dtype=np.uint8)
    for i in range(1, tmap.k + 1):
        img[w == i] = pal[(i - 1) % len(pal)]
    img[w == TIE] = TIE_COLOR
    img[w == UNREACHED] = UNREACHED_COLOR
    if overlay is not None:
        from .geometry import voronoi_labels
        cfg, norm = overlay
        lab = voronoi_labels(tmap.coords(), cfg, norm).reshape(w.shape)
        edge = lab == 0
        for a in range(2):
            nxt = np.roll(lab, -1, axis=a)
            diff = (lab != nxt) & (lab != 0) & (nxt != 0)
            idx = [slice(None)] * 2
            idx[a] = -1
            diff[tuple(idx)] = False
            edge |= diff
        img[edge] = OVERLAY_COLOR
    # (x, y) -> (row, col) with +y up
    return np.ascontiguousarray(np.transpose(img, (1, 0, 2))[::-1])


def to_ppm(raster):
    raster = np.asarray(raster, dtype=np.uint8)
    h, w = raster.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + raster.tobytes()


def read_ppm(data):
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
