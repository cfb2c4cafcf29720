"""Counter-based hashing for order-independent random fields.

Every random quantity attached to a lattice edge is a pure function of
``(seed, key)``, so a lazily explored region sees the same values no matter
which order it is visited in.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# Weights are rounded to this many fractional bits. Path sums of such dyadic
# values are exact in float64 up to 2**(53 - 32), so ties, symmetry and the
# triangle inequality hold exactly rather than up to rounding.
FRACTION_BITS = 32
_QUANTUM = float(2 ** FRACTION_BITS)


def mix64(h):
    """splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    h = np.atleast_1d(np.asarray(h, dtype=np.uint64))
    with np.errstate(over="ignore"):
        h = (h ^ (h >> np.uint64(30))) * _M1
        h = (h ^ (h >> np.uint64(27))) * _M2
    return h ^ (h >> np.uint64(31))


def hash_keys(seed, *columns):
    """Hash a seed together with integer key columns (broadcast together)."""
    cols = np.broadcast_arrays(*[np.asarray(c, dtype=np.int64) for c in columns])
    with np.errstate(over="ignore"):
        h = mix64(np.full(cols[0].shape, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
        for c in cols:
            h = mix64(h ^ (np.atleast_1d(c).astype(np.uint64) + _GOLDEN))
    return h


def uniform01(h):
    """Map hashes to doubles in [0, 1) using the top 53 bits."""
    return (np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def quantize(x):
    """Round nonnegative values onto the dyadic grid 2**-FRACTION_BITS."""
    return np.round(np.asarray(x, dtype=np.float64) * _QUANTUM) / _QUANTUM
