import numpy as np
import pytest

from compgrowth.geometry import Norm, SiteConfiguration
from compgrowth.lattice import EdgeWeightDistribution as E, PassageTimeField, competing_territories
from compgrowth.territory import (TIE, UNREACHED, TerritoryMap, from_binary, labels_from_mask,
                                  labels_from_times, read_ppm, territory_image, to_binary,
                                  to_csv, to_ppm)


def _map():
    f = PassageTimeField(E.exponential(), 4, ([-6, -4], [6, 4]))
    return competing_territories(f, np.array([[-3, 0], [3, 0], [0, 3]]))


def test_labels_from_times_and_masks_agree():
    t = np.array([[1.0, 2.0, 3.0, np.inf], [2.0, 2.0, 1.0, np.inf]])
    w, best = labels_from_times(t)
    assert w.tolist() == [1, TIE, 2, UNREACHED] and best.tolist() == [1, 2, 1, np.inf]
    m = np.array([1, 3, 2, 0], dtype=np.uint64)
    assert labels_from_mask(m).tolist() == w.tolist()
    assert labels_from_mask(np.array([1 << 40], dtype=np.uint64)).tolist() == [41]


def test_binary_round_trip():
    tm = _map()
    assert from_binary(to_binary(tm)) == tm
    light = from_binary(to_binary(tm, with_times=False))
    assert np.array_equal(light.winner, tm.winner) and np.isnan(light.time).all()
    with pytest.raises(ValueError):
        from_binary(b"NOPE" + to_binary(tm)[4:])


def test_csv_rows():
    tm = _map()
    lines = to_csv(tm).splitlines()
    assert lines[0] == "x,y,winner,time" and len(lines) == tm.winner.size + 1
    x, y, w, _ = lines[1].split(",")
    assert (float(x), float(y), int(w)) == (-6.0, -4.0, tm.winner[0, 0])


def test_raster_orientation_and_overlay():
    tm = _map()
    img = territory_image(tm)
    h, w = tm.shape[1], tm.shape[0]
    assert img.shape == (h, w, 3)
    # bottom-left pixel is the grid point with the smallest x and y
    assert np.array_equal(read_ppm(to_ppm(img)), img)
    cfg = SiteConfiguration(np.array([[-3.0, 0.0], [3.0, 0.0], [0.0, 3.0]]))
    over = territory_image(tm, overlay=(cfg, Norm.p(1)))
    assert over.shape == img.shape and not np.array_equal(over, img)
    assert to_ppm(img).startswith(f"P6\n{w} {h}\n255\n".encode())


def test_counts():
    tm = TerritoryMap(np.zeros(2), 1.0, np.array([[1, 2], [0, -1]], dtype=np.int16),
                      np.zeros((2, 2)), 2)
    assert tm.counts() == {1: 1, 2: 1, "tie": 1, "unreached": 1}
