import math

import numpy as np
import pytest

import fpslab


@pytest.fixture(scope="module")
def disk():
    return fpslab.disk(0.1)


def test_version_and_catalog():
    assert fpslab.version.startswith("fpslab")
    cat = fpslab.catalog()
    assert sorted(t["criterion"] for t in cat) == list(range(1, 13))


def test_lattice_geometry(disk):
    pts = disk.points()
    assert pts.shape == (disk.size, 2)
    assert np.all(np.hypot(pts[:, 0], pts[:, 1]) < 1.0)
    z = disk.nearest(0.0, 0.0)
    assert np.allclose(pts[z], 0.0)
    assert disk.green(z, z) > 0.0


def test_sampling_is_seeded(disk):
    a, b = disk.sample(5), disk.sample(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, disk.sample(6))


def test_local_sets_are_nested(disk):
    small = disk.local_set(11, "down", a=0.5)
    large = disk.local_set(11, "down", a=1.0)
    assert np.all(small["in_set"] <= large["in_set"])
    tvs = disk.local_set(11, "tvs", a=1.0, b=1.0)
    assert np.all(tvs["in_set"] <= large["in_set"])
    assert np.all(small["nu"] >= 0.0)
    with pytest.raises(fpslab.FpslabError):
        disk.local_set(11, "sideways", a=1.0)


def test_hitting_time_values(disk):
    z = disk.nearest(0.0, 0.0)
    t = [disk.hitting_time(s, 0.5, z) for s in range(20)]
    assert all(v > 0.0 for v in t)
    finite = [v for v in t if math.isfinite(v)]
    assert all(v <= disk.green(z, z) + 1e-12 for v in finite)


def test_annulus_boundary_values():
    lat = fpslab.annulus(0.3, 0.1, u_outer=0.0, u_inner=-1.0)
    ls = lat.local_set(3, "down", a=1.0)
    assert ls["in_set"].shape == (lat.size,)


def test_run_test_small():
    rep = fpslab.run_test("gmc_conditional", samples=10)
    assert rep["name"] == "gmc_conditional"
    assert "checks" in rep
    with pytest.raises(fpslab.FpslabError):
        fpslab.Lattice('{"outer": {"center": [0, 0], "radius": -1}}', 0.1)
