"""Python access to the fpslab sampler and test campaigns."""

import json

from ._core import FpslabError, Lattice, ks_levy, version
from . import _core

__all__ = ["FpslabError", "Lattice", "catalog", "disk", "annulus", "run_test", "ks_levy", "version"]


def disk(mesh, profile_dir=""):
    """Lattice on the unit disk with zero boundary data."""
    return Lattice(_core.unit_disk_json(), mesh, profile_dir)


def annulus(inner_radius, mesh, u_outer=0.0, u_inner=0.0, profile_dir=""):
    """Lattice on the annulus inner_radius < |z| < 1 with constant boundary values."""
    return Lattice(_core.annulus_json(inner_radius, u_outer, u_inner), mesh, profile_dir)


def catalog():
    return json.loads(_core.catalog_json())


def run_test(name, params=None, seed=1, workers=1, samples=None, profile_dir=""):
    """Run one catalog test; returns its report as a dict."""
    out = _core.run_test_json(name, json.dumps(params or {}), seed, workers, samples, profile_dir)
    return json.loads(out)
