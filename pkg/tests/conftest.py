import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import geolcs as g  # noqa: E402

HERE = os.path.dirname(__file__)
GOLDEN_DIR = os.path.join(HERE, "golden", "double_gyre")
PROD_CFG = os.path.join(GOLDEN_DIR, "prod.cfg")
DET_CFG = os.path.join(HERE, "configs", "determinism.cfg")


@pytest.fixture(scope="session")
def plane():
    return g.MANIFOLDS["plane2"]()


@pytest.fixture(scope="session")
def rect():
    return g.MANIFOLDS["rect_dg"]()


@pytest.fixture(scope="session")
def icfg():
    return g.IntegratorConfig()


@pytest.fixture(scope="session")
def dg_cli_run(tmp_path_factory):
    """One production double-gyre `lcs` run, shared by the acceptance tests."""
    from geolcs import cli
    outdir = tmp_path_factory.mktemp("dg_prod")
    rc = cli.main(["lcs", PROD_CFG, "--out", str(outdir), "--threads", "1"])
    assert rc == 0
    return outdir


@pytest.fixture(scope="session")
def dg_prod_grid(dg_cli_run):
    from geolcs.fileio import read_field
    return read_field(dg_cli_run)


def make_synthetic_grid(fn, window, res, xi_fn=None, T=1.0, gap_fn=None):
    """FieldGrid with a prescribed dominant-eigenvalue surface (tests only)."""
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(window, res)]
    X1, X2 = np.meshgrid(*axes, indexing="ij")
    lam = fn(X1, X2)
    if xi_fn is None:
        xi = np.stack([np.ones_like(X1), np.zeros_like(X1)], axis=-1)
    else:
        xi = xi_fn(X1, X2)
    gap = 0.5 * lam if gap_fn is None else gap_fn(X1, X2)
    return g.FieldGrid(window=window, resolution=res, t0=0.0, T=T,
                       regime="riemannian", lambda1=lam,
                       ftle=np.log(lam) / (2 * abs(T)), gap=gap, xi1=xi,
                       valid=np.ones(res, dtype=bool))
