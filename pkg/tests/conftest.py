import numpy as np
import pytest

from dbnlearn.core import Domain, TrajectoryDataset


def discrete_dataset(x, z=None, x_arities=None, z_arities=None, burn_in=0):
    """Hand-built discrete dataset from nested lists: x[traj][t][var]."""
    x = np.asarray(x, dtype=np.int64)
    n_traj = x.shape[0]
    z = np.zeros((n_traj, 0), dtype=np.int64) if z is None else np.asarray(z, dtype=np.int64)
    xa = x_arities or (2,) * x.shape[2]
    za = z_arities or (2,) * z.shape[1]
    return TrajectoryDataset(
        domain=Domain("discrete", x_arities=tuple(xa), z_arities=tuple(za)),
        x=x, z=z, burn_in=burn_in)


def continuous_dataset(x, z=None, burn_in=0):
    x = np.asarray(x, dtype=np.float64)
    z = np.zeros((x.shape[0], 0)) if z is None else np.asarray(z, dtype=np.float64)
    return TrajectoryDataset(domain=Domain("continuous"), x=x, z=z, burn_in=burn_in)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
