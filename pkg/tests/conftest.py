import numpy as np
import pytest

from fhnscale import FHNParams, KernelSpec, SpatialGrid, build_kernel


@pytest.fixture
def grid64():
    return SpatialGrid(dim=1, box_length=8.0, cells_per_axis=64)


@pytest.fixture
def gaussian_kernel(grid64):
    return build_kernel(grid64, KernelSpec(shape="gaussian", amplitude=1.0, length_scale=1.0))


@pytest.fixture
def params():
    return FHNParams(tau=0.2, a=0.1, b=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
