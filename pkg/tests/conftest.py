import numpy as np
import pytest
from hypothesis import settings

from stratwave import forward as fw
from stratwave import modes, waveguide as wg

settings.register_profile("stratwave", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("stratwave")

DESK_CELL = 1 / 3
EX3_SOURCE = np.array([18.0, 18.0, 25.0])
EX3_BOX = ((32.0, 34.0), (32.0, 34.0), (42.0, 44.0))


@pytest.fixture(scope="session")
def cfg():
    return wg.REFERENCE_WAVEGUIDE


@pytest.fixture(scope="session")
def homog():
    return wg.WaveguideConfig.homogeneous(k=0.3, h=100.0)


@pytest.fixture(scope="session")
def basis_far(cfg):
    """Basis good for distances of a few units and more."""
    return modes.find_modes(cfg, r_min=1.0, tol_modes=1e-10)


@pytest.fixture(scope="session")
def basis_desk(cfg):
    return modes.find_modes(cfg, r_min=DESK_CELL / 2, tol_modes=1e-6)


@pytest.fixture(scope="session")
def ex3_kernel(cfg, basis_desk):
    inc = wg.InclusionSpec.with_relative_contrast(cfg, EX3_BOX)
    mesh = fw.VolumeMesh.build(cfg, inc, DESK_CELL)
    return fw.assemble_kernel(basis_desk, mesh)


@pytest.fixture(scope="session")
def ex3_model(ex3_kernel):
    return fw.ForwardModel(ex3_kernel, fw.ReceiverSet.line((60, 60, 30), (0, 5, 0), 5))
