import math

import numpy as np
import pytest

from sbfem_plate.material import MaterialPair
from sbfem_plate.mesh import PlateGeometry, build_mesh
from sbfem_plate.solver import PlateModel


@pytest.fixture(scope="session")
def thin_square_mesh():
    return build_mesh(PlateGeometry(1.0, 1.0, 1e-3), 8, 8, 3)


@pytest.fixture(scope="session")
def thin_ssss(thin_square_mesh):
    """Table-1 style configuration: homogeneous ceramic, b/h = 1000, SSSS."""
    return PlateModel(thin_square_mesh, MaterialPair(gradient_index=0.0), "SSSS")


def small_model(bc="SSSS", n=0.0, bh=100.0, psi_deg=0.0, ne=2, p=3, a=1.0, b=1.0, **kw):
    geom = PlateGeometry(a, b, b / bh, math.radians(psi_deg))
    return PlateModel(build_mesh(geom, ne, ne, p), MaterialPair(gradient_index=n), bc, **kw)


def rel(a, b):
    return abs(np.asarray(a) - b) / abs(b)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
