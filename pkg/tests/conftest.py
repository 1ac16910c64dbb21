import numpy as np
import pytest

from swvac import assemble_operator, build_grid, build_weight, solve_eigenbasis


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16, 16)


@pytest.fixture(scope="session")
def grid32():
    return build_grid(32, 32)


@pytest.fixture(scope="session")
def sine16(grid16):
    return build_weight("sine", grid16)


@pytest.fixture(scope="session")
def sine32(grid32):
    return build_weight("sine", grid32)


@pytest.fixture(scope="session")
def basis16(grid16, sine16):
    op = assemble_operator(sine16, grid16)
    return solve_eigenbasis(op, 16)


@pytest.fixture(scope="session")
def basis32(grid32, sine32):
    op = assemble_operator(sine32, grid32)
    return solve_eigenbasis(op, 32)


def default_u0(grid, amplitude=0.05):
    xx1, xx2 = grid.mesh()
    u1 = amplitude * np.sin(2 * np.pi * xx1) * np.sin(np.pi * xx2)
    return np.stack([u1, np.zeros_like(u1)])
