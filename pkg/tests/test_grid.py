import numpy as np
import pytest

from swvac.grid import (
    GridError,
    WeightError,
    build_grid,
    build_weight,
    extrapolate_to_walls,
    make_perturbed_sine,
    make_tabulated,
    validate_physical_vacuum,
    wall_distance,
)


def test_cell_centered_layout():
    g = build_grid(8, 8)
    assert g.h1 == pytest.approx(0.125)
    assert g.h2 == pytest.approx(0.125)
    assert g.x2[0] == pytest.approx(0.0625)
    assert g.x2[-1] == pytest.approx(0.9375)
    assert np.allclose(g.x2, (np.arange(8) + 0.5) * 0.125)


def test_minimal_grid():
    g = build_grid(4, 4)
    assert g.ndof == 16
    assert g.x2[0] == pytest.approx(0.125)


def test_rejects_small_grids():
    with pytest.raises(GridError):
        build_grid(3, 8)
    with pytest.raises(GridError):
        build_grid(8, 3)


def test_grid_is_pure():
    a = build_grid(12, 20)
    b = build_grid(12, 20)
    assert np.array_equal(a.x1, b.x1)
    assert np.array_equal(a.x2, b.x2)
    assert a.h1 == b.h1 and a.h2 == b.h2


def test_no_node_on_boundary():
    for n2 in (4, 8, 16, 32):
        g = build_grid(8, n2)
        assert g.x2.min() > 0.0 and g.x2.max() < 1.0


def test_wall_distance():
    x2 = np.array([0.1, 0.5, 0.9])
    assert np.allclose(wall_distance(x2), [0.1, 0.5, 0.1])


def test_sine_midpoint_value():
    g = build_grid(8, 8)
    w = build_weight("sine", g)
    # closest node to x2 = 0.5 is at 0.4375; evaluate the profile directly
    assert w.evaluate(np.array(0.0), np.array(0.5)) == pytest.approx(1.0)


def test_parabolic_midpoint_value():
    g = build_grid(8, 8)
    w = build_weight("parabolic", g)
    assert w.evaluate(np.array(0.0), np.array(0.5)) == pytest.approx(0.25)


def test_sine_comparability_constants():
    """2*d <= sin(pi*x2) <= pi*d on (0,1)."""
    g = build_grid(16, 16)
    w = build_weight("sine", g)
    # independent dense-sampling oracle on a fresh point set
    x2 = np.linspace(1e-6, 1 - 1e-6, 20001)
    ratio = np.sin(np.pi * x2) / np.minimum(x2, 1 - x2)
    assert w.c_lower == pytest.approx(ratio.min(), rel=1e-3)
    assert w.c_upper == pytest.approx(ratio.max(), rel=1e-3)
    assert w.c_lower == pytest.approx(2.0, rel=1e-3)
    assert w.c_upper == pytest.approx(np.pi, rel=1e-3)


def test_perturbed_sine_epsilon_limit():
    with pytest.raises(WeightError):
        make_perturbed_sine(0.5)
    rho = make_perturbed_sine(0.49)
    assert rho(np.array(0.75), np.array(0.5)) > 0


def test_tabulated_profile_rejections():
    with pytest.raises(WeightError):
        make_tabulated(np.array([[0.0, 0.0], [0.5, -1.0], [1.0, 0.0]]))
    with pytest.raises(WeightError):
        make_tabulated(np.array([[0.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(WeightError):
        make_tabulated(np.ones((3, 4)))


def test_tabulated_with_modulation():
    table = np.array([[0.0, 0.0, 0.0], [0.5, 1.0, 0.2], [1.0, 0.0, 0.0]])
    rho = make_tabulated(table)
    v = rho(np.array(0.25), np.array(0.5))
    assert v == pytest.approx(1.0 * (1 + 0.2 * np.sin(np.pi / 2)))


def test_validate_sine_passes():
    g = build_grid(16, 16)
    rep = validate_physical_vacuum(build_weight("sine", g))
    assert rep.passed
    assert rep.offenders == ()


def test_validate_quadratic_vanishing_fails():
    """x2^2 (1-x2)^2 vanishes too fast: no positive lower comparability."""
    g = build_grid(32, 32)
    table_x = np.linspace(0, 1, 4001)
    table = np.column_stack([table_x, np.maximum(table_x**2 * (1 - table_x) ** 2, 0)])
    # interior tabulated values are positive except the endpoints
    table[1:-1, 1] = np.maximum(table[1:-1, 1], 1e-30)
    w = build_weight("tabulated", g, table=table)
    rep = validate_physical_vacuum(w)
    assert not rep.passed


def test_validate_constant_profile_fails():
    g = build_grid(16, 16)
    table = np.array([[0.0, 1.0], [1.0, 1.0]])
    w = build_weight("tabulated", g, table=table)
    rep = validate_physical_vacuum(w)
    assert not rep.passed
    assert rep.boundary_residual > 0.5


def test_builtin_profiles_stable_constants():
    """Pass at every resolution with resolution-stable comparability."""
    for profile in ("sine", "parabolic", "perturbed-sine"):
        prev = None
        for n2 in (8, 16, 32, 64):
            g = build_grid(8, n2)
            w = build_weight(profile, g)
            assert validate_physical_vacuum(w).passed, (profile, n2)
            if prev is not None:
                assert abs(w.c_lower - prev[0]) <= 0.05 * prev[0]
                assert abs(w.c_upper - prev[1]) <= 0.05 * prev[1]
            prev = (w.c_lower, w.c_upper)


def test_extrapolate_to_walls_quadratic_exact():
    """The 3-row wall stencil is exact for quadratic profiles."""
    g = build_grid(4, 16)
    f = 1.0 + 2.0 * g.x2 + 3.0 * g.x2**2
    vals = np.tile(f, (g.n1, 1))
    low, high = extrapolate_to_walls(vals)
    assert np.allclose(low, 1.0, atol=1e-12)
    assert np.allclose(high, 6.0, atol=1e-12)
