"""Slab domain T x (0,1), its discretization, and the degenerate depth weight.

The x1 direction is periodic with nodes at i*h1; the x2 direction is bounded
with cell-centered nodes (j+1/2)*h2 so that no node sits on the vacuum
boundary x2 in {0, 1} and the depth weight is strictly positive at every
degree of freedom.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray

#: quadratic extrapolation weights from the first three cell-centered rows
#: (offsets h/2, 3h/2, 5h/2) to the wall at offset 0
_EXTRAP_W = np.array([15.0, -10.0, 3.0]) / 8.0


class GridError(ValueError):
    pass


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid on the slab; fields are stored with shape (n1, n2)."""

    n1: int
    n2: int
    h1: float
    h2: float
    x1: Array
    x2: Array
    periodic_x1: bool = True

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def ndof(self) -> int:
        return self.n1 * self.n2

    def mesh(self) -> tuple[Array, Array]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def cell_area(self) -> float:
        return self.h1 * self.h2


def build_grid(n1: int, n2: int) -> Grid:
    """Build the periodic-in-x1, cell-centered-in-x2 grid.

    Rejects n1 or n2 below 4 since the difference stencils need at least
    three distinct rows plus one interior neighbor.
    """
    n1, n2 = int(n1), int(n2)
    if n1 < 4 or n2 < 4:
        raise GridError(f"grid needs n1, n2 >= 4, got ({n1}, {n2})")
    h1 = 1.0 / n1
    h2 = 1.0 / n2
    x1 = np.arange(n1) * h1
    x2 = (np.arange(n2) + 0.5) * h2
    x1.setflags(write=False)
    x2.setflags(write=False)
    return Grid(n1=n1, n2=n2, h1=h1, h2=h2, x1=x1, x2=x2)


def wall_distance(x2: Array) -> Array:
    """Distance to the vacuum boundary; exact on the slab."""
    return np.minimum(x2, 1.0 - x2)


@dataclass(frozen=True)
class WeightField:
    """Initial depth rho_0 sampled at the nodes, with its vacuum comparability
    constants c_lower*d <= rho_0 <= c_upper*d estimated by dense sampling."""

    grid: Grid
    values: Array  # (n1, n2), strictly positive
    profile: str
    c_lower: float
    c_upper: float
    evaluate: Callable[[Array, Array], Array] = field(repr=False, compare=False)

    @property
    def sqrt_values(self) -> Array:
        return np.sqrt(self.values)


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    ratio_min: float
    ratio_max: float
    boundary_residual: float
    offenders: tuple[tuple[int, int], ...]
    fourth_dq_max: float


def _sine(x1: Array, x2: Array) -> Array:
    return np.sin(np.pi * x2) * np.ones_like(x1)


def _parabolic(x1: Array, x2: Array) -> Array:
    return x2 * (1.0 - x2) * np.ones_like(x1)


def make_perturbed_sine(epsilon: float) -> Callable[[Array, Array], Array]:
    if abs(epsilon) >= 0.5:
        raise WeightError(f"perturbed-sine needs |epsilon| < 1/2, got {epsilon}")

    def rho(x1: Array, x2: Array) -> Array:
        return (1.0 + epsilon * np.sin(2.0 * np.pi * x1)) * np.sin(np.pi * x2)

    return rho


def make_tabulated(table: Array) -> Callable[[Array, Array], Array]:
    """Linear-interpolation profile from a (m, 2) or (m, 3) table.

    Columns: x2, rho_0(x2)[, m(x2)] where the optional third column modulates
    in x1 as rho = rho_0(x2) * (1 + m(x2) sin(2 pi x1)).
    """
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] not in (2, 3):
        raise WeightError("tabulated profile needs columns (x2, rho0[, modulation])")
    xs = table[:, 0]
    if np.any(np.diff(xs) <= 0):
        raise WeightError("tabulated x2 column must be strictly increasing")
    interior = (xs > 0.0) & (xs < 1.0)
    if np.any(table[interior, 1] <= 0.0):
        raise WeightError("tabulated profile has nonpositive interior values")

    def rho(x1: Array, x2: Array) -> Array:
        base = np.interp(x2, xs, table[:, 1])
        if table.shape[1] == 3:
            mod = np.interp(x2, xs, table[:, 2])
            return base * (1.0 + mod * np.sin(2.0 * np.pi * x1))
        return base * np.ones_like(x1)

    return rho


#: density of the x2 sample used to estimate the comparability constants
_N_DENSE = 10_000


def _comparability_constants(rho: Callable[[Array, Array], Array]) -> tuple[float, float]:
    """Estimate (c_lower, c_upper) of rho_0 / d by dense sampling.

    Sample points accumulate geometrically toward both walls so that
    profiles whose ratio degenerates or blows up near the boundary are
    detected even though no node reaches the wall.
    """
    half = np.geomspace(1e-8, 0.5, _N_DENSE // 2)
    x2 = np.concatenate([half, 1.0 - half])
    x1 = np.linspace(0.0, 1.0, 64, endpoint=False)
    xx1, xx2 = np.meshgrid(x1, x2, indexing="ij")
    ratio = rho(xx1, xx2) / wall_distance(xx2)
    return float(ratio.min()), float(ratio.max())


def build_weight(
    profile: str,
    grid: Grid,
    *,
    epsilon: float = 0.1,
    table: Array | None = None,
) -> WeightField:
    """Build the depth weight from a named profile.

    Profiles: ``sine``, ``parabolic``, ``perturbed-sine`` (parameter
    ``epsilon``), ``tabulated`` (parameter ``table``).
    """
    if profile == "sine":
        rho = _sine
    elif profile == "parabolic":
        rho = _parabolic
    elif profile == "perturbed-sine":
        rho = make_perturbed_sine(epsilon)
    elif profile == "tabulated":
        if table is None:
            raise WeightError("tabulated profile requires a table")
        rho = make_tabulated(table)
    else:
        raise WeightError(f"unknown weight profile {profile!r}")
    xx1, xx2 = grid.mesh()
    values = np.asarray(rho(xx1, xx2), dtype=float)
    if np.any(values <= 0.0):
        raise WeightError(f"profile {profile!r} is nonpositive at interior nodes")
    c_lower, c_upper = _comparability_constants(rho)
    values.setflags(write=False)
    return WeightField(
        grid=grid,
        values=values,
        profile=profile,
        c_lower=c_lower,
        c_upper=c_upper,
        evaluate=rho,
    )


def extrapolate_to_walls(values: Array) -> tuple[Array, Array]:
    """Quadratic one-sided extrapolation of a nodal field to x2 = 0 and 1."""
    low = _EXTRAP_W @ np.stack([values[:, 0], values[:, 1], values[:, 2]])
    high = _EXTRAP_W @ np.stack([values[:, -1], values[:, -2], values[:, -3]])
    return low, high


def validate_physical_vacuum(
    w: WeightField,
    *,
    c_lower_min: float = 1e-3,
    c_upper_max: float = 1e3,
    boundary_tol: float | None = None,
) -> ValidationReport:
    """Check the physical-vacuum profile conditions.

    Pass requires (i) rho_0 > 0 at every node, (ii) finite positive
    comparability constants from the dense ratio sample, and (iii) the
    extrapolated boundary value of rho_0 within the grid tolerance of zero.
    Violations are reported, never raised: failure is a signal consumed by
    the callers.
    """
    grid = w.grid
    if boundary_tol is None:
        boundary_tol = 4.0 * grid.h2**2 * max(1.0, float(w.values.max()))

    d = wall_distance(grid.x2)[None, :]
    ratio = w.values / d
    ratio_min = float(ratio.min())
    ratio_max = float(ratio.max())

    low, high = extrapolate_to_walls(w.values)
    boundary_residual = float(max(np.abs(low).max(), np.abs(high).max()))

    # discrete smoothness surrogate: bounded 4th-order difference quotients
    d4 = np.diff(w.values, n=4, axis=1) / grid.h2**4
    fourth_dq_max = float(np.abs(d4).max()) if d4.size else 0.0

    ok_positive = bool(np.all(w.values > 0.0))
    ok_lower = w.c_lower >= c_lower_min
    ok_upper = np.isfinite(w.c_upper) and w.c_upper <= c_upper_max
    ok_boundary = boundary_residual <= boundary_tol

    offenders: list[tuple[int, int]] = []
    if not (ok_positive and ok_lower):
        bad = np.argwhere((w.values <= 0.0) | (ratio < c_lower_min))
        offenders = [tuple(map(int, ij)) for ij in bad[:32]]

    passed = ok_positive and ok_lower and ok_upper and ok_boundary
    return ValidationReport(
        passed=passed,
        ratio_min=ratio_min,
        ratio_max=ratio_max,
        boundary_residual=boundary_residual,
        offenders=tuple(offenders),
        fourth_dq_max=fourth_dq_max,
    )
