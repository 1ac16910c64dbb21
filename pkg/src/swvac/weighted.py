"""Weighted inner products, finite differences, and inequality oracles.

Quadrature is midpoint in x2 (the nodes are cell centers) and the
trapezoidal-equivalent equal-weight rule in the periodic x1 direction, so
every integral is h1*h2 times a nodal sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, WeightField

Array = np.ndarray

MAX_WEIGHT_POWER = 8
MAX_DIFF_ORDER = 4


@dataclass(frozen=True)
class InequalityReport:
    """One evaluated inequality: lhs <= C * rhs with C = lhs / rhs fitted."""

    name: str
    lhs: float
    rhs: float
    constant: float
    sample: str
    degenerate: bool = False
    stable: bool | None = None

    def csv_row(self, n1: int, n2: int, seed: int | None = None) -> str:
        seed_s = "" if seed is None else str(seed)
        return (
            f"{self.name},{self.lhs:.17g},{self.rhs:.17g},"
            f"{self.constant:.17g},{n1},{n2},{seed_s}"
        )


def integrate(field: Array, grid: Grid) -> float:
    return float(field.sum()) * grid.cell_area()


def weighted_inner(f: Array, g: Array, w: WeightField, power: int = 1) -> float:
    """Quadrature of int rho_0^power * f * g dx over the slab."""
    if not 0 <= power <= MAX_WEIGHT_POWER:
        raise ValueError(f"weight power must be in 0..{MAX_WEIGHT_POWER}, got {power}")
    if f.shape != w.grid.shape or g.shape != w.grid.shape:
        raise ValueError("field shape does not match the grid")
    if power == 0:
        integrand = f * g
    else:
        integrand = w.values**power * f * g
    return integrate(integrand, w.grid)


def weighted_norm(f: Array, w: WeightField, power: int = 1) -> float:
    return np.sqrt(max(weighted_inner(f, f, w, power), 0.0))


def _d1(field: Array, grid: Grid) -> Array:
    return (np.roll(field, -1, axis=0) - np.roll(field, 1, axis=0)) / (2.0 * grid.h1)


def _d2(field: Array, grid: Grid) -> Array:
    out = np.empty_like(field)
    h = grid.h2
    out[:, 1:-1] = (field[:, 2:] - field[:, :-2]) / (2.0 * h)
    out[:, 0] = (-3.0 * field[:, 0] + 4.0 * field[:, 1] - field[:, 2]) / (2.0 * h)
    out[:, -1] = (3.0 * field[:, -1] - 4.0 * field[:, -2] + field[:, -3]) / (2.0 * h)
    return out


def diff_op(field: Array, grid: Grid, axis: int, order: int = 1) -> Array:
    """Finite-difference derivative: periodic centered in x1, centered with
    2nd-order one-sided rows at the x2 extremes. Orders above 1 compose the
    first-derivative stencil."""
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    if not 1 <= order <= MAX_DIFF_ORDER:
        raise ValueError(f"derivative order must be in 1..{MAX_DIFF_ORDER}, got {order}")
    out = np.asarray(field, dtype=float)
    for _ in range(order):
        out = _d1(out, grid) if axis == 1 else _d2(out, grid)
    return out


def gradient(field: Array, grid: Grid) -> tuple[Array, Array]:
    return _d1(field, grid), _d2(field, grid)


def grad_sq(field: Array, grid: Grid) -> Array:
    g1, g2 = gradient(field, grid)
    return g1 * g1 + g2 * g2


def check_hardy_embedding(g: Array, w: WeightField, alpha: int = 0) -> InequalityReport:
    """Fitted constant of int rho^alpha g^2 <= C int rho^(alpha+2) (g^2 + |Dg|^2)."""
    lhs = weighted_inner(g, g, w, alpha)
    rhs = weighted_inner(g, g, w, alpha + 2) + integrate(
        w.values ** (alpha + 2) * grad_sq(g, w.grid), w.grid
    )
    if rhs <= 0.0:
        return InequalityReport("hardy", lhs, rhs, float("nan"), f"alpha={alpha}", degenerate=True)
    return InequalityReport("hardy", lhs, rhs, lhs / rhs, f"alpha={alpha}")


def check_interpolation(g: Array, w: WeightField) -> InequalityReport:
    """Fitted constant of ||g||_L2 <= C ||g||_{L2_rho}^(1/2) ||g||_{H1_rho}^(1/2).

    Both sides are homogeneous of degree one in g, so C is scale invariant.
    """
    lhs = np.sqrt(max(weighted_inner(g, g, w, 0), 0.0))
    l2w = weighted_inner(g, g, w, 1)
    h1w = l2w + integrate(w.values * grad_sq(g, w.grid), w.grid)
    rhs = (max(l2w, 0.0) * max(h1w, 0.0)) ** 0.25
    if rhs <= 0.0:
        return InequalityReport("interpolation", lhs, rhs, float("nan"), "", degenerate=True)
    return InequalityReport("interpolation", lhs, rhs, lhs / rhs, "")


def tangent_ratio(w: WeightField, l: int = 1) -> float:
    """sup over nodes of |d1^l rho_0| / rho_0; zero for x1-independent weights."""
    if not 1 <= l <= MAX_DIFF_ORDER:
        raise ValueError(f"tangential derivative order must be in 1..{MAX_DIFF_ORDER}, got {l}")
    num = np.abs(diff_op(w.values, w.grid, axis=1, order=l))
    return float((num / w.values).max())


def surrogate_h_half(g: Array, w: WeightField) -> float:
    """Computable surrogate for the H^(1/2) norm: (int rho_0 (g^2+|Dg|^2))^(1/2)."""
    val = weighted_inner(g, g, w, 1) + integrate(w.values * grad_sq(g, w.grid), w.grid)
    return float(np.sqrt(max(val, 0.0)))


# --- seeded smooth random samples: truncated Fourier in x1 x polynomial in x2


def sample_coefficients(
    n_samples: int = 100, seed: int = 0, k_max: int = 3, deg: int = 3
) -> Array:
    """Coefficient tensor (n_samples, 2*k_max+1, deg+1) defining continuous
    fields, so the same field can be sampled on any grid resolution."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_samples, 2 * k_max + 1, deg + 1))


def eval_sample(coeff: Array, grid: Grid) -> Array:
    """Evaluate one coefficient slice on the grid nodes."""
    n_four, n_poly = coeff.shape
    k_max = (n_four - 1) // 2
    xx1, xx2 = grid.mesh()
    poly_basis = np.stack([xx2**p for p in range(n_poly)])
    four_basis = [np.ones_like(xx1)]
    for k in range(1, k_max + 1):
        four_basis.append(np.cos(2.0 * np.pi * k * xx1))
        four_basis.append(np.sin(2.0 * np.pi * k * xx1))
    out = np.zeros(grid.shape)
    for a, fb in enumerate(four_basis):
        for b in range(n_poly):
            out += coeff[a, b] * fb * poly_basis[b]
    return out
