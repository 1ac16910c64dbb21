"""Lagrangian flow map and kinematic tensors J, a, b.

Index convention: grad[i, k] = d_k eta^i. The cofactor is stored as
cof[k, i] so that the pressure-gradient contraction reads cof[k, i] and the
metric is b[k, j] = sum_l cof[k, l] * cof[j, l]; with this layout the
explicit shear expansion b11 = 1 + t^2, b12 = -t, b22 = 1 holds, which pins
the row/column assignment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .weighted import diff_op

Array = np.ndarray

J_LOWER = 0.9
J_UPPER = 1.1
B_EIG_FLOOR = 0.2


@dataclass(frozen=True)
class FlowMapState:
    grid: Grid
    eta: Array  # (2, n1, n2), positions of fluid particles
    v: Array  # (2, n1, n2), velocity at the same labels
    t: float = 0.0


@dataclass(frozen=True)
class KinematicTensors:
    grid: Grid
    grad: Array  # (2, 2, n1, n2), grad[i, k] = d_k eta^i
    jac: Array  # (n1, n2)
    cof: Array  # (2, 2, n1, n2), cof[k, i]
    metric: Array  # (2, 2, n1, n2), symmetric b[k, j]


@dataclass(frozen=True)
class BoundsReport:
    j_min: float
    j_max: float
    b_eig_min: float
    b22_min: float
    pass_j: bool
    pass_b: bool
    pass_b22: bool

    @property
    def passed(self) -> bool:
        return self.pass_j and self.pass_b and self.pass_b22


def identity_state(grid: Grid, v0: Array | None = None) -> FlowMapState:
    xx1, xx2 = grid.mesh()
    eta = np.stack([xx1, xx2])
    if v0 is None:
        v0 = np.zeros_like(eta)
    else:
        v0 = np.asarray(v0, dtype=float)
        if v0.shape != eta.shape:
            raise ValueError("initial velocity shape does not match the grid")
    return FlowMapState(grid=grid, eta=eta, v=v0, t=0.0)


def advance_flow_map(state: FlowMapState, v_new: Array, dt: float) -> FlowMapState:
    """Trapezoidal flow-map update eta' = eta + dt*(v + v_new)/2."""
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    v_new = np.asarray(v_new, dtype=float)
    if v_new.shape != state.eta.shape:
        raise ValueError("velocity shape does not match the flow map grid")
    eta = state.eta + 0.5 * dt * (state.v + v_new)
    return FlowMapState(grid=state.grid, eta=eta, v=v_new, t=state.t + dt)


def map_gradient(eta: Array, grid: Grid) -> Array:
    """grad[i, k] = d_k eta^i by finite differences.

    The map itself is not periodic in x1 (eta^1 gains one period per wrap),
    so the periodic stencil is applied to the displacement eta - x and the
    identity gradient is added back.
    """
    xx1, xx2 = grid.mesh()
    disp = eta - np.stack([xx1, xx2])
    grad = np.empty((2, 2) + grid.shape)
    for i in range(2):
        grad[i, 0] = diff_op(disp[i], grid, axis=1)
        grad[i, 1] = diff_op(disp[i], grid, axis=2)
    grad[0, 0] += 1.0
    grad[1, 1] += 1.0
    return grad


def deformation(state: FlowMapState) -> KinematicTensors:
    """Compute D(eta), J, the cofactor a, and the metric b at all nodes."""
    return tensors_from_grad(state.grid, map_gradient(state.eta, state.grid))


def tensors_from_grad(grid: Grid, grad: Array) -> KinematicTensors:
    jac = grad[0, 0] * grad[1, 1] - grad[0, 1] * grad[1, 0]
    cof = np.empty_like(grad)
    cof[0, 0] = grad[1, 1]
    cof[0, 1] = -grad[0, 1]
    cof[1, 0] = -grad[1, 0]
    cof[1, 1] = grad[0, 0]
    metric = np.einsum("klxy,jlxy->kjxy", cof, cof)
    return KinematicTensors(grid=grid, grad=grad, jac=jac, cof=cof, metric=metric)


def piola_residual(tensors: KinematicTensors) -> float:
    """max over i and nodes of |d_k a_i^k|; exactly zero for affine maps."""
    grid = tensors.grid
    res = 0.0
    for i in range(2):
        div = diff_op(tensors.cof[0, i], grid, axis=1) + diff_op(
            tensors.cof[1, i], grid, axis=2
        )
        res = max(res, float(np.abs(div).max()))
    return res


def metric_min_eigenvalue(metric: Array) -> Array:
    """Pointwise smallest eigenvalue of the symmetric 2x2 metric."""
    b11, b12, b22 = metric[0, 0], metric[0, 1], metric[1, 1]
    mid = 0.5 * (b11 + b22)
    rad = np.sqrt(np.maximum(0.25 * (b11 - b22) ** 2 + b12**2, 0.0))
    return mid - rad


def check_bounds(tensors: KinematicTensors) -> BoundsReport:
    """A priori bound flags 9/10 <= J <= 11/10 and min eig(b) >= 1/5.

    Violations are reported, not raised; the nonlinear solver consumes the
    flags to drive its T-halving.
    """
    j_min = float(tensors.jac.min())
    j_max = float(tensors.jac.max())
    b_eig_min = float(metric_min_eigenvalue(tensors.metric).min())
    b22_min = float(tensors.metric[1, 1].min())
    return BoundsReport(
        j_min=j_min,
        j_max=j_max,
        b_eig_min=b_eig_min,
        b22_min=b22_min,
        pass_j=(j_min >= J_LOWER and j_max <= J_UPPER),
        pass_b=(b_eig_min >= B_EIG_FLOOR),
        pass_b22=(b22_min >= B_EIG_FLOOR),
    )


def metric_from_velocity_integrals(grid: Grid, int_dv: Array) -> Array:
    """Explicit metric expansion from the time-integrated velocity gradient.

    int_dv[i, k] holds int_0^t d_k v^i ds at the nodes. This is the oracle
    route for b: it never touches eta.
    """
    g = np.empty((2, 2) + grid.shape)
    g[0, 0] = 1.0 + int_dv[0, 0]
    g[0, 1] = int_dv[0, 1]
    g[1, 0] = int_dv[1, 0]
    g[1, 1] = 1.0 + int_dv[1, 1]
    b = np.empty_like(g)
    b[0, 0] = 1.0 + 2.0 * int_dv[1, 1] + int_dv[1, 1] ** 2 + int_dv[0, 1] ** 2
    b[0, 1] = (
        -(int_dv[1, 0] + int_dv[0, 1])
        - int_dv[0, 0] * int_dv[0, 1]
        - int_dv[1, 0] * int_dv[1, 1]
    )
    b[1, 0] = b[0, 1]
    b[1, 1] = 1.0 + 2.0 * int_dv[0, 0] + int_dv[0, 0] ** 2 + int_dv[1, 0] ** 2
    return b
