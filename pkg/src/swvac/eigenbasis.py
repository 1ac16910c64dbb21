"""Weak-form assembly of the degenerate-singular elliptic operator and the
weighted spectral basis used by the Galerkin time stepper.

The operator -div(rho_0 D w)/rho_0 + w is never formed pointwise: its
singular 1/rho_0 cancels against the measure rho_0 dx in the weak form, so
the assembled matrices only ever multiply by rho_0. Bilinear elements on
the periodic-x1 x cell-centered-x2 grid, 2x2 Gauss quadrature, coefficients
interpolated bilinearly from nodal values. No essential boundary condition
is imposed anywhere: the degenerate weight supplies the natural one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, WeightField

Array = np.ndarray

_GAUSS = 0.5 - 0.5 / np.sqrt(3.0)
DENSE_DOF_LIMIT = 1600
EIGEN_RESIDUAL_TOL = 1e-8


class EigenSolveError(RuntimeError):
    def __init__(self, message: str, residuals: Array | None = None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class QuadratureData:
    """Per-quad-point element data shared by all assemblies on one grid."""

    grid: Grid
    conn: Array  # (n_elem, 4) global node indices
    shape_fn: Array  # (4 quad, 4 local) values
    shape_dx: Array  # (4 quad, 4 local, 2) physical gradients
    weight: float  # quadrature weight times element area


def node_index(grid: Grid, i: Array, j: Array) -> Array:
    return (i % grid.n1) * grid.n2 + j


def build_quadrature(grid: Grid) -> QuadratureData:
    n1, n2 = grid.n1, grid.n2
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2 - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    conn = np.stack(
        [
            node_index(grid, ii, jj),
            node_index(grid, ii + 1, jj),
            node_index(grid, ii, jj + 1),
            node_index(grid, ii + 1, jj + 1),
        ],
        axis=1,
    )
    pts = [(_GAUSS, _GAUSS), (1 - _GAUSS, _GAUSS), (_GAUSS, 1 - _GAUSS), (1 - _GAUSS, 1 - _GAUSS)]
    shape_fn = np.empty((4, 4))
    shape_dx = np.empty((4, 4, 2))
    for q, (xi, ze) in enumerate(pts):
        shape_fn[q] = [(1 - xi) * (1 - ze), xi * (1 - ze), (1 - xi) * ze, xi * ze]
        dxi = np.array([-(1 - ze), (1 - ze), -ze, ze]) / grid.h1
        dze = np.array([-(1 - xi), -xi, (1 - xi), xi]) / grid.h2
        shape_dx[q, :, 0] = dxi
        shape_dx[q, :, 1] = dze
    return QuadratureData(
        grid=grid,
        conn=conn,
        shape_fn=shape_fn,
        shape_dx=shape_dx,
        weight=0.25 * grid.h1 * grid.h2,
    )


def interp_at_quad(quad: QuadratureData, nodal: Array) -> Array:
    """Bilinear interpolation of a flattened nodal field to the quadrature
    points; returns (4, n_elem)."""
    vals = nodal.reshape(-1)[quad.conn]  # (n_elem, 4)
    return quad.shape_fn @ vals.T


@dataclass(frozen=True)
class OperatorPair:
    """A = int rho (Dphi_i.Dphi_j + phi_i phi_j), M = int rho phi_i phi_j."""

    a_mat: sp.csr_matrix
    m_mat: sp.csr_matrix
    grid: Grid
    weight: WeightField
    quad: QuadratureData


@dataclass(frozen=True)
class SpectralBasis:
    modes: Array  # (ndof, n_modes), M-orthonormal columns
    sigma: Array  # (n_modes,), ascending
    op: OperatorPair

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]


@dataclass(frozen=True)
class BasisCheck:
    orthonormality_defect: float
    stiffness_offdiag_max: float
    eigen_residual_max: float


def assemble_operator(w: WeightField, grid: Grid) -> OperatorPair:
    quad = build_quadrature(grid)
    rho_q = interp_at_quad(quad, w.values)  # (4, n_elem)
    n = grid.ndof
    rows, cols, data_a, data_m = [], [], [], []
    for a in range(4):
        for b in range(4):
            acc_a = np.zeros(quad.conn.shape[0])
            acc_m = np.zeros(quad.conn.shape[0])
            for q in range(4):
                mass = quad.shape_fn[q, a] * quad.shape_fn[q, b]
                stiff = quad.shape_dx[q, a] @ quad.shape_dx[q, b]
                acc_m += rho_q[q] * mass
                acc_a += rho_q[q] * (stiff + mass)
            rows.append(quad.conn[:, a])
            cols.append(quad.conn[:, b])
            data_a.append(acc_a)
            data_m.append(acc_m)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    a_mat = sp.coo_matrix(
        (quad.weight * np.concatenate(data_a), (rows, cols)), shape=(n, n)
    ).tocsr()
    m_mat = sp.coo_matrix(
        (quad.weight * np.concatenate(data_m), (rows, cols)), shape=(n, n)
    ).tocsr()
    return OperatorPair(a_mat=a_mat, m_mat=m_mat, grid=grid, weight=w, quad=quad)


def _cluster_slices(sigma: Array, rel_tol: float = 1e-8) -> list[slice]:
    out, start = [], 0
    for i in range(1, len(sigma) + 1):
        if i == len(sigma) or sigma[i] - sigma[i - 1] > rel_tol * max(1.0, abs(sigma[i])):
            out.append(slice(start, i))
            start = i
    return out


def solve_eigenbasis(op: OperatorPair, n_modes: int) -> SpectralBasis:
    """Generalized symmetric eigensolve A w = sigma M w, M-orthonormalized,
    ascending; dense below DENSE_DOF_LIMIT dofs, shift-invert Lanczos above."""
    n = op.grid.ndof
    if not 1 <= n_modes <= n:
        raise ValueError(f"n_modes must be in 1..{n}, got {n_modes}")
    if n <= DENSE_DOF_LIMIT or n_modes > n // 3:
        sigma, modes = scipy.linalg.eigh(
            op.a_mat.toarray(), op.m_mat.toarray(), subset_by_index=[0, n_modes - 1]
        )
    else:
        v0 = np.cos(np.arange(n) * 0.37) + 1.0  # deterministic start vector
        sigma, modes = spla.eigsh(
            op.a_mat, k=n_modes, M=op.m_mat.tocsc(), sigma=0.0, which="LM", v0=v0
        )
    order = np.argsort(sigma)
    sigma, modes = sigma[order], modes[:, order]

    # re-orthonormalize numerically degenerate clusters in the M metric and
    # fix a sign convention so repeated solves are deterministic
    m_modes = op.m_mat @ modes
    for cl in _cluster_slices(sigma):
        gram = modes[:, cl].T @ m_modes[:, cl]
        chol = scipy.linalg.cholesky(gram, lower=True)
        modes[:, cl] = scipy.linalg.solve_triangular(chol, modes[:, cl].T, lower=True).T
    for l in range(modes.shape[1]):
        k = int(np.argmax(np.abs(modes[:, l])))
        if modes[k, l] < 0:
            modes[:, l] = -modes[:, l]

    m_modes = op.m_mat @ modes
    res = op.a_mat @ modes - m_modes * sigma[None, :]
    residuals = np.linalg.norm(res, axis=0) / np.linalg.norm(m_modes, axis=0)
    if residuals.max() > EIGEN_RESIDUAL_TOL:
        raise EigenSolveError(
            f"eigensolver residual {residuals.max():.3e} exceeds {EIGEN_RESIDUAL_TOL:.1e}",
            residuals=residuals,
        )
    return SpectralBasis(modes=modes, sigma=sigma, op=op)


def verify_basis(basis: SpectralBasis, op: OperatorPair | None = None) -> BasisCheck:
    op = op or basis.op
    w = basis.modes
    gram_m = w.T @ (op.m_mat @ w)
    gram_a = w.T @ (op.a_mat @ w)
    ortho = float(np.abs(gram_m - np.eye(basis.n_modes)).max())
    offdiag = gram_a - np.diag(np.diag(gram_a))
    m_modes = op.m_mat @ w
    res = op.a_mat @ w - m_modes * basis.sigma[None, :]
    eig_res = float(
        (np.linalg.norm(res, axis=0) / np.linalg.norm(m_modes, axis=0)).max()
    )
    return BasisCheck(
        orthonormality_defect=ortho,
        stiffness_offdiag_max=float(np.abs(offdiag).max()),
        eigen_residual_max=eig_res,
    )


@dataclass(frozen=True)
class ModeRegularity:
    ratios: Array  # (n_modes,), weighted-derivative norm over ||sqrt(rho) w_l||
    sup_ratio: float


def basis_regularity(basis: SpectralBasis, w: WeightField, max_order: int = 4) -> ModeRegularity:
    """Weighted derivative norms of each mode relative to its base norm.

    Per mode: sum of ||sqrt(rho) d1^l1 D w_l|| for l1 + 1 <= max_order and
    ||sqrt(rho^l2) d1^l1 d2^l2 w_l|| for l1 + l2 <= max_order, l2 >= 2,
    divided by ||sqrt(rho) w_l||.
    """
    from .weighted import diff_op, weighted_norm

    grid = w.grid
    ratios = np.empty(basis.n_modes)
    for l in range(basis.n_modes):
        mode = basis.modes[:, l].reshape(grid.shape)
        base = weighted_norm(mode, w, 1)
        total = 0.0
        for l1 in range(max_order):
            f = diff_op(mode, grid, axis=1, order=l1) if l1 else mode
            total += weighted_norm(diff_op(f, grid, axis=1), w, 1)
            total += weighted_norm(diff_op(f, grid, axis=2), w, 1)
        for l2 in range(2, max_order + 1):
            for l1 in range(max_order - l2 + 1):
                f = diff_op(mode, grid, axis=1, order=l1) if l1 else mode
                f = diff_op(f, grid, axis=2, order=l2)
                total += weighted_norm(f, w, l2)
        ratios[l] = total / base if base > 0 else 0.0
    return ModeRegularity(ratios=ratios, sup_ratio=float(ratios.max()))
