"""Eulerian reconstruction: flow-map inversion, depth/velocity fields on the
moving domain, the free boundary polylines, and the run exporter."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .grid import Grid, WeightField, extrapolate_to_walls
from .kinematics import FlowMapState, deformation, tensors_from_grad
from .nonlinear import Solution
from .weighted import diff_op

Array = np.ndarray

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class InversionResult:
    preimages: Array  # (n, 2)
    converged: Array  # (n,) bool
    inside: Array  # (n,) bool, preimage within the closed slab
    iterations: Array  # (n,) int


@dataclass(frozen=True)
class EulerianSnapshot:
    t: float
    points: Array  # (n, 2) query points in Omega(t)
    rho: Array  # (n,)
    vel: Array  # (n, 2)
    curve_low: Array  # (n1 + 1, 2) image of x2 = 0, closed by wrap
    curve_high: Array  # (n1 + 1, 2) image of x2 = 1
    normal_low: Array  # (n1 + 1, 2) outward unit normals
    normal_high: Array
    grad_rho: Array | None = None  # (2, n1, n2) Eulerian gradient at mapped nodes
    grad_u: Array | None = None  # (2, 2, n1, n2) grad_u[i, k] = d_yk u^i
    preimages: Array | None = None


class _BilinearMap:
    """Bilinear interpolant of nodal fields on the periodic x1 x cell-centered
    x2 grid, with linear extension past the first/last x2 rows."""

    def __init__(self, grid: Grid):
        self.grid = grid

    def _locate(self, x: Array) -> tuple[Array, Array, Array, Array]:
        g = self.grid
        s = x[:, 0] / g.h1
        i0 = np.floor(s).astype(int)
        fx = s - i0
        i0 %= g.n1
        r = x[:, 1] / g.h2 - 0.5
        j0 = np.clip(np.floor(r).astype(int), 0, g.n2 - 2)
        fy = r - j0
        return i0, j0, fx, fy

    def eval(self, nodal: Array, x: Array) -> Array:
        g = self.grid
        i0, j0, fx, fy = self._locate(x)
        i1 = (i0 + 1) % g.n1
        f00 = nodal[..., i0, j0]
        f10 = nodal[..., i1, j0]
        f01 = nodal[..., i0, j0 + 1]
        f11 = nodal[..., i1, j0 + 1]
        return (
            f00 * (1 - fx) * (1 - fy)
            + f10 * fx * (1 - fy)
            + f01 * (1 - fx) * fy
            + f11 * fx * fy
        )


def invert_flow_map(state: FlowMapState, queries: Array) -> InversionResult:
    """Damped Newton inversion of the interpolated flow map.

    The initial guess is the query point itself: under the Jacobian window
    the map stays near the identity. Non-convergence after the iteration cap
    is reported per point, never raised.
    """
    grid = state.grid
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    interp = _BilinearMap(grid)
    tens = deformation(state)
    # interpolate the periodic displacement, not the map itself, so the
    # evaluation is seamless across the x1 period
    xx1, xx2 = grid.mesh()
    disp = state.eta - np.stack([xx1, xx2])

    x = queries.copy()
    n = len(x)
    converged = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    for it in range(NEWTON_MAX_ITER):
        eta_x = x + np.stack([interp.eval(disp[0], x), interp.eval(disp[1], x)], axis=1)
        res = eta_x - queries
        err = np.linalg.norm(res, axis=1)
        newly = (~converged) & (err <= NEWTON_TOL)
        converged |= newly
        active = ~converged
        if not active.any():
            break
        g00 = interp.eval(tens.grad[0, 0], x[active])
        g01 = interp.eval(tens.grad[0, 1], x[active])
        g10 = interp.eval(tens.grad[1, 0], x[active])
        g11 = interp.eval(tens.grad[1, 1], x[active])
        det = g00 * g11 - g01 * g10
        det = np.where(np.abs(det) < 1e-14, 1e-14, det)
        rx, ry = res[active, 0], res[active, 1]
        dx = (g11 * rx - g01 * ry) / det
        dy = (-g10 * rx + g00 * ry) / det
        step = np.stack([dx, dy], axis=1)
        # damp steps that would jump more than a cell
        norm = np.linalg.norm(step, axis=1)
        cap = max(grid.h1, grid.h2)
        scale = np.where(norm > cap, cap / norm, 1.0)
        x[active] -= step * scale[:, None]
        iters[active] = it + 1
    inside = (x[:, 1] >= -1e-9) & (x[:, 1] <= 1.0 + 1e-9)
    return InversionResult(preimages=x, converged=converged, inside=inside, iterations=iters)


def _boundary_curves(eta: Array, grid: Grid) -> tuple[Array, Array, Array, Array]:
    lows, highs = [], []
    for i in range(2):
        lo, hi = extrapolate_to_walls(eta[i])
        lows.append(lo)
        highs.append(hi)
    low = np.stack(lows, axis=1)
    high = np.stack(highs, axis=1)
    low = np.vstack([low, low[:1] + np.array([1.0, 0.0])])  # close over the period
    high = np.vstack([high, high[:1] + np.array([1.0, 0.0])])

    def normals(curve: Array, sign: float) -> Array:
        tang = np.gradient(curve, axis=0)
        nrm = np.stack([tang[:, 1], -tang[:, 0]], axis=1) * sign
        length = np.linalg.norm(nrm, axis=1, keepdims=True)
        return nrm / np.where(length > 0, length, 1.0)

    # the tangent runs in +x1; rotating it by -90 deg gives (t2, -t1), which
    # points in -e2 for the identity map: outward at the bottom, inward at
    # the top, hence the sign split
    return low, high, normals(low, 1.0), normals(high, -1.0)


def eulerian_fields(sol: Solution, t: float, query: Array | None = None) -> EulerianSnapshot:
    """Reconstruct rho = rho_0(etainv) / J(etainv) and u = v(etainv) at the
    query points (default: the deformed Lagrangian nodes), plus the moving
    boundary polylines and Eulerian gradients via the chain rule."""
    idx = int(np.argmin(np.abs(sol.times - t)))
    if abs(sol.times[idx] - t) > 1e-10:
        raise ValueError(f"t = {t} is not on the solution time grid")
    grid, weight = sol.grid, sol.weight
    eta = sol.eta_hist[idx]
    v = sol.v_hist[idx]
    state = FlowMapState(grid=grid, eta=eta, v=v, t=t)
    tens = deformation(state)

    if query is None:
        query = np.stack([eta[0].ravel(), eta[1].ravel()], axis=1)
    inv = invert_flow_map(state, query)
    if not inv.converged.all():
        raise RuntimeError(
            f"flow-map inversion failed at {int((~inv.converged).sum())} query points"
        )
    interp = _BilinearMap(grid)
    x = inv.preimages
    rho0_x = interp.eval(weight.values, x)
    jac_x = interp.eval(tens.jac, x)
    rho = rho0_x / jac_x
    vel = np.stack([interp.eval(v[0], x), interp.eval(v[1], x)], axis=1)

    # Eulerian gradients at the mapped Lagrangian nodes via grad_y = A^T grad_x
    rho_l = weight.values / tens.jac  # rho composed with eta
    a_over_j = tens.cof / tens.jac
    d_rho = np.stack([diff_op(rho_l, grid, axis=1), diff_op(rho_l, grid, axis=2)])
    grad_rho = np.einsum("kmxy,mxy->kxy", a_over_j, d_rho)
    d_v = np.empty((2, 2) + grid.shape)
    for i in range(2):
        d_v[i, 0] = diff_op(v[i], grid, axis=1)
        d_v[i, 1] = diff_op(v[i], grid, axis=2)
    grad_u = np.einsum("kmxy,imxy->ikxy", a_over_j, d_v)

    low, high, n_low, n_high = _boundary_curves(eta, grid)
    return EulerianSnapshot(
        t=t,
        points=query,
        rho=rho,
        vel=vel,
        curve_low=low,
        curve_high=high,
        normal_low=n_low,
        normal_high=n_high,
        grad_rho=grad_rho,
        grad_u=grad_u,
        preimages=x,
    )


def eulerian_mass(sol: Solution, t: float) -> tuple[float, float]:
    """(Lagrangian mass, Eulerian mass) at time t.

    The Lagrangian route integrates rho_0 directly; the Eulerian route pushes
    each node forward, inverts the map back, and integrates the reconstructed
    depth against the preimage volume element, so it exercises the full
    inversion/reconstruction path.
    """
    idx = int(np.argmin(np.abs(sol.times - t)))
    grid, weight = sol.grid, sol.weight
    snap = eulerian_fields(sol, sol.times[idx])
    state = FlowMapState(grid=grid, eta=sol.eta_hist[idx], v=sol.v_hist[idx], t=t)
    tens = deformation(state)
    interp = _BilinearMap(grid)
    jac_pre = interp.eval(tens.jac, snap.preimages)
    mass_l = float(weight.values.sum()) * grid.cell_area()
    mass_e = float((snap.rho * jac_pre).sum()) * grid.cell_area()
    return mass_l, mass_e


def stress_free_residual(snapshot: EulerianSnapshot) -> float:
    """max over boundary-extrapolation points of |grad(rho) . D(u)| with
    D(u) the symmetric velocity gradient; needs a node-mapped snapshot."""
    if snapshot.grad_rho is None or snapshot.grad_u is None:
        raise ValueError("snapshot carries no gradient fields")
    gu = snapshot.grad_u
    sym = 0.5 * (gu + np.swapaxes(gu, 0, 1))
    fld = np.einsum("kxy,kjxy->jxy", snapshot.grad_rho, sym)
    res = 0.0
    for j in range(2):
        low, high = extrapolate_to_walls(fld[j])
        res = max(res, float(np.abs(low).max()), float(np.abs(high).max()))
    return res


def curves_are_simple(curve: Array) -> bool:
    """Segment-sweep check that a polyline has no self-intersection."""

    def cross2(u, v) -> float:
        return u[0] * v[1] - u[1] * v[0]

    def seg_intersect(p, q, r, s) -> bool:
        d1 = cross2(q - p, r - p)
        d2 = cross2(q - p, s - p)
        d3 = cross2(s - r, p - r)
        d4 = cross2(s - r, q - r)
        return (d1 * d2 < 0) and (d3 * d4 < 0)

    n = len(curve) - 1
    for a in range(n):
        for b in range(a + 2, n):
            if seg_intersect(curve[a], curve[a + 1], curve[b], curve[b + 1]):
                return False
    return True


# --- run export -------------------------------------------------------------


def _write_csv(path: str, header: str, rows: Array) -> None:
    np.savetxt(path, rows, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")


def export_run(
    sol: Solution,
    out_dir: str,
    *,
    snapshot_indices: list[int] | None = None,
    manifest_lines: list[str] | None = None,
    max_order: int = 2,
) -> list[str]:
    """Write the run artifacts: energy.csv, picard.csv, per-time state and
    Eulerian CSVs, boundary polylines, and the manifest. Deterministic given
    the solution. Returns the written paths."""
    from .linearized import HistoryError
    from .nonlinear import energy_functional

    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    grid = sol.grid
    nt = len(sol.times)
    if snapshot_indices is None:
        snapshot_indices = sorted({0, nt // 2, nt - 1}) if nt else []

    # energy.csv over the snapshot times (full per-step energies are costly)
    e_rows: list[list[float]] = []
    for k in snapshot_indices:
        t = float(sol.times[k])
        try:
            rep = energy_functional(sol, t, max_order=max_order)
        except HistoryError:
            continue
        from .kinematics import check_bounds

        state = FlowMapState(grid=grid, eta=sol.eta_hist[k], v=sol.v_hist[k], t=t)
        br = check_bounds(deformation(state))
        e_rows.append(
            [t, rep.total, rep.tangential, rep.normal, br.j_min, br.j_max, br.b_eig_min, rep.boundary_residual]
        )
    if nt:
        path = os.path.join(out_dir, "energy.csv")
        rows = np.array(e_rows) if e_rows else np.empty((0, 8))
        _write_csv(path, "t,E_total,E_en,E_el,J_min,J_max,b_min_eig,boundary_residual", rows)
        written.append(path)

        path = os.path.join(out_dir, "picard.csv")
        with open(path, "w") as f:
            f.write("iter,d_n,e_n,ratio,T\n")
            body = "\n".join(sol.trace.csv_rows())
            if body:
                f.write(body + "\n")
        written.append(path)

    xx1, xx2 = grid.mesh()
    for k in snapshot_indices:
        t = float(sol.times[k])
        state = FlowMapState(grid=grid, eta=sol.eta_hist[k], v=sol.v_hist[k], t=t)
        tens = deformation(state)
        rows = np.stack(
            [
                xx1.ravel(),
                xx2.ravel(),
                sol.eta_hist[k][0].ravel(),
                sol.eta_hist[k][1].ravel(),
                sol.v_hist[k][0].ravel(),
                sol.v_hist[k][1].ravel(),
                tens.jac.ravel(),
                (sol.weight.values / tens.jac).ravel(),
            ],
            axis=1,
        )
        path = os.path.join(out_dir, f"state_{k:04d}.csv")
        _write_csv(path, "x1,x2,eta1,eta2,v1,v2,J,rho", rows)
        written.append(path)

        snap = eulerian_fields(sol, t)
        rows = np.stack(
            [snap.points[:, 0], snap.points[:, 1], snap.rho, snap.vel[:, 0], snap.vel[:, 1]],
            axis=1,
        )
        path = os.path.join(out_dir, f"eulerian_{k:04d}.csv")
        _write_csv(path, "y1,y2,rho,u1,u2", rows)
        written.append(path)

        rows = np.concatenate(
            [
                np.column_stack([np.zeros(len(snap.curve_low)), snap.curve_low, snap.normal_low]),
                np.column_stack([np.ones(len(snap.curve_high)), snap.curve_high, snap.normal_high]),
            ]
        )
        path = os.path.join(out_dir, f"boundary_{k:04d}.csv")
        _write_csv(path, "component,y1,y2,n1,n2", rows)
        written.append(path)

    path = os.path.join(out_dir, "manifest.txt")
    with open(path, "w") as f:
        f.write("[run]\n")
        f.write(f"converged = {sol.converged}\n")
        f.write(f"T = {sol.t_final!r}\n")
        f.write(f"steps = {nt - 1}\n")
        f.write(f"iterations = {sol.trace.iterations}\n")
        f.write(f"halvings = {len(sol.trace.halvings)}\n")
        f.write(f"grid = {grid.n1}x{grid.n2}\n")
        f.write(f"n_modes = {sol.basis.n_modes}\n")
        if manifest_lines:
            f.write("\n[config]\n")
            for line in manifest_lines:
                f.write(line.rstrip("\n") + "\n")
    written.append(path)
    return written
