"""Picard iteration for the nonlinear Lagrangian system, with contraction
monitoring, the truncated higher-order energy functional, and the a priori
bound guard driving adaptive T-halving.

Distances between iterates are measured on the reconstructed velocity
fields, not the Galerkin coefficients, so the contraction diagnostics are
basis independent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigenbasis import SpectralBasis
from .grid import Grid, WeightField, extrapolate_to_walls
from .kinematics import map_gradient, metric_min_eigenvalue, tensors_from_grad
from .linearized import (
    HistoryError,
    freeze_coefficients,
    run_linearized,
)
from .weighted import diff_op, weighted_inner

Array = np.ndarray

_trapz = getattr(np, "trapezoid", None) or np.trapz

J_LOWER = 0.9
J_UPPER = 1.1
B_EIG_FLOOR = 0.2
ENERGY_SLACK = 1.1


@dataclass(frozen=True)
class PicardSettings:
    t_final: float = 0.25
    n_steps: int = 200
    tol: float = 1e-8
    max_iter: int = 50
    max_halvings: int = 6
    scheme: str = "crank-nicolson"
    pressure: bool = True
    contraction_guard: float = 0.9
    guard_patience: int = 3


@dataclass
class PicardTrace:
    d: list[float] = field(default_factory=list)
    e: list[float] = field(default_factory=list)
    ratio: list[float] = field(default_factory=list)
    t_used: list[float] = field(default_factory=list)
    halvings: list[tuple[int, str, float]] = field(default_factory=list)
    iterations: int = 0
    converged_iter: int | None = None

    def csv_rows(self) -> list[str]:
        rows = []
        for k in range(len(self.d)):
            r = self.ratio[k] if k < len(self.ratio) else float("nan")
            rows.append(
                f"{k + 1},{self.d[k]:.17g},{self.e[k]:.17g},{r:.17g},{self.t_used[k]:.17g}"
            )
        return rows


@dataclass
class Solution:
    grid: Grid
    weight: WeightField
    basis: SpectralBasis
    times: Array  # (nt,)
    v_hist: Array  # (nt, 2, n1, n2)
    eta_hist: Array  # (nt, 2, n1, n2)
    lam_hist: Array  # (nt, 2, n_modes)
    converged: bool
    t_final: float
    trace: PicardTrace


@dataclass(frozen=True)
class EnergyReport:
    total: float
    tangential: float  # time/horizontal mixed block
    normal: float  # weighted normal-derivative block
    terms: dict[tuple[int, int, int, str], float]
    max_order: int
    m0: float
    within_bound: bool
    boundary_residual: float


def reconstruct_velocity(lam_hist: Array, basis: SpectralBasis, grid: Grid) -> Array:
    """(nt, 2, n_modes) coefficients -> (nt, 2, n1, n2) nodal fields."""
    nt = lam_hist.shape[0]
    out = np.empty((nt, 2) + grid.shape)
    flat = lam_hist.reshape(nt * 2, -1) @ basis.modes.T
    return flat.reshape(nt, 2, *grid.shape)


def integrate_flow_map(v_hist: Array, times: Array, grid: Grid) -> Array:
    """Trapezoidal eta(t_k) = x + int_0^t v ds, matching the kinematics update."""
    xx1, xx2 = grid.mesh()
    eta = np.empty_like(v_hist)
    eta[0] = np.stack([xx1, xx2])
    for k in range(1, len(times)):
        dt = times[k] - times[k - 1]
        eta[k] = eta[k - 1] + 0.5 * dt * (v_hist[k - 1] + v_hist[k])
    return eta


def _bounds_ok(v_hist: Array, times: Array, grid: Grid) -> bool:
    eta_hist = integrate_flow_map(v_hist, times, grid)
    for k in range(len(times)):
        tens = tensors_from_grad(grid, map_gradient(eta_hist[k], grid))
        if tens.jac.min() < J_LOWER or tens.jac.max() > J_UPPER:
            return False
        if metric_min_eigenvalue(tens.metric).min() < B_EIG_FLOOR:
            return False
    return True


def iteration_distance(
    v_a: Array, v_b: Array, times: Array, weight: WeightField
) -> tuple[float, float]:
    """(sup_t ||sqrt(rho)(v_a - v_b)||, (int ||sqrt(rho) D(v_a - v_b)||^2 dt)^(1/2))."""
    if v_a.shape != v_b.shape:
        raise ValueError("velocity histories have different shapes")
    if v_a.shape[0] != len(times):
        raise ValueError("velocity history and time grid lengths differ")
    grid = weight.grid
    diff = v_a - v_b
    sup_d = 0.0
    diss = np.empty(len(times))
    for k in range(len(times)):
        l2 = sum(weighted_inner(diff[k, i], diff[k, i], weight, 1) for i in range(2))
        sup_d = max(sup_d, np.sqrt(max(l2, 0.0)))
        g = 0.0
        for i in range(2):
            for ax in (1, 2):
                d = diff_op(diff[k, i], grid, axis=ax)
                g += weighted_inner(d, d, weight, 1)
        diss[k] = g
    return float(sup_d), float(np.sqrt(max(_trapz(diss, times), 0.0)))


def picard_solve(
    u0: Array,
    grid: Grid,
    weight: WeightField,
    basis: SpectralBasis,
    settings: PicardSettings | None = None,
) -> tuple[Solution, PicardTrace]:
    """Iterate linearized solves with coefficients frozen from the previous
    iterate. The initial iterate is the constant-in-time extension of u0
    (eta^(0) = x + t*u0). T is halved, and the iteration restarted, whenever
    the a priori bound guard fires on an iterate or contraction stalls."""
    cfg = settings or PicardSettings()
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (2,) + grid.shape:
        raise ValueError("initial velocity must have shape (2, n1, n2)")

    trace = PicardTrace()
    t_final = cfg.t_final
    last_solution: Solution | None = None

    for halving in range(cfg.max_halvings + 1):
        times = np.linspace(0.0, t_final, cfg.n_steps + 1)
        v_bar = np.broadcast_to(u0, (len(times), 2) + grid.shape).copy()
        stall = 0
        restart = False
        seg_d: list[float] = []
        for n in range(1, cfg.max_iter + 1):
            trace.iterations += 1
            frozen = freeze_coefficients(v_bar, times, grid, weight)
            if not frozen.all_ok:
                trace.halvings.append((trace.iterations, "frozen-bounds", t_final / 2))
                restart = True
                break
            lam_hist = run_linearized(
                u0, frozen, basis, scheme=cfg.scheme, pressure=cfg.pressure
            )
            v_new = reconstruct_velocity(lam_hist, basis, grid)
            d, e = iteration_distance(v_new, v_bar, times, weight)
            trace.d.append(d)
            trace.e.append(e)
            trace.t_used.append(t_final)
            seg_d.append(d)
            if len(seg_d) >= 2 and seg_d[-2] > 0:
                trace.ratio.append(seg_d[-1] / seg_d[-2])
            else:
                trace.ratio.append(float("nan"))

            if not _bounds_ok(v_new, times, grid):
                trace.halvings.append((trace.iterations, "iterate-bounds", t_final / 2))
                restart = True
                break

            eta_hist = integrate_flow_map(v_new, times, grid)
            last_solution = Solution(
                grid=grid,
                weight=weight,
                basis=basis,
                times=times,
                v_hist=v_new,
                eta_hist=eta_hist,
                lam_hist=lam_hist,
                converged=False,
                t_final=t_final,
                trace=trace,
            )
            if d <= cfg.tol:
                trace.converged_iter = trace.iterations
                last_solution.converged = True
                return last_solution, trace

            if len(seg_d) >= 2 and seg_d[-1] > cfg.contraction_guard * seg_d[-2]:
                stall += 1
            else:
                stall = 0
            if stall >= cfg.guard_patience:
                trace.halvings.append((trace.iterations, "non-contraction", t_final / 2))
                restart = True
                break
            v_bar = v_new

        if restart and halving < cfg.max_halvings:
            t_final /= 2.0
            continue
        break

    if last_solution is None:
        times = np.linspace(0.0, t_final, cfg.n_steps + 1)
        v_zero = np.broadcast_to(u0, (len(times), 2) + grid.shape).copy()
        last_solution = Solution(
            grid=grid,
            weight=weight,
            basis=basis,
            times=times,
            v_hist=v_zero,
            eta_hist=integrate_flow_map(v_zero, times, grid),
            lam_hist=np.zeros((len(times), 2, basis.n_modes)),
            converged=False,
            t_final=t_final,
            trace=trace,
        )
    return last_solution, trace


# --- energy functional ------------------------------------------------------


def _fd_weights(order: int, forward: bool) -> Array:
    """1st-order-accurate one-sided difference weights for d^order/dt^order,
    newest sample first (backward) or starting sample first (forward)."""
    from math import comb

    w = np.array([(-1) ** k * comb(order, k) for k in range(order + 1)], dtype=float)
    if forward:
        w = ((-1) ** order) * w
    return w


def time_derivative(v_hist: Array, times: Array, idx: int, order: int) -> Array:
    """One-sided finite-difference time derivative of order `order` at index
    idx: backward when enough prior steps exist, forward otherwise."""
    if order == 0:
        return v_hist[idx]
    nt = len(times)
    dt = float(times[1] - times[0])
    w = None
    if idx >= order:
        w = _fd_weights(order, forward=False)
        samples = [v_hist[idx - k] for k in range(order + 1)]
    elif idx + order < nt:
        w = _fd_weights(order, forward=True)
        samples = [v_hist[idx + k] for k in range(order + 1)]
    else:
        raise HistoryError(
            f"time-derivative order {order} needs {order} steps on one side of index {idx}"
        )
    out = np.zeros_like(v_hist[idx])
    for wk, s in zip(w, samples):
        out += wk * s
    return out / dt**order


def _energy_terms(
    sol: Solution, idx: int, max_order: int
) -> dict[tuple[int, int, int, str], float]:
    grid, weight = sol.grid, sol.weight
    terms: dict[tuple[int, int, int, str], float] = {}

    def wnorm2(f: Array, power: int) -> float:
        return max(weighted_inner(f, f, weight, power), 0.0)

    t_derivs: dict[int, Array] = {}
    for l0 in range(max_order + 1):
        if 2 * l0 <= max_order + 4:
            t_derivs[l0] = time_derivative(sol.v_hist, sol.times, idx, l0)

    # pure time-derivative block
    for l0 in range(min(4, max_order) + 1):
        f = t_derivs[l0]
        terms[(l0, 0, 0, "time")] = wnorm2(f[0], 1) + wnorm2(f[1], 1)

    # tangential block: sqrt(rho) dt^l0 d1^l1 Dv and the l1+1 companion
    for l0 in range(max_order + 1):
        for l1 in range(max_order + 1):
            if 2 * l0 + l1 > max_order + 2:
                continue
            for extra, tag in ((0, "tangential"), (1, "tangential+1")):
                if l0 + l1 + extra + 1 > max_order:
                    continue
                val = 0.0
                for i in range(2):
                    f = t_derivs[l0][i]
                    if l1 + extra:
                        f = diff_op(f, grid, axis=1, order=l1 + extra)
                    for ax in (1, 2):
                        g = diff_op(f, grid, axis=ax)
                        val += wnorm2(g, 1)
                terms[(l0, l1 + extra, 1, tag)] = val

    # normal block: sqrt(rho^l2) dt^l0 d1^l1 d2^l2 v, l2 >= 2
    for l2 in range(2, max_order + 1):
        for l0 in range(max_order + 1):
            for l1 in range(max_order + 1):
                if 2 * l0 + l1 + l2 > max_order + 4 or l0 + l1 + l2 > max_order:
                    continue
                val = 0.0
                for i in range(2):
                    f = t_derivs[l0][i]
                    if l1:
                        f = diff_op(f, grid, axis=1, order=l1)
                    f = diff_op(f, grid, axis=2, order=l2)
                    val += wnorm2(f, l2)
                terms[(l0, l1, l2, "normal")] = val
    return terms


def _sum_blocks(terms: dict[tuple[int, int, int, str], float]) -> tuple[float, float]:
    tang = sum(v for k, v in terms.items() if k[3] != "normal")
    norm = sum(v for k, v in terms.items() if k[3] == "normal")
    return tang, norm


def energy_functional(sol: Solution, t: float, max_order: int = 4) -> EnergyReport:
    """Truncated higher-order energy at time t with M0 = E(0) and the
    2*M0*(1+slack) bound flag; time derivatives by one-sided differences on
    the stored grid."""
    if not 2 <= max_order <= 4:
        raise ValueError(f"truncation order must be in 2..4, got {max_order}")
    idx = int(np.argmin(np.abs(sol.times - t)))
    if abs(sol.times[idx] - t) > 1e-10:
        raise ValueError(f"t = {t} is not on the solution time grid")
    terms = _energy_terms(sol, idx, max_order)
    tang, norm = _sum_blocks(terms)
    total = tang + norm
    terms0 = _energy_terms(sol, 0, max_order)
    m0 = sum(terms0.values())
    within = total <= 2.0 * m0 * ENERGY_SLACK + 1e-14
    return EnergyReport(
        total=total,
        tangential=tang,
        normal=norm,
        terms=terms,
        max_order=max_order,
        m0=m0,
        within_bound=within,
        boundary_residual=boundary_residual(sol, t),
    )


def boundary_residual(sol: Solution, t: float) -> float:
    """max over components and wall-extrapolation points of
    |(rho_0),_k b^{kj} v^i,_j| at the vacuum boundary."""
    idx = int(np.argmin(np.abs(sol.times - t)))
    if abs(sol.times[idx] - t) > 1e-10:
        raise ValueError(f"t = {t} is not on the solution time grid")
    grid, weight = sol.grid, sol.weight
    tens = tensors_from_grad(grid, map_gradient(sol.eta_hist[idx], grid))
    drho = np.stack(
        [diff_op(weight.values, grid, axis=1), diff_op(weight.values, grid, axis=2)]
    )
    res = 0.0
    for i in range(2):
        dv = np.stack(
            [diff_op(sol.v_hist[idx][i], grid, axis=1), diff_op(sol.v_hist[idx][i], grid, axis=2)]
        )
        fld = np.einsum("kxy,kjxy,jxy->xy", drho, tens.metric, dv)
        low, high = extrapolate_to_walls(fld)
        res = max(res, float(np.abs(low).max()), float(np.abs(high).max()))
    return res
