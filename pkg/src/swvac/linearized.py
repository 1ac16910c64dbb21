"""Linearized degenerate parabolic solve by Galerkin projection.

The velocity history that defines the frozen coefficients is integrated with
the same trapezoidal rule as the kinematics module, the stiffness/forcing
integrals use the same bilinear-element quadrature as the operator assembly,
and the mass matrix is the identity because the basis is M-orthonormal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigenbasis import SpectralBasis, interp_at_quad
from .grid import Grid, WeightField
from .kinematics import map_gradient, metric_min_eigenvalue, tensors_from_grad

Array = np.ndarray

_trapz = getattr(np, "trapezoid", None) or np.trapz

SCHEMES = ("implicit-euler", "crank-nicolson")

J_LOWER = 0.9
J_UPPER = 1.1
ELLIPTIC_FLOOR = 0.2


class HistoryError(ValueError):
    pass


@dataclass(frozen=True)
class FrozenCoefficients:
    """Time-sampled coefficient fields rho*Jbar^-2*bbar and rho^2*Jbar^-2*abar.

    coeff_b[k, j] multiplies v,_j against testfn,_k; coeff_a[k, i] is the
    cofactor-layout forcing density. elliptic_ok / j_ok flag per-sample
    violations of the lower metric bound and the Jacobian window; the flags
    are consumed by the nonlinear solver's T-halving, never raised here.
    """

    grid: Grid
    weight: WeightField
    times: Array  # (nt,)
    coeff_b: Array  # (nt, 2, 2, n1, n2)
    coeff_a: Array  # (nt, 2, 2, n1, n2)
    elliptic_ok: Array  # (nt,) bool
    j_ok: Array  # (nt,) bool

    @property
    def all_ok(self) -> bool:
        return bool(self.elliptic_ok.all() and self.j_ok.all())


@dataclass
class GalerkinState:
    lam: Array  # (2, n_modes)
    t: float
    history: list[tuple[float, Array]] = field(default_factory=list)

    def record(self) -> None:
        self.history.append((self.t, self.lam.copy()))


def freeze_coefficients(
    v_history: Array, times: Array, grid: Grid, weight: WeightField
) -> FrozenCoefficients:
    """Build frozen coefficients from a sampled velocity history.

    v_history has shape (nt, 2, n1, n2) with v_history[0] at t = 0; the flow
    map is reconstructed by trapezoidal integration node by node.
    """
    v_history = np.asarray(v_history, dtype=float)
    times = np.asarray(times, dtype=float)
    nt = times.shape[0]
    if v_history.shape[0] != nt:
        raise ValueError("velocity history and time grid lengths differ")
    if abs(times[0]) > 1e-14:
        raise ValueError("history must start at t = 0")

    xx1, xx2 = grid.mesh()
    eta = np.stack([xx1, xx2])
    coeff_b = np.empty((nt, 2, 2) + grid.shape)
    coeff_a = np.empty((nt, 2, 2) + grid.shape)
    elliptic_ok = np.empty(nt, dtype=bool)
    j_ok = np.empty(nt, dtype=bool)

    rho = weight.values
    rho2 = rho * rho
    for k in range(nt):
        if k > 0:
            dt = times[k] - times[k - 1]
            eta = eta + 0.5 * dt * (v_history[k - 1] + v_history[k])
        tens = tensors_from_grad(grid, map_gradient(eta, grid))
        jinv2 = 1.0 / (tens.jac * tens.jac)
        coeff_b[k] = rho * jinv2 * tens.metric
        coeff_a[k] = rho2 * jinv2 * tens.cof
        elliptic_ok[k] = bool(metric_min_eigenvalue(tens.metric).min() >= ELLIPTIC_FLOOR)
        j_ok[k] = bool(tens.jac.min() >= J_LOWER and tens.jac.max() <= J_UPPER)

    return FrozenCoefficients(
        grid=grid,
        weight=weight,
        times=times,
        coeff_b=coeff_b,
        coeff_a=coeff_a,
        elliptic_ok=elliptic_ok,
        j_ok=j_ok,
    )


class GalerkinAssembler:
    """Precomputes modal derivative tables so per-time assemblies are two
    small dense contractions instead of a sparse matrix rebuild."""

    def __init__(self, basis: SpectralBasis):
        self.basis = basis
        quad = basis.op.quad
        self.quad = quad
        modes_elem = basis.modes[quad.conn]  # (n_elem, 4, n_modes)
        # mode derivative d_k at quad point q: (4 quad, 2 dir, n_elem, n_modes)
        self.mode_dx = np.einsum("qak,eam->qkem", quad.shape_dx, modes_elem)

    def _coeff_q(self, nodal: Array) -> Array:
        return interp_at_quad(self.quad, nodal)

    def stiffness(self, coeff_b: Array) -> Array:
        """K[m1, m2] = int coeff_b[k, j] (w_m1),_j (w_m2),_k."""
        n_modes = self.basis.n_modes
        k_mat = np.zeros((n_modes, n_modes))
        for k in range(2):
            for j in range(2):
                cq = self._coeff_q(coeff_b[k, j])  # (4, n_elem)
                for q in range(4):
                    k_mat += self.mode_dx[q, j].T @ (
                        cq[q][:, None] * self.mode_dx[q, k]
                    )
        return self.quad.weight * k_mat

    def forcing(self, coeff_a: Array) -> Array:
        """F[i, m] = int coeff_a[k, i] (w_m),_k."""
        n_modes = self.basis.n_modes
        f = np.zeros((2, n_modes))
        for i in range(2):
            for k in range(2):
                cq = self._coeff_q(coeff_a[k, i])
                for q in range(4):
                    f[i] += cq[q] @ self.mode_dx[q, k]
        return self.quad.weight * f


def _interp_fields(frozen: FrozenCoefficients, t: float) -> tuple[Array, Array]:
    times = frozen.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"time {t} outside the frozen sample range")
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 2) if len(times) > 1 else 0
    if len(times) == 1 or abs(times[k] - t) < 1e-14:
        return frozen.coeff_b[k], frozen.coeff_a[k]
    if abs(times[k + 1] - t) < 1e-14:
        return frozen.coeff_b[k + 1], frozen.coeff_a[k + 1]
    th = (t - times[k]) / (times[k + 1] - times[k])
    cb = (1.0 - th) * frozen.coeff_b[k] + th * frozen.coeff_b[k + 1]
    ca = (1.0 - th) * frozen.coeff_a[k] + th * frozen.coeff_a[k + 1]
    return cb, ca


def assemble_galerkin_system(
    frozen: FrozenCoefficients,
    basis: SpectralBasis,
    t: float,
    assembler: GalerkinAssembler | None = None,
) -> tuple[Array, Array]:
    """Modal stiffness K(t) and forcing F(t); frozen samples are linearly
    interpolated between time nodes."""
    asm = assembler or GalerkinAssembler(basis)
    cb, ca = _interp_fields(frozen, t)
    return asm.stiffness(cb), asm.forcing(ca)


def project_initial_velocity(u0: Array, basis: SpectralBasis) -> Array:
    """L2_rho projection: lam(0) = W^T M u0 per component."""
    m = basis.op.m_mat
    lam = np.empty((2, basis.n_modes))
    for i in range(2):
        lam[i] = basis.modes.T @ (m @ u0[i].reshape(-1))
    return lam


def step_linearized(
    state: GalerkinState,
    frozen: FrozenCoefficients,
    basis: SpectralBasis,
    dt: float,
    scheme: str = "crank-nicolson",
    assembler: GalerkinAssembler | None = None,
    pressure: bool = True,
) -> GalerkinState:
    """One theta step of lam_t + K(t) lam = F(t)."""
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    asm = assembler or GalerkinAssembler(basis)
    t_new = state.t + dt
    k_new, f_new = assemble_galerkin_system(frozen, basis, t_new, asm)
    if not pressure:
        f_new = np.zeros_like(f_new)
    n = basis.n_modes
    eye = np.eye(n)
    if scheme == "implicit-euler":
        lhs = eye + dt * k_new
        rhs = state.lam.T + dt * f_new.T
    else:
        k_old, f_old = assemble_galerkin_system(frozen, basis, state.t, asm)
        if not pressure:
            f_old = np.zeros_like(f_old)
        lhs = eye + 0.5 * dt * k_new
        rhs = (eye - 0.5 * dt * k_old) @ state.lam.T + 0.5 * dt * (f_old + f_new).T
    lam_new = np.linalg.solve(lhs, rhs).T
    new = GalerkinState(lam=lam_new, t=t_new, history=state.history)
    new.record()
    return new


def run_linearized(
    u0: Array,
    frozen: FrozenCoefficients,
    basis: SpectralBasis,
    scheme: str = "crank-nicolson",
    pressure: bool = True,
) -> Array:
    """Step over the frozen time grid; returns lam_hist (nt, 2, n_modes)."""
    asm = GalerkinAssembler(basis)
    state = GalerkinState(lam=project_initial_velocity(u0, basis), t=float(frozen.times[0]))
    state.record()
    lam_hist = np.empty((len(frozen.times), 2, basis.n_modes))
    lam_hist[0] = state.lam
    for k in range(1, len(frozen.times)):
        dt = float(frozen.times[k] - frozen.times[k - 1])
        state = step_linearized(state, frozen, basis, dt, scheme, asm, pressure)
        lam_hist[k] = state.lam
    return lam_hist


def _time_derivative_modal(history: list[tuple[float, Array]], t: float) -> Array:
    """Backward difference of lam at t: 2nd order with >= 3 entries, else 1st."""
    idx = None
    for k, (tk, _) in enumerate(history):
        if abs(tk - t) < 1e-12:
            idx = k
    if idx is None or idx < 1:
        raise HistoryError(f"need at least two history entries at or before t = {t}")
    t0, lam0 = history[idx]
    t1, lam1 = history[idx - 1]
    if idx >= 2:
        t2, lam2 = history[idx - 2]
        dt = t0 - t1
        if abs((t1 - t2) - dt) < 1e-12 * max(1.0, abs(dt)):
            return (3.0 * lam0 - 4.0 * lam1 + lam2) / (2.0 * dt)
    return (lam0 - lam1) / (t0 - t1)


def weak_residual(
    state: GalerkinState,
    frozen: FrozenCoefficients,
    basis: SpectralBasis,
    m: int,
    t: float,
    assembler: GalerkinAssembler | None = None,
    pressure: bool = True,
) -> float:
    """|<rho dX/dt, w_m> + <rho Jbar^-2 bbar DX, Dw_m> - <rho^2 Jbar^-2 abar, Dw_m>|
    in the modal frame, maxed over the two velocity components."""
    if not 0 <= m < basis.n_modes:
        raise ValueError(f"test mode index {m} outside 0..{basis.n_modes - 1}")
    dlam = _time_derivative_modal(state.history, t)
    k_mat, f = assemble_galerkin_system(frozen, basis, t, assembler)
    if not pressure:
        f = np.zeros_like(f)
    lam = None
    for tk, lamk in state.history:
        if abs(tk - t) < 1e-12:
            lam = lamk
    if lam is None:
        raise HistoryError(f"t = {t} not found in the state history")
    res = dlam[:, m] + (lam @ k_mat.T)[:, m] - f[:, m]
    return float(np.abs(res).max())


@dataclass(frozen=True)
class UniformEstimateReport:
    sup_energy: float  # sup_t ||sqrt(rho) X||^2
    dissipation: float  # int_0^T ||sqrt(rho) D X||^2 dt
    u0_energy: float  # ||sqrt(rho) u0||^2
    t_final: float


def uniform_estimate_report(
    lam_hist: Array, times: Array, basis: SpectralBasis
) -> UniformEstimateReport:
    """Energy quantities of a completed run, exact in the FEM quadrature:
    ||sqrt(rho) X||^2 = |lam|^2 and ||sqrt(rho) D X||^2 = lam^T diag(sigma-1) lam."""
    energy = np.einsum("tim,tim->t", lam_hist, lam_hist)
    sig = basis.sigma - 1.0
    diss_t = np.einsum("tim,m,tim->t", lam_hist, sig, lam_hist)
    dissipation = float(_trapz(diss_t, times))
    return UniformEstimateReport(
        sup_energy=float(energy.max()),
        dissipation=dissipation,
        u0_energy=float(energy[0]),
        t_final=float(times[-1]),
    )


def fit_affine_bound(reports: list[UniformEstimateReport]) -> tuple[float, float, bool]:
    """Least-squares fit of sup+dissipation <= a*||sqrt(rho)u0||^2 + b*T over
    several runs; returns (a, b, bound_holds_with_5_percent_slack)."""
    lhs = np.array([r.sup_energy + r.dissipation for r in reports])
    design = np.array([[r.u0_energy, r.t_final] for r in reports])
    coef, *_ = np.linalg.lstsq(design, lhs, rcond=None)
    a, b = float(coef[0]), float(coef[1])
    pred = design @ coef
    holds = bool(np.all(lhs <= 1.05 * np.maximum(pred, 1e-300) + 1e-12))
    return a, b, holds
