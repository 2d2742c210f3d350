"""Pseudo-spectral time integration of the 2D vorticity equations.

The advection term is advanced with classical RK4 and the diffusion term
exactly with an integrating factor exp(-nu |k|^2 dt), so the viscous and
inviscid branches differ only by that factor. Nonlinear products are formed
pseudo-spectrally with optional 2/3-rule dealiasing. nu = 0 selects the
Euler branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vvlab.fields import (
    Grid2D,
    ScalarField2D,
    VectorField2D,
    NormReport,
    norms,
    require_mean_zero,
    velocity_spectral,
)

CFL_LIMIT = 0.5


class SolverError(RuntimeError):
    """Time stepping failed (CFL violation, NaN blow-up)."""


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    dt: float
    t_end: float
    dealias: bool = True
    record_every: int = 1

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError(f"viscosity must be >= 0, got {self.nu}")
        if self.dt <= 0:
            raise ValueError(f"time step must be > 0, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class Trajectory:
    times: list[float]
    states: list[ScalarField2D]
    config: SolverConfig
    monitors: list[NormReport] = field(default_factory=list)

    def state_at(self, t: float) -> ScalarField2D:
        """Snapshot nearest to time t (snapshots are dt-aligned)."""
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.states[i]


def _dealias_mask(grid: Grid2D, enabled: bool) -> np.ndarray:
    if not enabled:
        return np.ones((grid.n, grid.n))
    cut = grid.n // 3
    m1d = np.abs(np.fft.fftfreq(grid.n, d=1.0 / grid.n)) <= cut
    return np.outer(m1d, m1d).astype(float)


def _check_cfl(max_speed: float, spacing: float, dt: float) -> None:
    cfl = dt * max_speed / spacing
    if cfl > CFL_LIMIT:
        raise SolverError(
            f"CFL violation: dt*max|u|/h = {cfl:.3f} > {CFL_LIMIT} (max|u| = {max_speed:.4g}); "
            "reduce dt"
        )


def _advection_rhs(w_hats: np.ndarray, grid: Grid2D, mask: np.ndarray, vel_index_pair):
    """Spectral RHS -F[u . grad w] for a stack of fields sharing one velocity.

    The advecting vorticity is w_hats[i] - w_hats[j] for (i, j) = vel_index_pair
    (i == j means the single-field self-advection case uses w_hats[i] itself).
    Returns (rhs_stack, max_speed).
    """
    k1, k2, _, _ = grid.wavenumbers()
    i, j = vel_index_pair
    adv_hat = w_hats[i] if i == j else w_hats[i] - w_hats[j]
    u1_hat, u2_hat = velocity_spectral(adv_hat * mask, grid)
    u1 = np.fft.ifft2(u1_hat).real
    u2 = np.fft.ifft2(u2_hat).real
    max_speed = float(np.sqrt(u1 * u1 + u2 * u2).max())
    out = np.empty_like(w_hats)
    for s in range(w_hats.shape[0]):
        wd = w_hats[s] * mask
        wx = np.fft.ifft2(1j * k1 * wd).real
        wy = np.fft.ifft2(1j * k2 * wd).real
        conv_hat = np.fft.fft2(u1 * wx + u2 * wy)
        conv_hat *= mask
        conv_hat[0, 0] = 0.0  # exact mean-zero preservation
        out[s] = -conv_hat
    return out, max_speed


def _ifrk4_step(w_hats: np.ndarray, grid: Grid2D, cfg: SolverConfig, mask: np.ndarray, vel_pair):
    """One integrating-factor RK4 step on a stack of spectral fields."""
    _, _, k_sq, _ = grid.wavenumbers()
    dt = cfg.dt
    e_half = np.exp(-cfg.nu * k_sq * dt / 2.0)
    e_full = e_half * e_half

    k1v, max_speed = _advection_rhs(w_hats, grid, mask, vel_pair)
    _check_cfl(max_speed, grid.spacing, dt)
    k1v = dt * k1v
    k2v, _ = _advection_rhs(e_half * (w_hats + 0.5 * k1v), grid, mask, vel_pair)
    k2v = dt * k2v
    k3v, _ = _advection_rhs(e_half * w_hats + 0.5 * k2v, grid, mask, vel_pair)
    k3v = dt * k3v
    k4v, _ = _advection_rhs(e_full * w_hats + e_half * k3v, grid, mask, vel_pair)
    k4v = dt * k4v
    out = e_full * w_hats + (e_full * k1v + 2.0 * e_half * (k2v + k3v) + k4v) / 6.0
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite spectral coefficients after step (blow-up?)")
    return out


def step(omega: ScalarField2D, cfg: SolverConfig) -> ScalarField2D:
    """Advance the vorticity by one step of the nonlinear dynamics."""
    require_mean_zero(omega, "time stepping")
    grid = omega.grid
    mask = _dealias_mask(grid, cfg.dealias)
    w_hats = omega.spectral[None, :, :].copy()
    w_hats = _ifrk4_step(w_hats, grid, cfg, mask, (0, 0))
    return ScalarField2D(grid, np.fft.ifft2(w_hats[0]).real)


def advect_frozen(omega: ScalarField2D, u: VectorField2D, cfg: SolverConfig) -> ScalarField2D:
    """One RK4 step of passive advection-diffusion by a frozen velocity field."""
    grid = omega.grid
    mask = _dealias_mask(grid, cfg.dealias)
    k1, k2, k_sq, _ = grid.wavenumbers()
    _check_cfl(u.max_speed(), grid.spacing, cfg.dt)

    def rhs(w_hat):
        wd = w_hat * mask
        wx = np.fft.ifft2(1j * k1 * wd).real
        wy = np.fft.ifft2(1j * k2 * wd).real
        conv_hat = np.fft.fft2(u.u1 * wx + u.u2 * wy) * mask
        conv_hat[0, 0] = 0.0
        return -conv_hat

    dt = cfg.dt
    e_half = np.exp(-cfg.nu * k_sq * dt / 2.0)
    e_full = e_half * e_half
    w = omega.spectral
    k1v = dt * rhs(w)
    k2v = dt * rhs(e_half * (w + 0.5 * k1v))
    k3v = dt * rhs(e_half * w + 0.5 * k2v)
    k4v = dt * rhs(e_full * w + e_half * k3v)
    out = e_full * w + (e_full * k1v + 2.0 * e_half * (k2v + k3v) + k4v) / 6.0
    return ScalarField2D(omega.grid, np.fft.ifft2(out).real)


def _steps_for(cfg: SolverConfig) -> int:
    n_steps = int(round(cfg.t_end / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * max(cfg.t_end, cfg.dt):
        raise ValueError(f"t_end={cfg.t_end} is not an integer multiple of dt={cfg.dt}")
    return n_steps


def run(omega0: ScalarField2D, cfg: SolverConfig) -> Trajectory:
    """Iterate :func:`step` to t_end, recording every ``record_every`` steps."""
    require_mean_zero(omega0, "time stepping")
    grid = omega0.grid
    mask = _dealias_mask(grid, cfg.dealias)
    n_steps = _steps_for(cfg)
    w_hats = omega0.spectral[None, :, :].copy()
    tr = Trajectory(times=[0.0], states=[omega0], config=cfg, monitors=[norms(omega0)])
    for s in range(1, n_steps + 1):
        try:
            w_hats = _ifrk4_step(w_hats, grid, cfg, mask, (0, 0))
        except SolverError as e:
            raise SolverError(f"step {s} (t={s * cfg.dt:.4g}): {e}") from e
        if s % cfg.record_every == 0 or s == n_steps:
            f = ScalarField2D(grid, np.fft.ifft2(w_hats[0]).real)
            tr.times.append(s * cfg.dt)
            tr.states.append(f)
            tr.monitors.append(norms(f))
    return tr


@dataclass
class SplitTrajectory:
    """Positive/negative vorticity parts advected by the velocity of their difference.

    The difference plus[i] - minus[i] coincides with the nonlinear solution, so
    one split run yields both the signed parts and the full field.
    """

    times: list[float]
    plus: list[ScalarField2D]
    minus: list[ScalarField2D]
    config: SolverConfig

    def state_at(self, t: float):
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.plus[i], self.minus[i]

    def full_at(self, t: float) -> ScalarField2D:
        p, m = self.state_at(t)
        return ScalarField2D(p.grid, p.values - m.values)


def run_split(
    omega0_plus: ScalarField2D, omega0_minus: ScalarField2D, cfg: SolverConfig
) -> SplitTrajectory:
    """Evolve the signed parts as passive scalars in their own induced flow."""
    grid = omega0_plus.grid
    mask = _dealias_mask(grid, cfg.dealias)
    n_steps = _steps_for(cfg)
    w_hats = np.stack([omega0_plus.spectral, omega0_minus.spectral]).copy()
    tr = SplitTrajectory(
        times=[0.0], plus=[omega0_plus], minus=[omega0_minus], config=cfg
    )
    for s in range(1, n_steps + 1):
        try:
            w_hats = _ifrk4_step(w_hats, grid, cfg, mask, (0, 1))
        except SolverError as e:
            raise SolverError(f"step {s} (t={s * cfg.dt:.4g}): {e}") from e
        if s % cfg.record_every == 0 or s == n_steps:
            tr.times.append(s * cfg.dt)
            tr.plus.append(ScalarField2D(grid, np.fft.ifft2(w_hats[0]).real))
            tr.minus.append(ScalarField2D(grid, np.fft.ifft2(w_hats[1]).real))
    return tr


@dataclass(frozen=True)
class AprioriReport:
    """Worst-case violation margins of the L1/Linf a-priori bounds."""

    l1_margin: float
    linf_margin: float
    worst_index: int
    ok: bool


def check_apriori(tr: Trajectory, tol: float = 1e-2) -> AprioriReport:
    """Check that L1/Linf never exceed their initial values (equality for nu=0).

    Margins are relative overshoots max_t ||w(t)|| / ||w0|| - 1; for the Euler
    branch undershoot is also counted since both norms are conserved.
    """
    if len(tr.monitors) < 2:
        raise ValueError("trajectory needs at least 2 snapshots")
    l1_0 = tr.monitors[0].l1
    linf_0 = tr.monitors[0].linf
    rel_l1 = np.array([m.l1 / l1_0 - 1.0 for m in tr.monitors])
    rel_linf = np.array([m.linf / linf_0 - 1.0 for m in tr.monitors])
    if tr.config.nu == 0:
        viol = np.maximum(np.abs(rel_l1), np.abs(rel_linf))
    else:
        viol = np.maximum(rel_l1, rel_linf)
    worst = int(np.argmax(viol))
    l1_margin = float(rel_l1[worst])
    linf_margin = float(rel_linf[worst])
    return AprioriReport(
        l1_margin=float(np.max(rel_l1) if tr.config.nu > 0 else np.max(np.abs(rel_l1))),
        linf_margin=float(np.max(rel_linf) if tr.config.nu > 0 else np.max(np.abs(rel_linf))),
        worst_index=worst,
        ok=bool(np.max(viol) <= tol),
    )
