"""Periodic grids, scalar/vector fields, spectral transforms and norms.

Conventions fixed project-wide:

* the domain is the doubly periodic square [0, L)^2 sampled on an n x n grid
  (n a power of two), midpoint quadrature for all physical-space norms;
* forward FFT is unnormalized, the inverse carries the 1/n^2 factor
  (numpy's default), so a constant field c has a single spectral entry c*n^2;
* velocity is reconstructed from mean-zero vorticity as u = grad^perp psi with
  Lap psi = omega, solved spectrally.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# relative tolerance used to decide whether a sampled field has zero mean
MEAN_ZERO_RTOL = 1e-12


class FieldError(ValueError):
    """Invalid field input (non-finite samples, wrong grid, ...)."""


class NotMeanZeroError(FieldError):
    """Operation requires a mean-zero field (torus Poisson solvability)."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    """Uniform n x n grid on the periodic square of side ``length``."""

    n: int
    length: float = TWO_PI

    def __post_init__(self):
        if self.n < 8 or not _is_power_of_two(self.n):
            raise ValueError(f"grid size must be a power of two >= 8, got n={self.n}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"domain side must be positive and finite, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    def coords(self):
        """Cell sample coordinates (x1, x2) as two n x n arrays (ij indexing)."""
        x = np.arange(self.n) * self.spacing
        return np.meshgrid(x, x, indexing="ij")

    def wavenumbers(self):
        """(k1, k2, k_sq, inv_k_sq) with inv_k_sq[0,0] = 0."""
        return _wavenumbers(self.n, self.length)


@functools.lru_cache(maxsize=32)
def _wavenumbers(n: int, length: float):
    k1d = TWO_PI / length * np.fft.fftfreq(n, d=1.0 / n)
    k1, k2 = np.meshgrid(k1d, k1d, indexing="ij")
    k_sq = k1 * k1 + k2 * k2
    inv_k_sq = np.zeros_like(k_sq)
    nz = k_sq > 0
    inv_k_sq[nz] = 1.0 / k_sq[nz]
    for a in (k1, k2, k_sq, inv_k_sq):
        a.flags.writeable = False
    return k1, k2, k_sq, inv_k_sq


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass
class ScalarField2D:
    """Real scalar samples on a :class:`Grid2D`, with a lazily cached spectrum.

    Instances are treated as immutable: ``values`` is made read-only at
    construction and all operations return new fields.
    """

    grid: Grid2D
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    _spectral: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise FieldError(f"values shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise FieldError("scalar field contains non-finite samples")
        self.values = _frozen(v)

    @property
    def mean_zero(self) -> bool:
        m = float(self.values.mean())
        scale = float(np.abs(self.values).max())
        return abs(m) <= MEAN_ZERO_RTOL * max(scale, 1.0)

    @property
    def spectral(self) -> np.ndarray:
        """Unnormalized forward FFT coefficients of the samples (cached)."""
        if self._spectral is None:
            self._spectral = np.fft.fft2(self.values)
            self._spectral.flags.writeable = False
        return self._spectral

    def with_values(self, values: np.ndarray, metadata: dict | None = None) -> "ScalarField2D":
        return ScalarField2D(self.grid, values, metadata if metadata is not None else dict(self.metadata))


@dataclass
class VectorField2D:
    """Two-component real field (u1, u2) on a :class:`Grid2D`."""

    grid: Grid2D
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        for name in ("u1", "u2"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (self.grid.n, self.grid.n):
                raise FieldError(f"{name} shape {v.shape} does not match grid n={self.grid.n}")
            if not np.all(np.isfinite(v)):
                raise FieldError(f"vector component {name} contains non-finite samples")
            setattr(self, name, _frozen(v))

    def max_speed(self) -> float:
        return float(np.sqrt(self.u1 ** 2 + self.u2 ** 2).max())


@dataclass(frozen=True)
class NormReport:
    """Grid-quadrature norms of a scalar field; hm1 is NaN unless mean-zero."""

    l1: float
    l2: float
    linf: float
    hm1: float


def transform_forward(f: ScalarField2D) -> ScalarField2D:
    """Return ``f`` with its spectral coefficients populated."""
    f.spectral  # noqa: B018  (forces the cached FFT)
    return f


def transform_inverse(grid: Grid2D, spectral: np.ndarray) -> ScalarField2D:
    """Real field from unnormalized FFT coefficients."""
    spectral = np.asarray(spectral, dtype=complex)
    if spectral.shape != (grid.n, grid.n):
        raise FieldError(f"spectral shape {spectral.shape} does not match grid n={grid.n}")
    if not np.all(np.isfinite(spectral)):
        raise FieldError("spectral coefficients contain non-finite entries")
    values = np.fft.ifft2(spectral).real
    out = ScalarField2D(grid, values)
    return out


def require_mean_zero(f: ScalarField2D, what: str) -> None:
    if not f.mean_zero:
        raise NotMeanZeroError(
            f"{what} requires a mean-zero field on the torus "
            f"(mean = {float(f.values.mean()):.3e}); subtract the mean or fix the data"
        )


def biot_savart(omega: ScalarField2D) -> VectorField2D:
    """Divergence-free velocity u = grad^perp psi with Lap psi = omega.

    Spectrally: psi_hat = -omega_hat / |k|^2, u1 = -i k2 psi_hat,
    u2 = i k1 psi_hat, and u_hat(0) = 0.
    """
    require_mean_zero(omega, "biot_savart")
    k1, k2, _, inv_k_sq = omega.grid.wavenumbers()
    psi_hat = -omega.spectral * inv_k_sq
    u1 = np.fft.ifft2(-1j * k2 * psi_hat).real
    u2 = np.fft.ifft2(1j * k1 * psi_hat).real
    return VectorField2D(omega.grid, u1, u2)


def velocity_spectral(omega_hat: np.ndarray, grid: Grid2D):
    """Spectral-space Biot-Savart: returns (u1_hat, u2_hat)."""
    k1, k2, _, inv_k_sq = grid.wavenumbers()
    psi_hat = -omega_hat * inv_k_sq
    return -1j * k2 * psi_hat, 1j * k1 * psi_hat


def curl(u: VectorField2D) -> ScalarField2D:
    """Scalar vorticity d1 u2 - d2 u1, computed spectrally."""
    k1, k2, _, _ = u.grid.wavenumbers()
    w_hat = 1j * k1 * np.fft.fft2(u.u2) - 1j * k2 * np.fft.fft2(u.u1)
    return ScalarField2D(u.grid, np.fft.ifft2(w_hat).real)


def divergence_linf(u: VectorField2D) -> float:
    """Max modulus of the spectral divergence k . u_hat (diagnostic)."""
    k1, k2, _, _ = u.grid.wavenumbers()
    div_hat = 1j * k1 * np.fft.fft2(u.u1) + 1j * k2 * np.fft.fft2(u.u2)
    return float(np.abs(np.fft.ifft2(div_hat)).max())


def hm1_norm(f: ScalarField2D) -> float:
    """Homogeneous H^-1 norm; requires a mean-zero field.

    Normalized so that Parseval holds against the physical-space L2 norm:
    hm1^2 = (spacing/n)^2 * sum_{k != 0} |f_hat(k)|^2 / |k|^2.
    """
    require_mean_zero(f, "hm1 norm")
    _, _, _, inv_k_sq = f.grid.wavenumbers()
    scale = (f.grid.spacing / f.grid.n) ** 2
    return math.sqrt(scale * float(np.sum(np.abs(f.spectral) ** 2 * inv_k_sq)))


def norms(f: ScalarField2D) -> NormReport:
    """L1/L2/Linf by midpoint quadrature; hm1 only when the field is mean-zero."""
    dA = f.grid.spacing ** 2
    l1 = dA * float(np.abs(f.values).sum())
    l2 = math.sqrt(dA * float((f.values ** 2).sum()))
    linf = float(np.abs(f.values).max())
    hm1 = hm1_norm(f) if f.mean_zero else math.nan
    return NormReport(l1=l1, l2=l2, linf=linf, hm1=hm1)


def l2_parseval(f: ScalarField2D) -> float:
    """L2 norm from the spectrum (Parseval cross-check)."""
    scale = (f.grid.spacing / f.grid.n) ** 2
    return math.sqrt(scale * float(np.sum(np.abs(f.spectral) ** 2)))


def torus_delta(a: np.ndarray, b: np.ndarray, length: float) -> np.ndarray:
    """Signed minimal displacement a - b on the periodic interval."""
    d = a - b
    return d - length * np.round(d / length)


def torus_distance(x: np.ndarray, y: np.ndarray, length: float) -> np.ndarray:
    """Euclidean torus distance between points of shape (..., 2)."""
    d = torus_delta(np.asarray(x, float), np.asarray(y, float), length)
    return np.sqrt(np.sum(d * d, axis=-1))


def interpolate_velocity(u: VectorField2D, points: np.ndarray) -> np.ndarray:
    """Bilinear periodic interpolation of ``u`` at points of shape (m, 2)."""
    pts = np.asarray(points, dtype=float)
    n, h = u.grid.n, u.grid.spacing
    s = np.mod(pts / h, n)
    i0 = np.floor(s).astype(int) % n
    frac = s - np.floor(s)
    i1 = (i0 + 1) % n
    fx, fy = frac[:, 0], frac[:, 1]
    out = np.empty_like(pts)
    for c, comp in enumerate((u.u1, u.u2)):
        v00 = comp[i0[:, 0], i0[:, 1]]
        v10 = comp[i1[:, 0], i0[:, 1]]
        v01 = comp[i0[:, 0], i1[:, 1]]
        v11 = comp[i1[:, 0], i1[:, 1]]
        out[:, c] = (
            v00 * (1 - fx) * (1 - fy)
            + v10 * fx * (1 - fy)
            + v01 * (1 - fx) * fy
            + v11 * fx * fy
        )
    return out


def log_lipschitz_weight(d: np.ndarray) -> np.ndarray:
    """The modulus d * (1 + log(1 + 1/d)) appearing in the velocity estimate."""
    d = np.asarray(d, dtype=float)
    return d * (1.0 + np.log1p(1.0 / d))


def log_lipschitz_ratio(u: VectorField2D, samples: int = 2000, rng_seed: int = 0) -> float:
    """Empirical log-Lipschitz modulus of the velocity field.

    Maximizes |u(x) - u(y)| / [d(x,y) (1 + log(1 + 1/d(x,y)))] over ``samples``
    random point pairs (torus distance, bilinear evaluation). Deterministic
    given the seed.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    L = u.grid.length
    x = rng.uniform(0.0, L, size=(samples, 2))
    y = rng.uniform(0.0, L, size=(samples, 2))
    d = torus_distance(x, y, L)
    keep = d > 1e-12
    if not np.any(keep):
        return 0.0
    du = interpolate_velocity(u, x[keep]) - interpolate_velocity(u, y[keep])
    num = np.sqrt(np.sum(du * du, axis=-1))
    return float(np.max(num / log_lipschitz_weight(d[keep])))


def log_lipschitz_ratio_dense(u: VectorField2D, stride: int = 4) -> float:
    """Dense-pair version over grid points (oracle for the sampled estimate)."""
    n, h, L = u.grid.n, u.grid.spacing, u.grid.length
    idx = np.arange(0, n, stride)
    xx, yy = np.meshgrid(idx * h, idx * h, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    vel = np.stack(
        [u.u1[np.ix_(idx, idx)].ravel(), u.u2[np.ix_(idx, idx)].ravel()], axis=-1
    )
    dx = torus_delta(pts[:, None, 0], pts[None, :, 0], L)
    dy = torus_delta(pts[:, None, 1], pts[None, :, 1], L)
    d = np.sqrt(dx * dx + dy * dy)
    dv = vel[:, None, :] - vel[None, :, :]
    num = np.sqrt(np.sum(dv * dv, axis=-1))
    mask = d > 1e-12
    return float(np.max(num[mask] / log_lipschitz_weight(d[mask])))
