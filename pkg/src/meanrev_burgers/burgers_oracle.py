"""Independent ground truth for the periodic viscous Burgers equation

    u_s + u u_x = nu u_xx,    nu = sigma^2 / 2,

in its standard (dissipative) orientation, and the map that carries the
time-reverse equation for the mean correction onto it:

    v(x, s) = -sigma * alpha(x, T - s).

Two oracles are provided.  ``hopf_cole_solve`` is exact up to spectral
resolution of the heat-equation potential; ``reference_fd_solve`` is a
second-order finite-difference solver from a different discretization family
so that agreement between them, and with the Galerkin solver, is evidence
rather than tautology.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .spectral_core import (
    CoeffTrajectory,
    ConfigError,
    GridFunction,
    evaluate,
)

MIN_FD_RESOLUTION = 64
# smallest admissible ratio min(phi) / max(phi) before the potential loses all digits
PHI_DYNAMIC_RANGE = 1e-280


class ResolutionError(RuntimeError):
    """The oracle cannot represent the requested solution accurately."""


@dataclass(frozen=True)
class ViscousParams:
    nu: float
    T: float = 0.0

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ConfigError(f"nu: must be finite and > 0, got {self.nu}")
        if self.T < 0:
            raise ConfigError(f"T: must be >= 0, got {self.T}")

    @classmethod
    def from_sigma(cls, sigma: float, T: float = 0.0) -> "ViscousParams":
        return cls(nu=0.5 * sigma**2, T=T)


@dataclass(frozen=True)
class OracleSolution:
    grid: GridFunction
    method: str
    resolution: int
    est_error: float
    dt: float | None = None

    def __post_init__(self):
        if not self.est_error >= 0:
            raise ValueError("est_error must be >= 0")

    def sidecar(self) -> dict:
        return {"method": self.method, "resolution": self.resolution,
                "est_error": self.est_error}

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar(), sort_keys=True)


@dataclass(frozen=True)
class StandardTrajectory:
    """Coefficients of ``v(·, s_j)`` solving the standard-orientation equation."""

    times: np.ndarray
    coeffs: np.ndarray
    nu: float

    @property
    def final(self) -> np.ndarray:
        return self.coeffs[-1]

    def at(self, x, j: int = -1) -> np.ndarray:
        return evaluate(self.coeffs[j], x)


def time_reversal_map(trajectory: CoeffTrajectory, T: float | None = None) -> StandardTrajectory:
    """Map α(x, t), ``t ∈ [0, T]``, to ``v(x, s) = -σ α(x, T - s)``.

    ``T`` defaults to the trajectory horizon.  Only stored steps are used; ``T``
    must land on one of them.
    """
    cfg = trajectory.config
    times, coeffs = trajectory.paper_time()
    horizon = float(times[-1]) if times.size else 0.0
    T = horizon if T is None else float(T)
    tol = 4 * np.spacing(max(horizon, 1.0)) * max(trajectory.n, 1)
    if T > horizon + tol or T < 0:
        raise ConfigError(f"T: trajectory covers [0, {horizon}], cannot map horizon {T}")
    upto = np.flatnonzero(times <= T + tol)
    if abs(times[upto[-1]] - T) > tol:
        raise ConfigError(f"T: {T} does not fall on a stored step (delta = {cfg.delta})")
    rows = coeffs[upto][::-1]
    s = T - times[upto][::-1]
    s[0] = 0.0
    return StandardTrajectory(s, -cfg.sigma * rows, cfg.nu)


def _fourier(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """FFT coefficients (normalized) and integer wavenumbers on the [-π, π) grid."""
    M = values.size
    k = np.fft.fftfreq(M, d=1.0 / M)
    return np.fft.fft(values) / M, k


def _resample(values: np.ndarray, M_out: int) -> np.ndarray:
    """Trigonometric interpolation of periodic samples onto ``M_out`` nodes."""
    M = values.size
    if M_out == M:
        return values.copy()
    spec = np.fft.rfft(values)
    out = np.zeros(M_out // 2 + 1, dtype=complex)
    m = min(spec.size, out.size)
    out[:m] = spec[:m]
    if M % 2 == 0 and M_out > M:
        # split the Nyquist mode of the coarse grid symmetrically
        out[M // 2] *= 0.5
    return np.fft.irfft(out, n=M_out) * (M_out / M)


def hopf_cole_solve(initial: GridFunction, t: float, params: ViscousParams,
                    refine: int = 4) -> OracleSolution:
    """Periodic Hopf-Cole solution of ``u_s + u u_x = ν u_xx`` at time ``t``.

    ``phi(x, 0) = exp(-(1/2ν) ∫_0^x u0)`` is advanced exactly through the heat
    equation mode by mode, and ``u = -2ν phi_x / phi``.  The potential lives
    on a grid ``refine`` (>= 4) times finer than ``initial``.

    The initial data must have zero spatial mean; otherwise ``phi`` is not
    periodic.  Use :func:`galilean_hopf_cole` for data with a mean.
    """
    if t < 0:
        raise ConfigError(f"t: must be >= 0, got {t}")
    if refine < 4:
        raise ConfigError("refine: the potential needs a grid at least 4x finer")
    nu = params.nu
    u0 = initial.values
    mean = float(np.mean(u0))
    if abs(mean) > 1e-12 * max(1.0, float(np.max(np.abs(u0)))):
        raise ConfigError(
            f"initial: spatial mean {mean:.3e} is non-zero; subtract it and solve in the "
            "moving frame (galilean_hopf_cole) instead"
        )
    M = initial.M
    Mf = refine * M
    u_hat, k = _fourier(_resample(u0, Mf))

    # antiderivative of the zero-mean band, exact on each mode, anchored at x = 0
    anti_hat = np.zeros_like(u_hat)
    nz = k != 0
    anti_hat[nz] = u_hat[nz] / (1j * k[nz])
    anti = np.real(np.fft.ifft(anti_hat) * Mf)
    potential = anti - anti[Mf // 2]
    exponent = -(potential - potential.min()) / (2.0 * nu)
    phi0 = np.exp(exponent)
    if phi0.min() < PHI_DYNAMIC_RANGE:
        raise ResolutionError(
            f"phi underflows: exponent range {np.ptp(exponent):.1f} too large for nu={nu}"
        )

    phi_hat, _ = _fourier(phi0)
    phi_hat = phi_hat * np.exp(-nu * k**2 * t)
    # the fine grid starts at -π, so the plain FFT phase convention needs no correction
    phi = np.real(np.fft.ifft(phi_hat) * Mf)
    phi_x = np.real(np.fft.ifft(1j * k * phi_hat) * Mf)
    if phi.min() <= 0 or phi.min() / phi.max() < PHI_DYNAMIC_RANGE:
        raise ResolutionError("phi lost positivity; refine the potential grid")
    u = -2.0 * nu * phi_x / phi

    # tail of the potential spectrum bounds the truncation error of phi_x / phi
    kmax = np.max(np.abs(k))
    tail = np.abs(phi_hat[np.abs(k) >= 0.75 * kmax]).sum()
    est = 2.0 * nu * tail * kmax / phi.min() + 1e3 * np.finfo(float).eps * np.max(np.abs(u))
    return OracleSolution(GridFunction(u[::refine]), "hopf_cole", Mf, float(est))


def galilean_hopf_cole(initial: GridFunction, t: float, params: ViscousParams,
                       refine: int = 4) -> OracleSolution:
    """Hopf-Cole for data with mean ``ū``: ``u(x, t) = ū + w(x - ū t, t)``."""
    mean = float(np.mean(initial.values))
    w0 = GridFunction(initial.values - mean)
    sol = hopf_cole_solve(w0, t, params, refine)
    w_hat, k = _fourier(sol.grid.values)
    x = initial.nodes - mean * t
    phases = np.exp(1j * np.multiply.outer(x + np.pi, k))
    w = np.real(phases @ w_hat)
    return OracleSolution(GridFunction(mean + w), "hopf_cole", sol.resolution, sol.est_error)


def fd_stable_step(resolution: int, nu: float) -> float:
    h = 2.0 * np.pi / resolution
    return h * h / (4.0 * nu)


def _fd_run(u: np.ndarray, t: float, nu: float, dt: float | None) -> tuple[np.ndarray, float]:
    R = u.size
    h = 2.0 * np.pi / R
    bound = fd_stable_step(R, nu)
    if dt is None:
        n = max(1, math.ceil(t / bound)) if t > 0 else 0
    else:
        if dt > bound * (1 + 1e-12):
            raise ConfigError(
                f"dt: {dt} exceeds the diffusive stability bound h^2/(4 nu) = {bound}"
            )
        n = round(t / dt)
        if abs(n * dt - t) > 1e-9 * max(t, 1.0):
            raise ConfigError(f"dt: {dt} does not divide t = {t}")
    if n == 0:
        return u.copy(), 0.0
    step = t / n
    peclet = h * float(np.max(np.abs(u))) / nu
    if peclet > 2.0:
        raise ResolutionError(f"cell Peclet number {peclet:.2f} > 2; raise the resolution")
    a = 1.0 / (4.0 * h)
    b = nu / (h * h)

    def rhs(w):
        wp = np.roll(w, -1)
        wm = np.roll(w, 1)
        # conservative flux difference of u^2/2, then the diffusion stencil
        return a * (wm * wm - wp * wp) + b * (wp - 2.0 * w + wm)

    for _ in range(n):
        k1 = rhs(u)
        k2 = rhs(u + step * k1)
        u = u + 0.5 * step * (k1 + k2)
    return u, step


def reference_fd_solve(initial: GridFunction, t: float, params: ViscousParams,
                       resolution: int, dt: float | None = None,
                       estimate_error: bool = True) -> OracleSolution:
    """Central differences + Heun time stepping on ``resolution`` points.

    The initial grid is interpolated trigonometrically onto the fine grid and
    the result sampled back at the original nodes, so ``resolution`` must be a
    multiple of ``initial.M``.  With ``estimate_error`` the run is repeated at
    half resolution and the Richardson estimate ``|u_h - u_2h| / 3`` reported.
    """
    if resolution < MIN_FD_RESOLUTION:
        raise ConfigError(f"resolution: must be >= {MIN_FD_RESOLUTION}, got {resolution}")
    M = initial.M
    if resolution % M:
        raise ConfigError(f"resolution: {resolution} is not a multiple of the grid size {M}")
    if t < 0:
        raise ConfigError(f"t: must be >= 0, got {t}")
    nu = params.nu
    u, used = _fd_run(_resample(initial.values, resolution), t, nu, dt)
    out = u[:: resolution // M]
    est = 0.0
    half = resolution // 2
    if estimate_error and half >= MIN_FD_RESOLUTION and half % M == 0:
        coarse, _ = _fd_run(_resample(initial.values, half), t, nu, None)
        est = float(np.max(np.abs(out - coarse[:: half // M]))) / 3.0
    return OracleSolution(GridFunction(out), "reference_fd", resolution, est, used)
