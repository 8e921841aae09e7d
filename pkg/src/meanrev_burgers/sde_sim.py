"""Monte Carlo for the mean-reversion SDE

    dR = (theta + sigma * alpha(X, t)) R dt + sigma R dB,
    X  = ln R - (theta - sigma^2 / 2) t,

with alpha read in the X coordinate, where ``dX = sigma alpha dt + sigma dB``.

The module simulates ensembles (plain Euler-Maruyama on R, Euler on X then
exponentiate, or exact sampling of the drift-free dynamics), accumulates the
Girsanov log-density ``L = -∫ alpha^2/2 dt - ∫ alpha dB`` with left-point sums,
rebuilds the potential Z with ``Z_x = alpha/sigma`` and
``Z_t = -(sigma/2) alpha_x - alpha^2/2``, and measures how far ``L`` is from
the endpoint form ``-(Z(X_T, T) - Z(X_0, 0))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral_core import CoeffTrajectory, ConfigError, grid_nodes

SCHEMES = ("euler", "log_euler", "log_exact")


class ContractError(ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class SignViolation(RuntimeError):
    """A path reached R <= 0, which x_transform cannot map."""

    def __init__(self, path: int, step: int):
        self.path = path
        self.step = step
        super().__init__(
            f"R <= 0 on path {path} at step {step}: sign preservation fails for this "
            "discretization (a time-stepping artifact, not a property of the SDE)"
        )


@dataclass(frozen=True)
class SdeParams:
    theta: float
    sigma: float
    r0: float = 1.0
    T: float = 1.0
    steps: int = 100
    paths: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"sigma: must be finite and > 0, got {self.sigma}")
        if self.r0 == 0 or not math.isfinite(self.r0):
            raise ConfigError(f"r0: must be finite and non-zero, got {self.r0}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"T: must be finite and > 0, got {self.T}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"steps: must be an integer >= 1, got {self.steps}")
        if int(self.paths) != self.paths or self.paths < 1:
            raise ConfigError(f"paths: must be an integer >= 1, got {self.paths}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError(f"master_seed: must fit in 64 bits, got {self.master_seed}")

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def with_steps(self, steps: int) -> "SdeParams":
        return SdeParams(self.theta, self.sigma, self.r0, self.T, steps, self.paths,
                         self.master_seed)


@dataclass(frozen=True)
class PathEnsemble:
    """Stored Brownian increments and R trajectories, one row per path."""

    increments: np.ndarray
    R: np.ndarray
    scheme: str
    dt: float
    r0: float
    excluded: np.ndarray = field(default=None)
    wrapped: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme: unknown {self.scheme!r}")
        if self.R.shape != (self.increments.shape[0], self.increments.shape[1] + 1):
            raise ContractError("R must have one more column than increments")
        if self.excluded is None:
            object.__setattr__(self, "excluded", ~np.all(np.isfinite(self.R), axis=1))

    @property
    def paths(self) -> int:
        return self.R.shape[0]

    @property
    def steps(self) -> int:
        return self.increments.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt


class AlphaField:
    """Mean correction α(x, t) as a band of Fourier coefficients per stored time.

    Between stored times the coefficients (hence the values) are interpolated
    linearly; outside the stored range they are held constant.  Evaluation is
    2π-periodic in ``x``.
    """

    def __init__(self, times, coeffs, kind: str = "custom"):
        times = np.asarray(times, dtype=float)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != 2 or coeffs.shape[0] != times.size or coeffs.shape[1] % 2 != 1:
            raise ConfigError("coeffs: expected shape (len(times), 2N+1)")
        if times.size < 1 or np.any(np.diff(times) <= 0):
            raise ConfigError("times: must be strictly increasing")
        self.times = times
        self.coeffs = coeffs
        self.kind = kind
        self.N = (coeffs.shape[1] - 1) // 2

    @classmethod
    def zero(cls, T: float = 1.0) -> "AlphaField":
        return cls([0.0, T], np.zeros((2, 1)), "zero")

    @classmethod
    def constant(cls, a: float, T: float = 1.0) -> "AlphaField":
        return cls([0.0, T], np.full((2, 1), float(a)), "constant")

    @classmethod
    def from_trajectory(cls, trajectory: CoeffTrajectory) -> "AlphaField":
        times, coeffs = trajectory.paper_time()
        return cls(times, coeffs, "solver")

    @classmethod
    def from_function(cls, f: Callable, N: int, times, M: int | None = None) -> "AlphaField":
        """Project ``f(x, t)`` onto modes ``|k| <= N`` at each of ``times``."""
        M = 4 * N if M is None else M
        x = grid_nodes(M)
        k = np.arange(-N, N + 1)
        sign = np.where(k % 2 == 0, 1.0, -1.0)
        rows = []
        for t in times:
            spec = np.fft.fft(np.broadcast_to(f(x, t), (M,))) / M
            c = spec[k % M] * sign
            rows.append(0.5 * (c + np.conj(c[::-1])))
        return cls(times, np.array(rows), "custom")

    @property
    def depends_on_x(self) -> bool:
        return self.N > 0 and bool(np.any(self.coeffs[:, self.N + 1:] != 0))

    @property
    def mean(self) -> np.ndarray:
        return self.coeffs[:, self.N].real

    def band_at(self, t: float) -> np.ndarray:
        times = self.times
        if t <= times[0]:
            return self.coeffs[0]
        if t >= times[-1]:
            return self.coeffs[-1]
        j = int(np.searchsorted(times, t, side="right")) - 1
        w = (t - times[j]) / (times[j + 1] - times[j])
        if w == 0.0:
            return self.coeffs[j]
        return (1.0 - w) * self.coeffs[j] + w * self.coeffs[j + 1]

    def __call__(self, x, t: float) -> np.ndarray:
        return _horner(self.band_at(t), np.asarray(x, dtype=float), 0)

    def dx(self, x, t: float) -> np.ndarray:
        return _horner(self.band_at(t), np.asarray(x, dtype=float), 1)


def _horner(band: np.ndarray, x: np.ndarray, derivative: int) -> np.ndarray:
    """Real value of ``Σ_k c_k (ik)^d e^{ikx}`` for a Hermitian band."""
    N = (band.size - 1) // 2
    const = band[N].real if derivative == 0 else 0.0
    if N == 0:
        return np.full(x.shape, const)
    z = np.exp(1j * x)
    acc = np.zeros(x.shape, dtype=complex)
    for k in range(N, 0, -1):
        acc = (acc + band[N + k] * (1j * k) ** derivative) * z
    return const + 2.0 * acc.real


def path_seed(master_seed: int, path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(path),))


def brownian_increments(params: SdeParams, workers: int = 1) -> np.ndarray:
    """``ΔB ~ N(0, dt)`` with one independent generator per path.

    Each path's stream depends only on ``(master_seed, path)``, so the array
    is bit-identical for any ``workers``.
    """
    out = np.empty((params.paths, params.steps))
    scale = math.sqrt(params.dt)

    def fill(lo, hi):
        for i in range(lo, hi):
            rng = np.random.default_rng(path_seed(params.master_seed, i))
            out[i] = rng.standard_normal(params.steps) * scale

    _chunked(fill, params.paths, workers)
    return out


def coarsen(increments: np.ndarray) -> np.ndarray:
    """Sum consecutive pairs: increments of the same Brownian path at twice the step."""
    if increments.shape[1] % 2:
        raise ContractError("coarsen: need an even number of steps")
    return increments[:, 0::2] + increments[:, 1::2]


def _chunked(fn, n: int, workers: int) -> None:
    if workers <= 1 or n < 2:
        fn(0, n)
        return
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda ab: fn(*ab), zip(bounds[:-1], bounds[1:])))


def _prepare(params: SdeParams, increments):
    if increments is None:
        increments = brownian_increments(params)
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (params.paths, params.steps):
        raise ContractError(
            f"increments: expected shape {(params.paths, params.steps)}, got {increments.shape}"
        )
    return increments


def simulate_em(params: SdeParams, alpha: AlphaField, increments=None,
                workers: int = 1) -> PathEnsemble:
    """Plain Euler-Maruyama on R.

    α is evaluated at ``X_j = ln R_j - (θ - σ²/2) t_j``; a path whose R leaves
    the sign of ``r0`` (or turns non-finite) is frozen at NaN and excluded.
    """
    dB = _prepare(params, increments)
    th, sg, dt = params.theta, params.sigma, params.dt
    R = np.empty((params.paths, params.steps + 1))
    R[:, 0] = params.r0
    drift_shift = th - 0.5 * sg * sg
    need_x = alpha.depends_on_x
    sgn = math.copysign(1.0, params.r0)

    def run(lo, hi):
        r = R[lo:hi, 0].copy()
        for j in range(params.steps):
            t = j * dt
            if need_x:
                with np.errstate(invalid="ignore", divide="ignore"):
                    x = np.log(sgn * r) - drift_shift * t
                a = alpha(np.where(np.isfinite(x), x, 0.0), t)
                a = np.where(np.isfinite(x), a, np.nan)
            else:
                a = alpha(np.zeros(1), t)[0]
            r = r + (th + sg * a) * r * dt + sg * r * dB[lo:hi, j]
            R[lo:hi, j + 1] = r

    _chunked(run, params.paths, workers)
    bad = ~np.all(np.isfinite(R) & (R * params.r0 > 0), axis=1) if need_x else \
        ~np.all(np.isfinite(R), axis=1)
    return PathEnsemble(dB, R, "euler", dt, params.r0, bad, _count_wraps(R, params))


def simulate_log_euler(params: SdeParams, alpha: AlphaField, increments=None,
                       workers: int = 1) -> PathEnsemble:
    """Euler on ``X_{j+1} = X_j + σα(X_j, t_j)δ + σΔB_j``, then ``R = ±exp(X + (θ-σ²/2)t)``."""
    dB = _prepare(params, increments)
    sg, dt = params.sigma, params.dt
    steps = params.steps
    X = np.empty((params.paths, steps + 1))
    X[:, 0] = math.log(abs(params.r0))

    def run(lo, hi):
        x = X[lo:hi, 0].copy()
        for j in range(steps):
            x = x + sg * alpha(x, j * dt) * dt + sg * dB[lo:hi, j]
            X[lo:hi, j + 1] = x

    _chunked(run, params.paths, workers)
    R = _x_to_r(X, params)
    return PathEnsemble(dB, R, "log_euler", dt, params.r0, None, _count_wraps(R, params))


def simulate_exact_q(params: SdeParams, increments=None) -> PathEnsemble:
    """Exact samples of ``dR = σR dB̃``: ``R_t = r0 exp(σB̃_t - σ²t/2)``.

    The stored increments are those of B̃.
    """
    dB = _prepare(params, increments)
    sg = params.sigma
    B = np.zeros((params.paths, params.steps + 1))
    np.cumsum(dB, axis=1, out=B[:, 1:])
    R = params.r0 * np.exp(sg * B - 0.5 * sg * sg * params.times)
    R[:, 0] = params.r0
    return PathEnsemble(dB, R, "log_exact", params.dt, params.r0)


def simulate(params: SdeParams, alpha: AlphaField | None = None, scheme: str = "log_euler",
             increments=None, workers: int = 1) -> PathEnsemble:
    if scheme == "log_exact":
        return simulate_exact_q(params, increments)
    alpha = AlphaField.zero(params.T) if alpha is None else alpha
    if scheme == "euler":
        return simulate_em(params, alpha, increments, workers)
    if scheme == "log_euler":
        return simulate_log_euler(params, alpha, increments, workers)
    raise ConfigError(f"scheme: unknown {scheme!r}")


def _x_to_r(X: np.ndarray, params: SdeParams) -> np.ndarray:
    t = np.arange(X.shape[1]) * params.dt
    R = math.copysign(1.0, params.r0) * np.exp(X + (params.theta - 0.5 * params.sigma**2) * t)
    R[:, 0] = params.r0
    return R


def _count_wraps(R: np.ndarray, params: SdeParams) -> int:
    """Number of (path, time) samples whose X lies outside one period [-π, π)."""
    with np.errstate(invalid="ignore", divide="ignore"):
        X = np.log(np.abs(R)) - (params.theta - 0.5 * params.sigma**2) * \
            (np.arange(R.shape[1]) * params.dt)
    return int(np.count_nonzero((X < -np.pi) | (X >= np.pi)))


def x_transform(ensemble: PathEnsemble, params: SdeParams) -> np.ndarray:
    """``X_t = ln R_t - (θ - σ²/2) t`` for every path.

    Raises :class:`SignViolation` naming the first path and step with
    ``R <= 0`` among non-excluded paths.
    """
    R = ensemble.R
    live = ~ensemble.excluded
    bad = live[:, None] & ~(R > 0)
    if np.any(bad):
        p, j = np.argwhere(bad)[0]
        raise SignViolation(int(p), int(j))
    with np.errstate(invalid="ignore", divide="ignore"):
        X = np.log(R) - (params.theta - 0.5 * params.sigma**2) * ensemble.times
    return X


def x_to_r(X: np.ndarray, params: SdeParams) -> np.ndarray:
    """Inverse of :func:`x_transform` for positive ``r0``."""
    t = np.arange(X.shape[-1]) * params.dt
    return np.exp(X + (params.theta - 0.5 * params.sigma**2) * t)


def sign_fraction(ensemble: PathEnsemble) -> float:
    """Fraction of (path, time) samples with ``R · r0 > 0``; NaN samples count as failures."""
    with np.errstate(invalid="ignore"):
        ok = ensemble.R * ensemble.r0 > 0
    return float(np.count_nonzero(ok)) / ok.size


def girsanov_log_density(ensemble: PathEnsemble, params: SdeParams,
                         alpha: AlphaField) -> np.ndarray:
    """``L_j = -Σ_{i<j} [α(X_i,t_i)² δ/2 + α(X_i,t_i) ΔB_i]`` on every path.

    Returns an array shaped like ``ensemble.R``; ``L_0 = 0``.
    """
    dB = ensemble.increments
    if dB is None or dB.shape[1] != ensemble.steps:
        raise ContractError("girsanov_log_density needs the stored increments")
    dt = ensemble.dt
    if alpha.depends_on_x:
        X = x_transform(ensemble, params)
    else:
        X = np.zeros_like(ensemble.R)
    terms = np.empty_like(dB)
    for j in range(ensemble.steps):
        a = alpha(X[:, j], j * dt)
        terms[:, j] = 0.5 * a * a * dt + a * dB[:, j]
    L = np.zeros_like(ensemble.R)
    np.cumsum(-terms, axis=1, out=L[:, 1:])
    return L


class ZField:
    """Potential with ``Z_x = α/σ`` and ``Z_t = -(σ/2)α_x - α²/2`` along ``x0``.

    ``Z(x, t) = (1/σ)∫_{x0}^{x} α(ξ, t) dξ + G(t)``, where the spatial integral
    is exact on Fourier modes (including a linear term from a non-zero mean)
    and ``G`` is the composite trapezoid of ``-(σ/2)α_x(x0, s) - α(x0, s)²/2``
    over the stored times.
    """

    def __init__(self, alpha: AlphaField, sigma: float, x0: float = 0.0, M: int = 64):
        self.alpha = alpha
        self.sigma = float(sigma)
        self.x0 = float(x0)
        self.times = alpha.times
        g = np.array([
            -0.5 * sigma * _horner(c, np.array([x0]), 1)[0] - 0.5 * _horner(c, np.array([x0]), 0)[0] ** 2
            for c in alpha.coeffs
        ])
        G = np.zeros(self.times.size)
        if self.times.size > 1:
            G[1:] = np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(self.times))
        self.G = G
        self.has_linear_term = bool(np.any(alpha.mean != 0))
        x = grid_nodes(M)
        self.grid_x = x
        self.values = np.array([self._spatial(c, x) for c in alpha.coeffs]) + G[:, None]

    def _spatial(self, band: np.ndarray, x: np.ndarray) -> np.ndarray:
        N = (band.size - 1) // 2
        out = band[N].real * (x - self.x0)
        if N:
            k = np.arange(1, N + 1)
            anti = band[N + 1:] / (1j * k)
            # (e^{ikx} - e^{ikx0})/(ik) summed with its conjugate partner
            ex = _horner(np.concatenate([np.conj(anti[::-1]), [0], anti]), x, 0)
            e0 = _horner(np.concatenate([np.conj(anti[::-1]), [0], anti]), np.array([self.x0]), 0)[0]
            out = out + ex - e0
        return out / self.sigma

    @property
    def metadata(self) -> dict:
        return {"x0": self.x0, "linear_term": self.has_linear_term, "kind": self.alpha.kind}

    def __call__(self, x, t: float) -> np.ndarray:
        """Z at arbitrary ``x`` (unwrapped) and time ``t`` (linear in time between stored steps)."""
        x = np.asarray(x, dtype=float)
        times = self.times
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(max(j, 0), times.size - 1)
        if t == times[j] or j == times.size - 1 or t < times[0]:
            return self._spatial(self.alpha.coeffs[j], x) + self.G[j]
        w = (t - times[j]) / (times[j + 1] - times[j])
        lo = self._spatial(self.alpha.coeffs[j], x) + self.G[j]
        hi = self._spatial(self.alpha.coeffs[j + 1], x) + self.G[j + 1]
        return (1.0 - w) * lo + w * hi


def reconstruct_Z(alpha: AlphaField, sigma: float, x0: float = 0.0, M: int = 64) -> ZField:
    return ZField(alpha, sigma, x0, M)


def path_independence_residual(ensemble: PathEnsemble, Z: ZField, params: SdeParams,
                               alpha: AlphaField, coarse: PathEnsemble | None = None) -> dict:
    """Per-path ``|L_n + Z(X_T, T) - Z(X_0, 0)|`` and its statistics.

    With a paired ``coarse`` ensemble (same Brownian paths at twice the
    step) the ratio ``mean_coarse / mean_fine`` is reported as well.
    """
    if Z.alpha is not alpha:
        raise ContractError("Z was reconstructed from a different alpha field")
    if not math.isclose(Z.sigma, params.sigma):
        raise ContractError("Z was reconstructed with a different sigma")
    out = _residual(ensemble, Z, params, alpha)
    if coarse is not None:
        c = _residual(coarse, Z, params.with_steps(coarse.steps), alpha)
        out["coarse_mean"] = c["mean"]
        out["ratio"] = c["mean"] / out["mean"] if out["mean"] > 0 else math.inf
    return out


def _residual(ensemble, Z, params, alpha) -> dict:
    X = x_transform(ensemble, params)
    L = girsanov_log_density(ensemble, params, alpha)
    T = ensemble.steps * ensemble.dt
    r = np.abs(L[:, -1] + Z(X[:, -1], T) - Z(X[:, 0], 0.0))
    live = ~ensemble.excluded & np.isfinite(r)
    rl = r[live]
    return {
        "per_path": r,
        "max": float(rl.max()) if rl.size else math.nan,
        "mean": float(rl.mean()) if rl.size else math.nan,
        "excluded": int(np.count_nonzero(~live)),
    }


def integrability_residual(alpha: AlphaField, sigma: float, M: int | None = None) -> dict:
    """Mixed-partials defect ``|∂_t(α/σ) - ∂_x(-(σ/2)α_x - α²/2)|`` on a space-time grid.

    Time derivatives are centred differences over the stored times (interior
    steps only); space derivatives and the full product α² are exact on the
    Fourier band.  Also returns the truncation-error estimate of a solver
    trajectory: ``δ/(2σ)·max|α_tt|`` for forward-Euler stepping plus the part
    of ``∂_x(α²/2)`` that the Galerkin projection discards.
    """
    times, C = alpha.times, alpha.coeffs
    if times.size < 3:
        raise ContractError("integrability_residual needs at least three stored times")
    N = alpha.N
    M = 4 * N + 2 if M is None else M
    x = grid_nodes(M)
    dt = np.diff(times)
    if not np.allclose(dt, dt[0], rtol=1e-9):
        raise ContractError("integrability_residual needs uniformly spaced times")
    h = dt[0]
    K = np.arange(-2 * N, 2 * N + 1)

    def grid(band):
        return _horner(band, x, 0)

    worst = 0.0
    tail = 0.0
    att = 0.0
    for j in range(1, times.size - 1):
        a_t = (C[j + 1] - C[j - 1]) / (2.0 * h)
        sq = np.convolve(C[j], C[j])  # full product, modes -2N..2N
        flux = -0.5 * sigma * (1j * np.arange(-N, N + 1)) * C[j]
        flux_full = np.zeros(4 * N + 1, dtype=complex)
        flux_full[N:3 * N + 1] = flux
        flux_full -= 0.5 * sq
        rhs = 1j * K * flux_full
        lhs = np.zeros(4 * N + 1, dtype=complex)
        lhs[N:3 * N + 1] = a_t / sigma
        worst = max(worst, float(np.max(np.abs(grid(lhs - rhs)))))
        out_band = np.where(np.abs(K) > N, 0.5j * K * sq, 0.0)
        tail = max(tail, float(np.max(np.abs(grid(out_band)))))
        att = max(att, float(np.max(np.abs(grid(C[j + 1] - 2.0 * C[j] + C[j - 1])))) / h**2)
    estimate = 0.5 * h * att / sigma + tail
    return {"max": worst, "estimate": estimate, "temporal": 0.5 * h * att / sigma,
            "spatial": tail}


def ensemble_summary(ensemble: PathEnsemble, params: SdeParams,
                     alpha: AlphaField | None = None, residual: dict | None = None) -> dict:
    live = ~ensemble.excluded
    RT = ensemble.R[live, -1]
    out = {
        "paths": ensemble.paths,
        "steps": ensemble.steps,
        "scheme": ensemble.scheme,
        "sign_fraction": sign_fraction(ensemble),
        "mean_RT": float(RT.mean()) if RT.size else math.nan,
        "se_RT": float(RT.std(ddof=1) / math.sqrt(RT.size)) if RT.size > 1 else math.nan,
        "density_mean": math.nan,
        "pi_residual_mean": math.nan,
        "pi_residual_max": math.nan,
        "excluded_paths": int(np.count_nonzero(~live)),
        "wrapped_samples": ensemble.wrapped,
    }
    if alpha is not None:
        L = girsanov_log_density(ensemble, params, alpha)
        out["density_mean"] = float(np.mean(np.exp(L[live, -1])))
    if residual is not None:
        out["pi_residual_mean"] = residual["mean"]
        out["pi_residual_max"] = residual["max"]
    return out
