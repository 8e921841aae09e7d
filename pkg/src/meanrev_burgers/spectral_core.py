r"""Truncated-Fourier Galerkin scheme for the time-reverse viscous Burgers
equation

.. math::

    \partial_t \alpha = -\frac{\sigma^2}{2}\,\partial_{xx}\alpha
                        - \sigma\,\alpha\,\partial_x\alpha

on the :math:`2\pi`-periodic torus :math:`[-\pi, \pi)`.

A state is the band :math:`\hat\alpha(k)`, :math:`k=-N..N`, stored as a
complex array of length ``2N+1`` with mode ``k`` at index ``k + N``.  The
quadratic term is projected back onto the band (modes outside
:math:`[-N, N]` are dropped), so no dealiasing rule is involved.

Two time orientations are provided.  ``paper_forward`` is the explicit
forward-difference recurrence

.. math::

    \hat\alpha_j(k) = \Big(1 + \frac{\delta\sigma^2 k^2}{2}\Big)\hat\alpha_{j-1}(k)
        - \frac{\delta\sigma i k}{2}\sum_{p=-N}^{N}\hat\alpha_{j-1}(p)\,\hat\alpha_{j-1}(k-p)

which amplifies mode ``k`` by ``1 + δσ²k²/2`` per step.  ``well_posed_reverse``
flips both right-hand-side signs; started from data at the horizon ``T`` it
marches the same equation backwards in time, which is the dissipative
(well-posed) orientation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

BLOWUP_THRESHOLD = 1e12
HERMITIAN_RTOL = 1e-12


class ConfigError(ValueError):
    """Invalid or inconsistent solver configuration."""


class IntegrityError(RuntimeError):
    """A state violates Hermitian symmetry beyond tolerance."""


class BlowUpError(RuntimeError):
    """Raised by :func:`evolve` when a coefficient exceeds the overflow guard."""

    def __init__(self, step: int, mode: int, value: float, fastest_mode: int,
                 growth_factor: float, trajectory: "CoeffTrajectory | None" = None):
        self.step = step
        self.mode = mode
        self.value = value
        self.fastest_mode = fastest_mode
        self.growth_factor = growth_factor
        self.trajectory = trajectory
        super().__init__(
            f"blow-up at step {step}: |coeff(k={mode})| = {value:.3e} exceeds "
            f"{BLOWUP_THRESHOLD:.0e}; fastest-growing mode k=±{fastest_mode} "
            f"(linear factor {growth_factor:.6g} per step)"
        )

    def report(self) -> dict:
        return {
            "step": self.step,
            "mode": self.mode,
            "value": self.value,
            "fastest_mode": self.fastest_mode,
            "growth_factor": self.growth_factor,
            "threshold": BLOWUP_THRESHOLD,
        }


class Direction(str, enum.Enum):
    PAPER_FORWARD = "paper_forward"
    WELL_POSED_REVERSE = "well_posed_reverse"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.PAPER_FORWARD else -1.0


def wavenumbers(N: int) -> np.ndarray:
    return np.arange(-N, N + 1, dtype=float)


def grid_nodes(M: int) -> np.ndarray:
    """Uniform nodes ``x_m = -π + 2πm/M`` for ``m = 0..M-1``."""
    return -np.pi + 2.0 * np.pi * np.arange(M) / M


def hermitian_defect(coeffs: np.ndarray) -> float:
    """``max_k |c(-k) - conj(c(k))|`` along the last axis."""
    coeffs = np.asarray(coeffs)
    if coeffs.size == 0:
        return 0.0
    return float(np.max(np.abs(coeffs[..., ::-1] - np.conj(coeffs))))


@dataclass(frozen=True)
class SpectralConfig:
    """Parameters of one Galerkin solve.

    ``delta`` is derived from ``T / n_steps`` by :meth:`from_horizon`; when
    constructed directly, ``n_steps * delta`` must reproduce ``T`` to roundoff.
    """

    N: int
    sigma: float
    delta: float
    n_steps: int
    T: float
    M: int | None = None
    direction: Direction = Direction.PAPER_FORWARD

    def __post_init__(self):
        if isinstance(self.direction, str):
            try:
                object.__setattr__(self, "direction", Direction(self.direction))
            except ValueError:
                raise ConfigError(f"direction: unknown value {self.direction!r}") from None
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N: must be a positive integer, got {self.N}")
        if self.M is None:
            object.__setattr__(self, "M", 4 * self.N)
        if self.M < 2 * self.N + 1:
            raise ConfigError(f"M: must be >= 2N+1 = {2 * self.N + 1}, got {self.M}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"sigma: must be finite and > 0, got {self.sigma}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ConfigError(f"n_steps: must be a non-negative integer, got {self.n_steps}")
        if self.T < 0 or not math.isfinite(self.T):
            raise ConfigError(f"T: must be finite and >= 0, got {self.T}")
        if self.n_steps > 0:
            if not (self.delta > 0 and math.isfinite(self.delta)):
                raise ConfigError(f"delta: must be > 0, got {self.delta}")
            if abs(self.n_steps * self.delta - self.T) > 2 * np.spacing(self.T):
                raise ConfigError(
                    f"delta: n_steps * delta = {self.n_steps * self.delta!r} "
                    f"does not reproduce T = {self.T!r}"
                )

    @classmethod
    def from_horizon(cls, N: int, sigma: float, T: float, n_steps: int,
                     M: int | None = None,
                     direction: Direction | str = Direction.PAPER_FORWARD) -> "SpectralConfig":
        delta = T / n_steps if n_steps > 0 else 0.0
        return cls(N=N, sigma=sigma, delta=delta, n_steps=n_steps, T=T, M=M,
                   direction=direction)

    @property
    def nu(self) -> float:
        return 0.5 * self.sigma**2

    def growth_factor(self, k: int | None = None) -> float:
        """Per-step linear amplification of mode ``k`` (default ``N``)."""
        k = self.N if k is None else k
        return 1.0 + self.direction.sign * 0.5 * self.delta * self.sigma**2 * k**2


@dataclass(frozen=True)
class FourierState:
    coeffs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1 or c.size < 3:
            raise ConfigError(f"coeffs: need 2N+1 entries with N >= 1, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        scale = max(1.0, float(np.max(np.abs(c)))) if np.all(np.isfinite(c)) else 1.0
        if hermitian_defect(c) > HERMITIAN_RTOL * scale:
            raise IntegrityError(
                f"coeffs are not Hermitian: defect {hermitian_defect(c):.3e}"
            )

    @property
    def N(self) -> int:
        return (self.coeffs.size - 1) // 2

    def __getitem__(self, k: int) -> complex:
        if abs(k) > self.N:
            return 0j
        return complex(self.coeffs[k + self.N])

    @classmethod
    def from_modes(cls, N: int, modes: dict[int, complex], t: float = 0.0) -> "FourierState":
        """Build a state from ``{k: value}``; negative modes are filled by conjugation."""
        c = np.zeros(2 * N + 1, dtype=complex)
        for k, v in modes.items():
            c[k + N] = v
            c[-k + N] = np.conj(v)
        if 0 in modes:
            c[N] = complex(modes[0]).real
        return cls(c, t)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


@dataclass(frozen=True)
class GridFunction:
    """Real samples of a periodic function at :func:`grid_nodes`."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ConfigError("values: need a 1-d array of samples")
        if not np.all(np.isfinite(v)):
            raise ConfigError("values: non-finite samples")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.M)

    @classmethod
    def from_function(cls, f, M: int) -> "GridFunction":
        return cls(np.broadcast_to(np.asarray(f(grid_nodes(M)), dtype=float), (M,)))


@dataclass(frozen=True)
class CoeffTrajectory:
    """Coefficient history ``coeffs[j]`` at solver time ``t_j = j·δ``.

    For ``well_posed_reverse`` the solver time runs backwards from the
    horizon: row ``j`` holds α at paper time ``T - t_j``.
    """

    coeffs: np.ndarray
    config: SpectralConfig
    max_abs: np.ndarray = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[1] != 2 * self.config.N + 1:
            raise ConfigError(f"coeffs: expected shape (steps+1, {2 * self.config.N + 1})")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.max_abs is None:
            object.__setattr__(self, "max_abs", np.max(np.abs(c), axis=1))

    @property
    def n(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.config.delta

    @property
    def states(self) -> list[FourierState]:
        return [FourierState(c, t) for c, t in zip(self.coeffs, self.times)]

    @property
    def final(self) -> FourierState:
        return FourierState(self.coeffs[-1], self.n * self.config.delta)

    def paper_time(self) -> tuple[np.ndarray, np.ndarray]:
        """``(times, coeffs)`` ordered by increasing paper time ``t``.

        A reverse trajectory covering ``[0, T]`` becomes α(·, t) on
        ``t = T - t_j``; the rows are flipped so times increase.
        """
        times = self.times
        if self.config.direction is Direction.PAPER_FORWARD:
            return times, self.coeffs
        horizon = self.n * self.config.delta
        return (horizon - times)[::-1], self.coeffs[::-1]


def init_coeffs(initial: GridFunction, config: SpectralConfig) -> FourierState:
    r"""Fourier coefficients ``(1/M) Σ_m f(x_m) e^{-ik x_m}`` for ``|k| <= N``.

    This is the rectangle rule for :math:`\frac{1}{2\pi}\int_{-\pi}^{\pi}f(x)e^{-ikx}dx`;
    exact for trigonometric polynomials of degree below ``M/2``.
    """
    N, M = config.N, initial.M
    if M < 2 * N + 1:
        raise ConfigError(f"M: grid has {M} samples, need >= 2N+1 = {2 * N + 1}")
    if config.M is not None and M != config.M:
        raise ConfigError(f"M: grid has {M} samples, config expects {config.M}")
    spectrum = np.fft.fft(initial.values) / M
    k = np.arange(-N, N + 1)
    # x_0 = -π shifts the phase of mode k by (-1)^k
    c = spectrum[k % M] * np.where(k % 2 == 0, 1.0, -1.0)
    c = 0.5 * (c + np.conj(c[::-1]))
    return FourierState(c, 0.0)


def truncated_convolution(a: FourierState, b: FourierState) -> FourierState:
    """Band-projected product ``c(k) = Σ_p a(p) b(k-p)``, ``|k|, |p|, |k-p| <= N``."""
    if a.N != b.N:
        raise ConfigError(f"N: mismatched truncation orders {a.N} and {b.N}")
    return FourierState(_band_convolve(a.coeffs, b.coeffs), a.t)


def _band_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    N = (a.size - 1) // 2
    # full product spans k = -2N..2N; keep the centre band
    return np.convolve(a, b)[N:3 * N + 1]


def _rhs(c: np.ndarray, sigma: float) -> np.ndarray:
    N = (c.size - 1) // 2
    k = wavenumbers(N)
    return 0.5 * sigma**2 * k**2 * c - 0.5j * sigma * k * _band_convolve(c, c)


def spectral_rhs(state: FourierState, config: SpectralConfig) -> FourierState:
    """Right-hand side ``(σ²/2)k²α̂(k) - (σik/2)Σ_p α̂(p)α̂(k-p)`` of the paper-orientation ODE."""
    _check_band(state, config)
    return FourierState(_rhs(state.coeffs, config.sigma), state.t)


def _step(c: np.ndarray, config: SpectralConfig) -> np.ndarray:
    return c + (config.direction.sign * config.delta) * _rhs(c, config.sigma)


def galerkin_step(state: FourierState, config: SpectralConfig) -> FourierState:
    _check_band(state, config)
    return FourierState(_step(state.coeffs, config), state.t + config.delta)


def evolve(initial: FourierState, config: SpectralConfig) -> CoeffTrajectory:
    """Iterate :func:`galerkin_step` ``n_steps`` times.

    Raises :class:`BlowUpError` as soon as any ``|α̂(k)|`` exceeds
    ``BLOWUP_THRESHOLD`` or becomes non-finite; the partial trajectory is
    attached to the exception.
    """
    _check_band(initial, config)
    N, n = config.N, config.n_steps
    out = np.empty((n + 1, 2 * N + 1), dtype=complex)
    max_abs = np.empty(n + 1)
    out[0] = initial.coeffs
    max_abs[0] = initial.max_abs()
    for j in range(1, n + 1):
        c = _step(out[j - 1], config)
        out[j] = c
        mags = np.abs(c)
        peak = float(np.max(mags))
        max_abs[j] = peak
        if not math.isfinite(peak) or peak > BLOWUP_THRESHOLD:
            worst = int(np.nanargmax(np.where(np.isfinite(mags), mags, np.inf))) - N
            partial = CoeffTrajectory(out[:j], config, max_abs[:j])
            raise BlowUpError(j, abs(worst), peak, N, config.growth_factor(N), partial)
    return CoeffTrajectory(out, config, max_abs)


def synthesize(state: FourierState, M: int, return_imag: bool = False):
    """Evaluate ``Σ_k α̂(k) e^{ik x_m}`` on ``M`` grid nodes.

    The imaginary residual is discarded after checking it against
    ``1e-12 · max|α̂|``; pass ``return_imag=True`` to also get its size.
    """
    N = state.N
    if M < 2 * N + 1:
        raise ConfigError(f"M: need >= 2N+1 = {2 * N + 1}, got {M}")
    k = np.arange(-N, N + 1)
    buf = np.zeros(M, dtype=complex)
    buf[k % M] = state.coeffs * np.where(k % 2 == 0, 1.0, -1.0)
    z = np.fft.ifft(buf) * M
    imag = float(np.max(np.abs(z.imag)))
    scale = state.max_abs()
    if scale > 0 and imag > HERMITIAN_RTOL * scale:
        raise IntegrityError(f"synthesized grid has imaginary part {imag:.3e}")
    grid = GridFunction(z.real)
    return (grid, imag) if return_imag else grid


def evaluate(coeffs: np.ndarray, x, derivative: int = 0) -> np.ndarray:
    """Evaluate the real band-limited series (or its derivative) at arbitrary ``x``.

    ``coeffs`` may be a single band or a stack ``(P, 2N+1)`` paired with ``x``
    of shape ``(P,)``.
    """
    coeffs = np.asarray(coeffs)
    x = np.asarray(x, dtype=float)
    N = (coeffs.shape[-1] - 1) // 2
    kpos = np.arange(1, N + 1)
    pos = coeffs[..., N + 1:] * (1j * kpos) ** derivative
    phase = np.exp(1j * np.multiply.outer(x, kpos))
    if coeffs.ndim == 1:
        series = phase @ pos
    else:
        series = np.einsum("pk,pk->p", phase, pos)
    const = coeffs[..., N].real if derivative == 0 else 0.0
    return const + 2.0 * series.real


def _check_band(state: FourierState, config: SpectralConfig) -> None:
    if state.N != config.N:
        raise ConfigError(f"N: state has N={state.N}, config has N={config.N}")

