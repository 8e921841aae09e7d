import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanrev_burgers.spectral_core import (
    BlowUpError,
    ConfigError,
    Direction,
    FourierState,
    GridFunction,
    IntegrityError,
    SpectralConfig,
    evolve,
    galerkin_step,
    grid_nodes,
    hermitian_defect,
    init_coeffs,
    spectral_rhs,
    synthesize,
    truncated_convolution,
)
from oracles import conv_double_loop, random_hermitian, recurrence_step

# I_k(1): Fourier coefficients of exp(cos x), from a 4096-point trapezoid
# evaluated term by term (tests/oracles.py), agreeing with the modified
# Bessel function to 1e-15.
EXP_COS = [
    1.2660658777520075, 0.5651591039924855, 0.135747669767039,
    0.02216842492433236, 0.0027371202210468154, 0.00027146315595683404,
    2.2488661477030545e-05, 1.5992182312543255e-06, 9.960624046420163e-08,
]


def cfg(N=2, sigma=1.0, T=0.01, n=1, M=None, direction="paper_forward"):
    return SpectralConfig.from_horizon(N, sigma, T, n, M, direction)


def sin_state(N):
    return FourierState.from_modes(N, {1: -0.5j})


hermitian_states = st.integers(1, 8).flatmap(
    lambda N: st.lists(
        st.floats(-2, 2, allow_nan=False), min_size=2 * N + 1, max_size=2 * N + 1
    ).map(lambda v: _to_state(N, v))
)


def _to_state(N, v):
    modes = {0: v[0]}
    for k in range(1, N + 1):
        modes[k] = complex(v[k], v[N + k])
    return FourierState.from_modes(N, modes)


class TestConfig:
    def test_derived_step(self):
        c = cfg(N=4, T=1.0, n=7)
        assert c.delta == 1.0 / 7
        assert c.M == 16

    @pytest.mark.parametrize("kwargs, key", [
        (dict(N=0), "N"),
        (dict(N=4, M=8), "M"),
        (dict(sigma=0.0), "sigma"),
        (dict(direction="sideways"), "direction"),
    ])
    def test_rejects(self, kwargs, key):
        with pytest.raises(ConfigError, match=key):
            cfg(**kwargs)

    def test_inconsistent_horizon(self):
        with pytest.raises(ConfigError, match="delta"):
            SpectralConfig(N=2, sigma=1.0, delta=0.1, n_steps=3, T=0.31)

    def test_growth_factor(self):
        c = cfg(N=4, sigma=0.5, T=0.02, n=1)
        assert c.growth_factor() == 1 + 0.02 * 0.25 * 16 / 2
        assert cfg(N=4, sigma=0.5, T=0.02, n=1, direction="well_posed_reverse").growth_factor() \
            == 1 - 0.02 * 0.25 * 16 / 2


class TestInitCoeffs:
    def test_constant(self):
        s = init_coeffs(GridFunction(np.full(16, 3.0)), cfg(N=4, M=16))
        assert s[0] == 3.0
        assert np.max(np.abs(np.delete(s.coeffs, 4))) <= 1e-15

    def test_sine(self):
        s = init_coeffs(GridFunction.from_function(np.sin, 32), cfg(N=4, M=32))
        assert abs(s[1] - (-0.5j)) <= 1e-15
        assert abs(s[-1] - 0.5j) <= 1e-15
        rest = [s[k] for k in range(-4, 5) if abs(k) != 1]
        assert max(abs(v) for v in rest) <= 1e-14

    def test_exp_cos_matches_quadrature(self):
        s = init_coeffs(GridFunction.from_function(lambda x: np.exp(np.cos(x)), 64),
                        cfg(N=8, M=64))
        for k in range(-8, 9):
            assert abs(s[k] - EXP_COS[abs(k)]) <= 1e-12

    def test_exact_hermitian(self, rng):
        s = init_coeffs(GridFunction(rng.standard_normal(40)), cfg(N=9, M=40))
        assert hermitian_defect(s.coeffs) == 0.0

    def test_rejects_coarse_grid(self):
        with pytest.raises(ConfigError, match="M"):
            init_coeffs(GridFunction(np.zeros(8)), SpectralConfig.from_horizon(4, 1.0, 1.0, 1, 9))

    def test_rejects_non_finite(self):
        with pytest.raises(ConfigError):
            GridFunction(np.array([0.0, np.nan, 1.0]))


class TestConvolution:
    def test_constant_squared(self):
        a = FourierState.from_modes(3, {0: 1.5})
        c = truncated_convolution(a, a)
        assert c[0] == 2.25
        assert np.count_nonzero(c.coeffs) == 1

    def test_sine_squared(self):
        s = sin_state(2)
        c = truncated_convolution(s, s)
        assert abs(c[0] - 0.5) <= 1e-16
        assert abs(c[2] + 0.25) <= 1e-16 and abs(c[-2] + 0.25) <= 1e-16
        assert abs(c[1]) == 0 and abs(c[-1]) == 0

    def test_matches_double_loop(self, rng):
        for _ in range(20):
            a = FourierState(random_hermitian(rng, 6))
            b = FourierState(random_hermitian(rng, 6))
            got = truncated_convolution(a, b).coeffs
            assert np.max(np.abs(got - conv_double_loop(a.coeffs, b.coeffs))) <= 1e-13

    def test_mismatched_N(self):
        with pytest.raises(ConfigError, match="N"):
            truncated_convolution(sin_state(2), sin_state(3))

    @settings(max_examples=50, deadline=None)
    @given(hermitian_states, st.data())
    def test_preserves_hermitian(self, a, data):
        b = data.draw(hermitian_states.filter(lambda s: s.N == a.N))
        c = truncated_convolution(a, b)
        assert hermitian_defect(c.coeffs) <= 1e-12 * max(1.0, c.max_abs())


class TestRhsAndStep:
    def test_zero_fixed_point(self):
        z = FourierState(np.zeros(5))
        assert np.all(spectral_rhs(z, cfg()).coeffs == 0)
        assert np.all(galerkin_step(z, cfg()).coeffs == 0)

    def test_constant_is_steady(self):
        s = FourierState.from_modes(2, {0: 0.7})
        assert np.all(spectral_rhs(s, cfg()).coeffs == 0)
        for delta, sigma in [(0.5, 3.0), (1e-3, 0.1)]:
            out = galerkin_step(s, SpectralConfig(2, sigma, delta, 1, delta))
            assert out[0] == 0.7

    def test_sine_rhs_hand_values(self):
        r = spectral_rhs(sin_state(2), cfg(sigma=1.0))
        assert abs(r[1] - (-0.25j)) <= 1e-16
        assert abs(r[2] - 0.25j) <= 1e-16
        assert r[0] == 0

    def test_sine_step_hand_values(self):
        out = galerkin_step(sin_state(2), cfg(sigma=1.0, T=0.01, n=1))
        assert abs(out[1] - (-0.5025j)) <= 1e-15
        assert abs(out[2] - 0.0025j) <= 1e-15
        assert out.t == 0.01

    def test_matches_brute_force_recurrence(self, rng):
        for sign, direction in [(1.0, "paper_forward"), (-1.0, "well_posed_reverse")]:
            c = random_hermitian(rng, 5)
            conf = cfg(N=5, sigma=0.8, T=0.003, n=1, direction=direction)
            got = galerkin_step(FourierState(c), conf).coeffs
            ref = np.array(recurrence_step(list(c), 0.8, 0.003, sign))
            assert np.max(np.abs(got - ref)) <= 1e-14 * np.max(np.abs(ref))

    @settings(max_examples=50, deadline=None)
    @given(hermitian_states, st.sampled_from(list(Direction)))
    def test_step_is_euler_of_rhs(self, s, direction):
        conf = SpectralConfig(s.N, 0.7, 1e-3, 1, 1e-3, None, direction)
        stepped = galerkin_step(s, conf).coeffs
        manual = s.coeffs + direction.sign * 1e-3 * spectral_rhs(s, conf).coeffs
        scale = max(np.max(np.abs(manual)), 1e-300)
        assert np.max(np.abs(stepped - manual)) <= 1e-15 * scale
        assert stepped[s.N] == s.coeffs[s.N]
        assert hermitian_defect(stepped) <= 1e-12 * max(1.0, scale)

    @pytest.mark.parametrize("direction", list(Direction))
    def test_linear_growth_per_direction(self, direction):
        N = 6
        s = FourierState.from_modes(N, {N: 0.3 - 0.4j})
        conf = SpectralConfig(N, 0.9, 2e-3, 1, 2e-3, None, direction)
        out = galerkin_step(s, conf)
        # modes {0, ±N} cannot feed mode N back inside the band
        assert out[N] == pytest.approx((1 + direction.sign * 2e-3 * 0.81 * N * N / 2) * s[N],
                                       rel=1e-15)


class TestEvolve:
    def test_zero_steps(self):
        s = sin_state(3)
        tr = evolve(s, SpectralConfig.from_horizon(3, 1.0, 0.0, 0))
        assert tr.n == 0
        assert np.array_equal(tr.coeffs[0], s.coeffs)

    def test_times_by_multiplication(self):
        conf = SpectralConfig.from_horizon(3, 1.0, 0.3, 30, direction="well_posed_reverse")
        tr = evolve(sin_state(3), conf)
        assert [st_.t for st_ in tr.states] == [j * conf.delta for j in range(31)]

    @pytest.mark.parametrize("direction", list(Direction))
    def test_zero_mode_conserved(self, rng, direction):
        c = random_hermitian(rng, 4, scale=0.1)
        tr = evolve(FourierState(c), SpectralConfig.from_horizon(4, 0.2, 0.05, 500, None, direction))
        assert np.all(tr.coeffs[:, 4] == c[4])

    def test_single_mode_pair_growth(self):
        N = 5
        s = FourierState.from_modes(N, {N: -0.5j})
        conf = SpectralConfig.from_horizon(N, 1.0, 0.05, 50)
        tr = evolve(s, conf)
        g = conf.growth_factor()
        for j in (1, 10, 50):
            assert tr.coeffs[j, 2 * N] == pytest.approx(g**j * s[N], rel=1e-13)

    def test_blow_up_step_predicted(self):
        N, sigma, delta = 16, 1.0, 1e-2
        amp = 0.5
        g = 1 + delta * sigma**2 * N**2 / 2
        expected = math.ceil(math.log(1e12 / amp) / math.log(g))
        conf = SpectralConfig.from_horizon(N, sigma, delta * 200, 200)
        with pytest.raises(BlowUpError) as err:
            evolve(FourierState.from_modes(N, {N: -amp * 1j}), conf)
        assert err.value.step == expected
        assert err.value.mode == N and err.value.fastest_mode == N
        assert err.value.trajectory.n == expected - 1

    def test_paper_time_ordering(self):
        conf = SpectralConfig.from_horizon(2, 1.0, 0.4, 4, direction="well_posed_reverse")
        tr = evolve(sin_state(2), conf)
        times, coeffs = tr.paper_time()
        assert times[0] == 0.0 and times[-1] == pytest.approx(0.4)
        assert np.array_equal(coeffs[-1], sin_state(2).coeffs)


class TestSynthesize:
    def test_constant(self):
        g = synthesize(FourierState.from_modes(2, {0: -1.25}), 8)
        assert np.all(g.values == -1.25)

    def test_sine(self):
        g = synthesize(sin_state(4), 32)
        assert np.max(np.abs(g.values - np.sin(grid_nodes(32)))) <= 1e-14

    def test_reports_imaginary_residual(self, rng):
        _, imag = synthesize(FourierState(random_hermitian(rng, 7)), 30, return_imag=True)
        assert imag <= 1e-14

    def test_rejects_small_grid(self):
        with pytest.raises(ConfigError):
            synthesize(sin_state(4), 8)

    def test_non_hermitian_rejected(self):
        with pytest.raises(IntegrityError):
            FourierState(np.array([0, 0, 1j]))

    @settings(max_examples=60, deadline=None)
    @given(hermitian_states, st.integers(0, 12))
    def test_roundtrip(self, s, extra):
        M = 2 * s.N + 1 + extra
        back = init_coeffs(synthesize(s, M), SpectralConfig.from_horizon(s.N, 1.0, 1.0, 1, M))
        assert np.max(np.abs(back.coeffs - s.coeffs)) <= 1e-13 * max(1.0, s.max_abs())
