"""Brute-force references, deliberately written without numpy vector tricks
so they share no code path with the package."""

import cmath
import math

import numpy as np


def conv_double_loop(a, b):
    N = (len(a) - 1) // 2
    out = []
    for k in range(-N, N + 1):
        s = 0j
        for p in range(-N, N + 1):
            q = k - p
            if -N <= q <= N:
                s += a[p + N] * b[q + N]
        out.append(s)
    return out


def recurrence_step(c, sigma, delta, sign=1.0):
    """One step of the explicit Galerkin recurrence, mode by mode."""
    N = (len(c) - 1) // 2
    conv = conv_double_loop(c, c)
    out = []
    for k in range(-N, N + 1):
        lin = 1.0 + sign * delta * sigma**2 * k * k / 2.0
        out.append(lin * c[k + N] - sign * delta * sigma * 1j * k / 2.0 * conv[k + N])
    return out


def quadrature_coeffs(f, N, points=4096):
    """(1/2π)∫ f(x) e^{-ikx} dx by the periodic trapezoid rule, term by term."""
    h = 2 * math.pi / points
    xs = [-math.pi + h * m for m in range(points)]
    fx = [f(x) for x in xs]
    return [sum(v * cmath.exp(-1j * k * x) for v, x in zip(fx, xs)) / points
            for k in range(-N, N + 1)]


def random_hermitian(rng, N, scale=1.0):
    c = np.zeros(2 * N + 1, dtype=complex)
    pos = scale * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
    c[N + 1:] = pos
    c[:N] = np.conj(pos[::-1])
    c[N] = scale * rng.standard_normal()
    return c
