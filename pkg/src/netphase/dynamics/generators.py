"""Synthetic scalar signals used as ground truth for the reconstruction tools."""

from __future__ import annotations

import numpy as np


def sine(n: int, period: float, amplitude: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """``amplitude * sin(2 pi k / period + phase)`` for ``k = 0..n-1``."""
    k = np.arange(n, dtype=float)
    return amplitude * np.sin(2.0 * np.pi * k / period + phase)


def uniform_noise(n: int, seed: int | None = None, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, size=n)


def lorenz_rhs(state: np.ndarray, sigma: float, rho: float, beta: float) -> np.ndarray:
    x, y, z = state
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def lorenz(
    n: int,
    dt: float = 0.01,
    stride: int = 10,
    sigma: float = 10.0,
    rho: float = 28.0,
    beta: float = 8.0 / 3.0,
    initial: tuple[float, float, float] = (1.0, 1.0, 1.0),
    transient: int = 1000,
) -> np.ndarray:
    """Integrate the Lorenz system with classical fixed-step RK4.

    Every ``stride``-th integration step is kept, after discarding
    ``transient`` kept samples so the orbit is on the attractor.

    Returns an ``(n, 3)`` array of ``(x, y, z)``.
    """
    if n < 1 or stride < 1 or dt <= 0:
        raise ValueError("n, stride must be positive and dt > 0")
    total = (n + transient) * stride
    out = np.empty((n, 3))
    s = np.asarray(initial, dtype=float)
    h = dt
    for step in range(total):
        k1 = lorenz_rhs(s, sigma, rho, beta)
        k2 = lorenz_rhs(s + 0.5 * h * k1, sigma, rho, beta)
        k3 = lorenz_rhs(s + 0.5 * h * k2, sigma, rho, beta)
        k4 = lorenz_rhs(s + h * k3, sigma, rho, beta)
        s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        kept, rem = divmod(step + 1, stride)
        if rem == 0 and kept > transient:
            out[kept - transient - 1] = s
    return out
