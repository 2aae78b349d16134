"""Shared fixtures and independent oracles for the test suite.

The oracle functions below evaluate the expected physics through closed
forms derived by hand (stationarity of the weighted variance sum), fully
independent of the library's grid-plus-golden-section minimizer and of its
sampling code, so closed-loop tests check two separate routes.
"""

from __future__ import annotations

import numpy as np
import pytest

import rasesim as rs


def oracle_gain(alpha_l: float) -> float:
    """exp(alpha_l) by Taylor series, independent of np.exp."""
    term = 1.0
    total = 1.0
    for k in range(1, 40):
        term *= alpha_l / k
        total += term
    return total


def oracle_measured_moments(
    alpha_l: float, eta: float, excess: float = 0.0
) -> tuple[float, float, float]:
    """(emitted variance, echo variance, cross magnitude) in measured units."""
    g = oracle_gain(alpha_l)
    a = g
    r = 1.0 + eta * (g - 1.0) + excess
    c = np.sqrt(eta * g * (g - 1.0))
    return a, r, c


def oracle_s(alpha_l: float, eta: float, excess: float, b) -> np.ndarray:
    """Closed-form measured S(b) for the model state."""
    a, r, c = oracle_measured_moments(alpha_l, eta, excess)
    b = np.asarray(b, dtype=float)
    return 2.0 * (b * a + (1.0 - b) * r - 2.0 * np.sqrt(b * (1.0 - b)) * c)


def oracle_min_s(alpha_l: float, eta: float, excess: float = 0.0) -> tuple[float, float]:
    """Analytic minimizer of S(b): stationary point of the closed form."""
    a, r, c = oracle_measured_moments(alpha_l, eta, excess)
    if c == 0.0:
        s0 = 2.0 * r
        s1 = 2.0 * a
        return (0.0, s0) if s0 <= s1 else (1.0, s1)
    d = (a - r) / c
    u = d / np.sqrt(4.0 + d * d)
    b_star = (1.0 - u) / 2.0
    return float(b_star), float(oracle_s(alpha_l, eta, excess, b_star))


def make_config(
    alpha_l: float = 0.78,
    eta: float = 0.3,
    excess: float = 0.0,
    n_modes: int = 3,
    tile_duration: float = 3.5e-6,
    signal_bandwidth: float = 253.1e3,
    n_shots: int = 200,
    seed: int = 7,
    **overrides,
) -> rs.SequenceConfig:
    """Small, fast sequence configuration with the standard timeline."""
    fs = overrides.pop("sample_rate", 10e6)
    windows = overrides.pop(
        "windows", rs.standard_windows(fs, n_modes=n_modes, tile_duration=tile_duration)
    )
    kwargs = dict(
        sample_rate=fs,
        windows=windows,
        physics=rs.RasePhysicsParams(alpha_l=alpha_l, eta=eta, excess=excess),
        ase_decay_tau=378e-6,
        signal_bandwidth=signal_bandwidth,
        t2=13e-6,
        pulse_width=1.6e-6,
        n_modes=n_modes,
        n_shots=n_shots,
        seed=seed,
        lo_phase_drift=0.05,
    )
    kwargs.update(overrides)
    return rs.SequenceConfig(**kwargs)


def collect_samples(shots, basis) -> rs.QuadratureSamples:
    """Stack per-shot mode projections into one container."""
    parts = [rs.project_modes(rec, basis) for rec in shots]
    return rs.QuadratureSamples(
        x1=np.concatenate([p.x1 for p in parts]),
        p1=np.concatenate([p.p1 for p in parts]),
        x2=np.concatenate([p.x2 for p in parts]),
        p2=np.concatenate([p.p2 for p in parts]),
        shot_index=np.concatenate([p.shot_index for p in parts]),
        mode_index=np.concatenate([p.mode_index for p in parts]),
    )


@pytest.fixture
def small_config() -> rs.SequenceConfig:
    return make_config()
