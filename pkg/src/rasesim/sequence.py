"""Per-shot heterodyne record synthesis for the full pulse sequence.

A record is a complex baseband time series covering the window table
(reference tone, vacuum, first inversion pulse, emission window, rephasing
pulse, echo-recall window, two-pulse echo artifact, tail).  Statistics are
embedded by *mode embedding*: the record is unit-variance complex white
noise everywhere except inside a set of orthonormal boxcar temporal modes
tiling the emission window and their time-reflected partners in the recall
window.  There the white component is carved out and replaced by mode
coefficients drawn from the designed measured covariance of
:func:`rasesim.gaussian.heterodyne_map`, so projecting a synthesized run
back onto the basis recovers the designed statistics exactly (up to
estimator noise) while every orthogonal mode stays at the vacuum floor.

The recall-partner coefficient is stored conjugated, which makes the
record's reflected-mode content the time-reversed conjugate replica of the
emission and matches the sign convention of the state model once the
analysis conjugates the partner projection.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, SynthesisError
from .gaussian import (
    RasePhysicsParams,
    ase_rase_state,
    heterodyne_map,
)

__all__ = [
    "Window",
    "SequenceConfig",
    "TemporalModeBasis",
    "HeterodyneRecord",
    "WINDOW_ORDER",
    "BOXCAR_FWHM_FACTOR",
    "standard_windows",
    "build_mode_basis",
    "synthesize_shot",
    "synthesize_run",
    "iter_shots",
]

#: Required window labels, in temporal order.
WINDOW_ORDER = ("reference", "vacuum", "pi1", "ase", "pi2", "rase", "echo", "tail")

#: FWHM of the sinc^2 power spectrum of a boxcar of duration T is this / T.
BOXCAR_FWHM_FACTOR = 0.8859

#: Allowed relative mismatch between the configured signal bandwidth and the
#: bandwidth realized by the tile duration.
_BANDWIDTH_TOL = 0.15

# Substream tags entering the per-task seed derivation.
_STREAM_SHOT = 0
_STREAM_BOOTSTRAP = 1


@dataclass(frozen=True)
class Window:
    """One labeled span of the record, [start_s, end_s) in seconds."""

    label: str
    start_s: float
    end_s: float
    sentinel: bool = False

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def sample_span(self, sample_rate: float) -> tuple[int, int]:
        """Half-open sample index span; boundaries must sit on the grid."""
        lo = _grid_index(self.start_s, sample_rate, self.label + " start")
        hi = _grid_index(self.end_s, sample_rate, self.label + " end")
        return lo, hi

    def sample_slice(self, sample_rate: float) -> slice:
        lo, hi = self.sample_span(sample_rate)
        return slice(lo, hi)


def _grid_index(t: float, sample_rate: float, what: str) -> int:
    idx = t * sample_rate
    nearest = round(idx)
    if abs(idx - nearest) > 1e-6:
        raise ConfigurationError(
            f"{what} at {t} s does not sit on the sample grid (1/{sample_rate} s)"
        )
    return int(nearest)


@dataclass(frozen=True)
class SequenceConfig:
    """Immutable physics + timing parameters of one simulated run.

    Windows must appear in :data:`WINDOW_ORDER`, non-overlapping, with all
    boundaries on the sample grid.  The recall window must be the exact
    mirror image of the emission window about the center of the rephasing
    pulse, and the emission window must divide into ``n_modes`` equal tiles
    of at least two samples whose sinc^2 width matches ``signal_bandwidth``.
    """

    sample_rate: float
    windows: tuple[Window, ...]
    physics: RasePhysicsParams
    ase_decay_tau: float
    signal_bandwidth: float
    t2: float
    pulse_width: float
    n_modes: int
    n_shots: int
    seed: int
    warm: bool = False
    lo_phase_drift: float = 0.0
    pi2_enabled: bool = True
    reference_amplitude: float = 20.0
    echo_amplitude: float = 50.0
    saturation_level: float = 1000.0

    def __post_init__(self) -> None:
        self._validate_scalars()
        windows = self._validate_windows()
        object.__setattr__(self, "windows", windows)

    def _validate_scalars(self) -> None:
        if self.sample_rate <= 0:
            raise ConfigurationError("sample_rate must be positive")
        for name in ("ase_decay_tau", "signal_bandwidth", "t2", "pulse_width"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.n_modes < 1:
            raise ConfigurationError("n_modes must be >= 1")
        if self.n_shots < 1:
            raise ConfigurationError("n_shots must be >= 1")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        if self.lo_phase_drift < 0:
            raise ConfigurationError("lo_phase_drift must be >= 0")
        for name in ("reference_amplitude", "echo_amplitude", "saturation_level"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")

    def _validate_windows(self) -> tuple[Window, ...]:
        labels = tuple(w.label for w in self.windows)
        if labels != WINDOW_ORDER:
            raise ConfigurationError(
                f"window labels must be {WINDOW_ORDER} in order, got {labels}"
            )
        spans = {w.label: w.sample_span(self.sample_rate) for w in self.windows}
        prev_end = None
        for w in self.windows:
            lo, hi = spans[w.label]
            if hi <= lo:
                raise ConfigurationError(f"window '{w.label}' is empty")
            if prev_end is not None and lo < prev_end:
                raise ConfigurationError(
                    f"window '{w.label}' overlaps its predecessor"
                )
            prev_end = hi

        # Inversion pulses must match the configured pulse width.
        pulse_samples = round(self.pulse_width * self.sample_rate)
        for label in ("pi1", "pi2"):
            lo, hi = spans[label]
            if hi - lo != pulse_samples:
                raise ConfigurationError(
                    f"window '{label}' duration must equal pulse_width "
                    f"({pulse_samples} samples, got {hi - lo})"
                )

        # Recall window = mirror of the emission window about the pi2 center.
        a0, a1 = spans["ase"]
        p0, p1 = spans["pi2"]
        r0, r1 = spans["rase"]
        if (r0, r1) != (p0 + p1 - a1, p0 + p1 - a0):
            raise ConfigurationError(
                "rase window must mirror the ase window about the pi2 center: "
                f"expected samples [{p0 + p1 - a1}, {p0 + p1 - a0}), got [{r0}, {r1})"
            )

        n_ase = a1 - a0
        if n_ase % self.n_modes != 0:
            raise ConfigurationError(
                f"ase window ({n_ase} samples) is not divisible into "
                f"{self.n_modes} equal tiles"
            )
        tile = n_ase // self.n_modes
        if tile < 2:
            raise ConfigurationError("mode tiles must span at least 2 samples")

        realized = BOXCAR_FWHM_FACTOR * self.sample_rate / tile
        if abs(realized - self.signal_bandwidth) > _BANDWIDTH_TOL * self.signal_bandwidth:
            raise ConfigurationError(
                f"tile duration realizes a spectral FWHM of {realized:.3e} Hz, "
                f"inconsistent with signal_bandwidth {self.signal_bandwidth:.3e} Hz"
            )

        sentinel = {"pi1": True, "pi2": self.pi2_enabled}
        return tuple(
            Window(w.label, w.start_s, w.end_s, sentinel.get(w.label, False))
            for w in self.windows
        )

    def window(self, label: str) -> Window:
        for w in self.windows:
            if w.label == label:
                return w
        raise KeyError(label)

    @property
    def n_samples(self) -> int:
        return self.windows[-1].sample_span(self.sample_rate)[1]

    @property
    def tile_samples(self) -> int:
        a0, a1 = self.window("ase").sample_span(self.sample_rate)
        return (a1 - a0) // self.n_modes

    @property
    def rephasing_time_s(self) -> float:
        """Symmetry point of the sequence: center of the rephasing pulse."""
        p0, p1 = self.window("pi2").sample_span(self.sample_rate)
        return (p0 + p1) / 2.0 / self.sample_rate


def standard_windows(
    sample_rate: float,
    n_modes: int,
    tile_duration: float,
    *,
    reference_duration: float = 10e-6,
    vacuum_duration: float = 50e-6,
    pulse_width: float = 1.6e-6,
    guard: float = 2e-6,
    echo_half_width: float = 2e-6,
    tail_duration: float = 15e-6,
) -> tuple[Window, ...]:
    """Build a grid-exact symmetric window table for the standard sequence.

    The emission window spans ``n_modes * tile_duration`` starting ``guard``
    after the first pulse; the recall window is its mirror image about the
    center of the rephasing pulse, which starts ``guard`` after the emission
    window ends.  The two-pulse echo artifact window is centered on
    ``2*t(pi2) - t(pi1)``.
    """
    dt = 1.0 / sample_rate

    def snap(t: float) -> float:
        return round(t * sample_rate) * dt

    ref_end = snap(reference_duration)
    vac_end = snap(ref_end + vacuum_duration)
    pi1_end = snap(vac_end + pulse_width)
    ase_start = snap(pi1_end + guard)
    ase_end = snap(ase_start + n_modes * tile_duration)
    pi2_start = snap(ase_end + guard)
    pi2_end = snap(pi2_start + pulse_width)
    mirror = pi2_start + pi2_end  # twice the rephasing time
    rase_start = snap(mirror - ase_end)
    rase_end = snap(mirror - ase_start)
    pi1_center = (vac_end + pi1_end) / 2.0
    echo_center = snap(mirror - pi1_center)
    echo_start = max(rase_end, snap(echo_center - echo_half_width))
    echo_end = snap(echo_center + echo_half_width)
    tail_end = snap(echo_end + tail_duration)

    return (
        Window("reference", 0.0, ref_end),
        Window("vacuum", ref_end, vac_end),
        Window("pi1", vac_end, pi1_end),
        Window("ase", ase_start, ase_end),
        Window("pi2", pi2_start, pi2_end),
        Window("rase", rase_start, rase_end),
        Window("echo", echo_start, echo_end),
        Window("tail", echo_end, tail_end),
    )


@dataclass(frozen=True)
class TemporalModeBasis:
    """Orthonormal boxcar modes tiling the emission window plus partners.

    ``ase_slices[k]`` holds the k-th tile in time order; ``rase_slices[k]``
    is its exact reflection about the rephasing time, so the partner of the
    first emission tile is the *last* recall tile.  Mode functions carry the
    continuous normalization ``1/sqrt(tile duration)``; their Gram matrix
    under the discrete inner product ``sum f_j f_k * dt`` is the identity.
    """

    sample_rate: float
    n_samples: int
    tile_samples: int
    ase_slices: tuple[slice, ...]
    rase_slices: tuple[slice, ...]

    @property
    def n_modes(self) -> int:
        return len(self.ase_slices)

    @property
    def amplitude(self) -> float:
        """Mode-function amplitude 1/sqrt(duration)."""
        return float(np.sqrt(self.sample_rate / self.tile_samples))

    def _matrix(self, slices: tuple[slice, ...]) -> np.ndarray:
        out = np.zeros((len(slices), self.n_samples))
        for k, sl in enumerate(slices):
            out[k, sl] = self.amplitude
        return out

    def ase_matrix(self) -> np.ndarray:
        """Dense (n_modes, n_samples) emission-mode functions."""
        return self._matrix(self.ase_slices)

    def rase_matrix(self) -> np.ndarray:
        """Dense (n_modes, n_samples) recall-partner mode functions."""
        return self._matrix(self.rase_slices)


def build_mode_basis(config: SequenceConfig) -> TemporalModeBasis:
    """Construct the boxcar mode basis implied by a sequence configuration."""
    fs = config.sample_rate
    a0, a1 = config.window("ase").sample_span(fs)
    p0, p1 = config.window("pi2").sample_span(fs)
    m = config.tile_samples
    mirror = p0 + p1
    ase_slices = []
    rase_slices = []
    for k in range(config.n_modes):
        s = a0 + k * m
        ase_slices.append(slice(s, s + m))
        rase_slices.append(slice(mirror - s - m, mirror - s))
    return TemporalModeBasis(
        sample_rate=fs,
        n_samples=config.n_samples,
        tile_samples=m,
        ase_slices=tuple(ase_slices),
        rase_slices=tuple(rase_slices),
    )


@dataclass(frozen=True)
class HeterodyneRecord:
    """One shot's complex heterodyne time series plus its window table.

    Samples are dimensionless and vacuum-normalized: outside signal modes
    and sentinel windows each quadrature has unit variance per sample.
    Sentinel windows (inversion pulses) hold deterministic saturation ramps
    and must be excluded from statistics.
    """

    samples: np.ndarray
    sample_rate: float
    windows: tuple[Window, ...]
    shot_index: int

    def window(self, label: str) -> Window:
        for w in self.windows:
            if w.label == label:
                return w
        raise KeyError(label)

    def sample_slice(self, label: str) -> slice:
        return self.window(label).sample_slice(self.sample_rate)

    def sentinel_mask(self) -> np.ndarray:
        """Boolean mask over samples, True inside sentinel windows."""
        mask = np.zeros(len(self.samples), dtype=bool)
        for w in self.windows:
            if w.sentinel:
                mask[w.sample_slice(self.sample_rate)] = True
        return mask


@dataclass(frozen=True)
class _ShotPlan:
    """Precomputed per-config synthesis ingredients shared by all shots."""

    config: SequenceConfig
    basis: TemporalModeBasis
    mode_params: tuple[RasePhysicsParams, ...]
    mode_cov: np.ndarray  # (n_modes, 4, 4) measured covariances
    mode_root: np.ndarray  # (n_modes, 4, 4) symmetric square roots
    ref_slice: slice
    echo_template: np.ndarray
    echo_slice: slice
    sat_templates: tuple[tuple[slice, np.ndarray], ...]


def shot_rng(seed: int, shot_index: int) -> np.random.Generator:
    """Independent, order-free generator for one shot of one run."""
    return np.random.default_rng([seed, _STREAM_SHOT, shot_index])


def bootstrap_rng(seed: int) -> np.random.Generator:
    """Generator for bootstrap resampling, on its own substream."""
    return np.random.default_rng([seed, _STREAM_BOOTSTRAP])


def mode_physics(config: SequenceConfig) -> tuple[RasePhysicsParams, ...]:
    """Per-mode physics parameters including the two decay models.

    The emission-side gain excess of tile ``k`` decays as
    ``exp(-t_k / ase_decay_tau)`` with ``t_k`` the tile center measured from
    the start of the emission window.  The recall efficiency additionally
    decays as ``exp(-4 * delta_k / t2)`` where ``delta_k`` is the tile
    center's delay from the rephasing time, the two-pulse-echo dephasing of
    a coherence stored for ``2 * delta_k``.
    """
    fs = config.sample_rate
    basis = build_mode_basis(config)
    a0, _ = config.window("ase").sample_span(fs)
    t_mirror = config.rephasing_time_s
    gain = float(np.exp(config.physics.alpha_l))
    params = []
    for sl in basis.ase_slices:
        center_s = (sl.start + basis.tile_samples / 2.0) / fs
        t_k = center_s - a0 / fs
        delta_k = t_mirror - center_s
        gain_k = 1.0 + (gain - 1.0) * np.exp(-t_k / config.ase_decay_tau)
        eta_k = config.physics.eta * float(np.exp(-4.0 * delta_k / config.t2))
        if not config.pi2_enabled:
            eta_k = 0.0
        params.append(
            RasePhysicsParams(
                alpha_l=float(np.log(gain_k)),
                eta=eta_k,
                excess=config.physics.excess,
            )
        )
    return tuple(params)


@lru_cache(maxsize=8)
def _shot_plan(config: SequenceConfig) -> _ShotPlan:
    fs = config.sample_rate
    basis = build_mode_basis(config)
    params = mode_physics(config)

    covs = np.empty((config.n_modes, 4, 4))
    roots = np.empty((config.n_modes, 4, 4))
    for k, par in enumerate(params):
        cov = heterodyne_map(ase_rase_state(par)).cov
        evals, evecs = np.linalg.eigh(cov)
        if evals.min() < -1e-10:
            raise SynthesisError(
                f"mode {k}: designed measured covariance is not positive "
                f"semidefinite (min eigenvalue {evals.min():.3e})"
            )
        covs[k] = cov
        roots[k] = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T

    echo_sl = config.window("echo").sample_slice(fs)
    echo_center = 2.0 * config.rephasing_time_s - (
        config.window("pi1").start_s + config.window("pi1").end_s
    ) / 2.0
    t = np.arange(echo_sl.start, echo_sl.stop) / fs
    sigma = config.pulse_width / 2.0
    echo_template = config.echo_amplitude * np.exp(
        -((t - echo_center) ** 2) / (2.0 * sigma**2)
    ).astype(complex)

    sat = []
    for label in ("pi1", "pi2"):
        w = config.window(label)
        if not w.sentinel:
            continue
        sl = w.sample_slice(fs)
        n = sl.stop - sl.start
        ramp = 1.0 - np.abs(np.linspace(-1.0, 1.0, n))
        sat.append((sl, (config.saturation_level * ramp).astype(complex)))

    return _ShotPlan(
        config=config,
        basis=basis,
        mode_params=params,
        mode_cov=covs,
        mode_root=roots,
        ref_slice=config.window("reference").sample_slice(fs),
        echo_template=echo_template,
        echo_slice=echo_sl,
        sat_templates=tuple(sat),
    )


def designed_measured_cov(config: SequenceConfig, mode_index: int) -> np.ndarray:
    """Designed measured covariance of one temporal mode pair."""
    return _shot_plan(config).mode_cov[mode_index].copy()


def _synthesize(plan: _ShotPlan, shot_index: int) -> np.ndarray:
    cfg = plan.config
    rng = shot_rng(cfg.seed, shot_index)
    n = cfg.n_samples
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    if not cfg.warm:
        draws = rng.standard_normal((cfg.n_modes, 4))
        inv_sqrt_m = 1.0 / np.sqrt(plan.basis.tile_samples)
        for k in range(cfg.n_modes):
            fsl = plan.basis.ase_slices[k]
            gsl = plan.basis.rase_slices[k]
            # Carve the white component out of the mode pair, then inject
            # coefficients carrying the full designed measured covariance.
            z[fsl] -= z[fsl].mean()
            z[gsl] -= z[gsl].mean()
            x1, p1, x2, p2 = plan.mode_root[k] @ draws[k]
            z[fsl] += (x1 + 1j * p1) * inv_sqrt_m
            z[gsl] += (x2 - 1j * p2) * inv_sqrt_m  # conjugated replica
        if cfg.pi2_enabled:
            z[plan.echo_slice] += plan.echo_template

    z[plan.ref_slice] += cfg.reference_amplitude

    phase = rng.normal(0.0, cfg.lo_phase_drift) if cfg.lo_phase_drift > 0 else 0.0
    if phase != 0.0:
        z *= np.exp(1j * phase)

    # Saturation sentinels replace whatever the detector would have seen.
    for sl, template in plan.sat_templates:
        z[sl] = template
    return z


def synthesize_shot(config: SequenceConfig, shot_index: int) -> HeterodyneRecord:
    """Synthesize one shot; a pure function of ``(config, shot_index)``."""
    if not 0 <= shot_index < config.n_shots:
        raise ConfigurationError(
            f"shot_index {shot_index} outside [0, {config.n_shots})"
        )
    plan = _shot_plan(config)
    return HeterodyneRecord(
        samples=_synthesize(plan, shot_index),
        sample_rate=config.sample_rate,
        windows=config.windows,
        shot_index=shot_index,
    )


def _n_workers() -> int:
    raw = os.environ.get("RASE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"RASE_THREADS must be an integer, got {raw!r}")


def iter_shots(config: SequenceConfig) -> Iterator[HeterodyneRecord]:
    """Yield all shots of a run in index order (streaming, single thread)."""
    plan = _shot_plan(config)
    for i in range(config.n_shots):
        yield HeterodyneRecord(
            samples=_synthesize(plan, i),
            sample_rate=config.sample_rate,
            windows=config.windows,
            shot_index=i,
        )


def synthesize_run(config: SequenceConfig) -> list[HeterodyneRecord]:
    """Synthesize all shots of a run.

    Shots are mutually independent and each is a pure function of
    ``(config.seed, shot_index)``, so the result is identical for any
    RASE_THREADS worker count or execution order.
    """
    plan = _shot_plan(config)
    workers = _n_workers()
    indices = range(config.n_shots)
    if workers == 1:
        arrays = [_synthesize(plan, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            arrays = list(pool.map(lambda i: _synthesize(plan, i), indices))
    return [
        HeterodyneRecord(
            samples=arr,
            sample_rate=config.sample_rate,
            windows=config.windows,
            shot_index=i,
        )
        for i, arr in zip(indices, arrays)
    ]
