"""Analysis chain for synthesized heterodyne runs.

Implements the measurement-side pipeline: vacuum normalization, phase
referencing, variance traces, window spectra, the emission/recall
cross-correlation, temporal-mode projection, weighted EPR variance curves
with bootstrap confidence bands, and the decay/line-width fits.

Conventions fixed here:

* Records are globally rescaled so the pooled vacuum-window variance sum
  ``Var(x) + Var(p)`` equals 2 (unit vacuum per quadrature).
* Mode projections use the discrete unit-norm form of the boxcar modes, so
  a vacuum record projects to unit variance per quadrature.
* The recall-partner projection is conjugated, realizing the time-reversed
  conjugate pairing assumed by the state model.
* Cross-correlations are reported as magnitudes of the shot-averaged
  complex correlation, with the lag origin at the rephasing time.
* Confidence bands come from a nonparametric bootstrap over whole shots.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import AnalysisError, ConfigurationError, FitError, NormalizationError
from .sequence import (
    HeterodyneRecord,
    SequenceConfig,
    TemporalModeBasis,
    bootstrap_rng,
    build_mode_basis,
)

__all__ = [
    "QuadratureSamples",
    "VarianceTrace",
    "Spectrum",
    "CrossCorrelation",
    "InseparabilityCurve",
    "DipSignificance",
    "AnalysisOptions",
    "AnalysisResult",
    "normalize_to_vacuum",
    "estimate_reference_phase",
    "apply_phase_reference",
    "variance_trace",
    "spectral_power",
    "cross_correlation",
    "project_modes",
    "inseparability_curve",
    "dip_significance",
    "fit_exponential_decay",
    "fit_spectral_fwhm",
    "analyze_records",
    "analyze_run",
]

log = logging.getLogger(__name__)

#: Reference-tone amplitude (in vacuum sigma) below which rotation is skipped.
MIN_REFERENCE_SNR = 5.0


# ---------------------------------------------------------------------------
# sample containers


@dataclass(frozen=True)
class QuadratureSamples:
    """Per-shot, per-mode measured quadrature quadruples (x1, p1, x2, p2)."""

    x1: np.ndarray
    p1: np.ndarray
    x2: np.ndarray
    p2: np.ndarray
    shot_index: np.ndarray
    mode_index: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.x1)
        for name in ("p1", "x2", "p2", "shot_index", "mode_index"):
            if len(getattr(self, name)) != n:
                raise ValueError("all sample columns must have equal length")
        for name in ("x1", "p1", "x2", "p2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in column {name}")

    def __len__(self) -> int:
        return len(self.x1)

    def as_matrix(self) -> np.ndarray:
        """(n, 4) array with columns (x1, p1, x2, p2)."""
        return np.column_stack([self.x1, self.p1, self.x2, self.p2])

    def for_mode(self, mode_index: int) -> "QuadratureSamples":
        keep = self.mode_index == mode_index
        return QuadratureSamples(
            self.x1[keep],
            self.p1[keep],
            self.x2[keep],
            self.p2[keep],
            self.shot_index[keep],
            self.mode_index[keep],
        )

    def covariance(self) -> np.ndarray:
        """Sample covariance (ddof=1) of the four quadratures."""
        return np.cov(self.as_matrix().T, ddof=1)

    @classmethod
    def from_matrix(
        cls, matrix: np.ndarray, mode_index: int = 0
    ) -> "QuadratureSamples":
        m = np.asarray(matrix, dtype=float)
        n = m.shape[0]
        return cls(
            m[:, 0],
            m[:, 1],
            m[:, 2],
            m[:, 3],
            np.arange(n),
            np.full(n, mode_index),
        )


@dataclass(frozen=True)
class VarianceTrace:
    """Binned pooled variance sum Var(x) + Var(p) versus time."""

    times: np.ndarray
    values: np.ndarray
    sentinel: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    """Shot-averaged power spectrum of the complex signal in one window."""

    frequencies: np.ndarray
    power: np.ndarray
    window_label: str
    taper: str
    n_shots: int


@dataclass(frozen=True)
class CrossCorrelation:
    """Magnitude of the shot-averaged emission/recall cross-correlation."""

    tau: np.ndarray
    magnitude: np.ndarray
    std_error: np.ndarray
    n_shots: int


@dataclass(frozen=True)
class InseparabilityCurve:
    """EPR variance-sum estimates over a weight grid with bootstrap bands."""

    b_grid: np.ndarray
    s_values: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    sigma_band: np.ndarray
    n_samples: int
    confidence_level: float

    def minimum(self) -> tuple[float, float]:
        i = int(np.argmin(self.s_values))
        return float(self.b_grid[i]), float(self.s_values[i])


@dataclass(frozen=True)
class DipSignificance:
    """Point estimate and one-sided bootstrap significance of S(b) < 2."""

    s_hat: float
    sigma: float
    confidence_below_2: float
    n_samples: int


# ---------------------------------------------------------------------------
# record-level operations


def _pooled_variance_sum(values: Iterable[np.ndarray]) -> tuple[float, int]:
    """Pooled Var(x)+Var(p) of complex samples, with mean subtraction."""
    n = 0
    s = 0.0 + 0.0j
    sq = 0.0
    for z in values:
        n += z.size
        s += z.sum()
        sq += float(np.sum(z.real**2 + z.imag**2))
    if n == 0:
        return 0.0, 0
    mean = s / n
    return sq / n - (mean.real**2 + mean.imag**2), n


def normalize_to_vacuum(
    shots: Sequence[HeterodyneRecord], window_label: str = "vacuum"
) -> tuple[list[HeterodyneRecord], float]:
    """Rescale all shots so the pooled vacuum variance sum equals 2.

    One global scale is applied to every sample of every shot.  Requires at
    least 1000 vacuum samples pooled across shots and a live input
    (pooled variance above 1e-6).
    """
    var_sum, n = _pooled_variance_sum(
        rec.samples[rec.sample_slice(window_label)] for rec in shots
    )
    if n < 1000:
        raise NormalizationError(
            f"vacuum window holds only {n} samples across shots; need >= 1000"
        )
    if var_sum < 1e-6:
        raise NormalizationError(
            f"vacuum variance {var_sum:.3e} is below 1e-6 (dead input)"
        )
    scale = float(np.sqrt(2.0 / var_sum))
    rescaled = [replace(rec, samples=rec.samples * scale) for rec in shots]
    return rescaled, scale


def estimate_reference_phase(
    record: HeterodyneRecord, window_label: str = "reference"
) -> tuple[float, float]:
    """Phase and magnitude of the mean complex sample in the tone window."""
    z = record.samples[record.sample_slice(window_label)]
    mean = complex(z.mean())
    return float(np.angle(mean)), abs(mean)


def apply_phase_reference(
    record: HeterodyneRecord,
    window_label: str = "reference",
    min_amplitude: float = MIN_REFERENCE_SNR,
) -> HeterodyneRecord:
    """Rotate a record by the negative of its reference-tone phase.

    The tone phase is estimated by averaging the complex samples in the
    reference window.  If the estimated tone amplitude falls below
    ``min_amplitude`` (in units of the per-sample vacuum sigma) a warning is
    logged and the record is returned unrotated.  Idempotent up to
    estimator noise.
    """
    phase, amplitude = estimate_reference_phase(record, window_label)
    if amplitude < min_amplitude:
        log.warning(
            "shot %d: reference amplitude %.2f below %.1f sigma, rotation skipped",
            record.shot_index,
            amplitude,
            min_amplitude,
        )
        return record
    return replace(record, samples=record.samples * np.exp(-1j * phase))


class _TraceAccumulator:
    """Streaming per-bin pooled variance across shots."""

    def __init__(
        self,
        n_samples: int,
        sample_rate: float,
        bin_width: float,
        origin_s: float,
        sentinel_mask: np.ndarray,
    ):
        if bin_width < 2.0 / sample_rate:
            raise ConfigurationError("bin_width must span at least 2 samples")
        t = np.arange(n_samples) / sample_rate
        idx = np.floor((t - origin_s) / bin_width).astype(int)
        idx -= idx.min()
        self._idx = idx
        self._n_bins = int(idx.max()) + 1
        self._per_shot = np.bincount(idx, minlength=self._n_bins)
        self._sentinel = (
            np.bincount(idx, weights=sentinel_mask.astype(float), minlength=self._n_bins)
            > 0
        )
        self._times = (
            np.bincount(idx, weights=t, minlength=self._n_bins) / self._per_shot
        )
        self._sum = np.zeros(self._n_bins, dtype=complex)
        self._sumsq = np.zeros(self._n_bins)
        self._shots = 0

    def add(self, z: np.ndarray) -> None:
        self._sum += np.bincount(self._idx, weights=z.real, minlength=self._n_bins)
        self._sum += 1j * np.bincount(self._idx, weights=z.imag, minlength=self._n_bins)
        self._sumsq += np.bincount(
            self._idx, weights=z.real**2 + z.imag**2, minlength=self._n_bins
        )
        self._shots += 1

    def result(self) -> VarianceTrace:
        if self._shots == 0:
            raise AnalysisError("variance trace received no shots")
        counts = self._per_shot * self._shots
        mean = self._sum / counts
        values = self._sumsq / counts - (mean.real**2 + mean.imag**2)
        return VarianceTrace(
            times=self._times,
            values=values,
            sentinel=self._sentinel,
            counts=counts,
        )


def variance_trace(
    shots: Iterable[HeterodyneRecord],
    bin_width: float,
    origin_s: float = 0.0,
) -> VarianceTrace:
    """Binned variance sum Var(x)+Var(p) pooled across shots.

    Bin edges sit at ``origin_s + k * bin_width``; bins touching a sentinel
    window are flagged in the result and should be excluded from fits.
    ``shots`` may be any iterable, including a streaming generator.
    """
    it = iter(shots)
    first = next(it, None)
    if first is None:
        raise AnalysisError("variance trace received no shots")
    acc = _TraceAccumulator(
        len(first.samples),
        first.sample_rate,
        bin_width,
        origin_s,
        first.sentinel_mask(),
    )
    acc.add(first.samples)
    for rec in it:
        acc.add(rec.samples)
    return acc.result()


class _SpectrumAccumulator:
    """Streaming shot-averaged power spectrum over one window."""

    def __init__(self, record: HeterodyneRecord, window_label: str):
        window = record.window(window_label)
        if window.sentinel:
            raise AnalysisError(f"window '{window_label}' is a sentinel window")
        sl = record.sample_slice(window_label)
        mask = record.sentinel_mask()
        if mask[sl].any():
            raise AnalysisError(
                f"window '{window_label}' is contaminated by sentinel samples"
            )
        self._slice = sl
        self._n = sl.stop - sl.start
        if self._n < 16:
            raise AnalysisError(
                f"window '{window_label}' has {self._n} samples; need >= 16"
            )
        self._label = window_label
        self._freq = np.fft.fftshift(
            np.fft.fftfreq(self._n, d=1.0 / record.sample_rate)
        )
        self._power = np.zeros(self._n)
        self._shots = 0

    def add(self, z: np.ndarray) -> None:
        spec = np.fft.fft(z[self._slice])
        self._power += np.fft.fftshift(np.abs(spec) ** 2) / self._n
        self._shots += 1

    def result(self) -> Spectrum:
        return Spectrum(
            frequencies=self._freq,
            power=self._power / self._shots,
            window_label=self._label,
            taper="none",
            n_shots=self._shots,
        )


def spectral_power(
    shots: Iterable[HeterodyneRecord], window_label: str
) -> Spectrum:
    """Shot-averaged power spectrum of the complex signal in one window.

    Untapered periodogram normalized so the frequency-averaged power equals
    the window's mean |z|^2 (Parseval); the taper choice is recorded in the
    result metadata.  ``shots`` may be any iterable.
    """
    it = iter(shots)
    first = next(it, None)
    if first is None:
        raise AnalysisError("spectral power received no shots")
    acc = _SpectrumAccumulator(first, window_label)
    acc.add(first.samples)
    for rec in it:
        acc.add(rec.samples)
    return acc.result()


class _CrossCorrAccumulator:
    """Streaming complex mean and spread of the windowed cross-correlation."""

    def __init__(
        self,
        record: HeterodyneRecord,
        ase_label: str,
        rase_label: str,
        tau_step_s: float | None,
    ):
        dt = 1.0 / record.sample_rate
        if tau_step_s is not None and tau_step_s > dt * (1.0 + 1e-9):
            raise ConfigurationError(
                f"requested lag step {tau_step_s} s is coarser than 1/sample_rate"
            )
        a = record.sample_slice(ase_label)
        r = record.sample_slice(rase_label)
        if max(a.start, r.start) < min(a.stop, r.stop):
            raise AnalysisError("emission and recall windows must be disjoint")
        mask = record.sentinel_mask()
        if mask[a].any() or mask[r].any():
            raise AnalysisError("correlation windows are contaminated by sentinels")
        self._a, self._r = a, r
        self._dt = dt
        p0, p1 = record.window("pi2").sample_span(record.sample_rate)
        # Convolution bin s covers the continuous time-sum centered at
        # (a0 + r0 + s + 1) * dt; the reported origin is twice the
        # rephasing time, so an exactly mirrored pair peaks at lag zero.
        n_lags = (a.stop - a.start) + (r.stop - r.start) - 1
        time_sum = a.start + r.start + np.arange(n_lags) + 1
        self.tau = (time_sum - (p0 + p1)) * dt
        self._sum = np.zeros(n_lags, dtype=complex)
        self._sumsq_re = np.zeros(n_lags)
        self._sumsq_im = np.zeros(n_lags)
        self._shots = 0

    def add(self, z: np.ndarray) -> None:
        conv = fftconvolve(z[self._a], np.conj(z[self._r])) * self._dt
        self._sum += conv
        self._sumsq_re += conv.real**2
        self._sumsq_im += conv.imag**2
        self._shots += 1

    def result(self) -> CrossCorrelation:
        n = self._shots
        mean = self._sum / n
        var_re = self._sumsq_re / n - mean.real**2
        var_im = self._sumsq_im / n - mean.imag**2
        se = np.sqrt(np.clip(var_re + var_im, 0.0, None) / n)
        return CrossCorrelation(
            tau=self.tau, magnitude=np.abs(mean), std_error=se, n_shots=n
        )


def cross_correlation(
    shots: Iterable[HeterodyneRecord],
    ase_label: str = "ase",
    rase_label: str = "rase",
    tau_step_s: float | None = None,
) -> CrossCorrelation:
    """Shot-averaged cross-correlation of the windowed emission and recall.

    Per shot the discrete counterpart of ``integral z_a(t) z_r*(s - t) dt``
    is evaluated by FFT convolution with both signals zero outside their
    windows.  The complex correlations are averaged over shots and reported
    as a magnitude versus lag, with lag zero at the rephasing time; the
    per-lag standard error combines both quadratures of the complex mean.
    The product z_a z_r* cancels any global per-shot phase, so records need
    no phase referencing first.  ``shots`` may be any iterable.
    """
    it = iter(shots)
    first = next(it, None)
    if first is None:
        raise AnalysisError("cross correlation received no shots")
    acc = _CrossCorrAccumulator(first, ase_label, rase_label, tau_step_s)
    acc.add(first.samples)
    for rec in it:
        acc.add(rec.samples)
    return acc.result()


def project_modes(
    record: HeterodyneRecord, basis: TemporalModeBasis
) -> QuadratureSamples:
    """Extract measured quadrature quadruples for every temporal mode pair.

    ``x1 + i p1`` is the discrete unit-norm projection onto the emission
    mode; ``x2 + i p2`` is the *conjugate* of the projection onto the
    reflected partner, which realizes the time-reversed-conjugate pairing of
    the state model.
    """
    mask = record.sentinel_mask()
    inv_sqrt_m = 1.0 / np.sqrt(basis.tile_samples)
    z = record.samples
    n_modes = basis.n_modes
    x1 = np.empty(n_modes)
    p1 = np.empty(n_modes)
    x2 = np.empty(n_modes)
    p2 = np.empty(n_modes)
    for k in range(n_modes):
        fsl = basis.ase_slices[k]
        gsl = basis.rase_slices[k]
        if mask[fsl].any() or mask[gsl].any():
            raise AnalysisError(f"mode {k} overlaps a sentinel window")
        a = z[fsl].sum() * inv_sqrt_m
        r = np.conj(z[gsl].sum() * inv_sqrt_m)
        x1[k], p1[k] = a.real, a.imag
        x2[k], p2[k] = r.real, r.imag
    return QuadratureSamples(
        x1=x1,
        p1=p1,
        x2=x2,
        p2=p2,
        shot_index=np.full(n_modes, record.shot_index),
        mode_index=np.arange(n_modes),
    )


# ---------------------------------------------------------------------------
# EPR variance-sum estimation


def _product_columns(m: np.ndarray) -> np.ndarray:
    x1, p1, x2, p2 = m.T
    return np.column_stack(
        [m, x1 * x1, p1 * p1, x2 * x2, p2 * p2, x1 * x2, p1 * p2]
    )


def _s_from_stats(stats: np.ndarray, b_grid: np.ndarray, n: int) -> np.ndarray:
    """Evaluate S(b) from mean product columns; ddof-1 scaling applied."""
    means = stats[..., :4]
    sq = stats[..., 4:8]
    bias = n / (n - 1)
    var = (sq - means**2) * bias
    cov_x = (stats[..., 8] - means[..., 0] * means[..., 2]) * bias
    cov_p = (stats[..., 9] - means[..., 1] * means[..., 3]) * bias
    b = b_grid
    w = 2.0 * np.sqrt(b * (1.0 - b))
    return (
        np.multiply.outer(var[..., 0] + var[..., 1], b)
        + np.multiply.outer(var[..., 2] + var[..., 3], 1.0 - b)
        + np.multiply.outer(cov_x - cov_p, w)
    )


def _bootstrap_stats(
    columns: np.ndarray, n_resamples: int, rng: np.random.Generator
) -> np.ndarray:
    n = columns.shape[0]
    out = np.empty((n_resamples, columns.shape[1]))
    for r in range(n_resamples):
        idx = rng.integers(0, n, n)
        out[r] = columns[idx].mean(axis=0)
    return out


def _check_samples(samples: QuadratureSamples, minimum: int = 100) -> np.ndarray:
    if len(samples) < minimum:
        raise AnalysisError(
            f"need at least {minimum} samples, got {len(samples)}"
        )
    m = samples.as_matrix()
    if np.any(m.var(axis=0) < 1e-12):
        raise AnalysisError("degenerate samples: a quadrature has zero variance")
    return m


def inseparability_curve(
    samples: QuadratureSamples,
    b_grid: np.ndarray | None = None,
    confidence_level: float = 0.95,
    n_resamples: int = 1000,
    seed: int = 0,
) -> InseparabilityCurve:
    """Estimate S(b) over a weight grid with bootstrap confidence bands.

    Samples must come from a single temporal mode pair.  Bands are
    percentile intervals from ``n_resamples`` bootstrap resamples of whole
    shots, widened if necessary to bracket the point estimate; the 1-sigma
    band is the bootstrap standard deviation.
    """
    if np.unique(samples.mode_index).size > 1:
        raise AnalysisError("samples span multiple modes; filter with for_mode()")
    m = _check_samples(samples)
    if b_grid is None:
        b_grid = np.linspace(0.0, 1.0, 101)
    b_grid = np.asarray(b_grid, dtype=float)
    if np.any(b_grid < 0) or np.any(b_grid > 1):
        raise ValueError("b_grid must lie in [0, 1]")

    n = m.shape[0]
    columns = _product_columns(m)
    s_hat = _s_from_stats(columns.mean(axis=0), b_grid, n)

    rng = bootstrap_rng(seed)
    reps = _s_from_stats(_bootstrap_stats(columns, n_resamples, rng), b_grid, n)
    alpha = (1.0 - confidence_level) / 2.0
    ci_low = np.quantile(reps, alpha, axis=0)
    ci_high = np.quantile(reps, 1.0 - alpha, axis=0)
    return InseparabilityCurve(
        b_grid=b_grid,
        s_values=s_hat,
        ci_low=np.minimum(ci_low, s_hat),
        ci_high=np.maximum(ci_high, s_hat),
        sigma_band=reps.std(axis=0, ddof=1),
        n_samples=n,
        confidence_level=confidence_level,
    )


def dip_significance(
    samples: QuadratureSamples,
    b: float = 0.5,
    n_resamples: int = 2000,
    seed: int = 0,
) -> DipSignificance:
    """One-sided bootstrap significance of ``S(b) < 2`` at a fixed weight."""
    m = _check_samples(samples)
    n = m.shape[0]
    b_arr = np.array([float(b)])
    columns = _product_columns(m)
    s_hat = float(_s_from_stats(columns.mean(axis=0), b_arr, n)[0])
    rng = bootstrap_rng(seed)
    reps = _s_from_stats(_bootstrap_stats(columns, n_resamples, rng), b_arr, n)[:, 0]
    return DipSignificance(
        s_hat=s_hat,
        sigma=float(reps.std(ddof=1)),
        confidence_below_2=float(np.mean(reps < 2.0)),
        n_samples=n,
    )


# ---------------------------------------------------------------------------
# fits


def fit_exponential_decay(
    times: np.ndarray,
    values: np.ndarray,
    floor: float,
    mask: np.ndarray | None = None,
) -> tuple[float, float]:
    """Least-squares exponential decay time of a floored trace.

    Fits ``values - floor = A * exp(-t / tau)`` in the log domain over the
    unmasked points with positive excess.  Returns ``(tau, tau_se)``.

    Raises
    ------
    FitError
        If fewer than three usable points remain or the trend does not decay.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values - floor > 0
    if mask is not None:
        keep &= ~np.asarray(mask, dtype=bool)
    if keep.sum() < 3:
        raise FitError("fewer than 3 usable points above the floor")
    t = times[keep]
    y = np.log(values[keep] - floor)
    design = np.column_stack([t, np.ones_like(t)])
    coef, residuals, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope = coef[0]
    if slope >= 0:
        raise FitError("trace does not decay")
    dof = len(t) - 2
    if dof > 0 and residuals.size:
        sigma2 = float(residuals[0]) / dof
    else:
        sigma2 = 0.0
    cov = sigma2 * np.linalg.inv(design.T @ design)
    slope_se = float(np.sqrt(cov[0, 0]))
    tau = -1.0 / slope
    return tau, slope_se * tau**2


def fit_spectral_fwhm(
    frequencies: np.ndarray, power: np.ndarray
) -> tuple[float, float]:
    """Full width at half maximum of a spectral peak above a flat floor.

    The floor is the median power; the half-maximum crossings on either side
    of the peak are located by linear interpolation.  Returns
    ``(fwhm, fwhm_se)`` with the uncertainty propagated from the floor
    scatter through the local slopes.

    Raises
    ------
    FitError
        If no peak rises at least five floor-scatters above the floor.
    """
    f = np.asarray(frequencies, dtype=float)
    p = np.asarray(power, dtype=float)
    floor = float(np.median(p))
    noise = 1.4826 * float(np.median(np.abs(p - floor)))
    peak_i = int(np.argmax(p))
    height = p[peak_i] - floor
    if noise <= 0 or height < 5.0 * noise:
        raise FitError("no spectral peak above the floor")
    half = floor + height / 2.0

    def crossing(direction: int) -> tuple[float, float]:
        j = peak_i
        while 0 < j < len(p) - 1 and p[j + direction] > half:
            j += direction
        j_out = j + direction
        if j_out < 0 or j_out >= len(p):
            raise FitError("peak does not fall to half maximum inside the band")
        slope = (p[j_out] - p[j]) / (f[j_out] - f[j])
        freq = f[j] + (half - p[j]) / slope
        return freq, abs(noise / slope)

    f_right, se_right = crossing(+1)
    f_left, se_left = crossing(-1)
    fwhm = f_right - f_left
    return float(fwhm), float(np.hypot(se_left, se_right))


# ---------------------------------------------------------------------------
# streaming pipeline


@dataclass(frozen=True)
class AnalysisOptions:
    """Knobs of the full analysis pipeline."""

    b_grid_step: float = 0.01
    n_resamples: int = 1000
    confidence_level: float = 0.95
    trace_bin_s: float | None = None
    mode_index: int | None = None
    dip_weight: float = 0.5
    seed: int = 0

    def b_grid(self) -> np.ndarray:
        n = int(round(1.0 / self.b_grid_step))
        return np.linspace(0.0, 1.0, n + 1)


@dataclass
class AnalysisResult:
    """Everything the analysis chain extracts from one run."""

    scale: float
    vacuum_variance_sum: float
    trace: VarianceTrace
    fit_trace: VarianceTrace
    spectra: dict[str, Spectrum]
    crosscorr: CrossCorrelation
    samples: QuadratureSamples
    curve: InseparabilityCurve
    dip: DipSignificance
    mode_index: int
    ase_decay_tau: float | None = None
    ase_decay_tau_se: float | None = None
    ase_fwhm: float | None = None
    ase_fwhm_se: float | None = None

    def summary(self) -> dict[str, float]:
        b_star, s_star = self.curve.minimum()
        out = {
            "normalization_scale": self.scale,
            "vacuum_variance_sum": self.vacuum_variance_sum,
            "b_star": b_star,
            "s_star": s_star,
            "s_at_dip_weight": self.dip.s_hat,
            "s_sigma": self.dip.sigma,
            "confidence_below_2": self.dip.confidence_below_2,
            "n_shots": float(self.crosscorr.n_shots),
            "mode_index": float(self.mode_index),
        }
        if self.ase_decay_tau is not None:
            out["fitted_ase_tau_s"] = self.ase_decay_tau
            out["fitted_ase_tau_se_s"] = self.ase_decay_tau_se
        if self.ase_fwhm is not None:
            out["fitted_ase_fwhm_hz"] = self.ase_fwhm
            out["fitted_ase_fwhm_se_hz"] = self.ase_fwhm_se
        return out


def analyze_records(
    make_records: Callable[[], Iterable[HeterodyneRecord]],
    config: SequenceConfig,
    options: AnalysisOptions | None = None,
) -> AnalysisResult:
    """Run the full analysis chain over a (possibly streamed) run.

    ``make_records`` must return a fresh iterable of shots each time it is
    called; the pipeline makes one pass to fix the vacuum normalization and
    a second to accumulate all statistics, so runs far larger than memory
    can be analyzed.
    """
    options = options or AnalysisOptions()

    # Pass 1: global vacuum scale.
    var_sum, n_vac = _pooled_variance_sum(
        rec.samples[rec.sample_slice("vacuum")] for rec in make_records()
    )
    if n_vac < 1000:
        raise NormalizationError(
            f"vacuum window holds only {n_vac} samples across shots; need >= 1000"
        )
    if var_sum < 1e-6:
        raise NormalizationError(
            f"vacuum variance {var_sum:.3e} is below 1e-6 (dead input)"
        )
    scale = float(np.sqrt(2.0 / var_sum))

    basis = build_mode_basis(config)
    tile_s = basis.tile_samples / config.sample_rate
    trace_bin = options.trace_bin_s if options.trace_bin_s is not None else tile_s
    mode_index = (
        options.mode_index if options.mode_index is not None else config.n_modes - 1
    )
    if not 0 <= mode_index < config.n_modes:
        raise ConfigurationError(f"mode_index {mode_index} outside [0, {config.n_modes})")

    first = None
    trace_acc = None
    fit_acc = None
    spec_accs: dict[str, _SpectrumAccumulator] = {}
    corr_acc = None
    vac_sum = 0.0 + 0.0j
    vac_sumsq = 0.0
    vac_n = 0
    collected: list[QuadratureSamples] = []

    # Pass 2: rescale, phase-reference, accumulate everything.
    for rec in make_records():
        rec = replace(rec, samples=rec.samples * scale)
        rec = apply_phase_reference(rec)
        if first is None:
            first = rec
            mask = rec.sentinel_mask()
            n_samp = len(rec.samples)
            trace_acc = _TraceAccumulator(
                n_samp, rec.sample_rate, trace_bin, 0.0, mask
            )
            fit_acc = _TraceAccumulator(
                n_samp, rec.sample_rate, tile_s, rec.window("ase").start_s, mask
            )
            for label in ("vacuum", "ase", "rase"):
                spec_accs[label] = _SpectrumAccumulator(rec, label)
            corr_acc = _CrossCorrAccumulator(rec, "ase", "rase", None)
        z = rec.samples
        trace_acc.add(z)
        fit_acc.add(z)
        for acc in spec_accs.values():
            acc.add(z)
        corr_acc.add(z)
        zv = z[rec.sample_slice("vacuum")]
        vac_sum += zv.sum()
        vac_sumsq += float(np.sum(zv.real**2 + zv.imag**2))
        vac_n += zv.size
        collected.append(project_modes(rec, basis))

    if first is None:
        raise AnalysisError("run contained no shots")

    samples = QuadratureSamples(
        x1=np.concatenate([s.x1 for s in collected]),
        p1=np.concatenate([s.p1 for s in collected]),
        x2=np.concatenate([s.x2 for s in collected]),
        p2=np.concatenate([s.p2 for s in collected]),
        shot_index=np.concatenate([s.shot_index for s in collected]),
        mode_index=np.concatenate([s.mode_index for s in collected]),
    )
    mode_samples = samples.for_mode(mode_index)

    curve = inseparability_curve(
        mode_samples,
        options.b_grid(),
        options.confidence_level,
        options.n_resamples,
        options.seed,
    )
    dip = dip_significance(
        mode_samples, options.dip_weight, max(options.n_resamples, 1000), options.seed
    )

    vac_mean = vac_sum / vac_n
    vacuum_variance = vac_sumsq / vac_n - (vac_mean.real**2 + vac_mean.imag**2)

    result = AnalysisResult(
        scale=scale,
        vacuum_variance_sum=float(vacuum_variance),
        trace=trace_acc.result(),
        fit_trace=fit_acc.result(),
        spectra={label: acc.result() for label, acc in spec_accs.items()},
        crosscorr=corr_acc.result(),
        samples=samples,
        curve=curve,
        dip=dip,
        mode_index=mode_index,
    )

    # Decay and line-width fits are best-effort: a warm or gainless run has
    # no structure to fit and simply leaves the fields unset.
    ase_window = first.window("ase")
    fit_trace = result.fit_trace
    in_window = (fit_trace.times >= ase_window.start_s) & (
        fit_trace.times < ase_window.end_s
    )
    try:
        tau, tau_se = fit_exponential_decay(
            fit_trace.times[in_window] - ase_window.start_s,
            fit_trace.values[in_window],
            floor=result.vacuum_variance_sum,
            mask=fit_trace.sentinel[in_window],
        )
        result.ase_decay_tau = tau
        result.ase_decay_tau_se = tau_se
    except FitError:
        pass
    try:
        fwhm, fwhm_se = fit_spectral_fwhm(
            result.spectra["ase"].frequencies, result.spectra["ase"].power
        )
        result.ase_fwhm = fwhm
        result.ase_fwhm_se = fwhm_se
    except FitError:
        pass
    return result


def analyze_run(
    config: SequenceConfig, options: AnalysisOptions | None = None
) -> AnalysisResult:
    """Synthesize a run on the fly and analyze it (closed loop, streamed)."""
    from .sequence import iter_shots

    return analyze_records(lambda: iter_shots(config), config, options)
