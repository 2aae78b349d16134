"""rasesim: Gaussian-model simulation and analysis of rephased-emission heterodyne runs.

The package closes a loop: :mod:`rasesim.gaussian` defines the two-mode
Gaussian physics, :mod:`rasesim.sequence` embeds it into per-shot complex
heterodyne records for the full pulse sequence, and :mod:`rasesim.analysis`
recovers variance traces, spectra, cross-correlations and weighted EPR
variance curves with bootstrap confidence from those records.
:mod:`rasesim.cli` ties the stages together behind `simulate`, `analyze`,
`theory` and `report` subcommands.
"""

from .analysis import (
    AnalysisOptions,
    AnalysisResult,
    CrossCorrelation,
    DipSignificance,
    InseparabilityCurve,
    QuadratureSamples,
    Spectrum,
    VarianceTrace,
    analyze_records,
    analyze_run,
    apply_phase_reference,
    cross_correlation,
    dip_significance,
    fit_exponential_decay,
    fit_spectral_fwhm,
    inseparability_curve,
    normalize_to_vacuum,
    project_modes,
    spectral_power,
    variance_trace,
)
from .gaussian import (
    Convention,
    PhysicalityReport,
    RasePhysicsParams,
    TwoModeGaussianState,
    amplifier_gain,
    ase_rase_state,
    calibrate_eta,
    check_physicality,
    heterodyne_map,
    inseparability_sum,
    min_inseparability,
    sample_quadratures,
    vacuum_state,
)
from .runconfig import RunConfig, dump_config, load_config, parse_config
from .sequence import (
    HeterodyneRecord,
    SequenceConfig,
    TemporalModeBasis,
    Window,
    build_mode_basis,
    iter_shots,
    mode_physics,
    standard_windows,
    synthesize_run,
    synthesize_shot,
)
from .shotfile import ShotFileReader, ShotFileWriter, write_run

__version__ = "0.1.0"
