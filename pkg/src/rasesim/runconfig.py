"""Plain-text `key = value` run configuration files.

Every physical quantity carries its unit in the key name (``..._us``,
``..._hz``, ``..._khz``, ``..._rad``, ``..._sigma``).  Unknown keys are
rejected so typos cannot silently fall back to defaults.  Lines starting
with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .analysis import AnalysisOptions
from .errors import ConfigurationError
from .gaussian import RasePhysicsParams
from .sequence import WINDOW_ORDER, SequenceConfig, Window

__all__ = ["RunConfig", "parse_config", "load_config", "dump_config"]

_US = 1e-6
_KHZ = 1e3


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigurationError(f"expected a boolean, got {raw!r}")


# key -> (converter, default); _REQUIRED means the key must be present.
_REQUIRED = object()
_SCHEMA: dict[str, tuple] = {
    "alpha_l": (float, _REQUIRED),
    "eta": (float, _REQUIRED),
    "excess": (float, 0.0),
    "sample_rate_hz": (float, _REQUIRED),
    "ase_decay_tau_us": (float, _REQUIRED),
    "t2_us": (float, _REQUIRED),
    "pulse_width_us": (float, _REQUIRED),
    "signal_bandwidth_khz": (float, _REQUIRED),
    "n_modes": (int, _REQUIRED),
    "n_shots": (int, _REQUIRED),
    "seed": (int, _REQUIRED),
    "warm": (_parse_bool, False),
    "pi2_enabled": (_parse_bool, True),
    "lo_phase_drift_rad": (float, 0.05),
    "reference_amplitude_sigma": (float, 20.0),
    "echo_amplitude_sigma": (float, 50.0),
    "b_grid_step": (float, 0.01),
    "bootstrap_resamples": (int, 1000),
    "confidence_level": (float, 0.95),
    "dip_weight": (float, 0.5),
    "trace_bin_us": (float, None),
    "analysis_mode_index": (int, None),
}
for _label in WINDOW_ORDER:
    _SCHEMA[f"window_{_label}_start_us"] = (float, _REQUIRED)
    _SCHEMA[f"window_{_label}_end_us"] = (float, _REQUIRED)


@dataclass(frozen=True)
class RunConfig:
    """A sequence configuration plus the analysis options of one run."""

    sequence: SequenceConfig
    b_grid_step: float = 0.01
    bootstrap_resamples: int = 1000
    confidence_level: float = 0.95
    dip_weight: float = 0.5
    trace_bin_us: float | None = None
    analysis_mode_index: int | None = None

    def analysis_options(self, seed: int | None = None) -> AnalysisOptions:
        return AnalysisOptions(
            b_grid_step=self.b_grid_step,
            n_resamples=self.bootstrap_resamples,
            confidence_level=self.confidence_level,
            trace_bin_s=None if self.trace_bin_us is None else self.trace_bin_us * _US,
            mode_index=self.analysis_mode_index,
            dip_weight=self.dip_weight,
            seed=self.sequence.seed if seed is None else seed,
        )


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse `key = value` text into a validated RunConfig."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(
                f"{source}:{lineno}: expected 'key = value', got {stripped!r}"
            )
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        convert = _SCHEMA[key][0]
        try:
            values[key] = convert(raw)
        except (ValueError, ConfigurationError) as exc:
            raise ConfigurationError(
                f"{source}:{lineno}: bad value for {key!r}: {exc}"
            ) from exc

    missing = [
        key
        for key, (_, default) in _SCHEMA.items()
        if default is _REQUIRED and key not in values
    ]
    if missing:
        raise ConfigurationError(f"{source}: missing required keys: {missing}")
    for key, (_, default) in _SCHEMA.items():
        values.setdefault(key, default)

    windows = tuple(
        Window(
            label,
            values[f"window_{label}_start_us"] * _US,
            values[f"window_{label}_end_us"] * _US,
        )
        for label in WINDOW_ORDER
    )
    sequence = SequenceConfig(
        sample_rate=values["sample_rate_hz"],
        windows=windows,
        physics=RasePhysicsParams(
            alpha_l=values["alpha_l"], eta=values["eta"], excess=values["excess"]
        ),
        ase_decay_tau=values["ase_decay_tau_us"] * _US,
        signal_bandwidth=values["signal_bandwidth_khz"] * _KHZ,
        t2=values["t2_us"] * _US,
        pulse_width=values["pulse_width_us"] * _US,
        n_modes=values["n_modes"],
        n_shots=values["n_shots"],
        seed=values["seed"],
        warm=values["warm"],
        lo_phase_drift=values["lo_phase_drift_rad"],
        pi2_enabled=values["pi2_enabled"],
        reference_amplitude=values["reference_amplitude_sigma"],
        echo_amplitude=values["echo_amplitude_sigma"],
    )
    return RunConfig(
        sequence=sequence,
        b_grid_step=values["b_grid_step"],
        bootstrap_resamples=values["bootstrap_resamples"],
        confidence_level=values["confidence_level"],
        dip_weight=values["dip_weight"],
        trace_bin_us=values["trace_bin_us"],
        analysis_mode_index=values["analysis_mode_index"],
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: RunConfig) -> str:
    """Serialize a RunConfig back to canonical `key = value` text."""
    seq = config.sequence
    values: dict[str, object] = {
        "alpha_l": seq.physics.alpha_l,
        "eta": seq.physics.eta,
        "excess": seq.physics.excess,
        "sample_rate_hz": seq.sample_rate,
        "ase_decay_tau_us": round(seq.ase_decay_tau / _US, 9),
        "t2_us": round(seq.t2 / _US, 9),
        "pulse_width_us": round(seq.pulse_width / _US, 9),
        "signal_bandwidth_khz": round(seq.signal_bandwidth / _KHZ, 9),
        "n_modes": seq.n_modes,
        "n_shots": seq.n_shots,
        "seed": seq.seed,
        "warm": seq.warm,
        "pi2_enabled": seq.pi2_enabled,
        "lo_phase_drift_rad": seq.lo_phase_drift,
        "reference_amplitude_sigma": seq.reference_amplitude,
        "echo_amplitude_sigma": seq.echo_amplitude,
        "b_grid_step": config.b_grid_step,
        "bootstrap_resamples": config.bootstrap_resamples,
        "confidence_level": config.confidence_level,
        "dip_weight": config.dip_weight,
    }
    for w in seq.windows:
        values[f"window_{w.label}_start_us"] = round(w.start_s / _US, 9)
        values[f"window_{w.label}_end_us"] = round(w.end_s / _US, 9)
    if config.trace_bin_us is not None:
        values["trace_bin_us"] = config.trace_bin_us
    if config.analysis_mode_index is not None:
        values["analysis_mode_index"] = config.analysis_mode_index
    lines = [f"{key} = {_format_value(values[key])}" for key in values]
    return "\n".join(lines) + "\n"
