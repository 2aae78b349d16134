"""Exception hierarchy shared by the rasesim package."""


class RaseSimError(Exception):
    """Base class for all rasesim-specific errors."""


class ConventionError(RaseSimError):
    """A state was used in the wrong unit convention (intrinsic vs measured)."""


class InvalidStateError(RaseSimError):
    """A covariance matrix violates physicality or positive semidefiniteness."""


class CalibrationError(RaseSimError):
    """A requested calibration target is outside the attainable range."""


class ConfigurationError(RaseSimError):
    """A sequence or run configuration is inconsistent or out of range."""


class SynthesisError(RaseSimError):
    """Shot synthesis could not realize the requested statistics."""


class AnalysisError(RaseSimError):
    """An analysis operation received unusable input."""


class NormalizationError(AnalysisError):
    """Vacuum normalization failed (dead input or too few samples)."""


class FitError(AnalysisError):
    """A decay or line-width fit found no usable structure."""


class ShotFileFormatError(RaseSimError):
    """A shot file is malformed (bad magic, truncation, bad window table)."""
