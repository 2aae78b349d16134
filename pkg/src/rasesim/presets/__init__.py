"""Shipped run configurations for the standard operating points.

* ``thick``  - optically thick medium (alpha*l = 3.2), long emission window;
  the variance-trace and spectrum showcase.
* ``od025`` / ``od047`` / ``od078`` - intermediate optical depths with three
  temporal mode pairs; the cross-correlation family.
* ``od078_uncorrelated`` - od078 with the recall efficiency forced to zero;
  the no-correlation control at full gain.
* ``warm`` - warmed sample: no atomic coherence, vacuum-only records.
* ``thin`` - ultra-thin medium (alpha*l = 0.046), single temporal mode, the
  recall efficiency calibrated so the ideal-theory dip reaches 1.94.
"""

from __future__ import annotations

from importlib import resources

from ..errors import ConfigurationError
from ..runconfig import RunConfig, parse_config

__all__ = ["PRESET_NAMES", "preset_text", "load_preset"]

PRESET_NAMES = (
    "thick",
    "od025",
    "od047",
    "od078",
    "od078_uncorrelated",
    "warm",
    "thin",
)


def preset_text(name: str) -> str:
    """Raw config-file text of a shipped preset."""
    if name not in PRESET_NAMES:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )
    return (
        resources.files(__package__).joinpath(f"{name}.cfg").read_text()
    )


def load_preset(name: str) -> RunConfig:
    """Parse a shipped preset into a validated RunConfig."""
    return parse_config(preset_text(name), source=f"preset:{name}")
