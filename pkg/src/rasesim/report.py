"""Render SVG figures from the CSV artifacts written by `rasesim analyze`.

Rendering is presentation-only: every number comes from the CSVs.  Figures
are byte-reproducible for identical inputs (fixed SVG hash salt, no
embedded timestamps).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .errors import ShotFileFormatError  # noqa: E402

__all__ = ["render_report"]

_REQUIRED = ("variance_trace.csv", "crosscorr.csv", "inseparability.csv")

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _read_columns(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    data = list(reader)
    columns = {}
    for j, name in enumerate(header):
        columns[name] = np.array([float(row[j]) for row in data])
    return columns


def _new_figure():
    matplotlib.rcParams["svg.hashsalt"] = "rasesim"
    return plt.subplots(figsize=(6.0, 4.0))


def _render_variance_trace(columns, out: Path) -> None:
    fig, ax = _new_figure()
    t = columns["time_us"]
    v = columns["variance_sum"]
    sentinel = columns["sentinel"].astype(bool)
    ax.plot(t[~sentinel], v[~sentinel], ".", ms=3, color="tab:blue", label="signal")
    ax.plot(t[sentinel], v[sentinel], ".", ms=3, color="tab:red", label="sentinel bins")
    ax.axhline(2.0, color="gray", lw=0.8, ls="--", label="vacuum floor")
    ax.set_yscale("log")
    ax.set_xlabel("time (us)")
    ax.set_ylabel("Var(x) + Var(p)")
    ax.set_title("variance trace")
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(out, **_SAVE_KWARGS)
    plt.close(fig)


def _render_spectra(spectra: dict[str, dict], out: Path) -> None:
    fig, ax = _new_figure()
    for label, columns in sorted(spectra.items()):
        ax.plot(columns["frequency_khz"], columns["power"], lw=0.9, label=label)
    ax.axhline(2.0, color="gray", lw=0.8, ls="--")
    ax.set_yscale("log")
    ax.set_xlabel("frequency (kHz)")
    ax.set_ylabel("power")
    ax.set_title("window spectra")
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(out, **_SAVE_KWARGS)
    plt.close(fig)


def _render_crosscorr(columns, out: Path) -> None:
    fig, ax = _new_figure()
    tau = columns["tau_us"]
    mag = columns["magnitude"]
    se = columns["std_error"]
    ax.fill_between(tau, 0.0, 3.0 * se, color="0.85", label="3 SE")
    ax.plot(tau, mag, lw=0.9, color="tab:blue", label="|C(tau)|")
    ax.set_xlabel("lag from rephasing time (us)")
    ax.set_ylabel("|C|")
    ax.set_title("emission/recall cross-correlation")
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(out, **_SAVE_KWARGS)
    plt.close(fig)


def _render_inseparability(columns, out: Path) -> None:
    fig, ax = _new_figure()
    b = columns["b"]
    ax.fill_between(
        b, columns["ci_low"], columns["ci_high"], color="0.85", label="confidence band"
    )
    ax.plot(b, columns["s_hat"], lw=1.2, color="tab:blue", label="S(b)")
    ax.axhline(2.0, color="gray", lw=0.8, ls="--", label="separability bound")
    ax.set_xlabel("weight b")
    ax.set_ylabel("Var(u) + Var(v)")
    ax.set_title("inseparability curve")
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(out, **_SAVE_KWARGS)
    plt.close(fig)


def render_report(directory: Path) -> list[Path]:
    """Render the four figure SVGs from the CSVs in ``directory``.

    Raises
    ------
    ShotFileFormatError
        If required CSV artifacts are missing; the message lists them.
    """
    directory = Path(directory)
    spectrum_paths = sorted(directory.glob("spectrum_*.csv"))
    missing = [name for name in _REQUIRED if not (directory / name).exists()]
    if not spectrum_paths:
        missing.append("spectrum_<window>.csv")
    if missing:
        raise ShotFileFormatError(
            f"missing analysis artifacts in {directory}: {', '.join(missing)}"
        )

    written = []
    out = directory / "variance_trace.svg"
    _render_variance_trace(_read_columns(directory / "variance_trace.csv"), out)
    written.append(out)

    spectra = {
        p.stem.removeprefix("spectrum_"): _read_columns(p) for p in spectrum_paths
    }
    out = directory / "spectra.svg"
    _render_spectra(spectra, out)
    written.append(out)

    out = directory / "crosscorr.svg"
    _render_crosscorr(_read_columns(directory / "crosscorr.csv"), out)
    written.append(out)

    out = directory / "inseparability.svg"
    _render_inseparability(_read_columns(directory / "inseparability.csv"), out)
    written.append(out)
    return written
