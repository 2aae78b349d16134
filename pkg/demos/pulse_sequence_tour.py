"""Tour of one synthesized run: raw record, variance trace, window spectra.

Synthesizes a short optically-thick run, then walks the analysis chain the
way the command-line `analyze` does: normalize to the vacuum window, phase
reference, bin the variance trace (the inversion pulses show up as flagged
saturation spikes, the echo as a coherent transient), and compare the
window spectra.

Run:  python demos/pulse_sequence_tour.py   (writes demos/output/pulse_sequence_tour.svg)
"""

import dataclasses
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import rasesim as rs
from rasesim import presets

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# a trimmed thick run: enough shots for clean traces, quick to synthesize
seq = dataclasses.replace(presets.load_preset("thick").sequence, n_shots=1500)
shots, scale = rs.normalize_to_vacuum(rs.synthesize_run(seq))
shots = [rs.apply_phase_reference(rec) for rec in shots]
print(f"{seq.n_shots} shots, normalization scale {scale:.5f}")

fig, (ax_raw, ax_trace, ax_spec) = plt.subplots(3, 1, figsize=(9, 9))

# --- one raw record (real quadrature): tone, noise floor, pulses, echo
rec = shots[0]
t_us = np.arange(len(rec.samples)) / seq.sample_rate * 1e6
ax_raw.plot(t_us, rec.samples.real, lw=0.4)
for w in rec.windows:
    ax_raw.axvspan(
        w.start_s * 1e6,
        w.end_s * 1e6,
        color="tab:red" if w.sentinel else "tab:blue",
        alpha=0.15 if w.sentinel else 0.05,
    )
    ax_raw.text(
        (w.start_s + w.end_s) / 2 * 1e6, 40, w.label, ha="center", fontsize=7
    )
ax_raw.set_ylim(-50, 50)
ax_raw.set_xlabel("time (us)")
ax_raw.set_ylabel("Re z(t)")
ax_raw.set_title("one shot (clipped; pulse windows hold saturation sentinels)")

# --- variance trace across the run: gain decay between the pulses
basis = rs.build_mode_basis(seq)
trace = rs.variance_trace(shots, bin_width=basis.tile_samples / seq.sample_rate)
clean = ~trace.sentinel
ax_trace.semilogy(trace.times[clean] * 1e6, trace.values[clean], ".", ms=3)
ax_trace.axhline(2.0, color="gray", lw=0.8, label="vacuum floor")
tau, tau_se = rs.fit_exponential_decay(
    trace.times[clean] - seq.window("ase").start_s,
    trace.values[clean],
    floor=2.0,
    mask=~(
        (trace.times[clean] >= seq.window("ase").start_s)
        & (trace.times[clean] < seq.window("ase").end_s)
    ),
)
print(f"fitted emission decay time: {tau * 1e6:.0f} +- {tau_se * 1e6:.0f} us")
ax_trace.set_xlabel("time (us)")
ax_trace.set_ylabel("Var(x) + Var(p)")
ax_trace.set_title(f"variance trace; fitted decay {tau * 1e6:.0f} us")
ax_trace.legend(fontsize=8)

# --- spectra of the three quiet windows
for label in ("vacuum", "ase", "rase"):
    spec = rs.spectral_power(shots, label)
    ax_spec.semilogy(spec.frequencies / 1e3, spec.power, lw=0.8, label=label)
fwhm, _ = rs.fit_spectral_fwhm(
    rs.spectral_power(shots, "ase").frequencies,
    rs.spectral_power(shots, "ase").power,
)
print(f"emission spectral FWHM: {fwhm / 1e3:.0f} kHz")
ax_spec.set_xlabel("frequency (kHz)")
ax_spec.set_ylabel("power")
ax_spec.set_xlim(-600, 600)
ax_spec.set_title(f"window spectra; emission peak FWHM {fwhm / 1e3:.0f} kHz")
ax_spec.legend(fontsize=8)

fig.tight_layout()
target = out_dir / "pulse_sequence_tour.svg"
fig.savefig(target)
print(f"wrote {target}")
