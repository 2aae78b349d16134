"""Command-line front end: simulate, analyze, theory, report.

Exit codes are a stable contract for scripting:

* 0 - success
* 1 - usage or configuration errors
* 2 - data-format errors (malformed shot files, missing artifacts)
* 3 - numeric or calibration failures
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import presets as preset_registry
from .analysis import AnalysisResult, analyze_records
from .errors import (
    AnalysisError,
    CalibrationError,
    ConfigurationError,
    FitError,
    InvalidStateError,
    RaseSimError,
    ShotFileFormatError,
    SynthesisError,
)
from .gaussian import (
    RasePhysicsParams,
    ase_rase_state,
    calibrate_eta,
    heterodyne_map,
    inseparability_sum,
    min_inseparability,
)
from .runconfig import load_config
from .sequence import iter_shots
from .shotfile import ShotFileReader, write_run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

#: Refuse --csv exports larger than this many samples.
_CSV_EXPORT_LIMIT = 1_000_000


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors with exit code 1, not its default 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rasesim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize a run and write a shot file")
    p_sim.add_argument("--config", required=True, help="run configuration file")
    p_sim.add_argument("--out", required=True, help="output shot file path")
    p_sim.add_argument("--seed", type=int, default=None, help="override config seed")
    p_sim.add_argument(
        "--csv", default=None, help="also export samples as CSV (small runs only)"
    )

    p_an = sub.add_parser("analyze", help="run the analysis chain over a shot file")
    p_an.add_argument("--shots", required=True, help="input shot file")
    p_an.add_argument("--config", required=True, help="run configuration file")
    p_an.add_argument("--out-dir", required=True, help="directory for CSV artifacts")

    p_th = sub.add_parser("theory", help="analytic variance-sum curve")
    p_th.add_argument("--alpha-l", type=float, required=True)
    group = p_th.add_mutually_exclusive_group(required=True)
    group.add_argument("--eta", type=float, default=None)
    group.add_argument("--target-dip", type=float, default=None)
    p_th.add_argument("--excess", type=float, default=0.0)
    p_th.add_argument("--b-step", type=float, default=0.01)
    p_th.add_argument("--out", default=None, help="CSV path (default: stdout)")

    p_rep = sub.add_parser("report", help="render SVG figures from analyze output")
    p_rep.add_argument("--dir", required=True, help="directory holding the CSVs")

    p_pre = sub.add_parser("presets", help="list or export shipped presets")
    pre_sub = p_pre.add_subparsers(dest="preset_command", required=True)
    pre_sub.add_parser("list", help="list preset names")
    p_exp = pre_sub.add_parser("export", help="write a preset config file")
    p_exp.add_argument("name", choices=preset_registry.PRESET_NAMES)
    p_exp.add_argument("path", help="destination config path")
    return parser


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _cmd_simulate(args) -> int:
    run = load_config(args.config)
    seq = run.sequence
    if args.seed is not None:
        from dataclasses import replace

        seq = replace(seq, seed=args.seed)
    out = Path(args.out)
    write_run(out, seq, iter_shots(seq))

    print(f"shot file: {out}")
    print(f"sha256: {_sha256(out)}")
    print(
        f"alpha_l={seq.physics.alpha_l} eta={seq.physics.eta} "
        f"excess={seq.physics.excess} warm={seq.warm} pi2_enabled={seq.pi2_enabled}"
    )
    print(
        f"n_shots={seq.n_shots} n_samples={seq.n_samples} "
        f"sample_rate_hz={seq.sample_rate} seed={seq.seed} n_modes={seq.n_modes}"
    )

    if args.csv is not None:
        total = seq.n_shots * seq.n_samples
        if total > _CSV_EXPORT_LIMIT:
            raise ConfigurationError(
                f"--csv export refused: {total} samples exceed {_CSV_EXPORT_LIMIT}"
            )
        reader = ShotFileReader(out)
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["shot_index", "sample_index", "real", "imag"])
            for i in range(reader.n_shots):
                z = reader.shot_samples(i)
                for j in range(len(z)):
                    writer.writerow([i, j, _r(z[j].real), _r(z[j].imag)])
        print(f"csv export: {args.csv}")
    return EXIT_OK


def _r(value) -> str:
    """repr of a Python float: exact round-trip, no numpy scalar noise."""
    return repr(float(value))


def _write_csv(path: Path, header: list[str], rows, metadata: dict | None = None):
    with open(path, "w", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_analysis_csvs(result: AnalysisResult, out_dir: Path) -> list[Path]:
    """Emit the analyze CSV artifact set into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / "variance_trace.csv"
    trace = result.trace
    _write_csv(
        path,
        ["time_us", "variance_sum", "sentinel", "n_samples"],
        (
            [_r(t * 1e6), _r(v), int(s), int(c)]
            for t, v, s, c in zip(
                trace.times, trace.values, trace.sentinel, trace.counts
            )
        ),
    )
    written.append(path)

    for label, spectrum in result.spectra.items():
        path = out_dir / f"spectrum_{label}.csv"
        _write_csv(
            path,
            ["frequency_khz", "power"],
            (
                [_r(f / 1e3), _r(p)]
                for f, p in zip(spectrum.frequencies, spectrum.power)
            ),
            metadata={
                "window": label,
                "taper": spectrum.taper,
                "n_shots": spectrum.n_shots,
            },
        )
        written.append(path)

    path = out_dir / "crosscorr.csv"
    cc = result.crosscorr
    _write_csv(
        path,
        ["tau_us", "magnitude", "std_error"],
        (
            [_r(t * 1e6), _r(m), _r(s)]
            for t, m, s in zip(cc.tau, cc.magnitude, cc.std_error)
        ),
        metadata={
            "statistic": "magnitude of shot-averaged complex cross-correlation",
            "n_shots": cc.n_shots,
        },
    )
    written.append(path)

    path = out_dir / "inseparability.csv"
    curve = result.curve
    _write_csv(
        path,
        ["b", "s_hat", "ci_low", "ci_high", "sigma"],
        (
            [_r(b), _r(s), _r(lo), _r(hi), _r(sg)]
            for b, s, lo, hi, sg in zip(
                curve.b_grid,
                curve.s_values,
                curve.ci_low,
                curve.ci_high,
                curve.sigma_band,
            )
        ),
        metadata={
            "confidence_level": curve.confidence_level,
            "n_samples": curve.n_samples,
            "mode_index": result.mode_index,
        },
    )
    written.append(path)

    path = out_dir / "summary.csv"
    _write_csv(
        path,
        ["key", "value"],
        ([key, _r(value)] for key, value in result.summary().items()),
    )
    written.append(path)
    return written


def _cmd_analyze(args) -> int:
    run = load_config(args.config)
    seq = run.sequence
    reader = ShotFileReader(args.shots)
    if reader.n_samples != seq.n_samples:
        raise ShotFileFormatError(
            f"shot file has {reader.n_samples} samples per shot but the "
            f"configuration implies {seq.n_samples}"
        )
    if abs(reader.sample_rate - seq.sample_rate) > 1e-6:
        raise ShotFileFormatError(
            f"shot file sample rate {reader.sample_rate} differs from "
            f"configured {seq.sample_rate}"
        )
    result = analyze_records(lambda: iter(reader), seq, run.analysis_options())
    written = write_analysis_csvs(result, Path(args.out_dir))
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_theory(args) -> int:
    alpha_l = args.alpha_l
    excess = args.excess
    if args.target_dip is not None:
        eta = calibrate_eta(alpha_l, args.target_dip, excess=excess)
    else:
        eta = args.eta
    params = RasePhysicsParams(alpha_l=alpha_l, eta=eta, excess=excess)
    state = heterodyne_map(ase_rase_state(params))
    n = int(round(1.0 / args.b_step))
    b_grid = np.linspace(0.0, 1.0, n + 1)
    s_values = inseparability_sum(state, b_grid)
    b_star, s_star = min_inseparability(state)

    metadata = {
        "alpha_l": _r(alpha_l),
        "eta": _r(eta),
        "excess": _r(excess),
        "b_star": _r(b_star),
        "s_star": _r(s_star),
    }
    rows = [[_r(b), _r(s)] for b, s in zip(b_grid, s_values)]
    if args.out is None:
        for key, value in metadata.items():
            sys.stdout.write(f"# {key} = {value}\n")
        writer = csv.writer(sys.stdout)
        writer.writerow(["b", "s"])
        writer.writerows(rows)
    else:
        _write_csv(Path(args.out), ["b", "s"], rows, metadata=metadata)
        print(f"eta = {_r(eta)}")
        print(f"b_star = {_r(b_star)}")
        print(f"s_star = {_r(s_star)}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import render_report

    for path in render_report(Path(args.dir)):
        print(path)
    return EXIT_OK


def _cmd_presets(args) -> int:
    if args.preset_command == "list":
        for name in preset_registry.PRESET_NAMES:
            print(name)
        return EXIT_OK
    text = preset_registry.preset_text(args.name)
    Path(args.path).write_text(text)
    print(args.path)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "theory": _cmd_theory,
    "report": _cmd_report,
    "presets": _cmd_presets,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ShotFileFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CalibrationError, InvalidStateError, SynthesisError, AnalysisError, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RaseSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
