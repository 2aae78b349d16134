"""Reader and writer for the RASEHET1 binary shot-record format.

Layout (all little-endian, independent of host byte order)::

    offset 0   magic            8 bytes, b"RASEHET1"
    offset 8   format version   u32
    offset 12  sample_rate_hz   f64
    offset 20  n_shots          u32
    offset 24  n_samples        u32
    offset 28  n_windows        u32
    offset 32  window table     n_windows * (16-byte zero-padded ASCII label,
                                start_sample u64, end_sample u64)
    then       payload          n_shots * n_samples complex samples, each an
                                (f64 re, f64 im) pair, shot-major

The fixed stride makes per-shot random access trivial, so any number of
readers can pull shots concurrently while a single writer appends.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ShotFileFormatError
from .sequence import HeterodyneRecord, Window

__all__ = ["MAGIC", "FORMAT_VERSION", "ShotFileWriter", "ShotFileReader", "write_run"]

MAGIC = b"RASEHET1"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<8sIdIII")
_WINDOW = struct.Struct("<16sQQ")
_SAMPLE_BYTES = 16  # one little-endian complex128

#: Window labels that hold saturation sentinels by convention.
DEFAULT_SENTINEL_LABELS = frozenset({"pi1", "pi2"})


@dataclass(frozen=True)
class FileWindow:
    label: str
    start_sample: int
    end_sample: int


def _encode_label(label: str) -> bytes:
    raw = label.encode("ascii")
    if len(raw) > 16:
        raise ShotFileFormatError(f"window label '{label}' exceeds 16 bytes")
    return raw.ljust(16, b"\x00")


class ShotFileWriter:
    """Single-owner, append-only writer; usable as a context manager."""

    def __init__(
        self,
        path: str | Path,
        sample_rate: float,
        n_shots: int,
        n_samples: int,
        windows: list[FileWindow] | tuple[FileWindow, ...],
    ):
        labels = [w.label for w in windows]
        if len(set(labels)) != len(labels):
            raise ShotFileFormatError(f"window labels are not unique: {labels}")
        for w in windows:
            if not 0 <= w.start_sample < w.end_sample <= n_samples:
                raise ShotFileFormatError(
                    f"window '{w.label}' [{w.start_sample}, {w.end_sample}) "
                    f"outside [0, {n_samples})"
                )
        self.path = Path(path)
        self.n_shots = n_shots
        self.n_samples = n_samples
        self._written = 0
        self._fh = open(self.path, "wb")
        self._fh.write(
            _HEADER.pack(
                MAGIC, FORMAT_VERSION, sample_rate, n_shots, n_samples, len(windows)
            )
        )
        for w in windows:
            self._fh.write(
                _WINDOW.pack(_encode_label(w.label), w.start_sample, w.end_sample)
            )

    def write_shot(self, samples: np.ndarray) -> None:
        if self._written >= self.n_shots:
            raise ShotFileFormatError(
                f"file already holds the declared {self.n_shots} shots"
            )
        arr = np.ascontiguousarray(samples, dtype="<c16")
        if arr.shape != (self.n_samples,):
            raise ShotFileFormatError(
                f"shot has {arr.shape} samples, header declares {self.n_samples}"
            )
        self._fh.write(arr.tobytes())
        self._written += 1

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.close()
        if self._written != self.n_shots:
            raise ShotFileFormatError(
                f"file declares {self.n_shots} shots but {self._written} were written"
            )

    def __enter__(self) -> "ShotFileWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self._fh.close()


class ShotFileReader:
    """Random-access reader; shots come back as HeterodyneRecord objects."""

    def __init__(
        self,
        path: str | Path,
        sentinel_labels: frozenset[str] | set[str] = DEFAULT_SENTINEL_LABELS,
    ):
        self.path = Path(path)
        self._sentinel_labels = frozenset(sentinel_labels)
        raw = self.path.read_bytes()
        if len(raw) < _HEADER.size:
            raise ShotFileFormatError(
                f"file truncated inside the header: {len(raw)} bytes, "
                f"need {_HEADER.size} (offset 0)"
            )
        magic, version, sample_rate, n_shots, n_samples, n_windows = _HEADER.unpack(
            raw[: _HEADER.size]
        )
        if magic != MAGIC:
            raise ShotFileFormatError(
                f"bad magic {magic!r} at offset 0, expected {MAGIC!r}"
            )
        if version != FORMAT_VERSION:
            raise ShotFileFormatError(
                f"unsupported format version {version} at offset 8"
            )
        table_end = _HEADER.size + n_windows * _WINDOW.size
        if len(raw) < table_end:
            raise ShotFileFormatError(
                f"file truncated inside the window table: {len(raw)} bytes, "
                f"need {table_end} (offset {_HEADER.size})"
            )
        windows = []
        for i in range(n_windows):
            off = _HEADER.size + i * _WINDOW.size
            label_raw, start, end = _WINDOW.unpack(raw[off : off + _WINDOW.size])
            label = label_raw.rstrip(b"\x00").decode("ascii")
            if not 0 <= start < end <= n_samples:
                raise ShotFileFormatError(
                    f"window '{label}' [{start}, {end}) outside [0, {n_samples}) "
                    f"(offset {off})"
                )
            windows.append(FileWindow(label, start, end))
        labels = [w.label for w in windows]
        if len(set(labels)) != len(labels):
            raise ShotFileFormatError(f"window labels are not unique: {labels}")

        expected_payload = n_shots * n_samples * _SAMPLE_BYTES
        actual_payload = len(raw) - table_end
        if actual_payload != expected_payload:
            raise ShotFileFormatError(
                f"payload holds {actual_payload} bytes but header declares "
                f"{expected_payload} (payload offset {table_end})"
            )

        self.sample_rate = sample_rate
        self.n_shots = n_shots
        self.n_samples = n_samples
        self.file_windows = tuple(windows)
        self._payload_offset = table_end
        self._shot_bytes = n_samples * _SAMPLE_BYTES

    def record_windows(self) -> tuple[Window, ...]:
        fs = self.sample_rate
        return tuple(
            Window(
                w.label,
                w.start_sample / fs,
                w.end_sample / fs,
                sentinel=w.label in self._sentinel_labels,
            )
            for w in self.file_windows
        )

    def __len__(self) -> int:
        return self.n_shots

    def shot_samples(self, index: int) -> np.ndarray:
        if not 0 <= index < self.n_shots:
            raise IndexError(index)
        offset = self._payload_offset + index * self._shot_bytes
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            buf = fh.read(self._shot_bytes)
        if len(buf) != self._shot_bytes:
            raise ShotFileFormatError(
                f"short read for shot {index} at offset {offset}"
            )
        return np.frombuffer(buf, dtype="<c16").astype(np.complex128)

    def __getitem__(self, index: int) -> HeterodyneRecord:
        return HeterodyneRecord(
            samples=self.shot_samples(index),
            sample_rate=self.sample_rate,
            windows=self.record_windows(),
            shot_index=index,
        )

    def __iter__(self) -> Iterator[HeterodyneRecord]:
        windows = self.record_windows()
        with open(self.path, "rb") as fh:
            fh.seek(self._payload_offset)
            for i in range(self.n_shots):
                buf = fh.read(self._shot_bytes)
                if len(buf) != self._shot_bytes:
                    raise ShotFileFormatError(f"short read for shot {i}")
                yield HeterodyneRecord(
                    samples=np.frombuffer(buf, dtype="<c16").astype(np.complex128),
                    sample_rate=self.sample_rate,
                    windows=windows,
                    shot_index=i,
                )


def write_run(path: str | Path, config, records: Iterator[HeterodyneRecord]) -> None:
    """Write an iterable of shots for ``config`` to ``path``."""
    fs = config.sample_rate
    windows = [
        FileWindow(w.label, *w.sample_span(fs)) for w in config.windows
    ]
    with ShotFileWriter(
        path, fs, config.n_shots, config.n_samples, windows
    ) as writer:
        for rec in records:
            writer.write_shot(rec.samples)
