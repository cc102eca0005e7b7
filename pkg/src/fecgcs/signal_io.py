"""Recordings, windowing and the compressed payload file format.

Recording files are plain CSV: one row per time sample, one column per
channel, '.' as the radix, no header unless ``header=True``. Values are
written with ``repr`` so that a save/load round trip is bit-exact.

Payload files start with a one-line JSON descriptor::

    {"seed": 7, "M": 256, "N": 512, "d": 12, "channel": 0, "pad_tail": 0}

followed by one CSV row of length M per compressed window.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

PathLike = Union[str, Path]

_PAYLOAD_KEYS = ("seed", "M", "N", "d", "channel", "pad_tail")


class FormatError(ValueError):
    """A recording or payload file does not follow the expected layout."""


@dataclass(frozen=True, eq=False)
class MultichannelRecording:
    """Channels x samples matrix with its sampling rate."""

    data: np.ndarray
    sampling_rate_hz: float

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"recording must be a non-empty 2-D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("recording contains NaN or Inf")
        if not self.sampling_rate_hz > 0:
            raise ValueError(f"sampling rate must be positive, got {self.sampling_rate_hz}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sampling_rate_hz", float(self.sampling_rate_hz))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, MultichannelRecording):
            return NotImplemented
        return (self.sampling_rate_hz == other.sampling_rate_hz
                and np.array_equal(self.data, other.data))


def load_recording(path: PathLike, sampling_rate_hz: float, header: bool = False) -> MultichannelRecording:
    """Read a CSV recording (rows are samples, columns are channels).

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    FormatError
        On an empty file, ragged rows or a non-numeric cell (the message
        carries the 1-based row and column).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"recording not found: {path}")
    rows = []
    width = None
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FormatError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise FormatError(
                        f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col}") from None
            rows.append(values)
    if not rows:
        raise FormatError(f"{path}: no samples")
    return MultichannelRecording(np.array(rows).T, sampling_rate_hz)


def save_recording(rec: MultichannelRecording, path: PathLike) -> None:
    """Write ``rec`` as CSV; ``load_recording`` reproduces it exactly."""
    _write_matrix(Path(path), rec.data.T)


def _write_matrix(path: Path, rows: np.ndarray, preamble: str = "") -> None:
    with path.open("w", newline="") as fh:
        fh.write(preamble)
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def save_matrix(matrix: np.ndarray, path: PathLike) -> None:
    """Write a 2-D array as header-less CSV, one array row per line."""
    _write_matrix(Path(path), np.atleast_2d(np.asarray(matrix, dtype=np.float64)))


def downsample(rec: MultichannelRecording, factor: int) -> MultichannelRecording:
    """Keep every ``factor``-th sample starting at 0 (no anti-alias filter)."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"downsampling factor must be a positive integer, got {factor}")
    factor = int(factor)
    return MultichannelRecording(rec.data[:, ::factor], rec.sampling_rate_hz / factor)


@dataclass(frozen=True, eq=False)
class SegmentedChannel:
    """One channel cut into windows of equal length.

    ``windows`` has shape (n_windows, window_length); the last ``pad_tail``
    entries of the final window are zero padding.
    """

    windows: np.ndarray
    window_length: int
    pad_tail: int

    def __post_init__(self):
        if self.window_length < 1:
            raise ValueError(f"window length must be >= 1, got {self.window_length}")
        w = np.asarray(self.windows, dtype=np.float64).reshape(-1, self.window_length)
        if not 0 <= self.pad_tail < self.window_length:
            raise ValueError(f"pad_tail {self.pad_tail} out of range for window {self.window_length}")
        object.__setattr__(self, "windows", w)

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]


def segment_channel(channel, window_length: int) -> SegmentedChannel:
    """Split a 1-D signal into ``ceil(len / window_length)`` windows.

    The final window is zero padded; the pad length is kept so that
    :func:`desegment` can trim it.
    """
    x = np.asarray(channel, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("cannot segment an empty channel")
    if window_length < 1:
        raise ValueError(f"window length must be >= 1, got {window_length}")
    n_windows = math.ceil(x.size / window_length)
    pad = n_windows * window_length - x.size
    padded = np.concatenate([x, np.zeros(pad)])
    return SegmentedChannel(padded.reshape(n_windows, window_length), window_length, pad)


def desegment(seg: SegmentedChannel) -> np.ndarray:
    """Concatenate windows and drop the tail padding."""
    flat = seg.windows.ravel()
    return flat[:flat.size - seg.pad_tail] if seg.pad_tail else flat.copy()


@dataclass(frozen=True, eq=False)
class CompressedPayload:
    """Compressed windows of one channel plus what is needed to rebuild Phi.

    ``seed`` is the seed that directly generates the sensing matrix (the
    accepted seed after any rank retries), so regenerating with
    ``generate_matrix(M, N, d, seed)`` succeeds on the first draw.
    """

    segments: np.ndarray
    seed: int
    M: int
    N: int
    d: int
    channel: int = 0
    pad_tail: int = 0

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=np.float64)
        if seg.size == 0:
            seg = seg.reshape(0, self.M)
        if seg.ndim != 2 or seg.shape[1] != self.M:
            raise FormatError(f"payload segments must have {self.M} entries each, got shape {seg.shape}")
        if not 1 <= self.M <= self.N:
            raise FormatError(f"payload needs 1 <= M <= N, got M={self.M}, N={self.N}")
        if not 1 <= self.d <= self.M:
            raise FormatError(f"payload needs 1 <= d <= M, got d={self.d}")
        if not 0 <= self.pad_tail < self.N:
            raise FormatError(f"pad_tail {self.pad_tail} out of range")
        object.__setattr__(self, "segments", seg)

    @property
    def window_length(self) -> int:
        return self.N

    @property
    def n_windows(self) -> int:
        return self.segments.shape[0]

    def descriptor(self) -> dict:
        return {"seed": int(self.seed), "M": int(self.M), "N": int(self.N), "d": int(self.d),
                "channel": int(self.channel), "pad_tail": int(self.pad_tail)}

    def __eq__(self, other):
        if not isinstance(other, CompressedPayload):
            return NotImplemented
        return (self.descriptor() == other.descriptor()
                and np.array_equal(self.segments, other.segments))


def save_payload(payload: CompressedPayload, path: PathLike) -> None:
    """Write the JSON descriptor line followed by one CSV row per window."""
    header = json.dumps(payload.descriptor(), separators=(",", ":")) + "\n"
    _write_matrix(Path(path), payload.segments, preamble=header)


def load_payload(path: PathLike) -> CompressedPayload:
    """Read a payload written by :func:`save_payload`.

    Raises
    ------
    FormatError
        If the descriptor is malformed or a row length disagrees with M.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline()
        try:
            desc = json.loads(first)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad payload header: {exc}") from None
        if not isinstance(desc, dict) or any(k not in desc for k in _PAYLOAD_KEYS):
            raise FormatError(f"{path}: payload header must contain keys {_PAYLOAD_KEYS}")
        for key in _PAYLOAD_KEYS:
            if not isinstance(desc[key], int) or isinstance(desc[key], bool):
                raise FormatError(f"{path}: payload field {key!r} must be an integer")
        M = desc["M"]
        rows = []
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row:
                continue
            if len(row) != M:
                raise FormatError(f"{path}: line {lineno} has {len(row)} values, descriptor says M={M}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise FormatError(f"{path}: non-numeric value on line {lineno}") from None
    segments = np.array(rows, dtype=np.float64).reshape(len(rows), M)
    return CompressedPayload(segments, **{k: desc[k] for k in _PAYLOAD_KEYS})
