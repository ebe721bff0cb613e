"""On-disk formats: FMX1 feature files, the stats text file, and PGM images.

FMX1 layout (little-endian):

    magic   4 bytes  "FMX1"
    version u16      1
    frames  u32      M
    chans   u32      C
    payload M*C float32, row-major (frame-major)

The stats file is text: a header line "SEMSTATS v1 C=<channels> N=<frames>"
followed by C lines of "<channel> <mean> <std>". Floats are written with
repr so a write/read/write cycle is byte-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .features import GlobalStats

FEATURE_MAGIC = b"FMX1"
FEATURE_VERSION = 1
_FEATURE_HEADER = struct.Struct("<4sHII")

STATS_HEADER_PREFIX = "SEMSTATS v1"


def save_features(path: str | Path, values: np.ndarray) -> None:
    """Write an (M, C) feature matrix as an FMX1 file."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise FormatError(f"feature matrix must be 2-D, got shape {values.shape}")
    frames, channels = values.shape
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    header = _FEATURE_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, frames, channels)
    Path(path).write_bytes(header + payload)


def load_features(path: str | Path) -> np.ndarray:
    """Read an FMX1 file back into an (M, C) float32 matrix."""
    blob = Path(path).read_bytes()
    if len(blob) < _FEATURE_HEADER.size:
        raise FormatError(f"{path}: shorter than the FMX1 header")
    magic, version, frames, channels = _FEATURE_HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = 4 * frames * channels
    payload = blob[_FEATURE_HEADER.size :]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4")
    return data.reshape(frames, channels)


def save_stats(path: str | Path, stats: GlobalStats) -> None:
    """Write global stats as the SEMSTATS text format."""
    lines = [f"{STATS_HEADER_PREFIX} C={stats.num_channels} N={stats.num_frames_seen}"]
    for channel in range(stats.num_channels):
        mean = repr(float(stats.mean[channel]))
        std = repr(float(stats.std[channel]))
        lines.append(f"{channel} {mean} {std}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def load_stats(path: str | Path) -> GlobalStats:
    """Parse a SEMSTATS file back into GlobalStats."""
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(STATS_HEADER_PREFIX):
        raise FormatError(f"{path}: missing '{STATS_HEADER_PREFIX}' header")
    fields = lines[0].split()
    try:
        channels = int(fields[2].removeprefix("C="))
        frames = int(fields[3].removeprefix("N="))
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed header {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != channels:
        raise FormatError(f"{path}: expected {channels} channel lines, got {len(body)}")
    mean = np.empty(channels)
    std = np.empty(channels)
    for i, line in enumerate(body):
        parts = line.split()
        if len(parts) != 3 or int(parts[0]) != i:
            raise FormatError(f"{path}: malformed channel line {line!r}")
        mean[i] = float(parts[1])
        std[i] = float(parts[2])
    if np.any(std <= 0):
        raise FormatError(f"{path}: std fields must be strictly positive")
    return GlobalStats(mean=mean, std=std, num_frames_seen=frames)


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write a 2-D uint8 array as a binary PGM (P5, maxval 255)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise FormatError(f"image must be 2-D, got shape {image.shape}")
    if image.dtype != np.uint8:
        raise FormatError(f"image must be uint8, got {image.dtype}")
    height, width = image.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(image).tobytes())
