"""Raster frames, netpbm I/O and trace manifests.

Frames are stored as binary PGM (P5) or PPM (P6) with maxval 255.  A trace
manifest lists frame files, one per line, optionally followed by a TAB and a
``|``-separated set of ground-truth labels.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Iterator, List, Optional, Tuple

import numpy as np


class FrameFormatError(ValueError):
    """Base class for malformed frame files."""


class MalformedHeaderError(FrameFormatError):
    pass


class UnsupportedMaxvalError(FrameFormatError):
    pass


class TruncatedPayloadError(FrameFormatError):
    pass


class ManifestError(ValueError):
    pass


class EmptyManifestError(ManifestError):
    pass


class UnresolvablePathError(ManifestError):
    pass


class MalformedLineError(ManifestError):
    pass


@dataclass(frozen=True, eq=False)
class Frame:
    """A raster frame with 1 (gray) or 3 (RGB interleaved) channels.

    ``pixels`` is an ``(height, width, channels)`` uint8 array.  The array is
    marked read-only so frames can be shared between threads.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"frame must have 1 or 3 channels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame dimensions must be >= 1")
        px = np.array(px, dtype=np.uint8, order="C")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_bytes(cls, width: int, height: int, channels: int, data) -> "Frame":
        buf = np.frombuffer(bytes(data), dtype=np.uint8)
        if buf.size != width * height * channels:
            raise ValueError("pixel count does not match width*height*channels")
        return cls(buf.reshape(height, width, channels))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """Single-plane 8-bit image, ``pixels`` shaped ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"gray frame must be 2-D, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame dimensions must be >= 1")
        px = np.array(px, dtype=np.uint8, order="C")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, GrayFrame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


def _read_header_tokens(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last token.
    """
    tokens = []
    i, n = 0, len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i >= n:
            raise MalformedHeaderError("unexpected end of header")
        if data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        tokens.append(data[start:i])
    if i >= n or not data[i:i + 1].isspace():
        raise MalformedHeaderError("header must end with a single whitespace byte")
    return tokens, i


def parse_netpbm(data: bytes) -> Frame:
    tokens, end = _read_header_tokens(data, 4)
    magic = tokens[0]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise MalformedHeaderError(f"unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeaderError(f"non-integer header field: {exc}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"maxval must be 255, got {maxval}")
    need = width * height * channels
    payload = data[end + 1:]
    if len(payload) < need:
        raise TruncatedPayloadError(f"expected {need} payload bytes, found {len(payload)}")
    return Frame.from_bytes(width, height, channels, payload[:need])


def load_frame(path) -> Frame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"frame file not found: {path}")
    return parse_netpbm(path.read_bytes())


def encode_netpbm(frame: Frame) -> bytes:
    magic = "P5" if frame.channels == 1 else "P6"
    header = f"{magic}\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + frame.tobytes()


def store_frame(frame: Frame, path) -> None:
    Path(path).write_bytes(encode_netpbm(frame))


def to_grayscale(frame: Frame) -> GrayFrame:
    """BT.601 luma, rounded half-up and clamped to [0, 255]."""
    if frame.channels == 1:
        return GrayFrame(frame.pixels[:, :, 0])
    if frame.channels != 3:
        raise ValueError(f"unsupported channel count {frame.channels}")
    # integer weights keep the half-up rounding exact: 299 + 587 + 114 = 1000
    px = frame.pixels.astype(np.int64)
    acc = 299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2]
    luma = (acc + 500) // 1000
    return GrayFrame(np.clip(luma, 0, 255).astype(np.uint8))


def extract_channel(frame: Frame, index: int) -> GrayFrame:
    if not 0 <= index < frame.channels:
        raise IndexError(f"channel {index} out of range for {frame.channels}-channel frame")
    return GrayFrame(frame.pixels[:, :, index])


def resize_nearest(frame: GrayFrame, out_width: int, out_height: int) -> GrayFrame:
    """Center-aligned nearest-neighbour resampling.

    Output pixel ``i`` samples source index ``floor((i + 0.5) * src / dst)``.
    """
    if out_width < 1 or out_height < 1:
        raise ValueError("target dimensions must be >= 1")
    # exact integer form of floor((i + 0.5) * src / dst)
    rows = ((2 * np.arange(out_height) + 1) * frame.height) // (2 * out_height)
    cols = ((2 * np.arange(out_width) + 1) * frame.width) // (2 * out_width)
    return GrayFrame(frame.pixels[np.ix_(rows, cols)])


@dataclass(frozen=True)
class TraceEntry:
    path: Path
    labels: Optional[FrozenSet[str]] = None


@dataclass(frozen=True)
class TraceManifest:
    entries: Tuple[TraceEntry, ...]
    fps: float = 30.0

    def __post_init__(self):
        if not self.entries:
            raise EmptyManifestError("trace manifest has no entries")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    def __len__(self):
        return len(self.entries)

    def frames(self) -> Iterator[Tuple[Frame, Optional[FrozenSet[str]]]]:
        for entry in self.entries:
            yield load_frame(entry.path), entry.labels


def parse_manifest(text: str, base_dir) -> TraceManifest:
    base_dir = Path(base_dir)
    fps = 30.0
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        if line.startswith("#"):
            key = line[1:].strip()
            if key.startswith("fps="):
                if entries:
                    raise MalformedLineError(f"line {lineno}: fps directive must precede entries")
                try:
                    fps = float(key[4:])
                except ValueError:
                    raise MalformedLineError(f"line {lineno}: bad fps value {key[4:]!r}") from None
                if not fps > 0:
                    raise MalformedLineError(f"line {lineno}: fps must be positive")
            continue
        parts = line.split("\t")
        if len(parts) > 2 or not parts[0].strip():
            raise MalformedLineError(f"line {lineno}: expected '<path>[<TAB><labels>]'")
        rel = parts[0].strip()
        labels = None
        if len(parts) == 2:
            names = [s.strip() for s in parts[1].split("|")]
            if not all(names):
                raise MalformedLineError(f"line {lineno}: empty label in {parts[1]!r}")
            labels = frozenset(names)
        path = (base_dir / rel).resolve()
        if not path.is_file():
            raise UnresolvablePathError(f"line {lineno}: frame file not found: {rel}")
        entries.append(TraceEntry(path, labels))
    if not entries:
        raise EmptyManifestError("trace manifest has no entries")
    return TraceManifest(tuple(entries), fps)


def load_trace(manifest_path) -> TraceManifest:
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    text = manifest_path.read_text(encoding="utf-8")
    return parse_manifest(text, manifest_path.parent)


def write_manifest(path, rel_paths, labels=None, fps: float = 30.0) -> None:
    lines = [f"#fps={fps:g}"]
    for i, rel in enumerate(rel_paths):
        lab = labels[i] if labels is not None else None
        if lab:
            lines.append(f"{rel}\t{'|'.join(sorted(lab))}")
        else:
            lines.append(str(rel))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
