"""Binary stores for IQ frames, bit blocks and syndromes, plus CSV helpers.

All integers and floats are little-endian.

``.iqf``::

    magic    8s   b"SKGIQF01"
    version  u16
    node     u8   (0 Alice, 1 Bob, 2 Eve)
    count    u32  number of frames
    spf      u32  samples per frame
    bw       f64  bandwidth_hz
    fs       f64  sample_rate_hz
    payload  count * spf * (f32 real, f32 imag)

``.bits`` / ``.synd``::

    magic    8s   b"SKGBITS1" / b"SKGSYN01"
    count    u32
    nbits    u32  bits per block
    payload  count * ceil(nbits / 8) bytes, each block packed MSB-first and
             zero-padded to a byte boundary

Frames carry no explicit index: frame ``i`` of a store is frame index ``i``.
"""

from __future__ import annotations

import csv
import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .errors import (
    CorruptHeaderError,
    FormatError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .waveform import ChirpConfig, IQFrame, Node

IQF_MAGIC = b"SKGIQF01"
IQF_VERSION = 1
BITS_MAGIC = b"SKGBITS1"
SYND_MAGIC = b"SKGSYN01"

_IQF_HEADER = struct.Struct("<8sHBIIdd")
_BITS_HEADER = struct.Struct("<8sII")
_SAMPLE = np.dtype("<c8")


class FrameWriter:
    """Streaming writer for ``.iqf`` stores; the frame count is patched on close."""

    def __init__(self, path, node: Node, cfg: ChirpConfig):
        self.path = Path(path)
        self.node = Node(node)
        self.cfg = cfg
        self.count = 0
        self._fh = open(self.path, "wb")
        self._fh.write(self._header(0))

    def _header(self, count):
        return _IQF_HEADER.pack(
            IQF_MAGIC,
            IQF_VERSION,
            int(self.node),
            count,
            self.cfg.samples_per_frame,
            self.cfg.bandwidth_hz,
            self.cfg.sample_rate_hz,
        )

    def write(self, samples):
        """Append frames given as an ``(F, N)`` (or ``(N,)``) complex array."""
        samples = np.atleast_2d(np.asarray(samples))
        if samples.shape[1] != self.cfg.samples_per_frame:
            raise FormatError(
                f"frame length {samples.shape[1]} != samples_per_frame "
                f"{self.cfg.samples_per_frame}"
            )
        self._fh.write(samples.astype(_SAMPLE).tobytes())
        self.count += samples.shape[0]

    def close(self):
        if self._fh.closed:
            return
        self._fh.seek(0)
        self._fh.write(self._header(self.count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_frames(path, frames, cfg: ChirpConfig) -> None:
    """Write a sequence of :class:`IQFrame` from one node to ``path``."""
    frames = list(frames)
    nodes = {f.node for f in frames}
    if len(nodes) > 1:
        raise FormatError(f"frames from several nodes in one store: {sorted(nodes)}")
    lengths = {f.samples.shape for f in frames}
    if len(lengths) > 1:
        raise FormatError(f"heterogeneous frame lengths: {sorted(lengths)}")
    for position, frame in enumerate(frames):
        if frame.frame_index != position:
            raise FormatError(
                f"frame at position {position} has index {frame.frame_index}; "
                "stores hold consecutive frames starting at 0"
            )
    node = nodes.pop() if nodes else Node.ALICE
    with FrameWriter(path, node, cfg) as writer:
        if frames:
            writer.write(np.stack([f.samples for f in frames]))


def _read_iqf_header(fh, path):
    raw = fh.read(_IQF_HEADER.size)
    if len(raw) < _IQF_HEADER.size:
        raise CorruptHeaderError(f"{path}: header shorter than {_IQF_HEADER.size} bytes")
    magic, version, node, count, spf, bw, fs = _IQF_HEADER.unpack(raw)
    if magic != IQF_MAGIC:
        raise CorruptHeaderError(f"{path}: bad magic {magic!r}")
    if version != IQF_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {IQF_VERSION}")
    if node not in (0, 1, 2):
        raise CorruptHeaderError(f"{path}: unknown node id {node}")
    if spf == 0 or not (bw > 0 and fs > 0):
        raise CorruptHeaderError(f"{path}: invalid chirp parameters in header")
    # the header stores no symbol duration; spf / fs recovers it to within one sample
    cfg = ChirpConfig(bandwidth_hz=bw, symbol_duration_s=spf / fs, sample_rate_hz=fs)
    if cfg.samples_per_frame != spf:
        raise CorruptHeaderError(f"{path}: inconsistent samples_per_frame {spf}")
    return Node(node), count, cfg


def read_frame_array(path):
    """Load a store as ``(node, cfg, samples)`` with ``samples`` shaped ``(F, N)``."""
    path = Path(path)
    with open(path, "rb") as fh:
        node, count, cfg = _read_iqf_header(fh, path)
        spf = cfg.samples_per_frame
        expected = count * spf * _SAMPLE.itemsize
        payload = fh.read(expected)
        if len(payload) < expected:
            raise TruncatedPayloadError(
                f"{path}: payload has {len(payload)} bytes, header promises {expected}"
            )
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after payload")
    samples = np.frombuffer(payload, dtype=_SAMPLE).reshape(count, spf)
    return node, cfg, samples.astype(np.complex64)


def read_frames(path):
    """Inverse of :func:`write_frames`; returns ``(cfg, [IQFrame, ...])``."""
    node, cfg, samples = read_frame_array(path)
    return cfg, [IQFrame(node, i, samples[i]) for i in range(samples.shape[0])]


def _write_blocks(path, magic, blocks):
    blocks = np.asarray(blocks, dtype=np.uint8)
    if blocks.ndim != 2:
        raise FormatError("bit blocks must form a 2-D array (blocks x bits)")
    if blocks.size and blocks.max(initial=0) > 1:
        raise FormatError("bit blocks may only contain 0 and 1")
    count, nbits = blocks.shape
    with open(path, "wb") as fh:
        fh.write(_BITS_HEADER.pack(magic, count, nbits))
        fh.write(np.packbits(blocks, axis=1, bitorder="big").tobytes())


def _read_blocks(path, magic):
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _BITS_HEADER.size:
        raise CorruptHeaderError(f"{path}: header shorter than {_BITS_HEADER.size} bytes")
    found, count, nbits = _BITS_HEADER.unpack_from(data)
    if found != magic:
        raise CorruptHeaderError(f"{path}: bad magic {found!r}, expected {magic!r}")
    stride = (nbits + 7) // 8
    payload = data[_BITS_HEADER.size :]
    if len(payload) < count * stride:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(payload)} bytes, header promises {count * stride}"
        )
    if len(payload) > count * stride:
        raise FormatError(f"{path}: trailing bytes after payload")
    packed = np.frombuffer(payload, dtype=np.uint8).reshape(count, stride)
    return np.unpackbits(packed, axis=1, count=nbits, bitorder="big")


def write_bits(path, blocks) -> None:
    """Write an ``(F, nbits)`` 0/1 array as a ``.bits`` store."""
    _write_blocks(path, BITS_MAGIC, blocks)


def read_bits(path) -> np.ndarray:
    return _read_blocks(path, BITS_MAGIC)


def write_syndromes(path, syndromes) -> None:
    _write_blocks(path, SYND_MAGIC, syndromes)


def read_syndromes(path) -> np.ndarray:
    return _read_blocks(path, SYND_MAGIC)


def write_power_csv(path, powers, node: Node, frame_indices=None) -> None:
    """One row per frame: node, frame_index and the K subband powers.

    Values are written with 17 significant digits so they read back exactly.
    """
    powers = np.atleast_2d(np.asarray(powers, dtype=float))
    if frame_indices is None:
        frame_indices = range(powers.shape[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "frame_index"] + [f"p{k + 1}" for k in range(powers.shape[1])])
        for idx, row in zip(frame_indices, powers):
            writer.writerow([Node(node).name.lower(), idx] + [f"{v:.17g}" for v in row])


def read_power_csv(path):
    """Return ``(node, frame_indices, powers)`` from :func:`write_power_csv` output."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["node", "frame_index"]:
            raise FormatError(f"{path}: not a power CSV")
        rows = list(reader)
    if not rows:
        return None, np.zeros(0, dtype=int), np.zeros((0, len(header) - 2))
    nodes = {r[0] for r in rows}
    if len(nodes) != 1:
        raise FormatError(f"{path}: rows from several nodes")
    node = Node[nodes.pop().upper()]
    indices = np.array([int(r[1]) for r in rows])
    powers = np.array([[float(v) for v in r[2:]] for r in rows])
    return node, indices, powers


def write_csv(path, rows, columns) -> None:
    """Plain CSV report writer used by the reconcile, entropy and eval stages."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k, "")) for k in columns})


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return value


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
