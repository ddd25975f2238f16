"""Gallery persistence: a little-endian, checksummed binary format.

Layout (all integers little-endian):

    magic   4 bytes  b"GSFT"
    u32     format version (currently 1)
    u64     detector config digest
    u32     entry count
    entries, each:
        u32 + UTF-8 bytes   subject_id
        u32 + UTF-8 bytes   image_id
        u32                 keypoint count
        keypoints, each: f32 x, y, scale, orientation + 128 x f32 descriptor
    u32     CRC-32 of every preceding byte

An empty gallery is exactly 24 bytes. Saving is deterministic:
rewriting an unchanged db yields byte-identical files. Edges are not
stored; the complete graph is implied and the diameter is recomputed
on load.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    ChecksumMismatch,
    StoreError,
    TruncatedFile,
    UnsupportedVersion,
)
from .facegraph import FaceGraph, build_graph
from .sift import Keypoint

MAGIC = b"GSFT"
FORMAT_VERSION = 1
_DESC_LEN = 128
_KP_STRUCT = struct.Struct("<ffff")


@dataclass(frozen=True)
class GalleryDb:
    """Loaded gallery: graphs plus the digest of the detector config
    that produced them. (subject_id, image_id) pairs must be unique."""

    detector_cfg_hash: int
    entries: tuple[FaceGraph, ...]
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        keys = [(g.subject_id, g.image_id) for g in self.entries]
        if len(set(keys)) != len(keys):
            raise StoreError("duplicate (subject_id, image_id) in gallery")

    def __len__(self) -> int:
        return len(self.entries)

    def subjects(self) -> list[str]:
        return sorted({g.subject_id for g in self.entries})


def merge(db: GalleryDb, graphs: list[FaceGraph]) -> GalleryDb:
    """New db with graphs appended; duplicate keys are rejected by the
    GalleryDb constructor."""
    return GalleryDb(
        detector_cfg_hash=db.detector_cfg_hash,
        entries=db.entries + tuple(graphs),
        format_version=db.format_version,
    )


def _encode_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save(db: GalleryDb, path: str | Path) -> None:
    parts = [
        MAGIC,
        struct.pack("<I", db.format_version),
        struct.pack("<Q", db.detector_cfg_hash),
        struct.pack("<I", len(db.entries)),
    ]
    for g in db.entries:
        parts.append(_encode_str(g.subject_id))
        parts.append(_encode_str(g.image_id))
        parts.append(struct.pack("<I", g.n_vertices))
        for kp in g.vertices:
            parts.append(_KP_STRUCT.pack(kp.x, kp.y, kp.scale, kp.orientation))
            parts.append(kp.descriptor.astype("<f4").tobytes())
    payload = b"".join(parts)
    payload += struct.pack("<I", zlib.crc32(payload))
    Path(path).write_bytes(payload)


class _Reader:
    def __init__(self, data: bytes, limit: int):
        self.data = data
        self.limit = limit
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > self.limit:
            raise TruncatedFile(f"needed {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos : end]
        self.pos = end
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def load(path: str | Path) -> GalleryDb:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise TruncatedFile(f"{len(data)} bytes is shorter than the magic")
    if data[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {data[:4]!r}")
    if len(data) < 24:
        raise TruncatedFile(f"{len(data)} bytes is shorter than a header")

    r = _Reader(data, len(data) - 4)
    r.take(4)  # magic
    version = r.u32()
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"version {version}, reader supports {FORMAT_VERSION}")
    cfg_hash = struct.unpack("<Q", r.take(8))[0]
    n_entries = r.u32()

    graphs = []
    for _ in range(n_entries):
        subject_id = r.text()
        image_id = r.text()
        n_kps = r.u32()
        kps = []
        for _ in range(n_kps):
            x, y, scale, orientation = _KP_STRUCT.unpack(r.take(_KP_STRUCT.size))
            desc = np.frombuffer(r.take(4 * _DESC_LEN), dtype="<f4").astype(
                np.float32
            )
            kps.append(Keypoint(x, y, scale, orientation, desc))
        graphs.append(build_graph(kps, subject_id, image_id))
    if r.pos != r.limit:
        raise TruncatedFile(
            f"{r.limit - r.pos} unexpected bytes between entries and checksum"
        )

    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        raise ChecksumMismatch("payload CRC does not match the stored value")
    return GalleryDb(
        detector_cfg_hash=cfg_hash,
        entries=tuple(graphs),
        format_version=version,
    )


def export_text(db: GalleryDb, path: str | Path) -> None:
    """Debug export, one keypoint per line:
    subject_id image_id x y scale orientation d0 ... d127
    (9 significant digits, enough to reproduce every float32 exactly).
    """
    lines = [
        "# subject_id image_id x y scale orientation d0..d127",
        f"# version {db.format_version} cfg {db.detector_cfg_hash:016x} "
        f"entries {len(db.entries)}",
    ]
    for g in db.entries:
        if " " in g.subject_id or " " in g.image_id:
            raise ValueError("ids with spaces cannot be exported as text")
        for kp in g.vertices:
            fields = [g.subject_id, g.image_id] + [
                format(v, ".9g")
                for v in (kp.x, kp.y, kp.scale, kp.orientation, *kp.descriptor)
            ]
            lines.append(" ".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")
