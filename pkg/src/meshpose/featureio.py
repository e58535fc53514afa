"""Feature-map and mask types with bit-exact on-disk formats, plus corpus
manifests.

Binary layouts (all integers little-endian):

  .fmap   magic "FMAP" | u16 version (=1) | u16 reserved (=0) | u32 H | u32 W
          | u32 C | H*W*C float32 payload, row-major, channel-fastest
  .msk    magic "MSK1" | u16 H | u16 W | H*W bytes (canonical writer emits
          0/1; any nonzero byte reads as foreground)

Feature cells are unit L2-normalized at load; all-zero cells are padding and
stay zero. H and W are capped at 2^16 per side.

Manifests are line-oriented text: tab-separated fields, '#' comments, blank
lines ignored. Columns: image_id, feature_path, mask_path ('-' when absent),
and optionally azimuth/elevation/theta/distance of a ground-truth pose used
for evaluation only. Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    BadDimensionsError,
    BadMagicError,
    DataError,
    FormatError,
    TruncatedFileError,
    ValidationError,
)
from .geometry import Pose

FMAP_MAGIC = b"FMAP"
MSK_MAGIC = b"MSK1"
MAX_SIDE = 1 << 16

# cells whose pre-normalization norm deviates beyond this count as corrected
NORM_TOL = 1e-6


@dataclass
class FeatureMap:
    """Dense H x W x C grid of unit (or all-zero) float32 feature vectors."""

    data: np.ndarray
    norm_corrections: int = 0  # cells whose norm was fixed at load
    max_norm_correction: float = 0.0  # max |norm - 1| seen before fixing

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValidationError(f"feature map must be (H, W, C) > 0, got {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class ForegroundMask:
    """Binary H x W foreground/background partition."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)
        if self.bits.ndim != 2:
            raise ValidationError(f"mask must be (H, W), got {self.bits.shape}")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def foreground_count(self) -> int:
        return int(self.bits.sum())


def normalize_cells(data: np.ndarray) -> tuple[np.ndarray, int, float]:
    """Unit-normalize cell vectors whose norm deviates beyond NORM_TOL; zero
    cells are padding and cells already unit within tolerance are left
    bit-for-bit untouched (round-trips must be byte-identical).

    Returns (float32 array, corrected cell count, max |norm - 1| observed
    before normalization).
    """
    d32 = np.asarray(data, dtype=np.float32)
    d = d32.astype(np.float64)
    norms = np.linalg.norm(d, axis=-1)
    nonzero = norms > 0.0
    dev = np.where(nonzero, np.abs(norms - 1.0), 0.0)
    fix = dev > NORM_TOL
    corrected = int(fix.sum())
    max_dev = float(dev.max()) if dev.size else 0.0
    if not corrected:
        return d32.copy(), 0, max_dev
    out = d.copy()
    out[fix] /= norms[fix][..., None]
    return out.astype(np.float32), corrected, max_dev


# ---------------------------------------------------------------------------
# .fmap
# ---------------------------------------------------------------------------


def write_feature_map(fmap: FeatureMap, path) -> None:
    h, w, c = fmap.data.shape
    if h >= MAX_SIDE or w >= MAX_SIDE:
        raise BadDimensionsError(f"feature map sides must be < {MAX_SIDE}, got {h}x{w}")
    header = FMAP_MAGIC + struct.pack("<HHIII", 1, 0, h, w, c)
    payload = fmap.data.astype("<f4", copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_feature_map(path) -> FeatureMap:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != FMAP_MAGIC:
        raise BadMagicError(f"{path}: not a feature map file (bad magic)")
    if len(raw) < 20:
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} bytes)")
    version, _reserved, h, w, c = struct.unpack("<HHIII", raw[4:20])
    if version != 1:
        raise FormatError(f"{path}: unsupported feature map version {version}")
    if not (0 < h < MAX_SIDE) or not (0 < w < MAX_SIDE):
        raise BadDimensionsError(f"{path}: dimensions {h}x{w} outside (0, {MAX_SIDE})")
    if c < 1:
        raise BadDimensionsError(f"{path}: channel count must be >= 1, got {c}")
    expected = 20 + h * w * c * 4
    if len(raw) < expected:
        raise TruncatedFileError(
            f"{path}: payload truncated ({len(raw)} bytes, expected {expected})"
        )
    if len(raw) > expected:
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes after payload")
    data = np.frombuffer(raw, dtype="<f4", count=h * w * c, offset=20).reshape(h, w, c)
    normed, corrected, max_dev = normalize_cells(data)
    return FeatureMap(normed, norm_corrections=corrected, max_norm_correction=max_dev)


# ---------------------------------------------------------------------------
# .msk
# ---------------------------------------------------------------------------


def write_mask(mask: ForegroundMask, path) -> None:
    h, w = mask.bits.shape
    if h >= MAX_SIDE or w >= MAX_SIDE:
        raise BadDimensionsError(f"mask sides must be < {MAX_SIDE}, got {h}x{w}")
    header = MSK_MAGIC + struct.pack("<HH", h, w)
    Path(path).write_bytes(header + mask.bits.astype(np.uint8).tobytes(order="C"))


def read_mask(path, expected_h: Optional[int] = None, expected_w: Optional[int] = None) -> ForegroundMask:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != MSK_MAGIC:
        raise BadMagicError(f"{path}: not a mask file (bad magic)")
    if len(raw) < 8:
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} bytes)")
    h, w = struct.unpack("<HH", raw[4:8])
    if h < 1 or w < 1:
        raise BadDimensionsError(f"{path}: mask dimensions {h}x{w} must be positive")
    if len(raw) < 8 + h * w:
        raise TruncatedFileError(f"{path}: payload truncated ({len(raw)} bytes)")
    if expected_h is not None and (h, w) != (expected_h, expected_w):
        raise ValidationError(
            f"{path}: mask is {h}x{w} but the paired feature map is "
            f"{expected_h}x{expected_w}"
        )
    bits = np.frombuffer(raw, dtype=np.uint8, count=h * w, offset=8).reshape(h, w) != 0
    return ForegroundMask(bits)


def activation_mask(fmap: FeatureMap, vertex_features: np.ndarray,
                    background_feature: np.ndarray, threshold: float = 0.5) -> ForegroundMask:
    """Foreground = cells whose best vertex similarity beats both the
    background similarity and the threshold. Fallback when no externally
    produced mask is available."""
    vf = np.asarray(vertex_features, dtype=np.float64)
    bg = np.asarray(background_feature, dtype=np.float64)
    if vf.ndim != 2 or vf.shape[1] != fmap.channels or bg.shape != (fmap.channels,):
        raise ValidationError(
            f"channel mismatch: map has {fmap.channels}, vertex features "
            f"{vf.shape}, background {bg.shape}"
        )
    flat = fmap.data.reshape(-1, fmap.channels).astype(np.float64)
    best = (flat @ vf.T).max(axis=1)
    bg_sim = flat @ bg
    bits = best > np.maximum(bg_sim, threshold)
    return ForegroundMask(bits.reshape(fmap.height, fmap.width))


# ---------------------------------------------------------------------------
# Corpus manifests
# ---------------------------------------------------------------------------


@dataclass
class ManifestEntry:
    image_id: str
    feature_path: Path
    mask_path: Optional[Path] = None
    pose: Optional[Pose] = None


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def read_manifest(path, check_paths: bool = True) -> CorpusManifest:
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (2, 3, 7):
            raise FormatError(
                f"{path}:{lineno}: expected 2, 3 or 7 tab-separated fields, got {len(fields)}"
            )
        image_id = fields[0]
        fpath = base / fields[1]
        mpath = None
        if len(fields) >= 3 and fields[2] != "-":
            mpath = base / fields[2]
        pose = None
        if len(fields) == 7:
            try:
                az, el, th, dist = (float(x) for x in fields[3:7])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed pose fields") from None
            try:
                pose = Pose(az, el, th, dist)
            except ValidationError as e:
                raise FormatError(f"{path}:{lineno}: invalid pose: {e}") from None
        if check_paths:
            if not fpath.exists():
                raise DataError(f"{path}:{lineno}: feature file not found: {fpath}")
            if mpath is not None and not mpath.exists():
                raise DataError(f"{path}:{lineno}: mask file not found: {mpath}")
        entries.append(ManifestEntry(image_id, fpath, mpath, pose))
    return CorpusManifest(entries)


def write_manifest(manifest: CorpusManifest, path) -> None:
    path = Path(path)
    base = path.parent
    lines = ["# image_id\tfeature_path\tmask_path\tazimuth\televation\ttheta\tdistance"]
    for e in manifest.entries:
        fp = _relativize(e.feature_path, base)
        mp = _relativize(e.mask_path, base) if e.mask_path else "-"
        fields = [e.image_id, fp, mp]
        if e.pose is not None:
            p = e.pose
            fields += [repr(p.azimuth), repr(p.elevation), repr(p.theta), repr(p.distance)]
        lines.append("\t".join(fields))
    path.write_text("\n".join(lines) + "\n")


def _relativize(p: Path, base: Path) -> str:
    try:
        return Path(p).relative_to(base).as_posix()
    except ValueError:
        return Path(p).as_posix()
