"""Core numeric containers and file I/O: images, feature maps, region masks.

Feature maps are stored pixel-major (one row of N channel values per pixel)
so that per-projection sorting touches contiguous memory. All persisted
numerics are 32-bit IEEE-754; in-memory math uses 64-bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DimensionError, FormatError

FMAP_MAGIC = b"FMAPv001"
_FMAP_RANK = 4  # layer_id, channels, h, w


def _frozen(a: np.ndarray) -> np.ndarray:
    # copy so freezing never marks a caller-owned buffer read-only
    a = np.array(a, order="C")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ImageBuffer:
    """An H x W x C image with values in [0, 1], row-major, channel-interleaved.

    channels is 1 (grayscale / depth) or 3 (RGB).
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise DimensionError(f"image must be HxWx1 or HxWx3, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image contains non-finite values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class FeatureMap:
    """A discrete feature distribution: M pixel rows of N channel values.

    layer_id 0 is reserved for raw pixel colors; extractor taps start at 1.
    spatial (h, w) satisfies h * w = pixel_count and records the grid the
    rows were flattened from (row-major).
    """

    layer_id: int
    spatial: tuple[int, int]
    data: np.ndarray

    def __post_init__(self):
        if self.layer_id < 0:
            raise ValueError("layer_id must be >= 0")
        data = np.asarray(self.data, dtype=np.float64)
        h, w = self.spatial
        if data.ndim != 2:
            raise DimensionError(f"feature data must be MxN, got {data.shape}")
        if h < 1 or w < 1 or h * w != data.shape[0]:
            raise DimensionError(
                f"spatial {self.spatial} inconsistent with {data.shape[0]} pixels"
            )
        if data.shape[1] < 1:
            raise DimensionError("feature maps need at least one channel")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature map contains non-finite values")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def pixel_count(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RegionMask:
    """Per-pixel categorical labels 0..num_labels partitioning an image."""

    labels: np.ndarray
    num_labels: int = -1  # max label; -1 means "take max observed"

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise DimensionError(f"mask must be HxW, got {labels.shape}")
        if labels.size == 0:
            raise DimensionError("mask must be non-empty")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("mask labels must be integers")
        if labels.min() < 0:
            raise ValueError("mask labels must be >= 0")
        observed = int(labels.max())
        num = self.num_labels
        if num == -1:
            num = observed
        elif observed > num:
            raise ValueError(f"label {observed} exceeds declared max {num}")
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))
        object.__setattr__(self, "num_labels", num)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def flat(self) -> np.ndarray:
        """Labels flattened row-major, aligned with FeatureMap pixel rows."""
        return self.labels.reshape(-1)


@dataclass
class LossReport:
    """Diagnostic surface of a style-loss evaluation.

    per_layer holds (layer_id, value) in layer order; per_projection holds,
    for each layer in the same order, the list of (distance, weight) pairs
    of the sampled projections. Weights sum to 1 per layer under importance
    weighting, and are uniform 1/K otherwise.
    """

    total: float
    per_layer: list[tuple[int, float]] = field(default_factory=list)
    per_projection: list[list[tuple[float, float]]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# FMAP binary format
# ---------------------------------------------------------------------------


def write_fmap(fmap: FeatureMap, path) -> None:
    """Write a feature map in the FMAP binary format.

    Layout: 8-byte magic "FMAPv001", little-endian u32 rank (always 4),
    four little-endian u32 dims (layer_id, channels, h, w), then M*N
    little-endian float32 values, pixel-major.
    """
    if not np.all(np.isfinite(fmap.data)):
        raise ValueError("refusing to write non-finite feature data")
    h, w = fmap.spatial
    payload = fmap.data.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(FMAP_MAGIC)
        fh.write(struct.pack("<I", _FMAP_RANK))
        fh.write(struct.pack("<4I", fmap.layer_id, fmap.channels, h, w))
        fh.write(payload)


def read_fmap(path) -> FeatureMap:
    """Read an FMAP file; exact inverse of write_fmap."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise FormatError(f"{path}: too short for an FMAP header")
    magic = raw[:8]
    if magic != FMAP_MAGIC:
        if magic[:5] == b"FMAPv":
            raise FormatError(
                f"{path}: unsupported FMAP version {magic[5:].decode('ascii', 'replace')}"
            )
        raise FormatError(f"{path}: bad magic {magic!r}")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated rank field")
    (rank,) = struct.unpack_from("<I", raw, 8)
    if rank != _FMAP_RANK:
        raise FormatError(f"{path}: expected rank {_FMAP_RANK}, got {rank}")
    if len(raw) < 12 + 4 * rank:
        raise FormatError(f"{path}: truncated dims")
    layer_id, channels, h, w = struct.unpack_from("<4I", raw, 12)
    if channels < 1 or h < 1 or w < 1:
        raise FormatError(f"{path}: degenerate dims ({layer_id},{channels},{h},{w})")
    expected = 12 + 4 * rank + h * w * channels * 4
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - 12 - 4 * rank} bytes, "
            f"dims require {h * w * channels * 4}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=12 + 4 * rank)
    data = values.astype(np.float64).reshape(h * w, channels)
    return FeatureMap(layer_id=layer_id, spatial=(h, w), data=data)


# ---------------------------------------------------------------------------
# Image and mask I/O
# ---------------------------------------------------------------------------


def load_image(path) -> ImageBuffer:
    """Load an 8-bit PNG as an ImageBuffer with values in [0, 1]."""
    try:
        im = Image.open(path)
        im.load()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if im.mode == "L":
        arr = np.asarray(im, dtype=np.uint8)[:, :, None]
    elif im.mode == "RGB":
        arr = np.asarray(im, dtype=np.uint8)
    elif im.mode == "RGBA":
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    else:
        raise FormatError(f"{path}: unsupported image mode {im.mode}")
    return ImageBuffer(arr.astype(np.float64) / 255.0)


def save_image(img: ImageBuffer, path) -> None:
    arr = np.rint(img.data * 255.0).astype(np.uint8)
    if img.channels == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(arr, mode="RGB").save(path)


def load_mask(path) -> RegionMask:
    """Load an 8-bit single-channel PNG or PGM as a label mask.

    Pixel value v becomes label v; the max label defines the label range.
    Multi-channel and 16-bit inputs are rejected.
    """
    try:
        im = Image.open(path)
        im.load()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if im.mode != "L":
        raise FormatError(
            f"{path}: masks must be 8-bit single-channel, got mode {im.mode}"
        )
    labels = np.asarray(im, dtype=np.uint8).astype(np.int64)
    return RegionMask(labels=labels)


def downsample_mask(mask: RegionMask, target: tuple[int, int]) -> RegionMask:
    """Nearest-neighbor downsampling of a label mask to (h, w).

    Each target cell takes the label of the source cell nearest to its
    center, so the output label set is always a subset of the input's.
    """
    th, tw = target
    if th < 1 or tw < 1:
        raise DimensionError(f"target dims must be positive, got {target}")
    if th > mask.height or tw > mask.width:
        raise DimensionError(
            f"target {target} exceeds mask dims ({mask.height}, {mask.width})"
        )
    rows = np.minimum(
        ((np.arange(th) + 0.5) * mask.height / th).astype(np.int64), mask.height - 1
    )
    cols = np.minimum(
        ((np.arange(tw) + 0.5) * mask.width / tw).astype(np.int64), mask.width - 1
    )
    labels = mask.labels[np.ix_(rows, cols)]
    return RegionMask(labels=labels, num_labels=mask.num_labels)


# ---------------------------------------------------------------------------
# Image <-> feature conversion (layer 0 = raw colors)
# ---------------------------------------------------------------------------


def image_to_features(img: ImageBuffer) -> FeatureMap:
    """View image pixels as a layer-0 feature map; values are preserved exactly."""
    data = img.data.reshape(img.height * img.width, img.channels)
    return FeatureMap(layer_id=0, spatial=(img.height, img.width), data=data)


def features_to_image(fmap: FeatureMap) -> ImageBuffer:
    h, w = fmap.spatial
    return ImageBuffer(fmap.data.reshape(h, w, fmap.channels))
