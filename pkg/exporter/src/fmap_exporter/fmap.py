"""Standalone FMAP writer.

Implements the binary feature-map format from scratch (no shared code with
the consuming engine) so that round-tripping through both implementations
is a genuine conformance check.

Layout: 8-byte magic "FMAPv001"; little-endian u32 rank (always 4); four
little-endian u32 dims (layer_id, channels, h, w); h*w*channels
little-endian float32 values, pixel-major (channel-minor).
"""

import struct

import numpy as np

MAGIC = b"FMAPv001"
RANK = 4


def write_fmap(path, layer_id: int, data: np.ndarray) -> None:
    """Write an (h, w, channels) float array as an FMAP file."""
    if data.ndim != 3:
        raise ValueError(f"expected (h, w, channels) activations, got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to write non-finite activations")
    h, w, channels = data.shape
    payload = np.ascontiguousarray(data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", RANK))
        fh.write(struct.pack("<4I", layer_id, channels, h, w))
        fh.write(payload.tobytes())
