"""Tiled-reference multi-view editing orchestration.

Views are processed four at a time: their images are packed into a 2x2
tile, handed to a pluggable stylizer together with a fixed reference tile
built from four diverse views, then unpacked. Short batches are padded by
duplicating the last view and the padding is dropped after untiling, so
output order and cardinality always match the input.

The stylizer abstraction stands in for the depth-conditioned generative
model; bundled mocks cover identity, seeded recoloring, and statistics
anchoring on the reference tile.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import adain
from .errors import DimensionError, ViewError
from .slicing import mix64
from .tensors import ImageBuffer, load_image, save_image


@dataclass(frozen=True)
class View:
    view_id: str
    image: ImageBuffer
    depth: ImageBuffer


@dataclass(frozen=True)
class ViewSet:
    """Ordered multi-view collection with paired single-channel depths."""

    views: tuple[View, ...]

    def __post_init__(self):
        if not self.views:
            raise ViewError("view set is empty")
        ids = [v.view_id for v in self.views]
        if len(set(ids)) != len(ids):
            raise ViewError("view ids must be unique")
        first = self.views[0].image
        for v in self.views:
            if (v.image.height, v.image.width) != (first.height, first.width):
                raise DimensionError("all views must share image dims")
            if v.depth.channels != 1:
                raise DimensionError(f"view {v.view_id}: depth must be 1-channel")
            if (v.depth.height, v.depth.width) != (v.image.height, v.image.width):
                raise DimensionError(f"view {v.view_id}: depth dims differ from image")

    def __len__(self) -> int:
        return len(self.views)

    def __getitem__(self, i: int) -> View:
        return self.views[i]


def tile_2x2(
    a: ImageBuffer, b: ImageBuffer, c: ImageBuffer, d: ImageBuffer
) -> ImageBuffer:
    """Pack four equal-size images into one 2x2 grid, a|b over c|d."""
    for other in (b, c, d):
        if other.data.shape != a.data.shape:
            raise DimensionError("tile inputs must share dims")
    top = np.concatenate([a.data, b.data], axis=1)
    bottom = np.concatenate([c.data, d.data], axis=1)
    return ImageBuffer(np.concatenate([top, bottom], axis=0))


def untile_2x2(t: ImageBuffer) -> tuple[ImageBuffer, ImageBuffer, ImageBuffer, ImageBuffer]:
    """Inverse of tile_2x2."""
    if t.height % 2 or t.width % 2:
        raise DimensionError(f"cannot untile odd dims {t.height}x{t.width}")
    h, w = t.height // 2, t.width // 2
    d = t.data
    return (
        ImageBuffer(d[:h, :w]),
        ImageBuffer(d[:h, w:]),
        ImageBuffer(d[h:, :w]),
        ImageBuffer(d[h:, w:]),
    )


def sample_ref_indices(n: int) -> list[int]:
    """Four diverse view indices: quartile strides, cyclic fill when n < 4."""
    if n < 1:
        raise ViewError("need at least one view")
    if n >= 4:
        return [0, n // 4, n // 2, (3 * n) // 4]
    return [i % n for i in range(4)]


def sample_ref_depths(views: ViewSet) -> list[ImageBuffer]:
    """Depth maps of the four reference views."""
    return [views[i].depth for i in sample_ref_indices(len(views))]


@dataclass(frozen=True)
class TileReference:
    """The anchoring reference: 2x2 image tile plus the matching depth tile."""

    image: ImageBuffer
    depth: ImageBuffer


class Stylizer:
    """Dimension-preserving tile transform, deterministic given a seed."""

    def stylize(
        self, reference: TileReference, content: ImageBuffer, prompt: str, seed: int
    ) -> ImageBuffer:
        raise NotImplementedError


class IdentityStylizer(Stylizer):
    def stylize(self, reference, content, prompt, seed):
        return content


class PaletteStylizer(Stylizer):
    """Seeded per-channel affine recolor; the prompt salts the palette."""

    def stylize(self, reference, content, prompt, seed):
        digest = hashlib.blake2s(prompt.encode("utf-8")).digest()
        key = mix64(seed, int.from_bytes(digest[:8], "little"))
        rng = np.random.Generator(np.random.Philox(key=key))
        gain = rng.uniform(0.3, 0.7, size=content.channels)
        offset = rng.uniform(0.1, 0.3, size=content.channels)
        return ImageBuffer(np.clip(content.data * gain + offset, 0.0, 1.0))


class AdainStylizer(Stylizer):
    """Recolor the content tile to the reference tile's channel statistics."""

    def stylize(self, reference, content, prompt, seed):
        ref = reference.image
        if ref.channels != content.channels:
            raise DimensionError("reference and content channel counts differ")
        pixels = content.data.reshape(-1, content.channels)
        anchor = ref.data.reshape(-1, ref.channels)
        out = adain(pixels, anchor)
        return ImageBuffer(
            np.clip(out, 0.0, 1.0).reshape(content.data.shape)
        )


STYLIZERS = {
    "identity": IdentityStylizer,
    "palette": PaletteStylizer,
    "adain": AdainStylizer,
}


def run_multiview_edit(
    views: ViewSet, prompt: str, stylizer: Stylizer, seed: int
) -> ViewSet:
    """Stylize every view through 2x2 tiles anchored on one reference tile.

    The reference pairs the depth tile of four quartile-sampled views with
    the image tile of the same views. Batches shorter than four are padded
    by duplicating the last view; padding never reaches the output.
    """
    idx = sample_ref_indices(len(views))
    ref = TileReference(
        image=tile_2x2(*(views[i].image for i in idx)),
        depth=tile_2x2(*(views[i].depth for i in idx)),
    )
    out_views: list[View] = []
    batch_seed = mix64(seed)
    for start in range(0, len(views), 4):
        batch = list(views.views[start : start + 4])
        real = len(batch)
        while len(batch) < 4:
            batch.append(batch[-1])
        content = tile_2x2(*(v.image for v in batch))
        styled = stylizer.stylize(ref, content, prompt, batch_seed)
        if styled.data.shape != content.data.shape:
            raise DimensionError(
                "stylizer violated its contract: output dims "
                f"{styled.data.shape} != input dims {content.data.shape}"
            )
        pieces = untile_2x2(styled)
        for v, piece in zip(batch[:real], pieces[:real]):
            out_views.append(View(view_id=v.view_id, image=piece, depth=v.depth))
    return ViewSet(tuple(out_views))


# ---------------------------------------------------------------------------
# View directory I/O
# ---------------------------------------------------------------------------

DEPTH_SUFFIX = ".depth.png"


def load_view_dir(path) -> tuple[ViewSet, dict[str, Path]]:
    """Read `<id>.png` + `<id>.depth.png` pairs, ordered by id.

    Returns the view set and a map from view_id to its image path. Views
    missing their depth pair abort with the offending ids listed.
    """
    root = Path(path)
    if not root.is_dir():
        raise ViewError(f"{root} is not a directory")
    image_paths = sorted(
        p for p in root.glob("*.png") if not p.name.endswith(DEPTH_SUFFIX)
    )
    if not image_paths:
        raise ViewError(f"{root} contains no view images")
    missing = [p.stem for p in image_paths if not (root / (p.stem + DEPTH_SUFFIX)).exists()]
    if missing:
        raise ViewError(
            "views missing depth pairs: " + ", ".join(sorted(missing))
        )
    views = []
    sources = {}
    for p in image_paths:
        depth = load_image(root / (p.stem + DEPTH_SUFFIX))
        if depth.channels != 1:
            raise DimensionError(f"{p.stem}: depth image must be grayscale")
        views.append(View(view_id=p.stem, image=load_image(p), depth=depth))
        sources[p.stem] = p
    return ViewSet(tuple(views)), sources


def write_view_outputs(
    styled: ViewSet, sources: dict[str, Path], out_dir, prompt: str, seed: int
) -> Path:
    """Write stylized PNGs plus a plain-text manifest; returns manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    lines = []
    for v in styled.views:
        out_path = out / f"{v.view_id}.png"
        save_image(v.image, out_path)
        lines.append(f"{v.view_id}\t{sources[v.view_id]}\t{out_path}\t{prompt}\t{seed}")
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
