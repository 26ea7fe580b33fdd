#!/usr/bin/env python3
"""Regenerate the bundled desk-scale demo assets.

Writes deterministic 32x32 texture pairs, region masks, per-region style
targets, and a small multi-view set with depth maps. Committed outputs are
reproduced bit-identically by rerunning this script.
"""

from pathlib import Path

import numpy as np

from swdstyle.slicing import mix64
from swdstyle.tensors import ImageBuffer, RegionMask, save_image

ROOT = Path(__file__).resolve().parent.parent / "assets"
SIZE = 32


def _smooth(a: np.ndarray, passes: int = 2) -> np.ndarray:
    for _ in range(passes):
        a = (
            a
            + np.roll(a, 1, axis=0)
            + np.roll(a, -1, axis=0)
            + np.roll(a, 1, axis=1)
            + np.roll(a, -1, axis=1)
        ) / 5.0
    return a


def _texture(seed: int, base: np.ndarray, amp: float = 0.35) -> ImageBuffer:
    rng = np.random.Generator(np.random.Philox(key=mix64(seed)))
    noise = _smooth(rng.random((SIZE, SIZE, 3)) - 0.5)
    img = np.clip(base + amp * noise, 0.0, 1.0)
    return ImageBuffer(img)


def main():
    ROOT.mkdir(exist_ok=True)
    views_dir = ROOT / "views"
    views_dir.mkdir(exist_ok=True)

    gray = np.full((SIZE, SIZE, 3), 0.5)
    warm = np.stack(
        [np.full((SIZE, SIZE), 0.65), np.full((SIZE, SIZE), 0.45), np.full((SIZE, SIZE), 0.25)],
        axis=2,
    )
    save_image(_texture(101, gray), ROOT / "texture_content.png")
    save_image(_texture(202, warm), ROOT / "texture_style.png")

    red = np.stack(
        [np.full((SIZE, SIZE), 0.75), np.full((SIZE, SIZE), 0.25), np.full((SIZE, SIZE), 0.2)],
        axis=2,
    )
    blue = np.stack(
        [np.full((SIZE, SIZE), 0.2), np.full((SIZE, SIZE), 0.3), np.full((SIZE, SIZE), 0.75)],
        axis=2,
    )
    save_image(_texture(303, red, amp=0.2), ROOT / "style_red.png")
    save_image(_texture(404, blue, amp=0.2), ROOT / "style_blue.png")

    halves = np.zeros((SIZE, SIZE), dtype=np.int64)
    halves[:, SIZE // 2 :] = 1
    mask = RegionMask(labels=halves)
    from PIL import Image

    Image.fromarray(mask.labels.astype(np.uint8), mode="L").save(
        ROOT / "mask_halves.png"
    )

    # five mid-range views with paired depth maps (kept away from 0/1 so
    # statistics-anchoring mocks do not clip)
    ys, xs = np.mgrid[0:SIZE, 0:SIZE] / (SIZE - 1)
    for i in range(5):
        rng = np.random.Generator(np.random.Philox(key=mix64(500, i)))
        pattern = _smooth(rng.random((SIZE, SIZE, 3)) - 0.5, passes=3)
        img = np.clip(0.5 + 0.18 * pattern + 0.05 * (i - 2) * (xs - 0.5)[:, :, None], 0.25, 0.75)
        depth = np.clip(0.3 + 0.4 * (0.5 * ys + 0.5 * np.abs(xs - i / 4.0)), 0.2, 0.8)
        save_image(ImageBuffer(img), views_dir / f"v{i}.png")
        save_image(ImageBuffer(depth[:, :, None]), views_dir / f"v{i}.depth.png")

    print(f"wrote assets under {ROOT}")


if __name__ == "__main__":
    main()
