"""Forward pass of the first 12 convolutional layers of the classic
16/19-layer image-classification stack, in plain numpy (float32).

Architecture (zero padding 1, 3x3 kernels, stride 1; 2x2 max pool between
blocks; every tap is the post-rectifier activation of its conv layer):

    layer  1  conv1_1   3 -> 64
    layer  2  conv1_2  64 -> 64     [pool]
    layer  3  conv2_1  64 -> 128
    layer  4  conv2_2 128 -> 128    [pool]
    layer  5  conv3_1 128 -> 256
    layer  6  conv3_2 256 -> 256
    layer  7  conv3_3 256 -> 256
    layer  8  conv3_4 256 -> 256    [pool]
    layer  9  conv4_1 256 -> 512
    layer 10  conv4_2 512 -> 512
    layer 11  conv4_3 512 -> 512
    layer 12  conv4_4 512 -> 512

Weights load from an .npz archive with keys `<name>.weight` of shape
(out, in, 3, 3) and `<name>.bias` of shape (out,), float32.
"""

from __future__ import annotations

import numpy as np

LAYERS = [
    ("conv1_1", 3, 64),
    ("conv1_2", 64, 64),
    ("conv2_1", 64, 128),
    ("conv2_2", 128, 128),
    ("conv3_1", 128, 256),
    ("conv3_2", 256, 256),
    ("conv3_3", 256, 256),
    ("conv3_4", 256, 256),
    ("conv4_1", 256, 512),
    ("conv4_2", 512, 512),
    ("conv4_3", 512, 512),
    ("conv4_4", 512, 512),
]

POOL_AFTER = {"conv1_2", "conv2_2", "conv3_4"}

# conventional channel statistics the pretrained weights assume
INPUT_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
INPUT_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

EXTRACTOR_ID = "vgg19-conv12"


class WeightError(Exception):
    pass


def load_weights(path) -> dict[str, np.ndarray]:
    with np.load(path) as archive:
        weights = {k: archive[k].astype(np.float32) for k in archive.files}
    for name, in_ch, out_ch in LAYERS:
        w = weights.get(f"{name}.weight")
        b = weights.get(f"{name}.bias")
        if w is None or b is None:
            raise WeightError(f"{path}: missing {name}.weight / {name}.bias")
        if w.shape != (out_ch, in_ch, 3, 3) or b.shape != (out_ch,):
            raise WeightError(
                f"{path}: {name} has shape {w.shape}/{b.shape}, "
                f"expected {(out_ch, in_ch, 3, 3)}/{(out_ch,)}"
            )
    return weights


def _conv3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 stride-1 convolution with zero padding; x is (h, w, cin)."""
    h, wd, _ = x.shape
    out_ch = w.shape[0]
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    acc = np.zeros((h * wd, out_ch), dtype=np.float32)
    for dy in range(3):
        for dx in range(3):
            window = xp[dy : dy + h, dx : dx + wd, :].reshape(h * wd, -1)
            acc += window @ w[:, :, dy, dx].T
    return (acc + b).reshape(h, wd, out_ch)


def _maxpool2(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    return x.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


def normalize(image: np.ndarray) -> np.ndarray:
    """Map an (h, w, 3) image in [0, 1] to normalized network input."""
    return ((image.astype(np.float32) - INPUT_MEAN) / INPUT_STD).astype(np.float32)


def forward_taps(image: np.ndarray, weights: dict[str, np.ndarray]):
    """Yield (layer_id, name, activation) for each post-rectifier tap.

    image is (h, w, 3) in [0, 1]; h and w must be divisible by 8 so the
    three interior pools stay exact.
    """
    h, w, c = image.shape
    if c != 3:
        raise ValueError("stack expects 3 input channels")
    if h % 8 or w % 8:
        raise ValueError(f"image dims must be multiples of 8, got {h}x{w}")
    x = normalize(image)
    for layer_id, (name, _, _) in enumerate(LAYERS, start=1):
        z = _conv3x3(x, weights[f"{name}.weight"], weights[f"{name}.bias"])
        x = np.maximum(z, 0.0)
        yield layer_id, name, x
        if name in POOL_AFTER:
            x = _maxpool2(x)
