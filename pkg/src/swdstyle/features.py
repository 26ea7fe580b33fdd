"""Built-in multi-scale feature extractor and external feature loading.

The extractor is a fixed (never trained) 4-stage stack: 3x3 convolution,
leaky rectifier, 2x average pool, with orthogonalized random filters drawn
from a counter-based generator. It taps the pre-pool activation and the
pooled output of every stage (8 feature maps). Being self-contained and
deterministic, it verifies the distribution-matching machinery without
pretrained weights; externally exported pretrained features enter through
load_external_features instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, FormatError
from .slicing import mix64
from .tensors import FeatureMap, ImageBuffer, read_fmap

DEFAULT_EXTRACTOR_SEED = 0x5747A9


@dataclass(frozen=True)
class ExtractorSpec:
    """Architecture and initialization of the built-in extractor."""

    seed: int = DEFAULT_EXTRACTOR_SEED
    widths: tuple[int, ...] = (64, 128, 256, 512)
    slope: float = 0.2

    @property
    def stages(self) -> int:
        return len(self.widths)

    @property
    def tap_count(self) -> int:
        return 2 * len(self.widths)


@lru_cache(maxsize=8)
def _filters(seed: int, widths: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    """Orthogonalized random 3x3 filter banks, one per stage."""
    banks = []
    in_ch = 3
    for stage, out_ch in enumerate(widths):
        rng = np.random.Generator(np.random.Philox(key=mix64(seed, stage)))
        fan_in = in_ch * 9
        a = rng.standard_normal((out_ch, fan_in))
        if out_ch <= fan_in:
            q, r = np.linalg.qr(a.T)  # orthonormal rows
            sign = np.sign(np.diag(r))
            sign[sign == 0] = 1.0
            w2d = (q * sign).T
        else:
            q, r = np.linalg.qr(a)  # orthonormal columns
            sign = np.sign(np.diag(r))
            sign[sign == 0] = 1.0
            w2d = q * sign
        banks.append(w2d.reshape(out_ch, in_ch, 3, 3))
        in_ch = out_ch
    return tuple(banks)


def _conv3x3(x: np.ndarray, bank: np.ndarray) -> np.ndarray:
    """3x3 stride-1 convolution with reflect padding; x is (H, W, Cin)."""
    h, w, _ = x.shape
    out_ch = bank.shape[0]
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="reflect")
    acc = np.zeros((h * w, out_ch))
    for dy in range(3):
        for dx in range(3):
            window = xp[dy : dy + h, dx : dx + w, :].reshape(h * w, -1)
            acc += window @ bank[:, :, dy, dx].T
    return acc.reshape(h, w, out_ch)


def _conv3x3_input_grad(g: np.ndarray, bank: np.ndarray) -> np.ndarray:
    """Adjoint of _conv3x3 with respect to its input; g is (H, W, Cout)."""
    h, w, _ = g.shape
    in_ch = bank.shape[1]
    gflat = g.reshape(h * w, -1)
    gp = np.zeros((h + 2, w + 2, in_ch))
    for dy in range(3):
        for dx in range(3):
            gp[dy : dy + h, dx : dx + w, :] += (gflat @ bank[:, :, dy, dx]).reshape(
                h, w, in_ch
            )
    # fold the reflect padding back: pad row 0 mirrors source row 1, etc.
    rows = gp[1 : h + 1, :, :].copy()
    rows[1] += gp[0]
    rows[h - 2] += gp[h + 1]
    out = rows[:, 1 : w + 1, :].copy()
    out[:, 1] += rows[:, 0]
    out[:, w - 2] += rows[:, w + 1]
    return out


def _pool2(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    return x.reshape(h // 2, 2, w // 2, 2, c).mean(axis=(1, 3))


def _pool2_adjoint(g: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(g, 2, axis=0), 2, axis=1) * 0.25


def _check_image(img: ImageBuffer, spec: ExtractorSpec):
    if img.channels != 3:
        raise DimensionError("extractor expects a 3-channel image")
    divisor = 2 ** spec.stages
    if img.height < 16 or img.width < 16:
        raise DimensionError("images must be at least 16x16")
    if img.height % divisor or img.width % divisor:
        raise DimensionError(
            f"image dims must be multiples of {divisor} for exact 2x pooling, "
            f"got {img.height}x{img.width}"
        )


def extract(img: ImageBuffer, spec: ExtractorSpec) -> list[FeatureMap]:
    """Run the stack and return its 8 taps as pixel-major feature maps.

    Taps alternate pre-pool activation and pooled stage output; layer_id
    runs 1..2*stages in that order.
    """
    _check_image(img, spec)
    banks = _filters(spec.seed, spec.widths)
    x = img.data
    taps: list[FeatureMap] = []
    layer_id = 1
    for bank in banks:
        z = _conv3x3(x, bank)
        a = np.where(z > 0, z, spec.slope * z)
        h, w, c = a.shape
        taps.append(FeatureMap(layer_id, (h, w), a.reshape(h * w, c)))
        layer_id += 1
        x = _pool2(a)
        h, w, c = x.shape
        taps.append(FeatureMap(layer_id, (h, w), x.reshape(h * w, c)))
        layer_id += 1
    return taps


def backprop(
    img: ImageBuffer, spec: ExtractorSpec, tap_gradients: list[np.ndarray | None]
) -> np.ndarray:
    """Pixel gradient of sum_l <G_l, F_l> for tap-space gradients G_l.

    tap_gradients aligns with extract's output; None entries mean zero.
    Returns an (H, W, 3) array.
    """
    _check_image(img, spec)
    if len(tap_gradients) != spec.tap_count:
        raise DimensionError(
            f"expected {spec.tap_count} tap gradients, got {len(tap_gradients)}"
        )
    banks = _filters(spec.seed, spec.widths)
    x = img.data
    pre_acts = []
    for bank in banks:
        z = _conv3x3(x, bank)
        a = np.where(z > 0, z, spec.slope * z)
        pre_acts.append(z)
        x = _pool2(a)

    def tap_grad(i: int, shape) -> np.ndarray:
        g = tap_gradients[i]
        if g is None:
            return np.zeros(shape)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (shape[0] * shape[1], shape[2]):
            raise DimensionError(
                f"tap {i}: gradient shape {g.shape} does not match "
                f"{(shape[0] * shape[1], shape[2])}"
            )
        return g.reshape(shape)

    g_x = None  # gradient wrt the current stage's pooled output
    for stage in range(spec.stages - 1, -1, -1):
        z = pre_acts[stage]
        h, w, c = z.shape
        g_pool = tap_grad(2 * stage + 1, (h // 2, w // 2, c))
        if g_x is not None:
            g_pool = g_pool + g_x
        g_a = tap_grad(2 * stage, (h, w, c)) + _pool2_adjoint(g_pool)
        g_z = g_a * np.where(z > 0, 1.0, spec.slope)
        g_x = _conv3x3_input_grad(g_z, banks[stage])
    return g_x


def load_external_features(paths) -> list[FeatureMap]:
    """Load FMAP files as a layer stack with strictly increasing layer ids."""
    maps = [read_fmap(p) for p in paths]
    if not maps:
        raise FormatError("no feature files given")
    for prev, cur in zip(maps, maps[1:]):
        if cur.layer_id == prev.layer_id:
            raise FormatError(f"duplicate layer_id {cur.layer_id}")
        if cur.layer_id < prev.layer_id:
            raise FormatError(
                f"layer ids must be strictly increasing "
                f"({prev.layer_id} then {cur.layer_id})"
            )
    return maps
