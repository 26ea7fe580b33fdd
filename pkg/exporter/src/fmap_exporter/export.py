"""Batch export of pretrained conv features as FMAP files plus a manifest."""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .fmap import write_fmap
from .stack import EXTRACTOR_ID, INPUT_MEAN, INPUT_STD, WeightError, forward_taps, load_weights

DEFAULT_WEIGHTS = Path.home() / ".cache" / "fmap_exporter" / "vgg19_conv12.npz"

MISSING_WEIGHTS_MSG = """\
pretrained weights not found at {path}

The exporter needs the first 12 convolutional layers of the standard
19-layer classification network as an .npz archive (keys conv1_1.weight,
conv1_1.bias, ..., conv4_4.bias; float32). With torchvision installed you
can produce it once:

    python -c "
    import numpy as np, torchvision
    vgg = torchvision.models.vgg19(weights='IMAGENET1K_V1').features
    names = ['conv1_1','conv1_2','conv2_1','conv2_2','conv3_1','conv3_2',
             'conv3_3','conv3_4','conv4_1','conv4_2','conv4_3','conv4_4']
    convs = [m for m in vgg if m.__class__.__name__ == 'Conv2d'][:12]
    out = {{}}
    for name, conv in zip(names, convs):
        out[name + '.weight'] = conv.weight.detach().numpy()
        out[name + '.bias'] = conv.bias.detach().numpy()
    np.savez('{path}', **out)
    "

then rerun the export (or pass --weights <file>).\
"""


@dataclass
class ExportManifest:
    image: str
    extractor: str
    weights_sha256: str
    layers: list[tuple[int, int, int, int, str]] = field(default_factory=list)
    # (layer_id, channels, h, w, path)

    def lines(self) -> list[str]:
        out = [
            f"image {self.image}",
            f"extractor {self.extractor}",
            f"weights_sha256 {self.weights_sha256}",
            "normalization mean "
            + " ".join(f"{v:g}" for v in INPUT_MEAN)
            + " std "
            + " ".join(f"{v:g}" for v in INPUT_STD),
        ]
        for layer_id, channels, h, w, path in self.layers:
            out.append(f"layer {layer_id} channels {channels} h {h} w {w} path {path}")
        return out


def _load_image(path) -> np.ndarray:
    im = Image.open(path)
    im.load()
    if im.mode == "L":
        arr = np.asarray(im, dtype=np.uint8)
        arr = np.repeat(arr[:, :, None], 3, axis=2)  # replicate gray to RGB
    elif im.mode in ("RGB", "RGBA"):
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    else:
        raise ValueError(f"{path}: unsupported image mode {im.mode}")
    return arr.astype(np.float32) / 255.0


def export_features(image_path, out_dir, weights_path=None) -> ExportManifest:
    """Run the 12-layer stack on one image and write each tap as FMAP."""
    weights_path = Path(weights_path or DEFAULT_WEIGHTS)
    if not weights_path.exists():
        raise WeightError(MISSING_WEIGHTS_MSG.format(path=weights_path))
    weights = load_weights(weights_path)
    sha = hashlib.sha256(weights_path.read_bytes()).hexdigest()
    image = _load_image(image_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = ExportManifest(
        image=str(image_path), extractor=EXTRACTOR_ID, weights_sha256=sha
    )
    for layer_id, _, act in forward_taps(image, weights):
        path = out / f"layer_{layer_id:02d}.fmap"
        write_fmap(path, layer_id, act)
        h, w, channels = act.shape
        manifest.layers.append((layer_id, channels, h, w, str(path)))
    (out / "manifest.txt").write_text("\n".join(manifest.lines()) + "\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fmap-export",
        description="Export pretrained 12-layer conv features as FMAP files",
    )
    parser.add_argument("--image", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--weights", default=None, help=f"default: {DEFAULT_WEIGHTS}")
    args = parser.parse_args(argv)
    try:
        manifest = export_features(args.image, args.out, args.weights)
    except (WeightError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in manifest.lines():
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
