import numpy as np
import pytest

from fmap_exporter.stack import LAYERS


@pytest.fixture(scope="session")
def test_weights(tmp_path_factory):
    """Deterministic random weights with the real 12-layer shapes.

    Exercises the full export path (shapes, format, manifest, determinism)
    without shipping the pretrained checkpoint.
    """
    rng = np.random.default_rng(90210)
    arrays = {}
    for name, in_ch, out_ch in LAYERS:
        fan_in = in_ch * 9
        arrays[f"{name}.weight"] = (
            rng.standard_normal((out_ch, in_ch, 3, 3)) * np.sqrt(2.0 / fan_in)
        ).astype(np.float32)
        arrays[f"{name}.bias"] = np.zeros(out_ch, dtype=np.float32)
    path = tmp_path_factory.mktemp("weights") / "test_conv12.npz"
    np.savez(path, **arrays)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(7)
