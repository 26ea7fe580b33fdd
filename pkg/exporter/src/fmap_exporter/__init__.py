"""Offline exporter: pretrained 12-layer conv features to FMAP files."""

from .export import ExportManifest, export_features
from .fmap import write_fmap
from .stack import EXTRACTOR_ID, LAYERS, forward_taps, load_weights

__version__ = "0.1.0"
