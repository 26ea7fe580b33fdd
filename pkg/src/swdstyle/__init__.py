"""Sliced-Wasserstein distribution-matching stylization toolkit."""

from .attention import AttentionBlock, adain, shared_attention
from .ebsw import (
    BoundCheck,
    DiscreteMeasure,
    EnergyFunction,
    bound_check,
    is_ebsw,
    sw_hat,
)
from .engine import (
    BenchResult,
    RunTrace,
    StylizeJob,
    benchmark_iw_vs_vanilla,
    evaluate_region_swd,
    evaluate_swd,
    stylize,
)
from .errors import (
    DimensionError,
    EngineError,
    FormatError,
    MaskError,
    SwdstyleError,
    ViewError,
)
from .features import ExtractorSpec, backprop, extract, load_external_features
from .slicing import ProjectionSet, mix64, project, sample_projections
from .swdloss import (
    DEFAULT_PROJECTION_COUNTS,
    GradientBuffer,
    LossConfig,
    content_loss,
    iw_swd,
    mr_sw1d,
    quantile_resample,
    style_loss,
    sw1d,
    swd,
)
from .tensors import (
    FeatureMap,
    ImageBuffer,
    LossReport,
    RegionMask,
    downsample_mask,
    features_to_image,
    image_to_features,
    load_image,
    load_mask,
    read_fmap,
    save_image,
    write_fmap,
)
from .tiling import (
    AdainStylizer,
    IdentityStylizer,
    PaletteStylizer,
    Stylizer,
    TileReference,
    View,
    ViewSet,
    run_multiview_edit,
    sample_ref_depths,
    tile_2x2,
    untile_2x2,
)

__version__ = "0.1.0"
