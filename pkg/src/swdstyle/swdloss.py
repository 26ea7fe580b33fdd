"""Sliced-Wasserstein loss kernels with analytic gradients.

All kernels return both the scalar value and the gradient with respect to
the source side. Sorting uses stable order so tie-breaking (and therefore
the subgradient at ties) is deterministic. Distances accumulate in 64-bit.

Importance weighting follows the softmax-of-distances rule; the weights are
treated as constants in the gradient (stop-gradient), matching the
importance-sampling reading of the weighted estimator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, MaskError
from .slicing import ProjectionSet, mix64, project, sample_projections
from .tensors import FeatureMap, LossReport, RegionMask, downsample_mask

# Projection budgets for the standard channel widths: 5% of 64/128/256/512.
DEFAULT_PROJECTION_COUNTS: Mapping[int, int] = {64: 3, 128: 6, 256: 13, 512: 26}

# A gradient buffer has the same (M, N) shape as the feature map it
# differentiates; plain arrays keep the kernels composable.
GradientBuffer = np.ndarray


@dataclass(frozen=True)
class LossConfig:
    """Knobs of the style loss.

    mode selects uniform or softmax-importance weighting over projections.
    Projection counts per layer default to max(1, round(fraction * N_l)),
    which reproduces the 3/6/13/26 schedule at the default 5% fraction for
    widths 64/128/256/512; projection_counts overrides per channel width.
    exclude_label names a mask region the style loss skips entirely.
    """

    mode: str = "uniform"
    projection_fraction: float = 0.05
    projection_counts: Mapping[int, int] | None = None
    content_weight: float = 0.1
    exclude_label: int | None = None

    def __post_init__(self):
        if self.mode not in ("uniform", "importance"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0.0 < self.projection_fraction <= 1.0):
            raise ValueError("projection_fraction must be in (0, 1]")
        if self.projection_counts is not None:
            if any(c < 1 for c in self.projection_counts.values()):
                raise ValueError("projection counts must be >= 1")
        if not np.isfinite(self.content_weight) or self.content_weight < 0:
            raise ValueError("content_weight must be finite and >= 0")

    def projections_for(self, channels: int) -> int:
        if self.projection_counts is not None and channels in self.projection_counts:
            return self.projection_counts[channels]
        return max(1, round(self.projection_fraction * channels))


# ---------------------------------------------------------------------------
# 1D kernels (batched over projections)
# ---------------------------------------------------------------------------


def _resample_positions(n: int, target_len: int):
    """Evenly spaced quantile positions over sorted indices 0..n-1."""
    if target_len == 1:
        t = np.array([(n - 1) / 2.0])
    else:
        t = np.arange(target_len) * ((n - 1) / (target_len - 1))
    lo = np.floor(t).astype(np.int64)
    lo = np.minimum(lo, n - 1)
    hi = np.minimum(lo + 1, n - 1)
    frac = t - lo
    return lo, hi, frac


def quantile_resample(p: np.ndarray, target_len: int) -> np.ndarray:
    """Linear interpolation of sort(p) at target_len evenly spaced quantiles.

    Endpoints are inclusive; target_len == len(p) returns sort(p) exactly.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise ValueError("cannot resample an empty population")
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    s = np.sort(p, kind="stable")
    lo, hi, frac = _resample_positions(p.size, target_len)
    return s[lo] * (1.0 - frac) + s[hi] * frac


def _resample_rows(sorted_rows: np.ndarray, target_len: int) -> np.ndarray:
    """quantile_resample applied to each row of an already-sorted (K, m) array."""
    lo, hi, frac = _resample_positions(sorted_rows.shape[1], target_len)
    return sorted_rows[:, lo] * (1.0 - frac) + sorted_rows[:, hi] * frac


def _pair_cost_rows(P: np.ndarray, Q: np.ndarray, policy: str = "smaller"):
    """Rank-matched squared cost between row populations of P and Q.

    P is (K, mp), Q is (K, mq). Returns (costs (K,), grad wrt P (K, mp)).
    Unequal lengths are reconciled by quantile resampling: policy "smaller"
    matches at the smaller count (gradient flows through the source-side
    resampling when the source is larger); policy "target" always resamples
    Q to mp, keeping every source entry in the matching.
    """
    K, mp = P.shape
    mq = Q.shape[1]
    order = np.argsort(P, axis=1, kind="stable")
    sp = np.take_along_axis(P, order, axis=1)
    sq = np.sort(Q, axis=1, kind="stable")

    if mq != mp and (policy == "target" or mp < mq):
        sq = _resample_rows(sq, mp)
        mq = mp

    if mp == mq:
        diff = sp - sq
        costs = np.einsum("km,km->k", diff, diff) / mp
        grad_sorted = (2.0 / mp) * diff
    else:
        # source is larger: resample sp down to mq and push the gradient
        # back through the interpolation weights
        lo, hi, frac = _resample_positions(mp, mq)
        p_res = sp[:, lo] * (1.0 - frac) + sp[:, hi] * frac
        diff = p_res - sq
        costs = np.einsum("km,km->k", diff, diff) / mq
        g_res = (2.0 / mq) * diff
        grad_sorted = np.zeros_like(sp)
        np.add.at(grad_sorted, (slice(None), lo), g_res * (1.0 - frac))
        np.add.at(grad_sorted, (slice(None), hi), g_res * frac)

    grad = np.empty_like(P)
    np.put_along_axis(grad, order, grad_sorted, axis=1)
    return costs, grad


def sw1d(p: np.ndarray, q: np.ndarray) -> tuple[float, np.ndarray]:
    """1D rank-matched squared transport cost and its gradient wrt p.

    value = (1/n) * sum((sort(p) - sort(q))^2); the gradient at entry m
    pairs p_m's rank with the same rank in sort(q).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or q.ndim != 1:
        raise DimensionError("populations must be 1D")
    if p.size == 0 or q.size == 0:
        raise DimensionError("populations must be non-empty")
    if p.size != q.size:
        raise DimensionError(
            f"population lengths differ ({p.size} vs {q.size}); "
            "resample before calling sw1d"
        )
    costs, grads = _pair_cost_rows(p[None, :], q[None, :])
    return float(costs[0]), grads[0]


def mr_sw1d(
    p: np.ndarray,
    q: np.ndarray,
    mask_p: np.ndarray,
    mask_q: np.ndarray,
    num_labels: int,
    exclude_label: int | None = None,
) -> tuple[float, np.ndarray]:
    """Region-partitioned 1D transport cost summed over labels 0..num_labels.

    Each label's sub-populations are matched independently; unequal region
    sizes are quantile-resampled to the smaller count. A region that is
    non-empty on exactly one side signals inconsistent masks and raises.
    The excluded label contributes zero value and zero gradient.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask_p = np.asarray(mask_p)
    mask_q = np.asarray(mask_q)
    if p.size == 0 or q.size == 0:
        raise MaskError("all regions empty: populations are empty")
    if mask_p.shape != p.shape or mask_q.shape != q.shape:
        raise DimensionError("label vectors must align with populations")
    if mask_p.max() > num_labels or mask_q.max() > num_labels:
        raise MaskError(f"labels exceed declared max {num_labels}")

    value = 0.0
    grad = np.zeros_like(p)
    for label in range(num_labels + 1):
        ip = np.flatnonzero(mask_p == label)
        iq = np.flatnonzero(mask_q == label)
        if ip.size == 0 and iq.size == 0:
            continue
        if ip.size == 0 or iq.size == 0:
            side = "source" if iq.size == 0 else "target"
            raise MaskError(
                f"region {label} is non-empty only on the {side} side"
            )
        if exclude_label is not None and label == exclude_label:
            continue
        costs, g = _pair_cost_rows(p[ip][None, :], q[iq][None, :])
        value += float(costs[0])
        grad[ip] += g[0]
    return value, grad


def softmax_combine(distances: np.ndarray) -> tuple[float, np.ndarray]:
    """Combine per-projection distances with softmax importance weights."""
    d = np.asarray(distances, dtype=np.float64)
    e = np.exp(d - d.max())
    w = e / e.sum()
    return float(np.dot(w, d)), w


# ---------------------------------------------------------------------------
# Feature-map level losses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionSpec:
    """One region pairing inside a layer's style loss.

    src_indices/target_indices select pixel rows (None means all rows).
    policy picks the unequal-size reconciliation (see _pair_cost_rows).
    An excluded region contributes nothing, including to the gradient.
    """

    target: FeatureMap | None
    src_indices: np.ndarray | None = None
    target_indices: np.ndarray | None = None
    policy: str = "smaller"
    excluded: bool = False


def region_sw_layer(
    src: FeatureMap,
    proj: ProjectionSet,
    regions: Sequence[RegionSpec],
    mode: str = "uniform",
) -> tuple[float, GradientBuffer, np.ndarray, np.ndarray]:
    """Per-layer (multi-region) sliced loss over one set of projections.

    Returns (value, gradient wrt src data, per-projection distances,
    per-projection weights). Distances sum region costs per projection;
    in importance mode the weights are softmax(distances), else uniform.
    """
    P = project(src, proj)
    K = proj.count
    distances = np.zeros(K)
    pop_grad = np.zeros_like(P)
    target_proj: dict[int, np.ndarray] = {}
    for spec in regions:
        if spec.excluded:
            continue
        if spec.target is None:
            raise MaskError("non-excluded region has no target")
        key = id(spec.target)
        if key not in target_proj:
            target_proj[key] = project(spec.target, proj)
        Q = target_proj[key]
        Psub = P if spec.src_indices is None else P[:, spec.src_indices]
        Qsub = Q if spec.target_indices is None else Q[:, spec.target_indices]
        if Psub.shape[1] == 0 or Qsub.shape[1] == 0:
            raise MaskError("region is empty on one side at this layer")
        costs, grads = _pair_cost_rows(Psub, Qsub, policy=spec.policy)
        distances += costs
        if spec.src_indices is None:
            pop_grad += grads
        else:
            pop_grad[:, spec.src_indices] += grads

    if mode == "importance":
        value, weights = softmax_combine(distances)
        grad = (pop_grad * weights[:, None]).T @ proj.vectors
    else:
        value = float(np.mean(distances))
        weights = np.full(K, 1.0 / K)
        grad = pop_grad.T @ proj.vectors / K
    return value, grad, distances, weights


def swd(
    src: FeatureMap, tgt: FeatureMap, proj: ProjectionSet
) -> tuple[float, GradientBuffer]:
    """Monte Carlo sliced transport cost between two feature maps.

    Mean over projections of the 1D rank-matched squared cost; unequal
    pixel counts are reconciled by resampling the target populations to the
    source count, so every source pixel keeps a gradient.
    """
    if src.channels != tgt.channels:
        raise DimensionError(
            f"channel mismatch: {src.channels} vs {tgt.channels}"
        )
    value, grad, _, _ = region_sw_layer(
        src, proj, [RegionSpec(target=tgt, policy="target")], mode="uniform"
    )
    return value, grad


def iw_swd(
    src: FeatureMap, tgt: FeatureMap, proj: ProjectionSet
) -> tuple[float, GradientBuffer, np.ndarray]:
    """Importance-weighted sliced cost: softmax-weighted mean over projections.

    The returned weights sum to 1. The gradient holds the weights constant.
    """
    if src.channels != tgt.channels:
        raise DimensionError(
            f"channel mismatch: {src.channels} vs {tgt.channels}"
        )
    value, grad, _, weights = region_sw_layer(
        src, proj, [RegionSpec(target=tgt, policy="target")], mode="importance"
    )
    return value, grad, weights


def content_loss(
    src_layers: Sequence[FeatureMap],
    ref_layers: Sequence[FeatureMap],
    weight: float,
) -> tuple[float, list[GradientBuffer]]:
    """Weighted per-layer mean-squared feature error and its gradients."""
    if len(src_layers) != len(ref_layers):
        raise DimensionError("layer lists must have equal length")
    value = 0.0
    grads = []
    for fm, ref in zip(src_layers, ref_layers):
        if fm.data.shape != ref.data.shape:
            raise DimensionError(
                f"layer {fm.layer_id}: shape {fm.data.shape} vs {ref.data.shape}"
            )
        diff = fm.data - ref.data
        scale = weight / diff.size
        value += scale * float(np.sum(diff * diff))
        grads.append(2.0 * scale * diff)
    return value, grads


def style_loss(
    src_layers: Sequence[FeatureMap],
    tgt_layers: Sequence[FeatureMap],
    config: LossConfig,
    seed: int,
    src_mask: RegionMask | None = None,
    tgt_mask: RegionMask | None = None,
    content_layers: Sequence[FeatureMap] | None = None,
) -> tuple[LossReport, list[GradientBuffer]]:
    """Sum of per-layer (importance-weighted) sliced costs, plus content term.

    When masks are supplied the per-layer cost partitions populations by
    region label on both sides. The content term, when reference layers are
    given, folds into the per-layer values so the report total stays the
    aggregate of its per-layer entries.
    """
    if len(src_layers) != len(tgt_layers):
        raise DimensionError("source and target layer lists differ in length")
    per_layer: list[tuple[int, float]] = []
    per_projection: list[list[tuple[float, float]]] = []
    grads: list[GradientBuffer] = []
    total = 0.0
    for i, (fm, tg) in enumerate(zip(src_layers, tgt_layers)):
        if fm.channels != tg.channels:
            raise DimensionError(
                f"layer {fm.layer_id}: channel mismatch "
                f"({fm.channels} vs {tg.channels})"
            )
        count = config.projections_for(fm.channels)
        proj = sample_projections(fm.channels, count, mix64(seed, i))
        regions = build_mask_regions(fm, tg, src_mask, tgt_mask, config.exclude_label)
        value, grad, dists, weights = region_sw_layer(
            fm, proj, regions, mode=config.mode
        )
        if content_layers is not None and config.content_weight > 0:
            c_val, c_grads = content_loss(
                [fm], [content_layers[i]], config.content_weight
            )
            value += c_val
            grad = grad + c_grads[0]
        per_layer.append((fm.layer_id, value))
        per_projection.append(list(zip(dists.tolist(), weights.tolist())))
        grads.append(grad)
        total += value
    report = LossReport(
        total=total, per_layer=per_layer, per_projection=per_projection
    )
    return report, grads


def build_mask_regions(
    src: FeatureMap,
    tgt: FeatureMap,
    src_mask: RegionMask | None,
    tgt_mask: RegionMask | None,
    exclude_label: int | None,
) -> list[RegionSpec]:
    """Region pairings for one layer from (optional) masks on both sides.

    Masks are downsampled to each side's layer resolution; a label present
    on exactly one side raises. Without masks the whole maps pair up.
    """
    if src_mask is None:
        return [RegionSpec(target=tgt, policy="target")]
    src_labels = downsample_mask(src_mask, src.spatial).flat()
    tgt_labels = (
        downsample_mask(tgt_mask, tgt.spatial).flat() if tgt_mask is not None else None
    )
    regions: list[RegionSpec] = []
    num_labels = src_mask.num_labels
    if tgt_mask is not None:
        num_labels = max(num_labels, tgt_mask.num_labels)
    for label in range(num_labels + 1):
        src_idx = np.flatnonzero(src_labels == label)
        if tgt_labels is None:
            if src_idx.size == 0:
                continue
            tgt_idx = None
        else:
            tgt_idx = np.flatnonzero(tgt_labels == label)
            if src_idx.size == 0 and tgt_idx.size == 0:
                continue
            if src_idx.size == 0 or tgt_idx.size == 0:
                side = "source" if tgt_idx.size else "target"
                raise MaskError(
                    f"label {label} is empty on the {side} side at layer "
                    f"{src.layer_id} resolution"
                )
        regions.append(
            RegionSpec(
                target=tgt,
                src_indices=src_idx,
                target_indices=tgt_idx,
                excluded=(exclude_label is not None and label == exclude_label),
            )
        )
    if not regions:
        raise MaskError("all regions empty")
    return regions
