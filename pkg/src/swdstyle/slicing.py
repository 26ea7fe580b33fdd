"""Sampling of projection directions on the unit hypersphere.

Directions are drawn by normalizing standard-normal vectors from a
counter-based (Philox) generator, so any (seed, dim, count) triple
regenerates bit-identical vectors. Optimization loops derive fresh
per-iteration seeds with mix64, giving independent direction sets that
remain fully reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .tensors import FeatureMap, _frozen

_MASK64 = (1 << 64) - 1


def mix64(*parts: int) -> int:
    """Mix integers into one 64-bit seed (splitmix64 finalizer chain)."""
    acc = 0x9E3779B97F4A7C15
    for part in parts:
        acc = (acc ^ (part & _MASK64)) * 0xBF58476D1CE4E5B9 & _MASK64
        acc = (acc ^ (acc >> 27)) * 0x94D049BB133111EB & _MASK64
        acc = acc ^ (acc >> 31)
    return acc


@dataclass(frozen=True)
class ProjectionSet:
    """K unit vectors on the (dim-1)-sphere plus the seed that produced them."""

    dim: int
    count: int
    seed: int
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.shape != (self.count, self.dim):
            raise DimensionError(
                f"expected {(self.count, self.dim)} vectors, got {vectors.shape}"
            )
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("projection vectors must be unit length")
        object.__setattr__(self, "vectors", _frozen(vectors))


def sample_projections(dim: int, count: int, seed: int) -> ProjectionSet:
    """Draw count i.i.d. uniform directions on the (dim-1)-sphere."""
    if dim < 1:
        raise DimensionError("projection dim must be >= 1")
    if count < 1:
        raise DimensionError("projection count must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed & _MASK64))
    vecs = rng.standard_normal((count, dim))
    norms = np.linalg.norm(vecs, axis=1)
    # a standard-normal draw of near-zero norm is degenerate: redraw it
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        vecs[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(vecs, axis=1)
    vecs /= norms[:, None]
    return ProjectionSet(dim=dim, count=count, seed=seed, vectors=vecs)


def project(fmap: FeatureMap, proj: ProjectionSet) -> np.ndarray:
    """Project feature rows onto each direction.

    Returns a (count, M) array: row k holds the scalar population
    <F_m, V_k> for m = 1..M.
    """
    if proj.dim != fmap.channels:
        raise DimensionError(
            f"projection dim {proj.dim} != feature channels {fmap.channels}"
        )
    return proj.vectors @ fmap.data.T
