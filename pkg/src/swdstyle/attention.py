"""Adaptive instance normalization and reference-anchored shared attention.

Pure tensor math, no model attached: token matrices in, token matrices out.
Statistics are per-feature over tokens (instance-norm convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

ADAIN_EPS = 1e-5


def adain(x: np.ndarray, y: np.ndarray, eps: float = ADAIN_EPS) -> np.ndarray:
    """Rescale x so its per-feature mean/std match y's.

    sigma(y) * (x - mu(x)) / (sigma(x) + eps) + mu(y), column-wise. The eps
    guard makes constant columns land exactly on mu(y) instead of NaN.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValueError("adain requires non-empty inputs")
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise DimensionError(
            f"adain needs matching feature dims, got {x.shape} vs {y.shape}"
        )
    mu_x = x.mean(axis=0)
    sd_x = x.std(axis=0)
    mu_y = y.mean(axis=0)
    sd_y = y.std(axis=0)
    return sd_y * (x - mu_x) / (sd_x + eps) + mu_y


@dataclass(frozen=True)
class AttentionBlock:
    """Query/key/value token matrices for one attention participant."""

    queries: np.ndarray
    keys: np.ndarray
    values: np.ndarray
    role: str = "target"

    def __post_init__(self):
        q = np.asarray(self.queries, dtype=np.float64)
        k = np.asarray(self.keys, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
            raise DimensionError("q/k/v must be (tokens, head_dim) matrices")
        if not (q.shape[1] == k.shape[1] == v.shape[1]):
            raise DimensionError("q/k/v head dims must agree within a block")
        if k.shape[0] != v.shape[0]:
            raise DimensionError("keys and values must have equal token counts")
        if self.role not in ("target", "reference"):
            raise ValueError(f"unknown role {self.role!r}")
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "keys", k)
        object.__setattr__(self, "values", v)

    @property
    def head_dim(self) -> int:
        return self.queries.shape[1]

    @property
    def token_count(self) -> int:
        return self.keys.shape[0]


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def shared_attention(target: AttentionBlock, reference: AttentionBlock) -> np.ndarray:
    """Attention with target queries/keys renormalized toward the reference.

    Queries and keys of the target are AdaIN-matched to the reference's,
    then reference keys/values are prepended before the usual scaled
    dot-product attention. Values are concatenated as-is. An empty
    reference degrades to plain self-attention with AdaIN disabled.
    """
    if target.queries.shape[0] == 0:
        raise ValueError("shared_attention requires a non-empty target")
    if target.head_dim != reference.head_dim:
        raise DimensionError(
            f"head dims differ: {target.head_dim} vs {reference.head_dim}"
        )
    if reference.token_count == 0:
        q_hat = target.queries
        keys = target.keys
        values = target.values
    else:
        q_hat = adain(target.queries, reference.queries)
        k_hat = adain(target.keys, reference.keys)
        keys = np.vstack([reference.keys, k_hat])
        values = np.vstack([reference.values, target.values])
    scores = q_hat @ keys.T / np.sqrt(target.head_dim)
    return _softmax_rows(scores) @ values
