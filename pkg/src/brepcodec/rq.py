"""Residual vector quantization over descriptor vectors.

A codebook holds D ordered levels trained by stacked k-means: level 1
clusters the standardized descriptors, each deeper level clusters the
running residuals.  Every level carries one extra all-zero centroid, so
adding a level can never increase a vector's reconstruction error.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


class CodebookError(ValueError):
    pass


@dataclass(eq=False)
class Codebook:
    levels: np.ndarray     # (D, K+1, dim); levels[:, -1] is the zero centroid
    mean: np.ndarray       # (dim,)
    scale: np.ndarray      # (dim,)

    @property
    def depth(self) -> int:
        return int(self.levels.shape[0])

    @property
    def level_size(self) -> int:
        return int(self.levels.shape[1])

    @property
    def dim(self) -> int:
        return int(self.levels.shape[2])

    def content_id(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.levels, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(self.mean, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(self.scale, dtype=np.float64).tobytes())
        return h.hexdigest()[:16]


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
            max_iter: int = 50) -> np.ndarray:
    """Deterministic Lloyd k-means with k-means++ seeding."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    d2 = np.full(n, np.inf)
    idx = int(rng.integers(0, n))
    centers[0] = points[idx]
    for c in range(1, k):
        d2 = np.minimum(d2, ((points - centers[c - 1]) ** 2).sum(axis=1))
        total = d2.sum()
        if total <= 0.0:
            centers[c] = points[int(rng.integers(0, n))]
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r))
        centers[c] = points[min(idx, n - 1)]

    assign = np.full(n, -1)
    for _ in range(max_iter):
        dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2) \
            if n * k * points.shape[1] < 4_000_000 else _chunked_sqdist(points, centers)
        new_assign = dist.argmin(axis=1)
        for c in range(k):
            mask = new_assign == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
            else:
                far = int(dist[np.arange(n), new_assign].argmax())
                centers[c] = points[far]
                new_assign[far] = c
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centers


def _chunked_sqdist(points, centers, chunk: int = 2048):
    out = np.empty((points.shape[0], centers.shape[0]))
    c2 = (centers ** 2).sum(axis=1)
    for i in range(0, points.shape[0], chunk):
        p = points[i:i + chunk]
        out[i:i + chunk] = ((p ** 2).sum(axis=1)[:, None]
                            - 2.0 * p @ centers.T + c2[None, :])
    return np.maximum(out, 0.0)


def train_codebook(corpus: np.ndarray, depth: int = 4, size: int = 256,
                   seed: int = 0, max_iter: int = 50,
                   dim_weights=None) -> Codebook:
    """Stacked k-means codebook; deterministic for a fixed seed.

    ``size`` counts the trained centroids per level; the stored level is
    one larger because the zero centroid is appended.  ``dim_weights``
    optionally emphasizes dimensions during clustering (the stored
    normalization record absorbs it, so decoding stays exact); descriptor
    corpora use it to keep the trailing binary label crisp.
    """
    corpus = np.asarray(corpus, dtype=float)
    if corpus.ndim != 2:
        raise CodebookError("corpus must be a 2D (count, dim) array")
    n, dim = corpus.shape
    if depth < 1:
        raise CodebookError("depth must be >= 1")
    if n < size:
        raise CodebookError(
            f"corpus of {n} descriptors is smaller than codebook size {size}; "
            f"use a size of at most {n}"
        )
    mean = corpus.mean(axis=0)
    std = corpus.std(axis=0)
    scale = np.where(std > 1e-12, std, 1.0)
    if dim_weights is not None:
        w = np.asarray(dim_weights, dtype=float).reshape(dim)
        if np.any(w <= 0):
            raise CodebookError("dim_weights must be positive")
        scale = scale / w

    rng = np.random.default_rng(seed)
    residual = (corpus - mean) / scale
    levels = np.zeros((depth, size + 1, dim))
    for d in range(depth):
        centers = _kmeans(residual, size, rng, max_iter=max_iter)
        levels[d, :size] = centers
        # levels[d, size] stays zero
        dist = _chunked_sqdist(residual, levels[d])
        residual = residual - levels[d][dist.argmin(axis=1)]
    return Codebook(levels=levels, mean=mean, scale=scale)


def rq_encode(descriptor: np.ndarray, cb: Codebook) -> np.ndarray:
    """Greedy per-level nearest-centroid codes for one descriptor."""
    return rq_encode_many(np.asarray(descriptor, dtype=float)[None, :], cb)[0]


def rq_encode_many(descriptors: np.ndarray, cb: Codebook) -> np.ndarray:
    d = np.asarray(descriptors, dtype=float)
    if d.ndim != 2 or d.shape[1] != cb.dim:
        raise CodebookError(f"descriptor length {d.shape[-1]} != codebook dim {cb.dim}")
    residual = (d - cb.mean) / cb.scale
    codes = np.empty((d.shape[0], cb.depth), dtype=int)
    for lvl in range(cb.depth):
        dist = _chunked_sqdist(residual, cb.levels[lvl])
        idx = dist.argmin(axis=1)
        codes[:, lvl] = idx
        residual = residual - cb.levels[lvl][idx]
    return codes


def rq_decode(codes, cb: Codebook) -> np.ndarray:
    codes = np.asarray(codes, dtype=int)
    if codes.shape[-1] != cb.depth:
        raise CodebookError(f"expected {cb.depth} codes, got {codes.shape[-1]}")
    if codes.min() < 0 or codes.max() >= cb.level_size:
        raise CodebookError(f"code outside level range [0, {cb.level_size})")
    z = np.zeros(cb.dim) if codes.ndim == 1 else np.zeros((codes.shape[0], cb.dim))
    for lvl in range(cb.depth):
        z = z + cb.levels[lvl][codes[..., lvl]]
    return z * cb.scale + cb.mean


def reconstruction_rms(corpus: np.ndarray, cb: Codebook) -> float:
    """Root-mean-square per-scalar reconstruction error over a corpus."""
    corpus = np.asarray(corpus, dtype=float)
    codes = rq_encode_many(corpus, cb)
    rec = rq_decode(codes, cb)
    return float(np.sqrt(np.mean((rec - corpus) ** 2)))


def encoding_errors(corpus: np.ndarray, cb: Codebook,
                    depth: int | None = None) -> np.ndarray:
    """Per-vector residual norms in the quantizer's standardized metric.

    This is the objective the greedy encoder minimizes, so the zero
    centroid makes it non-increasing in the number of levels used.
    """
    corpus = np.asarray(corpus, dtype=float)
    depth = cb.depth if depth is None else depth
    if not 1 <= depth <= cb.depth:
        raise CodebookError(f"depth must be in [1, {cb.depth}]")
    residual = (corpus - cb.mean) / cb.scale
    for lvl in range(depth):
        dist = _chunked_sqdist(residual, cb.levels[lvl])
        residual = residual - cb.levels[lvl][dist.argmin(axis=1)]
    return np.linalg.norm(residual, axis=1)
