"""Distribution and CAD metrics over model sets, plus curve-error checks.

Conventions fixed here: Chamfer distance is the symmetric mean of squared
nearest-neighbor distances (average of the two directions); the JSD
voxel grid is 28^3 with base-2 logarithms, so 1 bit is the maximum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .model import BrepModel, validate
from .sampler import FaceChart, SamplingConfig

JSD_DEFAULT_RESOLUTION = 28
POINTS_PER_CLOUD = 2000


@dataclass(eq=False)
class PointCloud:
    points: np.ndarray            # (n, 3)
    normals: np.ndarray | None = None
    source: str = ""


@dataclass
class MetricReport:
    coverage: float = float("nan")
    mmd: float = float("nan")
    jsd: float = float("nan")
    novel: float = float("nan")
    unique: float = float("nan")
    valid: float = float("nan")
    n_generated: int = 0
    n_reference: int = 0
    points_per_cloud: int = POINTS_PER_CLOUD
    voxel_resolution: int = JSD_DEFAULT_RESOLUTION
    seed: int = 0
    notes: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Surface sampling
# ---------------------------------------------------------------------------

def _face_cell_weights(model: BrepModel, face: int, cfg: SamplingConfig):
    """In-trim UV cells with their area-element weights."""
    chart = FaceChart(model, face, cfg)
    res = cfg.uv_grid
    u0, u1, v0, v1 = chart.domain
    du = (u1 - u0) / res
    dv = (v1 - v0) / res
    us = u0 + (np.arange(res) + 0.5) * du
    vs = v0 + (np.arange(res) + 0.5) * dv
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    uv = np.stack([uu.ravel(), vv.ravel()], axis=-1)
    inside = chart.in_region(chart.to_norm(uv))
    if not inside.any():
        return np.zeros((0, 2)), np.zeros(0), (du, dv)
    uv = uv[inside]
    pu, pv = chart.surface.partials(uv[:, 0], uv[:, 1])
    area = np.linalg.norm(np.cross(pu, pv), axis=-1) * du * dv
    return uv, area, (du, dv)


def surface_sample(model: BrepModel, n: int = POINTS_PER_CLOUD, seed: int = 0,
                   cfg: SamplingConfig | None = None, with_normals: bool = False
                   ) -> PointCloud:
    """Area-weighted uniform surface sampling, deterministic per seed."""
    cfg = cfg or SamplingConfig()
    if not model.faces:
        raise ValueError("model has no faces to sample")
    cells = []
    for f in range(len(model.faces)):
        uv, area, steps = _face_cell_weights(model, f, cfg)
        if area.size:
            cells.append((f, uv, area, steps))
    total = sum(c[2].sum() for c in cells)
    if total <= 0:
        raise ValueError("model has zero total surface area")

    rng = np.random.default_rng(seed)
    weights = np.concatenate([c[2] for c in cells]) / total
    counts = rng.multinomial(n, weights)
    pts = np.empty((n, 3))
    nrm = np.empty((n, 3)) if with_normals else None
    out = 0
    offset = 0
    for f, uv, area, (du, dv) in cells:
        take = counts[offset: offset + area.size]
        offset += area.size
        m = int(take.sum())
        if m == 0:
            continue
        idx = np.repeat(np.arange(area.size), take)
        jit = rng.uniform(-0.5, 0.5, (m, 2)) * np.array([du, dv])
        suv = uv[idx] + jit
        surf = model.faces[f].surface
        pts[out: out + m] = surf.point(suv[:, 0], suv[:, 1])
        if with_normals:
            pu, pv = surf.partials(suv[:, 0], suv[:, 1])
            nvec = np.cross(pu, pv)
            nrm[out: out + m] = nvec / np.maximum(
                np.linalg.norm(nvec, axis=-1, keepdims=True), 1e-300)
        out += m
    return PointCloud(points=pts[:out], normals=nrm[:out] if with_normals else None)


# ---------------------------------------------------------------------------
# Set-level metrics
# ---------------------------------------------------------------------------

def chamfer(a: PointCloud | np.ndarray, b: PointCloud | np.ndarray) -> float:
    """Symmetric mean squared nearest-neighbor distance."""
    pa = a.points if isinstance(a, PointCloud) else np.asarray(a, dtype=float)
    pb = b.points if isinstance(b, PointCloud) else np.asarray(b, dtype=float)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise ValueError("point clouds must be non-empty")
    d_ab, _ = cKDTree(pb).query(pa)
    d_ba, _ = cKDTree(pa).query(pb)
    return 0.5 * (float(np.mean(d_ab**2)) + float(np.mean(d_ba**2)))


def cov_mmd(gen, ref):
    """Coverage and minimum matching distance between cloud sets.

    Coverage counts references matched as some generated cloud's nearest
    reference; MMD averages each reference's distance to its closest
    generated cloud.
    """
    if not gen or not ref:
        raise ValueError("cloud sets must be non-empty")
    table = np.array([[chamfer(g, r) for r in ref] for g in gen])
    covered = set(int(i) for i in table.argmin(axis=1))
    coverage = len(covered) / len(ref)
    mmd = float(table.min(axis=0).mean())
    return coverage, mmd


def _occupancy(clouds, resolution: int) -> np.ndarray:
    hist = np.zeros(resolution**3)
    for c in clouds:
        p = c.points if isinstance(c, PointCloud) else np.asarray(c, dtype=float)
        idx = np.clip((p * resolution).astype(int), 0, resolution - 1)
        flat = (idx[:, 0] * resolution + idx[:, 1]) * resolution + idx[:, 2]
        hist += np.bincount(flat, minlength=resolution**3)
    total = hist.sum()
    return hist / total if total > 0 else hist


def jsd(gen, ref, resolution: int = JSD_DEFAULT_RESOLUTION) -> float:
    """Jensen-Shannon divergence (bits) between mean voxel occupancies.

    Clouds must be normalized into the unit box.
    """
    p = _occupancy(gen, resolution)
    q = _occupancy(ref, resolution)
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / b[mask])))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def novel_unique_valid(gen_models, train_keys, canonical_key=None):
    """Novel / Unique / Valid over generated models.

    ``canonical_key`` maps a model to a hashable duplicate-detection key
    (canonical token tuple); models it rejects count as distinct.
    ``train_keys`` is the set of training keys for novelty.
    """
    if not gen_models:
        raise ValueError("no generated models")
    train_set = set(train_keys)
    keys = []
    for i, m in enumerate(gen_models):
        key = None
        if canonical_key is not None:
            try:
                key = canonical_key(m)
            except Exception:
                key = ("unkeyed", i)
        keys.append(key if key is not None else ("unkeyed", i))
    novel = sum(1 for k in keys if k not in train_set) / len(keys)
    unique = len(set(keys)) / len(keys)
    valid = sum(1 for m in gen_models if validate(m).watertight) / len(gen_models)
    return novel, unique, valid


# ---------------------------------------------------------------------------
# Curve discretization error
# ---------------------------------------------------------------------------

def _polyline_deviation(curve, n_samples: int, n_probes: int) -> float:
    """Mean distance between the chord interpolant and the true curve."""
    knots = np.linspace(0.0, 1.0, n_samples)
    pts = curve.point(knots)
    probes = np.linspace(0.0, 1.0, n_probes)
    seg = np.clip((probes * (n_samples - 1)).astype(int), 0, n_samples - 2)
    frac = probes * (n_samples - 1) - seg
    interp = pts[seg] + frac[:, None] * (pts[seg + 1] - pts[seg])
    return float(np.mean(np.linalg.norm(interp - curve.point(probes), axis=-1)))


@dataclass
class CurveErrorReport:
    mean_deviation: float          # at samples_per_curve points
    chordal_mesh_deviation: float  # 32-segment companion
    curves: int = 0


def curve_error(model: BrepModel, samples_per_curve: int = 100,
                probes: int = 1000, mesh_segments: int = 32) -> CurveErrorReport:
    """Discretization error of curve sampling vs. a coarse chordal mesh."""
    fine = []
    coarse = []
    for e in model.edges:
        fine.append(_polyline_deviation(e.curve, samples_per_curve, probes))
        coarse.append(_polyline_deviation(e.curve, mesh_segments + 1, probes))
    return CurveErrorReport(mean_deviation=float(np.mean(fine)),
                            chordal_mesh_deviation=float(np.mean(coarse)),
                            curves=len(fine))
