"""Voronoi half-patch extraction.

Every half-edge of a model yields one record holding:

* an ``(N_c, N_s, 3)`` half-patch: N_c interior curve samples (column 0)
  plus ``N_s - 1`` surface samples per row, marched from the curve into the
  face interior along the in-plane UV normal until the walk leaves the
  half-edge's Voronoi cell or the trimmed region;
* the ``N_n`` on-curve samples of the successor half-edge nearest the
  shared vertex, in increasing-arclength order;
* a binary inner/outer label taken from the owning loop.

Distances for the Voronoi partition are measured in each face's parameter
rectangle after rescaling both axes to a common arclength-based unit, so
unlike parameter units (radians vs. axial lengths) compare fairly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError
from .model import BrepModel, ModelError, halfedge_curve_samples, halfedge_params, validate


class ZeroDepthWarning(UserWarning):
    """A half-patch walk had zero depth; samples collapsed onto the curve."""


@dataclass
class SamplingConfig:
    n_curve: int = 6          # curve samples per half-edge
    n_surface: int = 4        # samples per row, column 0 on the curve
    n_next: int = 4           # successor samples stored per record
    uv_grid: int = 64         # Voronoi grid resolution per axis
    pcurve_samples: int = 33  # polyline resolution for parametric distances

    def __post_init__(self):
        if self.n_curve < 1 or self.n_surface < 1:
            raise ValueError("sample counts must be >= 1")
        if self.n_next > self.n_curve:
            raise ValueError("n_next cannot exceed n_curve")

    @property
    def descriptor_length(self) -> int:
        return (self.n_curve + 1) * self.n_surface * 3 + 1


@dataclass(eq=False)
class UvPolyline:
    halfedge: int
    points: np.ndarray        # (M, 2) raw UV, ordered along the half-edge


@dataclass(eq=False)
class VoronoiCellMap:
    face: int
    resolution: int
    domain: tuple
    labels: np.ndarray        # (res, res) halfedge ids, -1 outside the trim


@dataclass(eq=False)
class HalfPatch:
    samples: np.ndarray       # (N_c, N_s, 3)


@dataclass(eq=False)
class VhpRecord:
    halfedge: int
    half_patch: HalfPatch
    next_samples: np.ndarray  # (N_n, 3)
    label: int                # 1 outer, 0 inner


# ---------------------------------------------------------------------------
# Per-face chart: normalized UV metric, boundary polylines, trim test
# ---------------------------------------------------------------------------

def _sq_point_segment_distance(points, seg_a, seg_d, inv_l2):
    """Squared distances with precomputed segment direction and 1/len^2."""
    ap = points[:, None, :] - seg_a
    t = (ap * seg_d).sum(axis=-1) * inv_l2
    np.clip(t, 0.0, 1.0, out=t)
    dx = ap - t[:, :, None] * seg_d
    return (dx * dx).sum(axis=-1)


def _pcurve_knots(pc, n_default: int) -> np.ndarray:
    """Parameter knots whose chords represent the pcurve without waste.

    Straight pcurves are exact with a single chord; Poly2 breakpoints are
    exact by construction; curved pcurves fall back to dense sampling.
    """
    from .geometry import Poly2, Segment2

    if isinstance(pc, Segment2):
        return np.array([0.0, 1.0])
    if isinstance(pc, Poly2):
        return np.linspace(0.0, 1.0, pc.points.shape[0])
    return np.linspace(0.0, 1.0, n_default)


class FaceChart:
    """Cached per-face machinery for parametric-domain queries."""

    def __init__(self, model: BrepModel, face: int, cfg: SamplingConfig):
        self.model = model
        self.face = face
        self.cfg = cfg
        surf = model.faces[face].surface
        self.surface = surf
        self.domain = surf.domain()
        u0, u1, v0, v1 = self.domain
        uc, vc = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
        pu, pv = surf.partials(uc, vc)
        lu = float(np.linalg.norm(pu)) * (u1 - u0)
        lv = float(np.linalg.norm(pv)) * (v1 - v0)
        lmax = max(lu, lv, 1e-12)
        self.su = max(lu / lmax, 1e-9)
        self.sv = max(lv / lmax, 1e-9)

        # bounding half-edges sorted by id so distance ties break low
        self.halfedges = sorted(model.face_halfedges(face))
        self.polylines = {}
        seg_a, seg_b, seg_owner_sizes = [], [], []
        for h in self.halfedges:
            pc = model.halfedges[h].pcurve
            if pc is None:
                raise GeometryError(f"halfedge {h} has no pcurve on face {face}")
            pts = self.to_norm(pc.point(_pcurve_knots(pc, cfg.pcurve_samples)))
            self.polylines[h] = pts
            seg_a.append(pts[:-1])
            seg_b.append(pts[1:])
            seg_owner_sizes.append(pts.shape[0] - 1)
        self._seg_a = np.concatenate(seg_a)
        self._seg_b = np.concatenate(seg_b)
        self._seg_d = self._seg_b - self._seg_a
        self._seg_inv_l2 = 1.0 / np.maximum((self._seg_d ** 2).sum(axis=1), 1e-300)
        self._owner_starts = np.concatenate([[0], np.cumsum(seg_owner_sizes)[:-1]])
        self._he_ids = np.array(self.halfedges, dtype=int)

        # closed polygons per loop for the even-odd trim test
        polys = []
        for li in model.face_loops(face):
            chain = [self.polylines[h][:-1] for h in model.loops[li].halfedges]
            polys.append(np.concatenate(chain))
        edges_a = []
        edges_b = []
        for poly in polys:
            edges_a.append(poly)
            edges_b.append(np.roll(poly, -1, axis=0))
        self._poly_a = np.concatenate(edges_a)
        self._poly_b = np.concatenate(edges_b)

    def to_norm(self, uv):
        uv = np.asarray(uv, dtype=float)
        u0, u1, v0, v1 = self.domain
        return np.stack(
            [(uv[..., 0] - u0) / (u1 - u0) * self.su,
             (uv[..., 1] - v0) / (v1 - v0) * self.sv], axis=-1)

    def from_norm(self, xy):
        xy = np.asarray(xy, dtype=float)
        u0, u1, v0, v1 = self.domain
        return np.stack(
            [xy[..., 0] / self.su * (u1 - u0) + u0,
             xy[..., 1] / self.sv * (v1 - v0) + v0], axis=-1)

    def norm_tangent(self, pcurve, t):
        """Pcurve tangent mapped into normalized UV coordinates."""
        g = np.asarray(pcurve.tangent(t), dtype=float)
        u0, u1, v0, v1 = self.domain
        return np.stack([g[..., 0] / (u1 - u0) * self.su,
                         g[..., 1] / (v1 - v0) * self.sv], axis=-1)

    def in_region(self, pts_norm) -> np.ndarray:
        """Even-odd trim test against all loop polygons (N, 2) -> (N,)."""
        p = np.asarray(pts_norm, dtype=float).reshape(-1, 2)
        a, b = self._poly_a, self._poly_b
        ay, by = a[:, 1], b[:, 1]
        py = p[:, 1][:, None]
        straddle = (ay[None, :] > py) != (by[None, :] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = a[:, 0] + (py - ay) / (by - ay) * (b[:, 0] - a[:, 0])
        crossing = straddle & (p[:, 0][:, None] < xi)
        return (crossing.sum(axis=1) % 2).astype(bool)

    def halfedge_distances(self, pts_norm) -> np.ndarray:
        """Distance from each point to each bounding half-edge -> (N, H)."""
        return np.sqrt(self._sq_halfedge_distances(pts_norm))

    def _sq_halfedge_distances(self, pts_norm) -> np.ndarray:
        p = np.asarray(pts_norm, dtype=float).reshape(-1, 2)
        d2 = _sq_point_segment_distance(p, self._seg_a, self._seg_d, self._seg_inv_l2)
        return np.minimum.reduceat(d2, self._owner_starts, axis=1)

    def nearest_halfedge(self, pts_norm) -> np.ndarray:
        d = self._sq_halfedge_distances(pts_norm)
        idx = np.argmin(d, axis=1)   # ties pick the first = lowest halfedge id
        return self._he_ids[idx]

    @property
    def diag(self) -> float:
        return float(np.hypot(self.su, self.sv))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def boundary_pcurves(model: BrepModel, face: int, samples_per_halfedge: int = 33):
    """UV polylines of the face's bounding half-edges, in loop order.

    Raises GeometryError if a pcurve is inconsistent with the half-edge's
    3D curve or leaves the face's parameter rectangle.
    """
    surf = model.faces[face].surface
    u0, u1, v0, v1 = surf.domain()
    t = np.linspace(0.0, 1.0, samples_per_halfedge)
    tol_dom = 1e-9 * (abs(u1 - u0) + abs(v1 - v0))
    out = []
    for li in model.face_loops(face):
        for h in model.loops[li].halfedges:
            he = model.halfedges[h]
            if he.pcurve is None:
                raise GeometryError(f"halfedge {h} has no pcurve")
            uv = he.pcurve.point(t)
            if (uv[:, 0].min() < u0 - tol_dom or uv[:, 0].max() > u1 + tol_dom
                    or uv[:, 1].min() < v0 - tol_dom or uv[:, 1].max() > v1 + tol_dom):
                raise GeometryError(f"halfedge {h}: pcurve leaves the domain of face {face}")
            curve = model.edges[he.edge].curve
            params = t if he.forward else 1.0 - t
            gap = np.linalg.norm(surf.point(uv[:, 0], uv[:, 1]) - curve.point(params),
                                 axis=-1).max()
            if gap > 1e-6:
                raise GeometryError(
                    f"halfedge {h}: pcurve disagrees with 3D curve by {gap:.2e}")
            out.append(UvPolyline(halfedge=h, points=uv))
    return out


def voronoi_assign(model: BrepModel, face: int, cfg: SamplingConfig | None = None,
                   chart: FaceChart | None = None) -> VoronoiCellMap:
    """Label each in-trim grid sample with its nearest bounding half-edge."""
    cfg = cfg or SamplingConfig()
    chart = chart or FaceChart(model, face, cfg)
    res = cfg.uv_grid
    u0, u1, v0, v1 = chart.domain
    us = u0 + (np.arange(res) + 0.5) * (u1 - u0) / res
    vs = v0 + (np.arange(res) + 0.5) * (v1 - v0) / res
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    pts = chart.to_norm(np.stack([uu.ravel(), vv.ravel()], axis=-1))
    labels = np.full(res * res, -1, dtype=int)
    inside = chart.in_region(pts)
    if inside.any():
        labels[inside] = chart.nearest_halfedge(pts[inside])
    return VoronoiCellMap(face=face, resolution=res, domain=chart.domain,
                          labels=labels.reshape(res, res))


def _walk_extents(chart: FaceChart, ray_he, starts, normals, steps: int):
    """First-exit distance along each ray from its own half-edge cell.

    ray_he (R,) owns each ray; starts/normals are (R, 2) in normalized UV.
    """
    tmax = chart.diag
    r = starts.shape[0]

    def ok(points, owners):
        return chart.in_region(points) & (chart.nearest_halfedge(points) == owners)

    steps = max(16, steps // 2)
    ts = np.linspace(0.0, tmax, steps + 1)[1:]          # exclude t = 0
    pts = starts[:, None, :] + ts[None, :, None] * normals[:, None, :]
    good = ok(pts.reshape(-1, 2), np.repeat(ray_he, steps)).reshape(r, steps)
    first_bad = np.where(good.all(axis=1), steps, np.argmin(good, axis=1))
    lo = np.where(first_bad == 0, 0.0, ts[np.maximum(first_bad - 1, 0)])
    hi = np.where(first_bad == steps, tmax, ts[np.minimum(first_bad, steps - 1)])

    live = first_bad < steps
    if live.any():
        for _ in range(10):
            mid = 0.5 * (lo + hi)
            good = ok(starts + mid[:, None] * normals, ray_he)
            lo = np.where(live & good, mid, lo)
            hi = np.where(live & ~good, mid, hi)
    return lo


def _face_half_patches(model: BrepModel, chart: FaceChart, he_ids,
                       cfg: SamplingConfig):
    """Half-patches for several half-edges of one face, with batched walks."""
    nc, ns = cfg.n_curve, cfg.n_surface
    t_he = np.arange(1, nc + 1, dtype=float) / (nc + 1)
    starts = []
    normals = []
    on_curves = []
    for h in he_ids:
        he = model.halfedges[h]
        curve = model.edges[he.edge].curve
        on_curves.append(curve.point(halfedge_params(model, h, nc)))
        st = chart.to_norm(he.pcurve.point(t_he))
        tang = chart.norm_tangent(he.pcurve, t_he)
        tang = tang / np.maximum(np.linalg.norm(tang, axis=-1, keepdims=True), 1e-300)
        nrm = np.stack([-tang[:, 1], tang[:, 0]], axis=-1)  # interior on the left
        starts.append(st)
        normals.append(nrm)
    starts = np.concatenate(starts)
    normals = np.concatenate(normals)
    ray_he = np.repeat(np.array(he_ids, dtype=int), nc)

    # defensive orientation probe
    eps = 1e-4 * chart.diag
    flip = ~chart.in_region(starts + eps * normals) \
        & chart.in_region(starts - eps * normals)
    normals[flip] *= -1.0

    patches = {}
    if ns > 1:
        extents = _walk_extents(chart, ray_he, starts, normals, cfg.uv_grid)
        frac = np.arange(1, ns, dtype=float) / (ns - 1)
        offs = starts[:, None, :] + (extents[:, None] * frac[None, :])[..., None] \
            * normals[:, None, :]
        uv = chart.from_norm(offs.reshape(-1, 2))
        u0, u1, v0, v1 = chart.domain
        uv[:, 0] = np.clip(uv[:, 0], u0, u1)
        uv[:, 1] = np.clip(uv[:, 1], v0, v1)
        surf_pts = chart.surface.point(uv[:, 0], uv[:, 1]).reshape(len(he_ids), nc,
                                                                   ns - 1, 3)
        extents = extents.reshape(len(he_ids), nc)
    for k, h in enumerate(he_ids):
        samples = np.empty((nc, ns, 3))
        samples[:, 0, :] = on_curves[k]
        if ns > 1:
            pts = surf_pts[k]
            degenerate = extents[k] < 1e-9
            if degenerate.any():
                warnings.warn(
                    f"halfedge {h}: zero-depth walk on face {chart.face}; "
                    f"surface samples collapse onto the curve",
                    ZeroDepthWarning,
                    stacklevel=3,
                )
                pts = pts.copy()
                pts[degenerate] = on_curves[k][degenerate][:, None, :]
            samples[:, 1:, :] = pts
        patches[h] = HalfPatch(samples=samples)
    return patches


def sample_half_patch(model: BrepModel, halfedge: int, cfg: SamplingConfig | None = None,
                      chart: FaceChart | None = None) -> HalfPatch:
    """Sample the (N_c, N_s, 3) half-patch of one half-edge."""
    cfg = cfg or SamplingConfig()
    he = model.halfedges[halfedge]
    face = model.loops[he.loop].face
    chart = chart or FaceChart(model, face, cfg)
    return _face_half_patches(model, chart, [halfedge], cfg)[halfedge]


def sample_next_pointers(model: BrepModel, halfedge: int,
                         cfg: SamplingConfig | None = None) -> np.ndarray:
    """The successor's N_n on-curve samples nearest the shared vertex."""
    cfg = cfg or SamplingConfig()
    nxt = model.next_in_loop(halfedge)
    return halfedge_curve_samples(model, nxt, cfg.n_curve)[: cfg.n_next]


def extract_vhp(model: BrepModel, cfg: SamplingConfig | None = None):
    """One VhpRecord per half-edge, indexed by half-edge id."""
    cfg = cfg or SamplingConfig()
    report = validate(model)
    if not (report.twin_consistent and report.loops_closed):
        raise ModelError(f"model fails twin/loop validation: {report.defects[:3]}")

    records: list = [None] * len(model.halfedges)
    for face in range(len(model.faces)):
        try:
            chart = FaceChart(model, face, cfg)
            he_ids = [h for li in model.face_loops(face)
                      for h in model.loops[li].halfedges]
            patches = _face_half_patches(model, chart, he_ids, cfg)
        except Exception as exc:
            raise GeometryError(f"sampling failed on face {face}: {exc}") from exc
        for li in model.face_loops(face):
            loop = model.loops[li]
            label = 1 if loop.kind == "outer" else 0
            for h in loop.halfedges:
                try:
                    nxt = sample_next_pointers(model, h, cfg)
                except Exception as exc:
                    raise GeometryError(f"sampling failed on halfedge {h}: {exc}") from exc
                records[h] = VhpRecord(halfedge=h, half_patch=patches[h],
                                       next_samples=nxt, label=label)
    return records
