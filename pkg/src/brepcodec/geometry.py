"""Parametric curves, surfaces, and 2D parameter-space curves.

Curves map a parameter u in [0, 1] to 3D points.  Surfaces map a
rectangular (u, v) domain to 3D points and expose first partial
derivatives on the domain interior.  Pcurves (Segment2 / Arc2 / Poly2)
trace a half-edge's image inside its face's parameter rectangle and use
the same [0, 1] parameter convention, running along the half-edge
direction.

All variants support an exact similarity transform ``transformed(offset,
scale)`` mapping points p to (p - offset) * scale without touching
parameter domains, so model normalization never invalidates pcurves.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TAU = 2.0 * np.pi


class GeometryError(ValueError):
    """Degenerate geometry or evaluation outside a valid parameter domain."""


def _vec(p, dim: int = 3) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(dim)
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite coordinates: {a!r}")
    return a


def _unit(v) -> np.ndarray:
    v = _vec(v)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise GeometryError("zero-length direction vector")
    return v / n


def frame_for_normal(n) -> tuple:
    """Right-handed in-plane basis (U, V) with U x V along n."""
    n = _unit(n)
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    u = e - (e @ n) * n
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def _bernstein3(t):
    t = np.asarray(t, dtype=float)
    mt = 1.0 - t
    return np.stack([mt**3, 3.0 * mt**2 * t, 3.0 * mt * t**2, t**3], axis=-1)


def _bernstein3_deriv(t):
    t = np.asarray(t, dtype=float)
    mt = 1.0 - t
    return np.stack(
        [-3.0 * mt**2, 3.0 * mt**2 - 6.0 * mt * t, 6.0 * mt * t - 3.0 * t**2, 3.0 * t**2],
        axis=-1,
    )


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LineSegment:
    """Straight segment from p0 (u=0) to p1 (u=1)."""

    p0: np.ndarray
    p1: np.ndarray

    kind = "line"

    def __post_init__(self):
        object.__setattr__(self, "p0", _vec(self.p0))
        object.__setattr__(self, "p1", _vec(self.p1))

    def point(self, u):
        u = np.asarray(u, dtype=float)
        return self.p0 + np.multiply.outer(u, self.p1 - self.p0)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(self.p1 - self.p0, u.shape + (3,)).copy()

    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    def bbox(self):
        pts = np.stack([self.p0, self.p1])
        return pts.min(axis=0), pts.max(axis=0)

    def transformed(self, offset, scale: float) -> "LineSegment":
        o = _vec(offset)
        return LineSegment((self.p0 - o) * scale, (self.p1 - o) * scale)


@dataclass(frozen=True, eq=False)
class CircularArc:
    """Arc of a circle; theta runs linearly from theta0 (u=0) to theta1 (u=1).

    x_axis and y_axis are orthonormal vectors spanning the circle plane; a
    full circle uses theta1 = theta0 + 2*pi.
    """

    center: np.ndarray
    radius: float
    x_axis: np.ndarray
    y_axis: np.ndarray
    theta0: float
    theta1: float

    kind = "arc"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "x_axis", _unit(self.x_axis))
        object.__setattr__(self, "y_axis", _unit(self.y_axis))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "theta0", float(self.theta0))
        object.__setattr__(self, "theta1", float(self.theta1))
        if self.radius <= 0:
            raise GeometryError("arc radius must be positive")
        if abs(np.dot(self.x_axis, self.y_axis)) > 1e-9:
            raise GeometryError("arc frame axes must be orthogonal")

    def _theta(self, u):
        u = np.asarray(u, dtype=float)
        return self.theta0 + u * (self.theta1 - self.theta0)

    def point(self, u):
        th = self._theta(u)
        return (
            self.center
            + self.radius * np.multiply.outer(np.cos(th), self.x_axis)
            + self.radius * np.multiply.outer(np.sin(th), self.y_axis)
        )

    def derivative(self, u):
        th = self._theta(u)
        dth = self.theta1 - self.theta0
        return self.radius * dth * (
            np.multiply.outer(-np.sin(th), self.x_axis)
            + np.multiply.outer(np.cos(th), self.y_axis)
        )

    def length(self) -> float:
        return abs(self.radius * (self.theta1 - self.theta0))

    def bbox(self):
        lo_t, hi_t = sorted((self.theta0, self.theta1))
        pts = [self.point(0.0), self.point(1.0)]
        # per-coordinate extrema of c_i + A_i * cos(theta - phi_i)
        for i in range(3):
            xi, yi = self.x_axis[i], self.y_axis[i]
            if abs(xi) < 1e-15 and abs(yi) < 1e-15:
                continue
            phi = np.arctan2(yi, xi)
            for extremum in (phi, phi + np.pi):
                k0 = np.ceil((lo_t - extremum) / TAU)
                th = extremum + k0 * TAU
                while th <= hi_t + 1e-15:
                    u = (th - self.theta0) / (self.theta1 - self.theta0)
                    pts.append(self.point(float(np.clip(u, 0.0, 1.0))))
                    th += TAU
        pts = np.stack(pts)
        return pts.min(axis=0), pts.max(axis=0)

    def transformed(self, offset, scale: float) -> "CircularArc":
        o = _vec(offset)
        return CircularArc(
            (self.center - o) * scale,
            self.radius * scale,
            self.x_axis,
            self.y_axis,
            self.theta0,
            self.theta1,
        )


@dataclass(frozen=True, eq=False)
class CubicBezier:
    """Cubic Bezier curve with four 3D control points."""

    control: np.ndarray  # (4, 3)

    kind = "bezier"

    def __post_init__(self):
        c = np.asarray(self.control, dtype=float).reshape(4, 3)
        if not np.all(np.isfinite(c)):
            raise GeometryError("non-finite control points")
        object.__setattr__(self, "control", c)

    def point(self, u):
        return _bernstein3(u) @ self.control

    def derivative(self, u):
        return _bernstein3_deriv(u) @ self.control

    def length(self) -> float:
        # chord-sum estimate; exact arclength not required anywhere
        pts = self.point(np.linspace(0.0, 1.0, 65))
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())

    def bbox(self):
        # control-hull bound (conservative)
        return self.control.min(axis=0), self.control.max(axis=0)

    def transformed(self, offset, scale: float) -> "CubicBezier":
        o = _vec(offset)
        return CubicBezier((self.control - o) * scale)


@dataclass(frozen=True, eq=False)
class PolylineCurve:
    """Piecewise-linear curve; u is uniform in segment index."""

    points: np.ndarray  # (M, 3), M >= 2

    kind = "polyline"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if p.shape[0] < 2:
            raise GeometryError("polyline needs at least 2 points")
        if not np.all(np.isfinite(p)):
            raise GeometryError("non-finite polyline points")
        object.__setattr__(self, "points", p)

    def point(self, u):
        u = np.asarray(u, dtype=float)
        nseg = self.points.shape[0] - 1
        s = np.clip(u, 0.0, 1.0) * nseg
        i = np.clip(np.floor(s).astype(int), 0, nseg - 1)
        f = s - i
        return self.points[i] + f[..., None] * (self.points[i + 1] - self.points[i])

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        nseg = self.points.shape[0] - 1
        s = np.clip(u, 0.0, 1.0) * nseg
        i = np.clip(np.floor(s).astype(int), 0, nseg - 1)
        return (self.points[i + 1] - self.points[i]) * nseg

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def transformed(self, offset, scale: float) -> "PolylineCurve":
        o = _vec(offset)
        return PolylineCurve((self.points - o) * scale)


CURVE_KINDS = {
    "line": LineSegment,
    "arc": CircularArc,
    "bezier": CubicBezier,
    "polyline": PolylineCurve,
}


# ---------------------------------------------------------------------------
# Surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Plane:
    """Planar patch P(u, v) = origin + u * u_vec + v * v_vec over [0,1]^2."""

    origin: np.ndarray
    u_vec: np.ndarray
    v_vec: np.ndarray

    kind = "plane"

    def __post_init__(self):
        object.__setattr__(self, "origin", _vec(self.origin))
        object.__setattr__(self, "u_vec", _vec(self.u_vec))
        object.__setattr__(self, "v_vec", _vec(self.v_vec))

    def domain(self):
        return (0.0, 1.0, 0.0, 1.0)

    def point(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return (
            self.origin
            + np.multiply.outer(u, self.u_vec)
            + np.multiply.outer(v, self.v_vec)
        )

    def partials(self, u, v):
        u = np.asarray(u, dtype=float)
        shape = np.broadcast(u, np.asarray(v, dtype=float)).shape
        pu = np.broadcast_to(self.u_vec, shape + (3,)).copy()
        pv = np.broadcast_to(self.v_vec, shape + (3,)).copy()
        return pu, pv

    def uv_of_point(self, p):
        """Exact inverse for points in the plane (least squares otherwise)."""
        p = np.asarray(p, dtype=float)
        d = p - self.origin
        g = np.array(
            [
                [self.u_vec @ self.u_vec, self.u_vec @ self.v_vec],
                [self.u_vec @ self.v_vec, self.v_vec @ self.v_vec],
            ]
        )
        rhs = np.stack([d @ self.u_vec, d @ self.v_vec], axis=-1)
        sol = np.linalg.solve(g, rhs[..., None])[..., 0]
        return sol

    def transformed(self, offset, scale: float) -> "Plane":
        o = _vec(offset)
        return Plane((self.origin - o) * scale, self.u_vec * scale, self.v_vec * scale)


@dataclass(frozen=True, eq=False)
class CylinderPatch:
    """Cylinder wall P(u, v) = c + r(cos u X + sin u Y) + v * axis.

    u is the angle in radians over [u0, u1]; v spans [0, 1] along the
    (non-unit) axis vector.  A full cylinder uses u1 = u0 + 2*pi and must
    be bounded by seam edges so the trimmed domain stays simply connected.
    """

    center: np.ndarray
    radius: float
    x_axis: np.ndarray
    y_axis: np.ndarray
    axis: np.ndarray
    u0: float
    u1: float

    kind = "cylinder"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "x_axis", _unit(self.x_axis))
        object.__setattr__(self, "y_axis", _unit(self.y_axis))
        object.__setattr__(self, "axis", _vec(self.axis))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "u0", float(self.u0))
        object.__setattr__(self, "u1", float(self.u1))
        if self.radius <= 0:
            raise GeometryError("cylinder radius must be positive")

    def domain(self):
        return (self.u0, self.u1, 0.0, 1.0)

    def point(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return (
            self.center
            + self.radius * np.multiply.outer(np.cos(u), self.x_axis)
            + self.radius * np.multiply.outer(np.sin(u), self.y_axis)
            + np.multiply.outer(v, self.axis)
        )

    def partials(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        pu = self.radius * (
            np.multiply.outer(-np.sin(u), self.x_axis)
            + np.multiply.outer(np.cos(u), self.y_axis)
        )
        shape = np.broadcast(u, v).shape
        pv = np.broadcast_to(self.axis, shape + (3,)).copy()
        return pu, pv

    def transformed(self, offset, scale: float) -> "CylinderPatch":
        o = _vec(offset)
        return CylinderPatch(
            (self.center - o) * scale,
            self.radius * scale,
            self.x_axis,
            self.y_axis,
            self.axis * scale,
            self.u0,
            self.u1,
        )


@dataclass(frozen=True, eq=False)
class SpherePatch:
    """Spherical patch; u is longitude, v latitude in (-pi/2, pi/2)."""

    center: np.ndarray
    radius: float
    x_axis: np.ndarray
    y_axis: np.ndarray
    z_axis: np.ndarray
    u0: float
    u1: float
    v0: float
    v1: float

    kind = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "x_axis", _unit(self.x_axis))
        object.__setattr__(self, "y_axis", _unit(self.y_axis))
        object.__setattr__(self, "z_axis", _unit(self.z_axis))
        for name in ("radius", "u0", "u1", "v0", "v1"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.radius <= 0:
            raise GeometryError("sphere radius must be positive")

    def domain(self):
        return (self.u0, self.u1, self.v0, self.v1)

    def point(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        ring = np.multiply.outer(np.cos(u), self.x_axis) + np.multiply.outer(
            np.sin(u), self.y_axis
        )
        return self.center + self.radius * (
            np.cos(v)[..., None] * ring + np.multiply.outer(np.sin(v), self.z_axis)
        )

    def partials(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        dring = np.multiply.outer(-np.sin(u), self.x_axis) + np.multiply.outer(
            np.cos(u), self.y_axis
        )
        ring = np.multiply.outer(np.cos(u), self.x_axis) + np.multiply.outer(
            np.sin(u), self.y_axis
        )
        pu = self.radius * np.cos(v)[..., None] * dring
        pv = self.radius * (
            -np.sin(v)[..., None] * ring + np.multiply.outer(np.cos(v), self.z_axis)
        )
        return pu, pv

    def transformed(self, offset, scale: float) -> "SpherePatch":
        o = _vec(offset)
        return SpherePatch(
            (self.center - o) * scale,
            self.radius * scale,
            self.x_axis,
            self.y_axis,
            self.z_axis,
            self.u0,
            self.u1,
            self.v0,
            self.v1,
        )


@dataclass(frozen=True, eq=False)
class BicubicPatch:
    """Bicubic tensor-product Bezier patch over [0,1]^2."""

    control: np.ndarray  # (4, 4, 3): control[i][j] pairs B_i(u) with B_j(v)

    kind = "bicubic"

    def __post_init__(self):
        c = np.asarray(self.control, dtype=float).reshape(4, 4, 3)
        if not np.all(np.isfinite(c)):
            raise GeometryError("non-finite control points")
        object.__setattr__(self, "control", c)

    def domain(self):
        return (0.0, 1.0, 0.0, 1.0)

    def point(self, u, v):
        bu = _bernstein3(u)
        bv = _bernstein3(v)
        return np.einsum("...i,...j,ijk->...k", bu, bv, self.control)

    def partials(self, u, v):
        bu = _bernstein3(u)
        bv = _bernstein3(v)
        dbu = _bernstein3_deriv(u)
        dbv = _bernstein3_deriv(v)
        pu = np.einsum("...i,...j,ijk->...k", dbu, bv, self.control)
        pv = np.einsum("...i,...j,ijk->...k", bu, dbv, self.control)
        return pu, pv

    def transformed(self, offset, scale: float) -> "BicubicPatch":
        o = _vec(offset)
        return BicubicPatch((self.control - o) * scale)


SURFACE_KINDS = {
    "plane": Plane,
    "cylinder": CylinderPatch,
    "sphere": SpherePatch,
    "bicubic": BicubicPatch,
}


# ---------------------------------------------------------------------------
# Pcurves (2D curves in a face's parameter rectangle)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Segment2:
    a: np.ndarray
    b: np.ndarray

    kind = "seg2"

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a, 2))
        object.__setattr__(self, "b", _vec(self.b, 2))

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.a + np.multiply.outer(t, self.b - self.a)

    def tangent(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.b - self.a, t.shape + (2,)).copy()


@dataclass(frozen=True, eq=False)
class Arc2:
    """Circular arc in UV space, phi linear in t."""

    center: np.ndarray
    radius: float
    phi0: float
    phi1: float

    kind = "arc2"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, 2))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "phi0", float(self.phi0))
        object.__setattr__(self, "phi1", float(self.phi1))

    def point(self, t):
        t = np.asarray(t, dtype=float)
        phi = self.phi0 + t * (self.phi1 - self.phi0)
        return self.center + self.radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def tangent(self, t):
        t = np.asarray(t, dtype=float)
        phi = self.phi0 + t * (self.phi1 - self.phi0)
        dphi = self.phi1 - self.phi0
        return self.radius * dphi * np.stack([-np.sin(phi), np.cos(phi)], axis=-1)


@dataclass(frozen=True, eq=False)
class Poly2:
    points: np.ndarray  # (M, 2)

    kind = "poly2"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if p.shape[0] < 2:
            raise GeometryError("poly2 needs at least 2 points")
        object.__setattr__(self, "points", p)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        nseg = self.points.shape[0] - 1
        s = np.clip(t, 0.0, 1.0) * nseg
        i = np.clip(np.floor(s).astype(int), 0, nseg - 1)
        f = s - i
        return self.points[i] + f[..., None] * (self.points[i + 1] - self.points[i])

    def tangent(self, t):
        t = np.asarray(t, dtype=float)
        nseg = self.points.shape[0] - 1
        s = np.clip(t, 0.0, 1.0) * nseg
        i = np.clip(np.floor(s).astype(int), 0, nseg - 1)
        return (self.points[i + 1] - self.points[i]) * nseg


PCURVE_KINDS = {
    "seg2": Segment2,
    "arc2": Arc2,
    "poly2": Poly2,
}
