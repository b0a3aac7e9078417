"""Half-edge boundary-representation model and structural operations.

A :class:`BrepModel` is a set of index-addressed tables: vertices, edges
(each carrying a parametric curve and exactly two half-edges), half-edges,
loops, faces, and a shell partition.  Models are treated as immutable once
built; every operation here returns fresh values and never mutates its
input, so models are safe to share across threads.

Conventions enforced by :class:`ModelBuilder` and assumed throughout:

* each edge is referenced by exactly one forward and one reverse half-edge
  (the forward one runs along the curve's own parameter direction);
* loops list their half-edge cycle in traversal order, with consecutive
  half-edges sharing a vertex;
* outer loops wind counter-clockwise in their face's UV domain and inner
  loops clockwise, so the face interior always lies to the left of a
  half-edge's pcurve direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError


class ModelError(ValueError):
    """Structurally invalid model construction."""


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Edge:
    curve: object        # geometry curve, parameter [0, 1]
    v0: int              # vertex at curve parameter 0
    v1: int              # vertex at curve parameter 1
    halfedges: tuple     # (forward halfedge id, reverse halfedge id)


@dataclass(frozen=True, eq=False)
class HalfEdge:
    origin: int
    twin: int
    edge: int
    loop: int
    forward: bool        # True if directed along the edge curve parameter
    pcurve: object       # 2D curve in the owning face's domain, or None


@dataclass(frozen=True, eq=False)
class Loop:
    halfedges: tuple     # ordered cycle of halfedge ids
    kind: str            # 'outer' | 'inner'
    face: int


@dataclass(frozen=True, eq=False)
class Face:
    surface: object
    outer: int
    inners: tuple = ()


@dataclass(eq=False)
class BrepModel:
    vertices: np.ndarray           # (V, 3)
    edges: list
    halfedges: list
    loops: list
    faces: list
    shells: tuple = ()             # tuple of tuples of face ids

    def destination(self, h: int) -> int:
        return self.halfedges[self.halfedges[h].twin].origin

    def next_in_loop(self, h: int) -> int:
        cycle = self.loops[self.halfedges[h].loop].halfedges
        i = cycle.index(h)
        return cycle[(i + 1) % len(cycle)]

    def face_halfedges(self, f: int):
        """All halfedge ids bounding face f (outer loop first)."""
        face = self.faces[f]
        out = list(self.loops[face.outer].halfedges)
        for li in face.inners:
            out.extend(self.loops[li].halfedges)
        return out

    def face_loops(self, f: int):
        face = self.faces[f]
        return [face.outer, *face.inners]

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])


@dataclass(frozen=True)
class TransformRecord:
    """Similarity transform p' = (p - offset) * scale with exact inverse."""

    offset: tuple
    scale: float

    def apply(self, p):
        return (np.asarray(p, dtype=float) - np.asarray(self.offset)) * self.scale

    def invert(self, p):
        return np.asarray(p, dtype=float) / self.scale + np.asarray(self.offset)


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------

class ModelBuilder:
    """Incremental constructor that assembles and cross-links the tables.

    Face boundaries are given as ordered lists of (edge id, forward flag,
    pcurve) triples; ``build`` creates half-edges, twin links, loops, and
    the shell partition, and checks that every edge is used exactly once
    in each direction.
    """

    def __init__(self):
        self._vertices = []
        self._edges = []          # (curve, v0, v1)
        self._faces = []          # (surface, outer_refs, inner_refs_list)
        self._line_cache = {}

    def vertex(self, p) -> int:
        self._vertices.append(np.asarray(p, dtype=float).reshape(3))
        return len(self._vertices) - 1

    def edge(self, curve, v0: int, v1: int) -> int:
        for vid, u in ((v0, 0.0), (v1, 1.0)):
            gap = np.linalg.norm(curve.point(u) - self._vertices[vid])
            if gap > 1e-9:
                raise ModelError(
                    f"curve endpoint at u={u} misses vertex {vid} by {gap:.2e}"
                )
        self._edges.append((curve, v0, v1))
        return len(self._edges) - 1

    def line_between(self, v0: int, v1: int):
        """Get or create the straight edge between two vertices.

        Returns (edge id, True if the stored curve runs v0 -> v1).
        """
        from .geometry import LineSegment

        key = (min(v0, v1), max(v0, v1))
        if key in self._line_cache:
            eid = self._line_cache[key]
            return eid, self._edges[eid][1] == v0
        eid = self.edge(LineSegment(self._vertices[v0], self._vertices[v1]), v0, v1)
        self._line_cache[key] = eid
        return eid, True

    def face(self, surface, outer, inners=()) -> int:
        self._faces.append((surface, list(outer), [list(i) for i in inners]))
        return len(self._faces) - 1

    def build(self) -> BrepModel:
        edges_used = {}           # edge id -> {True: he, False: he}
        halfedges = []
        loops = []
        faces = []

        def add_loop(refs, kind, face_id):
            he_ids = []
            for eid, forward, pcurve in refs:
                he_id = len(halfedges)
                curve, v0, v1 = self._edges[eid]
                origin = v0 if forward else v1
                halfedges.append(
                    dict(origin=origin, edge=eid, forward=forward,
                         pcurve=pcurve, loop=len(loops))
                )
                slot = edges_used.setdefault(eid, {})
                if forward in slot:
                    raise ModelError(f"edge {eid} referenced twice with forward={forward}")
                slot[forward] = he_id
                he_ids.append(he_id)
            loops.append(dict(halfedges=tuple(he_ids), kind=kind, face=face_id))
            return len(loops) - 1

        for fid, (surface, outer, inners) in enumerate(self._faces):
            outer_id = add_loop(outer, "outer", fid)
            inner_ids = tuple(add_loop(refs, "inner", fid) for refs in inners)
            faces.append(Face(surface=surface, outer=outer_id, inners=inner_ids))

        # twin linking
        edges = []
        for eid, (curve, v0, v1) in enumerate(self._edges):
            slot = edges_used.get(eid, {})
            if set(slot) != {True, False}:
                raise ModelError(f"edge {eid} must be used once per direction, got {sorted(slot)}")
            hf, hr = slot[True], slot[False]
            halfedges[hf]["twin"] = hr
            halfedges[hr]["twin"] = hf
            edges.append(Edge(curve=curve, v0=v0, v1=v1, halfedges=(hf, hr)))

        he_objs = [
            HalfEdge(origin=h["origin"], twin=h["twin"], edge=h["edge"],
                     loop=h["loop"], forward=h["forward"], pcurve=h["pcurve"])
            for h in halfedges
        ]
        loop_objs = [Loop(halfedges=l["halfedges"], kind=l["kind"], face=l["face"])
                     for l in loops]

        model = BrepModel(
            vertices=np.array(self._vertices, dtype=float).reshape(-1, 3),
            edges=edges,
            halfedges=he_objs,
            loops=loop_objs,
            faces=faces,
        )

        # loop chains must close
        for li, loop in enumerate(loop_objs):
            cyc = loop.halfedges
            for i, h in enumerate(cyc):
                nxt = cyc[(i + 1) % len(cyc)]
                if model.destination(h) != he_objs[nxt].origin:
                    raise ModelError(f"loop {li} breaks between halfedges {h} and {nxt}")

        model.shells = compute_shells(model)
        return model


def compute_shells(model: BrepModel) -> tuple:
    """Partition faces into shells via shared-edge adjacency (union-find)."""
    nf = len(model.faces)
    parent = list(range(nf))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in model.edges:
        f1 = model.loops[model.halfedges[e.halfedges[0]].loop].face
        f2 = model.loops[model.halfedges[e.halfedges[1]].loop].face
        ra, rb = find(f1), find(f2)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    groups = {}
    for f in range(nf):
        groups.setdefault(find(f), []).append(f)
    return tuple(tuple(groups[k]) for k in sorted(groups))


# ---------------------------------------------------------------------------
# Validation and Euler characteristics
# ---------------------------------------------------------------------------

@dataclass
class ShellStats:
    vertices: int
    edges: int
    faces: int
    inner_loops: int
    genus: float          # integral for watertight shells

    @property
    def euler_residual(self) -> float:
        return self.vertices - self.edges + self.faces - self.inner_loops - 2.0 * (
            1.0 - self.genus
        )


@dataclass
class ValidationReport:
    twin_consistent: bool
    loops_closed: bool
    manifold: bool
    watertight: bool
    shells: list = field(default_factory=list)
    defects: list = field(default_factory=list)


def _shell_stats(model: BrepModel, face_ids) -> ShellStats:
    edge_ids = set()
    vert_ids = set()
    inner = 0
    for f in face_ids:
        for li in model.face_loops(f):
            loop = model.loops[li]
            if loop.kind == "inner":
                inner += 1
            for h in loop.halfedges:
                he = model.halfedges[h]
                edge_ids.add(he.edge)
                vert_ids.add(he.origin)
    v, e, fc = len(vert_ids), len(edge_ids), len(face_ids)
    genus = (2.0 - (v - e + fc - inner)) / 2.0
    return ShellStats(vertices=v, edges=e, faces=fc, inner_loops=inner, genus=genus)


def euler_report(model: BrepModel):
    """Per-shell (V, E, F, H, genus) using the loop-corrected Euler formula."""
    return [_shell_stats(model, shell) for shell in compute_shells(model)]


def validate(model: BrepModel) -> ValidationReport:
    """Check structural invariants; defects are reported, never raised."""
    defects = []
    nv = model.num_vertices
    nh = len(model.halfedges)
    ne = len(model.edges)
    nl = len(model.loops)
    nf = len(model.faces)

    def dangling(cond, msg):
        if cond:
            defects.append(msg)
        return cond

    index_ok = True
    for i, he in enumerate(model.halfedges):
        if dangling(not (0 <= he.origin < nv), f"halfedge {i}: dangling origin {he.origin}"):
            index_ok = False
        if dangling(not (0 <= he.twin < nh), f"halfedge {i}: dangling twin {he.twin}"):
            index_ok = False
        if dangling(not (0 <= he.edge < ne), f"halfedge {i}: dangling edge {he.edge}"):
            index_ok = False
        if dangling(not (0 <= he.loop < nl), f"halfedge {i}: dangling loop {he.loop}"):
            index_ok = False
    for i, loop in enumerate(model.loops):
        if dangling(not (0 <= loop.face < nf), f"loop {i}: dangling face {loop.face}"):
            index_ok = False
        for h in loop.halfedges:
            if dangling(not (0 <= h < nh), f"loop {i}: dangling halfedge {h}"):
                index_ok = False
    for i, face in enumerate(model.faces):
        for li in model.face_loops(i):
            if dangling(not (0 <= li < nl), f"face {i}: dangling loop {li}"):
                index_ok = False

    if not index_ok:
        return ValidationReport(False, False, False, False, [], defects)

    twin_ok = True
    for i, he in enumerate(model.halfedges):
        if model.halfedges[he.twin].twin != i:
            twin_ok = False
            defects.append(f"halfedge {i}: twin(twin) != self")
        if he.twin == i:
            twin_ok = False
            defects.append(f"halfedge {i}: twin points to itself")
        pair = model.edges[he.edge].halfedges
        if i not in pair:
            twin_ok = False
            defects.append(f"halfedge {i}: not registered on edge {he.edge}")

    loops_ok = True
    owner = {}
    for li, loop in enumerate(model.loops):
        if len(loop.halfedges) == 0:
            loops_ok = False
            defects.append(f"loop {li}: empty")
            continue
        for h in loop.halfedges:
            if h in owner:
                loops_ok = False
                defects.append(f"halfedge {h}: in loops {owner[h]} and {li}")
            owner[h] = li
            if model.halfedges[h].loop != li:
                loops_ok = False
                defects.append(f"halfedge {h}: loop backlink != {li}")
        if twin_ok:
            cyc = loop.halfedges
            for i, h in enumerate(cyc):
                nxt = cyc[(i + 1) % len(cyc)]
                if model.destination(h) != model.halfedges[nxt].origin:
                    loops_ok = False
                    defects.append(f"loop {li}: open between halfedges {h} and {nxt}")
    for h in range(nh):
        if h not in owner:
            loops_ok = False
            defects.append(f"halfedge {h}: not in any loop")

    manifold_ok = True
    for ei, e in enumerate(model.edges):
        if len(e.halfedges) != 2 or e.halfedges[0] == e.halfedges[1]:
            manifold_ok = False
            defects.append(f"edge {ei}: needs exactly two distinct halfedges")
            continue
        h0, h1 = e.halfedges
        if model.halfedges[h0].twin != h1:
            manifold_ok = False
            defects.append(f"edge {ei}: halfedges are not twins")
        if {model.halfedges[h0].forward, model.halfedges[h1].forward} != {True, False}:
            manifold_ok = False
            defects.append(f"edge {ei}: needs one forward and one reverse halfedge")
    loop_faces = {}
    for li, loop in enumerate(model.loops):
        loop_faces.setdefault(loop.face, [])
    for fi, face in enumerate(model.faces):
        for li in model.face_loops(fi):
            if model.loops[li].face != fi:
                manifold_ok = False
                defects.append(f"face {fi}: loop {li} backlink mismatch")
        if model.loops[face.outer].kind != "outer":
            manifold_ok = False
            defects.append(f"face {fi}: outer loop {face.outer} marked {model.loops[face.outer].kind}")
        for li in face.inners:
            if model.loops[li].kind != "inner":
                manifold_ok = False
                defects.append(f"face {fi}: inner loop {li} marked {model.loops[li].kind}")
    used_verts = {he.origin for he in model.halfedges}
    for v in range(nv):
        if v not in used_verts:
            manifold_ok = False
            defects.append(f"vertex {v}: isolated")

    shells = euler_report(model) if (twin_ok and loops_ok and manifold_ok) else []
    euler_ok = bool(shells) and all(
        abs(s.euler_residual) < 1e-9 and float(s.genus).is_integer() and s.genus >= 0
        for s in shells
    )
    for s in shells:
        if not float(s.genus).is_integer() or s.genus < 0:
            defects.append(f"shell with V={s.vertices} E={s.edges} F={s.faces}: genus {s.genus}")

    watertight = twin_ok and loops_ok and manifold_ok and euler_ok
    return ValidationReport(
        twin_consistent=twin_ok,
        loops_closed=loops_ok,
        manifold=manifold_ok,
        watertight=watertight,
        shells=shells,
        defects=defects,
    )


# ---------------------------------------------------------------------------
# Graph and sampling operations
# ---------------------------------------------------------------------------

def connected_components(model: BrepModel):
    """Partition vertex ids under the undirected vertex-edge graph.

    Returns a list of sorted vertex-id tuples, ordered by smallest member.
    """
    nv = model.num_vertices
    parent = list(range(nv))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in model.edges:
        ra, rb = find(e.v0), find(e.v1)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    groups = {}
    for v in range(nv):
        groups.setdefault(find(v), []).append(v)
    return [tuple(sorted(groups[k])) for k in sorted(groups)]


def sample_curve(model: BrepModel, edge: int, n: int, include_endpoints: bool = False):
    """Sample n points on an edge's curve.

    Interior sampling uses u_k = k/(n+1) for k = 1..n; endpoint-inclusive
    sampling uses u_k = k/(n-1) for k = 0..n-1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    curve = model.edges[edge].curve
    if curve.length() < 1e-12:
        raise GeometryError(f"edge {edge}: degenerate curve")
    if include_endpoints:
        u = np.array([0.5]) if n == 1 else np.linspace(0.0, 1.0, n)
    else:
        u = np.arange(1, n + 1, dtype=float) / (n + 1)
    return curve.point(u)


def halfedge_params(model: BrepModel, h: int, n: int) -> np.ndarray:
    """Edge-curve parameters of the n interior samples, in halfedge order."""
    u = np.arange(1, n + 1, dtype=float) / (n + 1)
    return u if model.halfedges[h].forward else 1.0 - u


def halfedge_curve_samples(model: BrepModel, h: int, n: int) -> np.ndarray:
    """The n interior curve samples of halfedge h, ordered from its origin."""
    he = model.halfedges[h]
    curve = model.edges[he.edge].curve
    return curve.point(halfedge_params(model, h, n))


def eval_surface(model: BrepModel, face: int, u: float, v: float):
    """Evaluate a face point and outward unit normal at (u, v)."""
    surf = model.faces[face].surface
    u0, u1, v0, v1 = surf.domain()
    if not (u0 - 1e-12 <= u <= u1 + 1e-12 and v0 - 1e-12 <= v <= v1 + 1e-12):
        raise GeometryError(f"({u}, {v}) outside domain of face {face}")
    p = surf.point(u, v)
    pu, pv = surf.partials(u, v)
    n = np.cross(pu, pv)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        raise GeometryError(f"degenerate surface normal on face {face} at ({u}, {v})")
    return p, n / norm


def model_bbox(model: BrepModel):
    """Axis-aligned bounds covering vertices and all edge curves."""
    if model.num_vertices == 0:
        raise GeometryError("empty model has no bounding box")
    lo = model.vertices.min(axis=0)
    hi = model.vertices.max(axis=0)
    for e in model.edges:
        clo, chi = e.curve.bbox()
        lo = np.minimum(lo, clo)
        hi = np.maximum(hi, chi)
    return lo, hi


NORMALIZE_MARGIN = 1.0 / 256.0


def normalize(model: BrepModel, margin: float = NORMALIZE_MARGIN):
    """Rescale so the longest bounding-box side spans [0, 1 - margin].

    The longest axis maps its minimum to 0; the other axes are centered at
    0.5.  Returns (normalized model, TransformRecord); the record inverts
    the mapping exactly.  Geometry parameters are rescaled consistently
    and pcurves are untouched.
    """
    lo, hi = model_bbox(model)
    extent = hi - lo
    longest = float(extent.max())
    if longest < 1e-12:
        raise GeometryError("degenerate bounding box: zero extent on every axis")
    scale = (1.0 - margin) / longest
    axis = int(np.argmax(extent))
    offset = np.empty(3)
    for i in range(3):
        if i == axis:
            offset[i] = lo[i]
        else:
            offset[i] = 0.5 * (lo[i] + hi[i]) - 0.5 / scale
    record = TransformRecord(offset=tuple(float(o) for o in offset), scale=scale)

    new_edges = [
        Edge(curve=e.curve.transformed(offset, scale), v0=e.v0, v1=e.v1,
             halfedges=e.halfedges)
        for e in model.edges
    ]
    new_faces = [
        Face(surface=f.surface.transformed(offset, scale), outer=f.outer,
             inners=f.inners)
        for f in model.faces
    ]
    out = BrepModel(
        vertices=(model.vertices - offset) * scale,
        edges=new_edges,
        halfedges=list(model.halfedges),
        loops=list(model.loops),
        faces=new_faces,
        shells=model.shells,
    )
    return out, record
