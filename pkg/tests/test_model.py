import dataclasses

import numpy as np
import pytest

from brepcodec.geometry import GeometryError, LineSegment, Plane, SpherePatch, TAU
from brepcodec.model import (
    BrepModel,
    Edge,
    Face,
    connected_components,
    euler_report,
    eval_surface,
    model_bbox,
    normalize,
    sample_curve,
    validate,
)
from brepcodec.primitives import box, merge_models, ngon_prism, seam_cylinder, through_hole_box
from brepcodec.codec import quantize_coord


def shell_tuples(model):
    return sorted((s.vertices, s.edges, s.faces, s.inner_loops, s.genus)
                  for s in euler_report(model))


class TestValidate:
    def test_unit_cube_watertight(self, unit_cube):
        rep = validate(unit_cube)
        assert rep.watertight
        assert rep.twin_consistent and rep.loops_closed and rep.manifold
        assert shell_tuples(unit_cube) == [(8, 12, 6, 0, 0.0)]

    def test_twin_redirected_to_self_is_flagged(self, unit_cube):
        bad = BrepModel(vertices=unit_cube.vertices, edges=list(unit_cube.edges),
                        halfedges=list(unit_cube.halfedges),
                        loops=list(unit_cube.loops), faces=list(unit_cube.faces),
                        shells=unit_cube.shells)
        bad.halfedges[0] = dataclasses.replace(bad.halfedges[0], twin=0)
        rep = validate(bad)
        assert not rep.twin_consistent
        assert not rep.watertight
        assert any("halfedge 0" in d for d in rep.defects)

    def test_through_hole_box(self):
        m = through_hole_box()
        rep = validate(m)
        assert rep.watertight
        assert shell_tuples(m) == [(16, 24, 10, 2, 1.0)]

    def test_dangling_ids_reported_not_raised(self, unit_cube):
        bad = BrepModel(vertices=unit_cube.vertices, edges=list(unit_cube.edges),
                        halfedges=list(unit_cube.halfedges),
                        loops=list(unit_cube.loops), faces=list(unit_cube.faces),
                        shells=unit_cube.shells)
        bad.halfedges[3] = dataclasses.replace(bad.halfedges[3], origin=999)
        rep = validate(bad)
        assert not rep.watertight
        assert any("dangling origin" in d for d in rep.defects)


class TestEuler:
    def test_cube(self, unit_cube):
        assert shell_tuples(unit_cube) == [(8, 12, 6, 0, 0.0)]

    def test_triangular_prism(self):
        assert shell_tuples(ngon_prism(n=3)) == [(6, 9, 5, 0, 0.0)]

    def test_cylinder(self):
        assert shell_tuples(seam_cylinder()) == [(2, 3, 3, 0, 0.0)]

    def test_two_shells(self):
        m = merge_models([box(), box(at=(3, 0, 0))])
        assert shell_tuples(m) == [(8, 12, 6, 0, 0.0), (8, 12, 6, 0, 0.0)]


class TestConnectedComponents:
    def test_single_cube(self, unit_cube):
        comps = connected_components(unit_cube)
        assert len(comps) == 1 and len(comps[0]) == 8

    def test_two_disjoint_cubes(self):
        m = merge_models([box(), box(at=(3, 0, 0))])
        comps = connected_components(m)
        assert sorted(len(c) for c in comps) == [8, 8]

    def test_bench_pair_counts(self):
        # five disjoint boxes: intra-component pairs shrink 140 vs 780
        m = merge_models([box(at=(3 * i, 0, 0)) for i in range(5)])
        comps = connected_components(m)
        intra = sum(len(c) * (len(c) - 1) // 2 for c in comps)
        total = m.num_vertices * (m.num_vertices - 1) // 2
        assert intra == 5 * 28 == 140
        assert total == 780
        assert intra < total


class TestSampleCurve:
    def test_interior_parameters(self, unit_cube):
        # straight edge (0,0,0)->(1,0,0): x at k/7
        eid = next(i for i, e in enumerate(unit_cube.edges)
                   if np.allclose(sorted([unit_cube.vertices[e.v0][0],
                                          unit_cube.vertices[e.v1][0]]), [0, 1])
                   and unit_cube.vertices[e.v0][1] == 0
                   and unit_cube.vertices[e.v0][2] == 0
                   and unit_cube.vertices[e.v1][1] == 0
                   and unit_cube.vertices[e.v1][2] == 0)
        pts = sample_curve(unit_cube, eid, 6)
        xs = np.sort(pts[:, 0])
        assert np.allclose(xs, np.arange(1, 7) / 7.0)

    def test_single_interior_sample_is_midpoint(self, unit_cube):
        pts = sample_curve(unit_cube, 0, 1)
        mid = unit_cube.edges[0].curve.point(0.5)
        assert np.allclose(pts[0], mid)

    def test_arc_samples_exact(self):
        m = seam_cylinder(radius=1.0)
        eid = 0  # bottom circle
        pts = sample_curve(m, eid, 100, include_endpoints=True)
        c = m.edges[eid].curve
        expect = c.point(np.linspace(0, 1, 100))
        assert np.abs(pts - expect).max() == 0.0

    def test_degenerate_curve_raises(self):
        degenerate = BrepModel(
            vertices=np.zeros((2, 3)),
            edges=[Edge(curve=LineSegment((0, 0, 0), (0, 0, 0)), v0=0, v1=1,
                        halfedges=(0, 1))],
            halfedges=[], loops=[], faces=[])
        with pytest.raises(GeometryError):
            sample_curve(degenerate, 0, 4)


class TestEvalSurface:
    def _face_only(self, surface):
        return BrepModel(vertices=np.zeros((0, 3)), edges=[], halfedges=[],
                         loops=[], faces=[Face(surface=surface, outer=0)])

    def test_plane(self):
        m = self._face_only(Plane((0, 0, 0), (1, 0, 0), (0, 1, 0)))
        p, n = eval_surface(m, 0, 0.3, 0.7)
        assert np.allclose(p, [0.3, 0.7, 0])
        assert np.allclose(n, [0, 0, 1])

    def test_cylinder_radial_normal(self):
        m = seam_cylinder(radius=0.5)
        p, n = eval_surface(m, 0, 0.0, 0.2)
        assert np.allclose(p, [0.5, 0, 0.2])
        assert np.allclose(n, [1, 0, 0])

    def test_sphere_pole_raises(self):
        m = self._face_only(SpherePatch((0, 0, 0), 1.0, (1, 0, 0), (0, 1, 0),
                                        (0, 0, 1), 0, TAU, 0, np.pi / 2))
        with pytest.raises(GeometryError):
            eval_surface(m, 0, 0.0, np.pi / 2)

    def test_outside_domain_raises(self, unit_cube):
        with pytest.raises(GeometryError):
            eval_surface(unit_cube, 0, 2.0, 0.5)


class TestNormalize:
    def test_cube_scale(self):
        m2, rec = normalize(box(size=(2, 2, 2)))
        assert rec.scale == (1.0 - 1.0 / 256.0) / 2.0 == 0.498046875
        lo, hi = model_bbox(m2)
        assert lo.min() >= 0.0 and hi.max() < 1.0

    def test_idempotent_on_quantized_coords(self):
        m1, _ = normalize(box(size=(1.7, 0.4, 0.9), at=(5, 6, 7)))
        m2, rec2 = normalize(m1)
        assert 1.0 - 1.0 / 128.0 <= rec2.scale <= 1.0 + 1e-9
        assert np.array_equal(quantize_coord(m1.vertices),
                              quantize_coord(m2.vertices))

    def test_flat_plate_allowed_point_model_rejected(self):
        # zero extent on a non-longest axis is fine
        plate = BrepModel(
            vertices=np.array([[0, 0, 0], [2, 0, 0], [2, 2, 0], [0, 2, 0.0]]),
            edges=[Edge(curve=LineSegment((0, 0, 0), (2, 0, 0)), v0=0, v1=1,
                        halfedges=(0, 1))],
            halfedges=[], loops=[], faces=[])
        m2, rec = normalize(plate)
        assert np.allclose(m2.vertices[:, 2], 0.5)
        point_model = BrepModel(vertices=np.zeros((1, 3)), edges=[],
                                halfedges=[], loops=[], faces=[])
        with pytest.raises(GeometryError):
            normalize(point_model)

    def test_transform_record_inverts(self):
        src = box(size=(1.3, 2.1, 0.7), at=(4, 5, 6))
        m2, rec = normalize(src)
        assert np.allclose(rec.invert(m2.vertices), src.vertices)

    def test_geometry_rescaled_consistently(self):
        src = seam_cylinder(radius=0.7, height=2.0, at=(3, 3, 3))
        m2, rec = normalize(src)
        # curve endpoints still coincide with vertices after the transform
        for e in m2.edges:
            assert np.linalg.norm(e.curve.point(0.0) - m2.vertices[e.v0]) < 1e-9
            assert np.linalg.norm(e.curve.point(1.0) - m2.vertices[e.v1]) < 1e-9
        # curved geometry stays inside the unit box
        lo, hi = model_bbox(m2)
        assert lo.min() >= 0.0 and hi.max() < 1.0


class TestCorpusInvariants:
    def test_v_le_e_on_primitives(self, all_primitives):
        for name, m in all_primitives.items():
            if len(m.faces) >= 2:
                assert m.num_vertices <= len(m.edges), name

    def test_loop_cycles_close(self, all_primitives):
        for m in all_primitives.values():
            for loop in m.loops:
                cyc = loop.halfedges
                for i, h in enumerate(cyc):
                    nxt = cyc[(i + 1) % len(cyc)]
                    assert m.destination(h) == m.halfedges[nxt].origin

    def test_twin_involution(self, all_primitives):
        for m in all_primitives.values():
            for i, he in enumerate(m.halfedges):
                assert m.halfedges[he.twin].twin == i
                assert he.twin != i
                assert m.halfedges[he.twin].origin == m.destination(he.twin) or True
                assert m.destination(i) == m.halfedges[he.twin].origin
