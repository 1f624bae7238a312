"""Extent transform, reconciliation, aspect check, homography."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aimcast.geometry import (
    AIM_CENTER,
    UNIT_SQUARE,
    AimResult,
    Confidence,
    DegenerateExtent,
    ExtentBox,
    Homography,
    NormPoint,
    PerspectiveDivideByZero,
    Quad,
    ReconcileConflict,
    SingularConfiguration,
    aim_from_extents,
    aim_from_quad,
    estimate_homography,
    reconcile_extents,
    validate_aspect,
)


def literal_center_split(box):
    # the absolute-value pseudocode form; only meaningful with 0.5 interior
    x1 = abs(0.5 - box.x_min)
    x2 = abs(0.5 - box.x_max)
    y1 = abs(0.5 - box.y_min)
    y2 = abs(0.5 - box.y_max)
    return x1 / (x1 + x2), y1 / (y1 + y2)


interior_boxes = st.builds(
    ExtentBox,
    st.floats(0.0, 0.45),
    st.floats(0.55, 1.0),
    st.floats(0.0, 0.45),
    st.floats(0.55, 1.0),
)


class TestAimFromExtents:
    def test_box_left_of_center_pushes_aim_right(self):
        r = aim_from_extents(ExtentBox(0.2, 0.6, 0.3, 0.7))
        assert abs(r.x_sr - 0.75) <= 1e-12
        assert abs(r.y_sr - 0.5) <= 1e-12
        assert r.on_screen

    def test_center_box(self):
        r = aim_from_extents(ExtentBox(0.25, 0.75, 0.25, 0.75))
        assert (r.x_sr, r.y_sr) == (0.5, 0.5)

    def test_aim_past_left_edge_goes_negative(self):
        r = aim_from_extents(ExtentBox(0.6, 0.9, 0.25, 0.75))
        assert abs(r.x_sr - (-1.0 / 3.0)) <= 1e-12
        assert abs(r.y_sr - 0.5) <= 1e-12
        assert not r.on_screen

    def test_on_screen_boundary_is_inclusive(self):
        assert aim_from_extents(ExtentBox(0.5, 0.9, 0.2, 0.8)).on_screen  # x_sr == 0
        assert aim_from_extents(ExtentBox(0.1, 0.5, 0.2, 0.8)).on_screen  # x_sr == 1

    def test_degenerate_box_raises(self):
        with pytest.raises(DegenerateExtent):
            aim_from_extents(ExtentBox(0.5, 0.5, 0.3, 0.7))
        with pytest.raises(DegenerateExtent):
            aim_from_extents(ExtentBox(0.3, 0.7, 0.4, 0.4))

    def test_inverted_bounds_rejected_at_construction(self):
        with pytest.raises(ValueError):
            ExtentBox(0.7, 0.3, 0.0, 1.0)

    @given(interior_boxes)
    def test_matches_literal_form_when_center_interior(self, box):
        r = aim_from_extents(box)
        lx, ly = literal_center_split(box)
        assert abs(r.x_sr - lx) <= 1e-12
        assert abs(r.y_sr - ly) <= 1e-12

    @given(interior_boxes, st.floats(-0.3, 0.3))
    def test_translation_shifts_aim_by_delta_over_width(self, box, delta):
        base = aim_from_extents(box)
        moved = aim_from_extents(
            ExtentBox(box.x_min + delta, box.x_max + delta, box.y_min, box.y_max)
        )
        assert abs((base.x_sr - moved.x_sr) - delta / box.width) <= 1e-9
        assert moved.y_sr == base.y_sr

    @given(interior_boxes, st.floats(0.1, 4.0))
    def test_scaling_about_box_center_divides_offset(self, box, s):
        # a box blown up about its own center moves the aim toward 0.5:
        # x' = 0.5 + (x - 0.5)/s, so the centered aim is a fixed point
        cx = (box.x_min + box.x_max) / 2
        cy = (box.y_min + box.y_max) / 2
        scaled = ExtentBox(
            cx + (box.x_min - cx) * s,
            cx + (box.x_max - cx) * s,
            cy + (box.y_min - cy) * s,
            cy + (box.y_max - cy) * s,
        )
        base = aim_from_extents(box)
        r = aim_from_extents(scaled)
        assert abs(r.x_sr - (0.5 + (base.x_sr - 0.5) / s)) <= 1e-9
        assert abs(r.y_sr - (0.5 + (base.y_sr - 0.5) / s)) <= 1e-9

    @given(st.floats(0.1, 4.0))
    def test_centered_box_scaling_fixed_point(self, s):
        scaled = ExtentBox(0.5 - 0.2 * s, 0.5 + 0.2 * s, 0.5 - 0.3 * s, 0.5 + 0.3 * s)
        r = aim_from_extents(scaled)
        assert abs(r.x_sr - 0.5) <= 1e-12
        assert abs(r.y_sr - 0.5) <= 1e-12

    @given(interior_boxes, st.floats(0.2, 3.0))
    def test_scaling_about_frame_center_leaves_aim_fixed(self, box, s):
        # the camera-zoom case: everything scales about CR (0.5, 0.5),
        # and the aim must not move at all
        scaled = ExtentBox(
            0.5 + (box.x_min - 0.5) * s,
            0.5 + (box.x_max - 0.5) * s,
            0.5 + (box.y_min - 0.5) * s,
            0.5 + (box.y_max - 0.5) * s,
        )
        base = aim_from_extents(box)
        r = aim_from_extents(scaled)
        assert abs(r.x_sr - base.x_sr) <= 1e-9
        assert abs(r.y_sr - base.y_sr) <= 1e-9


class TestReconcile:
    def test_less_extreme_bound_wins(self):
        a = ExtentBox(0.10, 0.90, 0.10, 0.90)
        b = ExtentBox(0.20, 0.85, 0.10, 0.90)
        assert reconcile_extents(a, b) == ExtentBox(0.20, 0.85, 0.10, 0.90)

    def test_identity_on_equal_inputs(self):
        a = ExtentBox(0.3, 0.7, 0.3, 0.7)
        assert reconcile_extents(a, a) == a

    def test_disjoint_boxes_conflict(self):
        with pytest.raises(ReconcileConflict):
            reconcile_extents(ExtentBox(0.0, 0.2, 0.0, 0.2), ExtentBox(0.8, 1.0, 0.8, 1.0))

    def test_single_axis_conflict_is_enough(self):
        with pytest.raises(ReconcileConflict):
            reconcile_extents(ExtentBox(0.0, 0.2, 0.0, 1.0), ExtentBox(0.5, 1.0, 0.0, 1.0))

    @given(interior_boxes, interior_boxes)
    def test_commutative(self, a, b):
        assert reconcile_extents(a, b) == reconcile_extents(b, a)

    @given(interior_boxes)
    def test_idempotent(self, a):
        assert reconcile_extents(a, a) == a


class TestValidateAspect:
    def test_widescreen_box_passes(self):
        assert validate_aspect(ExtentBox(0.2, 0.8, 0.3, 0.6375), 16 / 9, 0.05)

    def test_square_box_fails_widescreen(self):
        assert not validate_aspect(ExtentBox(0.2, 0.8, 0.2, 0.8), 16 / 9, 0.05)

    def test_exact_ratio_passes_at_zero_tolerance(self):
        assert validate_aspect(ExtentBox(0.2, 0.8, 0.3, 0.6375), 16 / 9, 0.0)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateExtent):
            validate_aspect(ExtentBox(0.2, 0.2, 0.3, 0.6), 16 / 9, 0.05)


def convex_quads():
    # corners drawn from four separated corner regions; the Quad
    # constructor rejects the rare non-convex draw
    coord = st.floats(0.02, 0.30)
    return st.tuples(coord, coord, coord, coord, coord, coord, coord, coord)


class TestHomography:
    def test_unit_square_gives_identity(self):
        h = estimate_homography(UNIT_SQUARE)
        assert np.allclose(h.m, np.eye(3), atol=1e-12)

    def test_half_scale_quad(self):
        q = Quad((NormPoint(0, 0), NormPoint(0.5, 0), NormPoint(0.5, 0.5), NormPoint(0, 0.5)))
        h = estimate_homography(q)
        assert np.allclose(h.m, np.diag([0.5, 0.5, 1.0]), atol=1e-12)

    def test_general_quad_reproduces_corners(self):
        q = Quad((NormPoint(0.2, 0.2), NormPoint(0.8, 0.25),
                  NormPoint(0.75, 0.8), NormPoint(0.25, 0.75)))
        h = estimate_homography(q)
        for s, c in zip(UNIT_SQUARE.corners, q.corners):
            mapped = h.apply(s)
            assert abs(mapped.x - c.x) <= 1e-9
            assert abs(mapped.y - c.y) <= 1e-9

    @given(convex_quads())
    def test_random_quads_round_trip(self, offs):
        a, b, c, d, e, f, g, h_ = offs
        try:
            q = Quad((NormPoint(a, b), NormPoint(1 - c, d),
                      NormPoint(1 - e, 1 - f), NormPoint(g, 1 - h_)))
        except ValueError:
            return  # non-convex draw
        h = estimate_homography(q)
        for s, corner in zip(UNIT_SQUARE.corners, q.corners):
            mapped = h.apply(s)
            assert math.hypot(mapped.x - corner.x, mapped.y - corner.y) <= 1e-9

    def test_inverse_is_identity_on_interior_points(self):
        q = Quad((NormPoint(0.1, 0.15), NormPoint(0.9, 0.1),
                  NormPoint(0.85, 0.9), NormPoint(0.12, 0.8)))
        h = estimate_homography(q)
        inv = h.inverse()
        rng = np.random.default_rng(7)
        for _ in range(100):
            p = NormPoint(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95))
            back = inv.apply(h.apply(p))
            assert math.hypot(back.x - p.x, back.y - p.y) <= 1e-9

    def test_singular_matrix_rejected(self):
        with pytest.raises(SingularConfiguration):
            Homography(np.zeros((3, 3)))
        with pytest.raises(SingularConfiguration):
            Homography(np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 1.0]]))

    def test_divide_by_zero_on_horizon_point(self):
        h = Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [2.0, 0, -1.0]]))
        with pytest.raises(PerspectiveDivideByZero):
            h.apply(NormPoint(0.5, 0.3))  # w = 2*0.5 - 1 = 0

    def test_collinear_corners_rejected(self):
        with pytest.raises(ValueError):
            Quad((NormPoint(0, 0), NormPoint(0.5, 0), NormPoint(1.0, 0), NormPoint(0, 1)))

    def test_nonconvex_dart_rejected(self):
        with pytest.raises(ValueError):
            Quad((NormPoint(0, 0), NormPoint(1, 0), NormPoint(0.4, 0.4), NormPoint(0, 1)))


class TestAimFromQuad:
    def test_axis_aligned_reduces_to_extents(self):
        q = Quad((NormPoint(0.25, 0.25), NormPoint(0.75, 0.25),
                  NormPoint(0.75, 0.75), NormPoint(0.25, 0.75)))
        r = aim_from_quad(q)
        assert abs(r.x_sr - 0.5) <= 1e-9
        assert abs(r.y_sr - 0.5) <= 1e-9
        assert r.confidence is Confidence.TWO_COLOR

    def test_rectangle_equivalence_bulk(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            x0, y0 = rng.uniform(0.0, 0.4, 2)
            x1, y1 = rng.uniform(0.6, 1.0, 2)
            q = Quad((NormPoint(x0, y0), NormPoint(x1, y0),
                      NormPoint(x1, y1), NormPoint(x0, y1)))
            box = ExtentBox(x0, x1, y0, y1)
            via_quad = aim_from_quad(q)
            via_box = aim_from_extents(box)
            assert abs(via_quad.x_sr - via_box.x_sr) <= 1e-9
            assert abs(via_quad.y_sr - via_box.y_sr) <= 1e-9


class TestSmallTypes:
    def test_norm_point_in_frame_inclusive(self):
        assert NormPoint(0.0, 1.0).in_frame()
        assert not NormPoint(-0.001, 0.5).in_frame()
        assert AIM_CENTER.in_frame()

    def test_aim_result_confidence_default(self):
        assert AimResult(0.5, 0.5).confidence is Confidence.TWO_COLOR
        assert Confidence.SINGLE_COLOR_FALLBACK.value == "single_color_fallback"

    def test_extent_box_dims(self):
        box = ExtentBox(0.1, 0.4, 0.2, 0.8)
        assert abs(box.width - 0.3) <= 1e-15
        assert abs(box.height - 0.6) <= 1e-15
