import logging
import math

import numpy as np
import pytest

from core.exceptions import PathError
from core.path_geometry import (
    ARC, CLOTHOID, LINE, PathSegment, build_path, comprehensive_segments, s_path_segments, segment_from_spec,
)
from core.vehicle import wrap_angle


def test_l_path_length_and_end_pose(l_path):
    assert l_path.total_length == pytest.approx(80.0 + 25.0 * math.pi)
    end = l_path.sample(l_path.total_length)
    assert (end.x_ref, end.y_ref) == pytest.approx((90.0, 90.0), abs=1e-9)
    assert end.theta_ref == pytest.approx(math.pi / 2)
    assert end.kappa_ref == 0.0


def test_arc_curvature_and_normal(l_path):
    ref = l_path.sample(60.0)
    assert ref.kappa_ref == pytest.approx(0.02)
    assert ref.seg_index == 1
    np.testing.assert_allclose(ref.normal, [-math.sin(ref.theta_ref), math.cos(ref.theta_ref)])


def test_s_path_returns_to_initial_heading():
    path = build_path(s_path_segments())
    assert path.total_length == pytest.approx(200.0)
    assert path.sample(path.total_length).theta_ref == pytest.approx(0.0, abs=1e-12)
    assert path.sample(100.0).kappa_ref == pytest.approx(0.0)


def test_constant_curvature_clothoid_matches_arc():
    arc = PathSegment(ARC, 50.0, 0.02, 0.02)
    spiral = PathSegment(CLOTHOID, 50.0, 0.02, 0.02)
    for u in (5.0, 25.0, 50.0):
        assert spiral.offset(0.3, u) == pytest.approx(arc.offset(0.3, u), abs=1e-7)


def test_segments_join_without_gaps():
    path = build_path(comprehensive_segments())
    for _, _, s_end in path.segment_bounds()[:-1]:
        before, after = path.sample(s_end - 1e-6), path.sample(s_end + 1e-6)
        assert math.hypot(after.x_ref - before.x_ref, after.y_ref - before.y_ref) == pytest.approx(2e-6, abs=1e-7)
        assert abs(wrap_angle(after.theta_ref - before.theta_ref)) < 1e-6


def test_comprehensive_lengths(caplog):
    with caplog.at_level(logging.WARNING):
        segments = comprehensive_segments()
    lengths = {seg.label: seg.length for seg in segments}
    assert lengths["b1"] == pytest.approx(196.3495, abs=1e-4)
    assert lengths["c1"] == pytest.approx(17.4533, abs=1e-4)
    assert lengths["d1"] == pytest.approx(34.9066, abs=1e-4)
    assert lengths["e1"] == lengths["f1"] == 17.5
    assert sum("implies" in r.message for r in caplog.records) == 2


def test_curvature_limit_enforced():
    with pytest.raises(PathError):
        PathSegment(ARC, 10.0, 0.1, 0.1)


def test_line_with_curvature_rejected():
    with pytest.raises(PathError):
        PathSegment(LINE, 10.0, 0.01, 0.01)


def test_tangent_discontinuity_rejected():
    segments = [PathSegment(LINE, 10.0), PathSegment(LINE, 10.0, start_pose=(10.0, 0.0, 0.1))]
    with pytest.raises(PathError):
        build_path(segments)


def test_matching_start_pose_accepted():
    path = build_path([PathSegment(LINE, 10.0), PathSegment(LINE, 10.0, start_pose=(10.0, 0.0, 0.0))])
    assert path.total_length == 20.0


def test_sampling_clamps_at_ends(l_path):
    start = l_path.sample(-5.0)
    assert start.clamped and start.s == 0.0
    end = l_path.sample(l_path.total_length + 5.0)
    assert end.clamped and end.s == pytest.approx(l_path.total_length)
    assert not l_path.sample(10.0).clamped


def test_polyline_covers_the_whole_path(l_path):
    rows = l_path.polyline(step=1.0)
    assert rows.shape[1] == 5
    assert rows[0, 0] == 0.0
    assert rows[-1, 0] == pytest.approx(l_path.total_length)


def test_segment_spec_missing_field():
    with pytest.raises(KeyError):
        segment_from_spec({"kind": "arc", "sweep_deg": 10.0})


def test_right_hand_arc_from_negative_radius():
    seg = segment_from_spec({"kind": "arc", "radius": -50.0, "sweep_deg": 90.0})
    assert seg.kappa_start == pytest.approx(-0.02)
    assert seg.length == pytest.approx(25.0 * math.pi)
