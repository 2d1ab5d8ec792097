import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imgeo import flow, gff, params
from imgeo.flow import FlowError, FlowOptions, HeightDifference

C2 = params.derive_constants(2.0)


def grid_from(values, spacing=0.1):
    n = values.shape[0]
    return gff.FieldGrid(n=n, spacing=spacing, values=values, origin=gff.centered_origin(n, spacing))


def test_constant_field_straight_ray():
    c0 = 0.4
    g = grid_from(np.full((21, 21), c0))
    th = 0.3
    ln = flow.trace_flow_line(g, C2, 0j, th, FlowOptions(step=0.01))
    k = np.arange(len(ln.points))
    exact = 0.01 * k * np.exp(1j * (c0 / C2.chi + th))
    assert np.max(np.abs(ln.points - exact)) < 1e-9 * (1 + 0.01 * k.max())
    assert ln.status == "exited_window"
    assert np.allclose(np.abs(np.diff(ln.points)), 0.01, atol=1e-12)
    assert ln.turning[0] == 0.0 and np.allclose(ln.turning, 0.0, atol=1e-12)


def spiral_grid():
    # with h = chi*arg(z - z0) the heading is arg(z - z0) + theta, so the angle
    # about z0 grows like tan(theta) * log r
    z0 = complex(0.013, -0.021)
    return z0, gff.add_singularity(grid_from(np.zeros((81, 81)), 0.05), z0, -C2.chi, 0.0)


def spiral_error(step, th=math.pi / 3, length=0.8):
    z0, g = spiral_grid()
    ln = flow.trace_flow_line(g, C2, z0 + 0.3 * np.exp(0.2j), th,
                              FlowOptions(step=step, max_steps=int(round(length / step))))
    r = np.abs(ln.points - z0)
    exact = z0 + r * np.exp(1j * (0.2 + math.tan(th) * np.log(r / 0.3)))
    return np.max(np.abs(ln.points - exact)), ln


def test_logarithmic_spiral_singular_field():
    err, ln = spiral_error(0.002)
    assert err < 1e-6 * 0.8
    assert np.allclose(np.abs(np.diff(ln.points)), 0.002, atol=1e-12)


def test_path_error_converges():
    # steps have exact chord length, so the path (not the parameterization) is compared
    e = [spiral_error(h)[0] for h in (0.004, 0.002, 0.001)]
    assert e[1] < e[0] / 6 and e[2] < e[1] / 6


def test_adding_full_period_is_invisible():
    g = gff.whole_plane_approx(40, 2, seed=1, spacing=0.05)
    opts = FlowOptions(step=0.01, max_steps=500)
    a = flow.trace_flow_line(g, C2, 0.1 + 0.05j, 0.7, opts)
    b = flow.trace_flow_line(g + 2 * math.pi * C2.chi, C2, 0.1 + 0.05j, 0.7, opts)
    assert np.max(np.abs(a.points - b.points)) < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_angle_shift_equivariance(delta):
    g = gff.whole_plane_approx(30, 2, seed=2, spacing=0.05)
    opts = FlowOptions(step=0.01, max_steps=300)
    a = flow.trace_flow_line(g, C2, 0.05j, 0.2 + delta, opts)
    b = flow.trace_flow_line(g + delta * C2.chi, C2, 0.05j, 0.2, opts)
    assert len(a.points) == len(b.points)
    assert np.max(np.abs(a.points - b.points)) < 1e-9


def test_bad_options_and_starts():
    with pytest.raises(FlowError):
        FlowOptions(step=0.0)
    with pytest.raises(FlowError):
        FlowOptions(step=0.1, tol=0.05)
    g = gff.add_singularity(grid_from(np.zeros((11, 11))), 0.01 + 0.02j, 0.5, 0.0)
    with pytest.raises(FlowError):
        flow.trace_flow_line(g, C2, 0.01 + 0.02j, 0.0)
    with pytest.raises(FlowError):
        flow.trace_flow_line(g, C2, 5.0, 0.0)


def test_offset_start_insensitive():
    g = gff.add_singularity(gff.whole_plane_approx(60, 2, seed=3, spacing=1 / 29.5), 0.003 + 0.004j, 0.2, 0.0)
    opts = FlowOptions(step=0.002, max_steps=200)
    a = flow.trace_from_singularity(g, C2, 1.0, opts)
    b = flow.trace_from_singularity(g, C2, 1.0, opts, offset=0.002)
    assert abs(a.points[-1] - b.points[-1]) < 0.02


def test_forest_one_start():
    g = gff.whole_plane_approx(30, 2, seed=4, spacing=0.05)
    F = flow.build_forest(g, C2, [0.1j], 0.0, FlowOptions(step=0.01))
    assert len(F.lines) == 1 and F.merge_edges == [] and F.components() == [[0]]


def test_coincident_starts_merge_immediately():
    g = gff.whole_plane_approx(30, 2, seed=4, spacing=0.05)
    F = flow.build_forest(g, C2, [0.1j, 0.1j + 1e-9], 0.5, FlowOptions(step=0.01))
    b = F.lines[1]
    assert b.merged and b.n_own == 0 and b.target == (0, 0)
    with pytest.raises(FlowError):
        flow.build_forest(g, C2, [0.1j, 0.1j], 0.5)


def test_start_on_existing_trace_merges():
    g = gff.whole_plane_approx(30, 2, seed=5, spacing=0.05)
    opts = FlowOptions(step=0.01)
    a = flow.trace_flow_line(g, C2, -0.2j, 1.0, opts)
    F = flow.build_forest(g, C2, [-0.2j, a.points[20]], 1.0, opts)
    assert F.lines[1].merged and F.merge_edges[0][:2] == (1, 0)
    assert np.array_equal(F.lines[1].points[F.lines[1].n_own:], a.points[F.lines[1].target[1]:])


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10**6))
def test_forest_is_acyclic(seed):
    g = gff.whole_plane_approx(40, 2, seed=seed, spacing=0.05)
    rng = np.random.default_rng(seed)
    starts = rng.uniform(-0.8, 0.8, 15) + 1j * rng.uniform(-0.8, 0.8, 15)
    F = flow.build_forest(g, C2, starts, 0.3, FlowOptions(step=0.01))
    for child, parent, _ in F.merge_edges:
        assert parent < child
    roots = {F.find(ln.id) for ln in F.lines}
    assert all(not F.lines[r].merged for r in roots)


def test_height_difference_examples():
    assert flow.height_difference(0.3, 0.3, 0, C2) == 0.0
    c = params.derive_constants(1.5)
    D = flow.height_difference(0.0, c.critical_angle, 0, c)
    assert D == pytest.approx(2 * c.lam - math.pi * c.chi, abs=1e-12)
    assert flow.height_difference(0.0, math.pi / 2, 1, C2) == pytest.approx(5.553603672697958, abs=1e-12)


def test_height_difference_at_hit_reads_winding():
    a = flow.FlowLine(0, 0j, 0.0, np.array([0, 0.1, 0.2]), np.zeros(3), "exited_window", 0.1)
    b = flow.FlowLine(1, 0.1j, 0.5, np.array([0.1j, 0.1 + 0.01j, 0.2 - 0.05j]),
                      np.array([0.0, 2 * math.pi, 2 * math.pi]), "exited_window", 0.1)
    d = flow.height_difference_at_hit(a, b, (1, 1), C2)
    assert d.winding_count == 1 and d.value == pytest.approx((2 * math.pi + 0.5) * C2.chi)
    with pytest.raises(flow.InvalidHit):
        flow.height_difference_at_hit(a, b, (0, 2), C2)


def test_classify_examples():
    c = C2
    assert flow.classify_interaction(HeightDifference(0.0, 0, "right"), c) == "merges"
    assert flow.classify_interaction(HeightDifference(-math.pi * c.chi, 0, "right"), c) == "cannot_hit"
    assert flow.classify_interaction(HeightDifference(1.0, 0, "right"), c) == "bounces"
    assert flow.classify_interaction(HeightDifference(-1.0, 0, "left"), c) == "bounces"
    assert flow.classify_interaction(HeightDifference(-1.0, 0, "right"), c) == "crosses"


def test_gap_beyond_critical_never_merges():
    gap = 1.5 * C2.critical_angle
    for k in range(-2, 3):
        for side in ("left", "right"):
            d = HeightDifference(flow.height_difference(0.0, gap, k, C2), k, side)
            assert flow.classify_interaction(d, C2) != "merges"


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_minimal_winding(a, b):
    k = flow.minimal_winding(a, b)
    best = min(abs(2 * math.pi * j + b - a) for j in range(k - 3, k + 4))
    assert abs(2 * math.pi * k + b - a) <= best + 1e-9


def test_count_crossings_fixtures():
    seg = np.array([-1 + 0j, 1 + 0j])
    assert flow.count_crossings(seg, seg, 0.01) == 0
    assert flow.count_crossings(seg, np.array([-1j, 1j]), 0.01) == 1
    zig = np.array([-0.8 - 0.5j, -0.4 + 0.5j, 0.0 - 0.5j, 0.4 + 0.5j])
    assert flow.count_crossings(seg, zig, 0.01) == 3
    # a shallow poke across and back is a bounce, not two crossings
    # depth is measured against the points of a, which are dense for traced lines
    dense = np.linspace(-1, 1, 2001) + 0j
    poke = np.array([-0.5 + 0.1j, 0.0 - 0.005j, 0.5 + 0.1j])
    assert flow.count_crossings(dense, poke, 0.01) == 0
    assert flow.count_crossings(dense, poke, 0.001) == 2


def test_min_distance_and_rows():
    assert flow.min_distance(np.array([0j, 1]), np.array([3 + 4j])) == pytest.approx(math.sqrt(20))
    g = gff.whole_plane_approx(20, 2, seed=1, spacing=0.1)
    F = flow.build_forest(g, C2, [0j], 0.0, FlowOptions(step=0.05))
    rows = flow.forest_to_rows(F)
    assert len(rows) == len(F.lines[0].points) and rows[0][:2] == (0, 0)
