import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imgeo import gff, params, spacefill
from imgeo.spacefill import SpaceFillConfig, SpaceFillError, SpaceFillOrder

kps = st.floats(4.1, 200.0)


def zero_grid(n=65):
    return gff.FieldGrid(n=n, spacing=2.0 / (n - 1), values=np.zeros((n, n)), origin=complex(-1, -1))


def weights_in(kp, u):
    return -2.0 + u * (kp / 2.0)


def test_centered_weights_give_zero_constants():
    for kp in (6.0, 8.0, 128.0):
        r = kp / 4 - 2
        a, b = spacefill.weights_to_boundary(kp, r, r)
        assert abs(a) < 1e-12 and abs(b) < 1e-12


def test_exploration_tree_weights():
    lp = params.derive_constants(16 / 6).lam_prime
    a, b = spacefill.weights_to_boundary(6.0, 0.0, 0.0)
    assert a == pytest.approx(lp / 2, abs=1e-12) and b == pytest.approx(-lp / 2, abs=1e-12)


@given(kps, st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_weight_round_trip(kp, u, v):
    r1, r2 = weights_in(kp, u), weights_in(kp, v)
    a, b = spacefill.weights_to_boundary(kp, r1, r2)
    lam = params.derive_constants(16 / kp).lam
    assert abs(a) < lam and abs(b) < lam
    back = spacefill.boundary_to_weights(kp, a, b)
    assert back[0] == pytest.approx(r1, abs=1e-12 * max(1, kp)) and back[1] == pytest.approx(r2, abs=1e-12 * max(1, kp))


@given(kps, st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_reversal_is_involution(kp, u, v):
    r1, r2 = weights_in(kp, u), weights_in(kp, v)
    t2, t1 = spacefill.reversal_weights(kp, r1, r2)
    b1, b2 = spacefill.reversal_weights(kp, t1, t2)
    assert (b2, b1) == pytest.approx((r1, r2), abs=1e-12 * kp)


def test_reversal_examples():
    assert spacefill.reversal_weights(6.0, -0.5, -0.5) == pytest.approx((-0.5, -0.5))
    assert spacefill.reversal_weights(16.0, 0.0, 0.0) == pytest.approx((4.0, 4.0))
    assert spacefill.reversal_weights(6.0, 0.0, -1.0) == pytest.approx((0.0, -1.0))


def test_weight_domain_errors():
    with pytest.raises(params.DomainError):
        spacefill.weights_to_boundary(6.0, -2.0, 0.0)
    with pytest.raises(params.DomainError):
        spacefill.weights_to_boundary(6.0, 0.0, 1.0)
    with pytest.raises(params.DomainError):
        spacefill.weights_to_boundary(4.0, 0.0, 0.0)
    with pytest.raises(params.DomainError):
        spacefill.boundary_to_weights(6.0, 10.0, 0.0)


def test_config_directions():
    up = SpaceFillConfig(6.0, 0.0, 0.0, mesh=4)
    down = up.reversed()
    assert down.direction == "down" and (down.rho1, down.rho2) == (0.0, 0.0)
    assert (down.a, down.b) == pytest.approx((-up.a, -up.b))
    assert SpaceFillConfig(6.0).a == 0.0
    again = SpaceFillConfig(6.0, a=up.a, b=up.b)
    assert (again.rho1, again.rho2) == pytest.approx((0.0, 0.0))
    with pytest.raises(SpaceFillError):
        SpaceFillConfig(6.0, mesh=0)
    with pytest.raises(SpaceFillError):
        SpaceFillConfig(6.0, direction="sideways")


def test_square_boundary_pieces():
    c = params.derive_constants(16 / 6)
    spec = spacefill.square_boundary(c, 0.3, -0.2)
    q = math.pi * c.chi / 2
    vals = spec.value_at(np.array([0.25, 0.75, 1.5, 2.25, 2.75, 3.5]))
    assert vals == pytest.approx([0.3 + q, -0.2 - q, -0.2, -0.2 + q, 0.3 - q, 0.3])


def test_exit_positions():
    assert spacefill.exit_position(complex(0, -1)) == pytest.approx(0.0)
    assert spacefill.exit_position(complex(1, 0)) == pytest.approx(1.0)
    assert spacefill.exit_position(complex(0, 1)) == pytest.approx(2.0)
    assert spacefill.exit_position(complex(-1, 0)) == pytest.approx(3.0)


def test_single_point_order():
    cfg = SpaceFillConfig(6.0, mesh=1)
    o = spacefill.order_points(zero_grid(), cfg.constants, cfg)
    assert o.order.tolist() == [0] and o.points[0] == 0j


def test_point_above_comes_after():
    # zero field: left lines run west, right lines run east, and z = 0.5i sits on the
    # right of w's left line and the left of w's right line
    cfg = SpaceFillConfig(6.0)
    o = spacefill.order_points(zero_grid(), cfg.constants, cfg, points=[0j, 0.5j])
    assert o.visit_rank()[0] < o.visit_rank()[1]
    down = spacefill.order_points(zero_grid(), cfg.constants, cfg.reversed(), points=[0j, 0.5j])
    assert down.visit_rank()[0] > down.visit_rank()[1]


def test_mesh_two_curve():
    cfg = SpaceFillConfig(6.0, mesh=2)
    g = spacefill.sample_field(cfg, 33, seed=1)
    curve = spacefill.space_filling_curve(spacefill.order_points(g, cfg.constants, cfg))
    assert len(curve.points) == 4 and curve.total_time == pytest.approx(4.0)
    assert sorted(curve.index.tolist()) == [0, 1, 2, 3]


@settings(max_examples=5, deadline=None)
@given(st.integers(1, 8), st.integers(0, 1000))
def test_total_time_is_area(mesh, seed):
    cfg = SpaceFillConfig(6.0, mesh=mesh)
    g = spacefill.sample_field(cfg, 33, seed=seed)
    o = spacefill.order_points(g, cfg.constants, cfg)
    assert spacefill.space_filling_curve(o).total_time == pytest.approx(4.0, abs=1e-12)
    assert spacefill.check_total_order(o) == 0


def test_sampled_order_is_consistent():
    cfg = SpaceFillConfig(6.0, mesh=8)
    g = spacefill.sample_field(cfg, 65, seed=3)
    o = spacefill.order_points(g, cfg.constants, cfg)
    assert sorted(o.order.tolist()) == list(range(64))
    assert o.evidence["agreement"] >= 0.99
    assert o.evidence["cycles"] == 0
    assert spacefill.check_total_order(o) == 0
    assert spacefill.check_total_order(o, triples=1000) == 0


def test_total_order_checker_flags_ties():
    assert spacefill.check_total_order(np.array([0, 1, 2])) == 0
    assert spacefill.check_total_order(np.array([0, 0, 2])) > 0


def make_order(perm, mesh):
    n = mesh * mesh
    return SpaceFillOrder(points=spacefill.mesh_points(mesh), order=np.asarray(perm),
                          evidence={}, pocket_areas=np.full(n, 4.0 / n), mesh=mesh)


def test_exact_reverse_has_zero_statistic():
    rng = np.random.default_rng(0)
    fwd = [make_order(rng.permutation(16), 4) for _ in range(6)]
    rev = [make_order(f.order[::-1], 4) for f in fwd]
    stat, p = spacefill.reversal_symmetry_stat(fwd, rev, spacefill.default_probes(4))
    assert stat == 0.0 and p == 1.0
    stat, _ = spacefill.reversal_symmetry_stat(fwd[0], rev[0])
    assert stat == 0.0


def test_mismatched_meshes_rejected():
    with pytest.raises(SpaceFillError):
        spacefill.reversal_symmetry_stat(make_order(np.arange(16), 4), make_order(np.arange(4), 2))
    with pytest.raises(SpaceFillError):
        spacefill.reversal_symmetry_stat([make_order(np.arange(4), 2)], [])


def test_visit_times_mirror():
    o = make_order(np.arange(4), 2)
    r = make_order(np.arange(4)[::-1], 2)
    assert np.allclose(o.visit_times() + r.visit_times(), 1.0)


def test_rendering_helpers():
    o = make_order(np.arange(16), 4)
    assert spacefill.late_islands(o) == 0
    c = spacefill.time_colors(np.array([0.0, 0.5, 1.0]))
    assert c.tolist() == [[0, 0, 255], [0, 255, 0], [255, 0, 0]]
    rows = spacefill.curve_rows(spacefill.space_filling_curve(o))
    assert rows[-1][0] == 15 and rows[-1][3] == pytest.approx(4.0)
    late = make_order(np.r_[np.arange(5), np.arange(6, 16), 5], 4)
    assert spacefill.late_islands(late) == 1


def test_refinement_agreement_smoke():
    cfg = SpaceFillConfig(6.0)
    g = spacefill.sample_field(cfg, 65, seed=2)
    assert spacefill.refinement_agreement(g, cfg.constants, cfg, 4, 8) >= 0.9
