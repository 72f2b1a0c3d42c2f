"""Geometry, coupling table, and lattice-sum checks.

Expected values come from closed-form pair results and from independent
brute-force lattice sums (computed with a separate throwaway script, frozen
here as constants).
"""

import numpy as np
import pytest

from magicecho import lattice
from magicecho.lattice import (
    Orientation,
    PhysicalConstants,
    angular_lattice_sum,
    build_cluster,
    bulk_second_moment,
    calibrated_prefactor,
    coupling,
    local_field,
    second_moment,
)

# Dimensionless Van Vleck sums S = sum (1 - 3cos^2)^2 / n^6, brute force.
S_FROZEN = {
    ("100", 3.0): 13.228231169,
    ("100", 6.0): 13.341538971,
    ("100", 10.0): 13.353884234,
    ("110", 6.0): 5.047577987,
    ("111", 6.0): 2.282924326,
}


def test_orientation_from_named_spec():
    o = Orientation.from_spec("110")
    assert o.label == "110"
    np.testing.assert_allclose(o.unit, [1 / np.sqrt(2), 1 / np.sqrt(2), 0.0],
                               atol=1e-15)


def test_orientation_from_custom_triple():
    o = Orientation.from_spec("1, 1, 2")
    assert o.label == "custom"
    assert np.linalg.norm(o.unit) == pytest.approx(1.0, abs=1e-14)


def test_orientation_rejects_garbage():
    with pytest.raises(ValueError):
        Orientation.from_spec("12x")
    with pytest.raises(ValueError):
        Orientation.from_spec("0,0,0")


def test_coupling_parallel_pair_sign_and_magnitude():
    # Vector along the field: 1 - 3cos^2 = -2, so a = -2 D / r^3.
    c = PhysicalConstants(dipolar_prefactor=1.0)
    d = c.lattice_constant
    a = coupling((d, 0.0, 0.0), (1, 0, 0), c)
    assert a == pytest.approx(-2.0 / d**3, rel=1e-14)


def test_coupling_magic_angle_vanishes():
    c = PhysicalConstants(dipolar_prefactor=1.0)
    # cos^2 = 1/3 kills the secular coupling.
    v = np.array([1.0, np.sqrt(2.0), 0.0])
    assert coupling(v, (1, 0, 0), c) == pytest.approx(0.0, abs=1e-12)


def test_coupling_rejects_zero_separation():
    with pytest.raises(ValueError):
        coupling((0.0, 0.0, 0.0), (1, 0, 0))


def test_radius_one_cluster_has_seven_sites():
    cl = build_cluster("100", radius=1.0)
    assert cl.n_sites == 7
    assert tuple(cl.positions[0]) == (0, 0, 0)
    # the six unit-distance neighbors, lexicographic within the shell
    assert tuple(cl.positions[1]) == (-1, 0, 0)


def test_max_sites_two_picks_deterministic_pair():
    cl = build_cluster("100", radius=2.0, max_sites=2)
    assert cl.n_sites == 2
    assert tuple(cl.positions[0]) == (0, 0, 0)
    assert tuple(cl.positions[1]) == (-1, 0, 0)


def test_cluster_below_two_sites_raises():
    with pytest.raises(ValueError, match="fewer than 2 sites"):
        build_cluster("100", radius=0.5)


def test_coupling_table_symmetric_zero_diagonal():
    cl = build_cluster("110", radius=1.5, max_sites=6)
    a = cl.couplings
    np.testing.assert_allclose(a, a.T, atol=0.0)
    assert np.all(np.diag(a) == 0.0)
    assert a.shape == (6, 6)


def test_cluster_build_is_deterministic():
    c1 = build_cluster("111", radius=2.0, max_sites=8)
    c2 = build_cluster("111", radius=2.0, max_sites=8)
    assert np.array_equal(c1.positions, c2.positions)
    assert np.array_equal(c1.couplings, c2.couplings)
    assert c1.hash_hex == c2.hash_hex
    c3 = build_cluster("100", radius=2.0, max_sites=8)
    assert c3.hash_hex != c1.hash_hex


def test_pair_second_moment_closed_form():
    # Isolated pair with coupling a: M2 = (9/16) a^2, omega_L = sqrt(3) a / 4.
    cl = build_cluster("100", radius=1.0, max_sites=2)
    a = cl.couplings[0, 1]
    assert second_moment(cl) == pytest.approx((9.0 / 16.0) * a**2, rel=1e-12)
    assert local_field(cl) == pytest.approx(np.sqrt(3.0) * abs(a) / 4.0, rel=1e-12)


def test_angular_sums_match_frozen_brute_force():
    for (label, radius), expected in S_FROZEN.items():
        s = angular_lattice_sum(label, radius)
        assert s == pytest.approx(expected, rel=1e-8), (label, radius)


def test_calibration_reproduces_target_by_construction():
    m2 = bulk_second_moment("100")
    assert m2 == pytest.approx(lattice.M2_CALIBRATION_TARGET, rel=1e-12)


def test_calibrated_prefactor_scale():
    # D/d^3 = sqrt(16 M2 / (9 S100)) ~ 1.46e5 rad/s at the default radius.
    d3 = calibrated_prefactor() / lattice.F19_SPACING**3
    expected = np.sqrt(16.0 * 2.55e10 / (9.0 * 13.341538971))
    assert d3 == pytest.approx(expected, rel=1e-8)


def test_bulk_m2_other_orientations_against_reference():
    # Pure lattice-sum predictions land within a few percent of the
    # tabulated single-crystal values once [100] is pinned.
    m110 = bulk_second_moment("110")
    m111 = bulk_second_moment("111")
    assert m110 == pytest.approx(0.99e10, rel=0.15)
    assert m111 == pytest.approx(0.50e10, rel=0.15)


def test_explicit_prefactor_bypasses_calibration():
    c = PhysicalConstants(dipolar_prefactor=2.0 * lattice.F19_SPACING**3)
    m2 = bulk_second_moment("100", constants=c)
    assert m2 == pytest.approx((9.0 / 16.0) * 4.0 * 13.341538971, rel=1e-8)


def test_local_field_trace_route_agrees():
    from magicecho.operators import secular_dipolar

    cl = build_cluster("110", radius=1.5, max_sites=5)
    hd = secular_dipolar(cl)
    assert lattice.local_field_trace(cl, hd) == pytest.approx(
        local_field(cl), rel=1e-12)
