"""Quotient closed forms and the subcritical estimator."""

import numpy as np
import pytest

from curvrig import (
    InputError,
    UnsupportedDimensionError,
    ball,
    build_radial_domain,
    cap,
    einstein_quotient,
    estimate_quotient,
    sphere,
    sphere_area,
    sphere_yamabe_constant,
)
from curvrig.quotient import DEFAULT_SCHEDULE, bubble_test_field


def test_sphere_constant_closed_form():
    # n (n-2)/4 * vol(S^n)^(2/n); S^3 has volume 2 pi^2
    np.testing.assert_allclose(
        sphere_yamabe_constant(3), 0.75 * (2.0 * np.pi**2) ** (2.0 / 3.0)
    )
    with pytest.raises(UnsupportedDimensionError):
        sphere_yamabe_constant(2)


def test_einstein_form_recovers_sphere_constant():
    for n in (3, 4, 5, 8):
        got = einstein_quotient(n, float(n * (n - 1)), sphere_area(n))
        np.testing.assert_allclose(got, sphere_yamabe_constant(n), rtol=1e-13)


def test_einstein_form_input_checks():
    with pytest.raises(InputError):
        einstein_quotient(3, -1.0, 1.0)
    with pytest.raises(InputError):
        einstein_quotient(3, 6.0, 0.0)
    with pytest.raises(UnsupportedDimensionError):
        einstein_quotient(2, 2.0, 1.0)


def test_round_sphere_estimate_matches_closed_form():
    dom = build_radial_domain(sphere(), 3, 192)
    est = estimate_quotient(dom, 6.0)
    exact = sphere_yamabe_constant(3)
    assert abs(est.extrapolated - exact) / exact < 2e-2
    assert est.extrapolated <= est.upper_bound


def test_estimate_stages_decrease_toward_critical():
    dom = build_radial_domain(sphere(), 3, 128)
    est = estimate_quotient(dom, 6.0)
    stages = est.values
    assert len(stages) == len(DEFAULT_SCHEDULE)
    # subcritical values increase monotonically as eps decreases
    assert np.all(np.diff(stages) > 0.0)


def test_every_stage_sits_below_the_upper_bound():
    # the upper-bound test field belongs to every stage's start pool, so
    # each converged stage value cannot exceed the reported upper bound
    for geom, rbar in ((ball(1.0), 0.0), (sphere(), 6.0)):
        est = estimate_quotient(build_radial_domain(geom, 3, 384), rbar)
        assert all(v <= est.upper_bound + 1e-12 for _, v in est.subcritical)


def test_flat_ball_estimate_converges_to_the_sphere_constant():
    exact = sphere_yamabe_constant(3)
    coarse = estimate_quotient(build_radial_domain(ball(1.0), 3, 384), 0.0)
    fine = estimate_quotient(build_radial_domain(ball(1.0), 3, 576), 0.0)
    # resolved estimates approach the constant from above as the grid refines
    assert exact < fine.extrapolated < coarse.extrapolated
    assert (coarse.extrapolated - exact) / exact < 2e-2
    assert (fine.extrapolated - exact) / exact < 2e-2


def test_flat_ball_agrees_with_its_spherical_cap_image():
    # the unit ball maps conformally onto the hemisphere, and the quotient
    # is a conformal invariant; discrete estimates agree to a few percent
    flat = estimate_quotient(build_radial_domain(ball(1.0), 3, 384), 0.0)
    round_ = estimate_quotient(build_radial_domain(cap(np.pi / 2), 3, 384), 6.0)
    assert abs(flat.extrapolated - round_.extrapolated) < 0.05 * round_.extrapolated


def test_domain_monotonicity_under_inclusion():
    # both caps contain the pole, so both radial trial classes can express
    # the concentration their minimizers need (an annulus cannot: radial
    # fields concentrate on spheres, not points, and its class infimum is
    # far above the true quotient)
    inner = estimate_quotient(build_radial_domain(cap(0.8), 3, 384), 6.0)
    outer = estimate_quotient(build_radial_domain(cap(np.pi / 2), 3, 384), 6.0)
    tol = 0.02 * sphere_yamabe_constant(3)
    assert inner.extrapolated >= outer.extrapolated - tol


def test_schedule_validation():
    dom = build_radial_domain(sphere(), 3, 128)
    with pytest.raises(InputError):
        estimate_quotient(dom, 6.0, schedule=(0.5,))
    with pytest.raises(InputError):
        estimate_quotient(dom, 6.0, schedule=(0.2, 0.3))
    with pytest.raises(InputError):
        estimate_quotient(dom, 6.0, schedule=(4.5, 4.0))  # exponent leaves (2, p)


def test_dimension_guard():
    dom = build_radial_domain(sphere(), 2, 64)
    with pytest.raises(UnsupportedDimensionError):
        estimate_quotient(dom, 2.0)


def test_bubble_field_shape_and_taper():
    dom = build_radial_domain(ball(1.0), 3, 128)
    field = bubble_test_field(dom)
    assert field.shape == (dom.node_count,)
    assert np.all(field[dom.boundary] == 0.0)
    assert field.max() > 0.0
    with pytest.raises(InputError):
        bubble_test_field(dom, scale=-1.0)


def test_bubble_field_on_closed_domain_is_untapered():
    dom = build_radial_domain(sphere(), 3, 96)
    field = bubble_test_field(dom)
    assert np.all(field > 0.0)
