"""First Dirichlet eigenvalue against closed-form spectra.

Reference values used below:
* interval (0, 1): lambda1 = pi^2.
* unit disk: lambda1 = (first zero of the order-zero Bessel function)^2,
  computed here from the power series by bisection, no special-function
  library involved.
* hemisphere cap of the round n-sphere: lambda1 = n (the polar coordinate
  function cos(theta) is the eigenfunction).
* unit square: lambda1 = 2 pi^2.
"""

import numpy as np
import pytest

from curvrig import (
    InputError,
    annulus,
    ball,
    build_box_mesh,
    build_radial_domain,
    cap,
    dirichlet_lambda1,
    interval,
    rayleigh_quotient,
    sphere,
)


def bessel_j0(x: float) -> float:
    total, term, k = 1.0, 1.0, 0
    q = -0.25 * x * x
    while abs(term) > 1e-18:
        k += 1
        term *= q / (k * k)
        total += term
    return total


def first_bessel_zero() -> float:
    lo, hi = 2.0, 3.0
    assert bessel_j0(lo) > 0.0 > bessel_j0(hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if bessel_j0(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_bessel_oracle_self_check():
    j01 = first_bessel_zero()
    assert abs(bessel_j0(j01)) < 1e-14
    assert abs(j01 - 2.404825557695773) < 1e-12


def test_interval_eigenvalue():
    dom = build_radial_domain(interval(0.0, 1.0), 1, 256)
    res = dirichlet_lambda1(dom)
    np.testing.assert_allclose(res.lambda1, np.pi**2, rtol=1e-4)


def test_disk_eigenvalue_matches_bessel_zero():
    dom = build_radial_domain(ball(1.0), 2, 512)
    res = dirichlet_lambda1(dom)
    np.testing.assert_allclose(res.lambda1, first_bessel_zero() ** 2, rtol=1e-4)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hemisphere_eigenvalue_equals_dimension(n):
    dom = build_radial_domain(cap(np.pi / 2), n, 512)
    res = dirichlet_lambda1(dom)
    np.testing.assert_allclose(res.lambda1, float(n), rtol=1e-4)


def test_hemisphere_eigenfunction_is_polar_cosine():
    dom = build_radial_domain(cap(np.pi / 2), 3, 512)
    res = dirichlet_lambda1(dom)
    ref = np.cos(dom.nodes)
    ref /= np.sqrt(np.dot(dom.weights, ref**2))
    np.testing.assert_allclose(res.u1, ref, atol=2e-4)


def test_square_eigenvalue():
    dom = build_box_mesh(48, 48)
    res = dirichlet_lambda1(dom)
    np.testing.assert_allclose(res.lambda1, 2.0 * np.pi**2, rtol=5e-3)


def test_exact_scaling_invariance():
    # dilating the disk by s multiplies the eigenvalue by exactly s^-2,
    # discretization error included, because the grids map onto each other
    m = 128
    lam1 = dirichlet_lambda1(build_radial_domain(ball(1.0), 2, m)).lambda1
    lam3 = dirichlet_lambda1(build_radial_domain(ball(3.0), 2, m)).lambda1
    np.testing.assert_allclose(lam3 * 9.0, lam1, rtol=1e-9)


def test_domain_monotonicity_of_caps():
    lam_small = dirichlet_lambda1(build_radial_domain(cap(1.0), 3, 256)).lambda1
    lam_large = dirichlet_lambda1(build_radial_domain(cap(1.2), 3, 256)).lambda1
    assert lam_large < lam_small


def test_eigenfunction_normalization_and_sign():
    dom = build_radial_domain(annulus(1.0, 2.0), 3, 128)
    res = dirichlet_lambda1(dom)
    assert np.all(res.u1[dom.boundary] == 0.0)
    assert np.all(res.u1[dom.interior] > 0.0)
    _, M = __import__("curvrig").assemble(dom)
    np.testing.assert_allclose(res.u1 @ (M.matrix @ res.u1), 1.0, rtol=1e-12)
    assert res.iterations >= 1
    assert np.isfinite(res.residual)


def test_fine_grid_convergence_uses_roundoff_floor():
    # on fine grids the generalized-pencil residual stalls at the float64
    # cancellation floor; the solver must still accept and return the value
    dom = build_radial_domain(cap(1.2), 3, 1024)
    res = dirichlet_lambda1(dom)
    np.testing.assert_allclose(res.lambda1, 5.853885, rtol=1e-4)


def test_rayleigh_quotient_of_eigenfunction():
    dom = build_radial_domain(cap(1.2), 3, 256)
    res = dirichlet_lambda1(dom)
    np.testing.assert_allclose(rayleigh_quotient(res.u1, dom), res.lambda1, rtol=1e-10)


def test_rayleigh_quotient_bounds_from_above():
    dom = build_radial_domain(ball(1.0), 2, 128)
    res = dirichlet_lambda1(dom)
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = np.zeros(dom.node_count)
        v[dom.interior] = rng.normal(size=dom.interior.size)
        assert rayleigh_quotient(v, dom) >= res.lambda1 * (1.0 - 1e-12)


def test_rayleigh_quotient_input_checks():
    dom = build_radial_domain(ball(1.0), 2, 64)
    with pytest.raises(InputError):
        rayleigh_quotient(np.zeros(dom.node_count), dom)
    with pytest.raises(InputError):
        rayleigh_quotient(np.ones(dom.node_count), dom)  # boundary not zero
    with pytest.raises(InputError):
        rayleigh_quotient(np.ones(3), dom)


def test_closed_domain_rejected():
    dom = build_radial_domain(sphere(), 3, 64)
    with pytest.raises(InputError):
        dirichlet_lambda1(dom)
