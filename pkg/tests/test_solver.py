"""Boundary-value solver and radial shooting, checked against closed forms.

Two shooting oracles on the flat annulus in three dimensions:

* Zero curvature on both sides makes the equation u'' + (2/r) u' = 0,
  whose solution through u(a) = 1, u'(a) = s is u = 1 + s a - s a^2 / r.
* With R_bar = 0 and R_target = 6 the profile
  u = sqrt(2) (lam / (lam^2 + r^2))^(1/2) satisfies the critical equation
  exactly for every lam > 0, so shooting from its value and slope at r = a
  must track it across the annulus.

The multiplicity picture the scans must reproduce: a thin flat annulus
carries a single solution in the slope window, a 2:1 annulus carries two,
and past the fold the family leaves the window entirely.  On the spherical
cap of angle 1.2 the Dirichlet problem with matching curvatures has the
trivial solution and one genuine second branch; the second branch exceeds 1
in the interior and drives the boundary mean curvature of the conformal
metric below the background value, which is what separates the two.
"""

import csv
import io

import numpy as np
import pytest

from curvrig import (
    BoundaryTrace,
    BvpProblem,
    InputError,
    ScanResult,
    SolutionSet,
    SolverError,
    UnsupportedDimensionError,
    annulus,
    build_radial_domain,
    cap,
    default_starts,
    mean_curvature_transform,
    multiplicity_scan,
    nodal_laplacian,
    normal_derivative,
    profiles_to_csv,
    radial_shoot,
    ratio_continuation,
    scalar_curvature_transform,
    solve_bvp,
    write_profiles_csv,
)


@pytest.fixture(scope="module")
def thin_scan():
    return multiplicity_scan(3, 0.0, 6.0, 1.0, 1.2)


@pytest.fixture(scope="module")
def wide_scan():
    return multiplicity_scan(3, 0.0, 6.0, 1.0, 2.0)


@pytest.fixture(scope="module")
def cap_solutions():
    dom = build_radial_domain(cap(1.2), 3, 256)
    return dom, solve_bvp(BvpProblem(dom, 6.0, 6.0))


class TestRadialShoot:
    def test_flat_background_matches_the_harmonic_profile(self):
        a, b, s = 1.0, 2.0, 0.7
        shot = radial_shoot(3, 0.0, 0.0, a, b, s)
        exact = 1.0 + s * a - s * a**2 / shot.r
        assert shot.status == "ok"
        assert np.max(np.abs(shot.u - exact)) < 1e-9

    def test_critical_concentration_profile(self):
        lam, a, b = 0.2, 0.6, 2.0
        u0 = np.sqrt(2.0) * np.sqrt(lam / (lam**2 + a**2))
        slope = np.sqrt(2.0) * np.sqrt(lam) * (-a) * (lam**2 + a**2) ** -1.5
        shot = radial_shoot(3, 0.0, 6.0, a, b, slope, u_start=u0)
        exact = np.sqrt(2.0) * np.sqrt(lam / (lam**2 + shot.r**2))
        assert shot.status == "ok"
        assert np.max(np.abs(shot.u - exact)) < 1e-9

    def test_positivity_loss_terminates_the_integration(self):
        shot = radial_shoot(3, 0.0, 0.0, 1.0, 3.0, -5.0)
        assert shot.status == "hit_zero"
        assert shot.r[-1] < 3.0

    def test_runaway_growth_terminates_the_integration(self):
        # negative target curvature feeds the nonlinearity
        shot = radial_shoot(3, 0.0, -6.0, 1.0, 50.0, 5.0)
        assert shot.status == "blowup"
        assert shot.r[-1] < 50.0

    def test_end_value_is_the_last_sample(self):
        shot = radial_shoot(3, 0.0, 0.0, 1.0, 2.0, 0.3)
        assert shot.end_value == shot.u[-1]
        assert shot.slope == 0.3

    def test_rejects_bad_radii_and_dimension(self):
        with pytest.raises(InputError):
            radial_shoot(3, 0.0, 6.0, 2.0, 1.0, 0.1)
        with pytest.raises(InputError):
            radial_shoot(3, 0.0, 6.0, 0.0, 1.0, 0.1)
        with pytest.raises(UnsupportedDimensionError):
            radial_shoot(2, 0.0, 6.0, 1.0, 2.0, 0.1)


class TestBvpProblem:
    def test_rejects_low_dimension(self):
        dom = build_radial_domain(cap(1.2), 2, 64)
        with pytest.raises(UnsupportedDimensionError):
            BvpProblem(dom, 2.0, 2.0)

    def test_rejects_mismatched_or_nonfinite_data(self):
        dom = build_radial_domain(cap(1.2), 3, 64)
        with pytest.raises(InputError):
            BvpProblem(dom, np.ones(5), 6.0)
        with pytest.raises(InputError):
            BvpProblem(dom, np.full(64, np.nan), 6.0)

    def test_exponents(self):
        dom = build_radial_domain(cap(1.2), 3, 64)
        prob = BvpProblem(dom, 6.0, 6.0)
        assert prob.kappa == 8.0
        assert prob.exponent == 5.0

    def test_matched_curvatures_make_the_flat_field_a_root(self):
        # zero up to assembly roundoff: the linear and power terms cancel
        dom = build_radial_domain(cap(1.2), 3, 128)
        prob = BvpProblem(dom, 6.0, 6.0)
        res = prob.residual(np.ones(dom.node_count))
        assert np.max(np.abs(res)) < 1e-9


class TestSolveBvp:
    def test_cap_carries_exactly_two_branches(self, cap_solutions):
        """Multistart on the rigid-looking cap finds the second branch."""
        dom, found = cap_solutions
        assert found.count == 2
        trivial = found.closest_to_one()
        assert trivial.sup_deviation == 0.0
        assert trivial.iterations == 0
        second = found.solutions[-1]
        assert 1.4610 < np.max(second.values) < 1.4625
        assert np.min(second.values) >= 1.0 - 1e-10

    def test_second_branch_peak_is_grid_stable(self, cap_solutions):
        _, coarse = cap_solutions
        dom = build_radial_domain(cap(1.2), 3, 512)
        fine = solve_bvp(BvpProblem(dom, 6.0, 6.0))
        peak_c = np.max(coarse.solutions[-1].values)
        peak_f = np.max(fine.solutions[-1].values)
        assert abs(peak_c - peak_f) < 1e-3

    def test_second_branch_breaks_the_boundary_curvature_bound(self, cap_solutions):
        # H[g] >= H_bar is the hypothesis that excludes it, not positivity
        dom, found = cap_solutions
        H_bar = 1.0 / np.tan(1.2)
        values = {}
        for sol in found.solutions:
            trace = normal_derivative(sol.values, dom)
            out = mean_curvature_transform(
                3,
                H_bar,
                BoundaryTrace(
                    values=sol.values[trace.nodes],
                    normal_derivative=trace.normal_derivative,
                ),
            )
            values[sol.start_label] = float(out.values[0])
        assert values["flat"] == pytest.approx(H_bar, abs=1e-10)
        second = [v for k, v in values.items() if k != "flat"][0]
        assert second < 0.0 < H_bar

    def test_default_starts_begin_flat(self):
        dom = build_radial_domain(cap(1.2), 3, 64)
        starts = default_starts(BvpProblem(dom, 6.0, 6.0))
        labels = [lb for lb, _ in starts]
        assert labels[0] == "flat"
        assert {"eig+", "eig-"} <= set(labels)

    def test_duplicate_starts_collapse_to_one_solution(self):
        dom = build_radial_domain(annulus(1.0, 2.0), 3, 65)
        prob = BvpProblem(dom, 0.0, 6.0)
        ones = np.ones(dom.node_count)
        found = solve_bvp(prob, starts=[("a", ones), ("b", ones)])
        assert found.count == 1
        assert found.failures == ()

    def test_unreachable_tolerance_raises_with_the_start_log(self):
        dom = build_radial_domain(annulus(1.0, 2.0), 3, 65)
        prob = BvpProblem(dom, 0.0, 6.0)
        with pytest.raises(SolverError, match="no start converged"):
            solve_bvp(prob, tol=1e-30)

    def test_nonpositive_start_is_reported_per_start(self):
        dom = build_radial_domain(annulus(1.0, 2.0), 3, 65)
        prob = BvpProblem(dom, 0.0, 6.0)
        with pytest.raises(SolverError, match="not positive"):
            solve_bvp(prob, starts=[("neg", -np.ones(dom.node_count))])

    def test_closest_to_one_requires_a_solution(self):
        dom = build_radial_domain(annulus(1.0, 2.0), 3, 65)
        prob = BvpProblem(dom, 0.0, 6.0)
        empty = SolutionSet(problem=prob, solutions=(), failures=())
        with pytest.raises(SolverError):
            empty.closest_to_one()


class TestShootBvpConsistency:
    """The ODE profiles must be fixed points of the assembled Newton step."""

    def test_shoot_profiles_are_newton_fixed_points(self):
        m = 513
        dom = build_radial_domain(annulus(1.0, 2.0), 3, m)
        scan = multiplicity_scan(3, 0.0, 6.0, 1.0, 2.0, grid=m)
        prob = BvpProblem(dom, 0.0, 6.0)
        assert scan.count == 2
        for sol in scan.solutions:
            refined = solve_bvp(prob, starts=[("shoot", sol.u)]).solutions[0]
            assert refined.iterations <= 2
            assert refined.residual_norm < 1e-8
            assert np.max(np.abs(refined.values - sol.u)) < 1e-4

    def test_solutions_reproduce_the_target_curvature(self):
        m = 513
        dom = build_radial_domain(annulus(1.0, 2.0), 3, m)
        prob = BvpProblem(dom, 0.0, 6.0)
        found = solve_bvp(prob)
        # differentiating the grid function is clean a few nodes in
        margin = slice(8, m - 8)
        for sol in found.solutions:
            lap = nodal_laplacian(sol.values, dom)
            R = scalar_curvature_transform(3, 0.0, sol.values, lap).values
            assert np.max(np.abs(R[margin] - 6.0)) / 6.0 < 1e-6


class TestMultiplicityScan:
    def test_thin_annulus_carries_one_solution(self, thin_scan):
        assert thin_scan.count == 1
        only = thin_scan.solutions[0]
        assert only.slope == pytest.approx(0.081047, rel=1e-3)
        assert only.sup_deviation < 0.01

    def test_wide_annulus_carries_two(self, wide_scan):
        assert wide_scan.count == 2
        slopes = [s.slope for s in wide_scan.solutions]
        assert slopes[0] == pytest.approx(1.042577, rel=1e-3)
        assert slopes[1] == pytest.approx(1.935046, rel=1e-3)
        devs = [s.sup_deviation for s in wide_scan.solutions]
        assert devs[0] < devs[1]

    def test_mismatch_defaults_to_nan_without_a_target(self, wide_scan):
        assert all(np.isnan(s.h_mismatch) for s in wide_scan.solutions)

    def test_solutions_leave_the_window_past_the_fold(self):
        scan = multiplicity_scan(3, 0.0, 6.0, 1.0, 2.5)
        assert scan.count == 0
        assert scan.solutions == ()

    def test_mean_curvature_targets_are_recorded_not_imposed(self):
        scan = multiplicity_scan(3, 0.0, 6.0, 1.0, 1.5, H_target=-1.0)
        assert scan.count == 2
        first = scan.solutions[0]
        assert first.H_inner == pytest.approx(-1.4794, rel=1e-3)
        assert first.H_outer == pytest.approx(0.3048, rel=1e-3)
        for sol in scan.solutions:
            want = max(abs(sol.H_inner + 1.0), abs(sol.H_outer + 1.0))
            assert sol.h_mismatch == want

    def test_scan_covers_the_requested_window(self, wide_scan):
        assert wide_scan.slopes[0] == 0.0
        assert wide_scan.slopes[-1] == 20.0
        assert wide_scan.slopes.size == wide_scan.end_values.size == 200

    def test_rejects_bad_scan_parameters(self):
        with pytest.raises(InputError):
            multiplicity_scan(3, 0.0, 6.0, 1.0, 2.0, num=1)
        with pytest.raises(InputError):
            multiplicity_scan(3, 0.0, 6.0, 1.0, 2.0, slope_max=0.0)


class TestRatioContinuation:
    def test_counts_along_the_widening_family(self):
        table = ratio_continuation(3, 0.0, 6.0, 1.0, [1.2, 1.5], num=100)
        assert table.rows == ((1.2, 1), (1.5, 2))
        assert table.first_multiple == 1.5
        assert len(table) == 2

    def test_single_solution_family_has_no_multiple_marker(self):
        table = ratio_continuation(3, 0.0, 6.0, 1.0, [1.1, 1.15], num=60)
        assert table.rows == ((1.1, 1), (1.15, 1))
        assert table.first_multiple is None

    def test_rejects_bad_ratio_lists(self):
        with pytest.raises(InputError, match="exceed 1"):
            ratio_continuation(3, 0.0, 6.0, 1.0, [0.9, 1.5])
        with pytest.raises(InputError, match="increase"):
            ratio_continuation(3, 0.0, 6.0, 1.0, [1.5, 1.2])


class TestProfilesCsv:
    def test_layout_and_float_round_trip(self, wide_scan):
        text = profiles_to_csv(wide_scan)
        rows = list(csv.reader(io.StringIO(text)))
        header = rows[0]
        assert header[0] == "r"
        assert len(header) == 1 + wide_scan.count
        assert all(h.startswith("u_slope_") for h in header[1:])
        assert len(rows) == 1 + wide_scan.solutions[0].r.size
        # spot check exact reparse of first and last data rows
        for idx in (1, -1):
            parsed = [float(c) for c in rows[idx]]
            k = idx - 1 if idx > 0 else wide_scan.solutions[0].r.size - 1
            assert parsed[0] == wide_scan.solutions[0].r[k]
            for j, sol in enumerate(wide_scan.solutions):
                assert parsed[1 + j] == sol.u[k]

    def test_empty_scan_writes_a_bare_header(self):
        scan = ScanResult(
            n=3,
            a=1.0,
            b=2.5,
            slopes=np.linspace(0.0, 20.0, 5),
            end_values=np.full(5, -1.0),
            solutions=(),
        )
        assert profiles_to_csv(scan) == "r\n"

    def test_file_writer_uses_unix_newlines(self, wide_scan, tmp_path):
        path = tmp_path / "profiles.csv"
        write_profiles_csv(wide_scan, path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.decode() == profiles_to_csv(wide_scan)
