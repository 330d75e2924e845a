"""Semilinear boundary-value solver and radial shooting for prescribed curvature.

The equation solved is the conformal scalar-curvature equation

    -(4(n-1)/(n-2)) Delta u + R_bar u = R_target u^((n+2)/(n-2)),   u > 0,

with Dirichlet data u = 1 on the boundary.  Two independent routes are
provided: a damped Newton iteration on the assembled operators (any
domain), and high-order adaptive shooting in the flat radial variable
(annuli), used both as a cross-check and to count solutions via the
one-parameter slope family.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import spsolve

from .conformal import BoundaryTrace, mean_curvature_transform
from .discretize import DiscreteDomain, assemble
from .errors import InputError, SolverError, UnsupportedDimensionError
from .quotient import bubble_test_field
from .spectral import dirichlet_lambda1

__all__ = [
    "BvpProblem",
    "Solution",
    "SolutionSet",
    "default_starts",
    "solve_bvp",
    "ShootResult",
    "radial_shoot",
    "ScanSolution",
    "ScanResult",
    "ContinuationTable",
    "multiplicity_scan",
    "ratio_continuation",
    "profiles_to_csv",
    "write_profiles_csv",
]

NEWTON_MAX_HALVINGS = 30
BLOWUP_CEILING = 1e6


def _broadcast(values, count, name):
    arr = values.values if hasattr(values, "values") else np.asarray(values, dtype=float)
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 0:
        arr = np.full(count, float(arr))
    if arr.shape != (count,):
        raise InputError(f"{name} does not match the node count")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class BvpProblem:
    """Discrete problem data: domain, background curvature, target curvature."""

    domain: DiscreteDomain
    R_bar: np.ndarray
    R_target: np.ndarray

    def __init__(self, domain, R_bar, R_target):
        if domain.n < 3:
            raise UnsupportedDimensionError("the curvature equation needs n >= 3")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "R_bar", _broadcast(R_bar, domain.node_count, "R_bar"))
        object.__setattr__(
            self, "R_target", _broadcast(R_target, domain.node_count, "R_target")
        )

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def kappa(self) -> float:
        return 4.0 * (self.n - 1.0) / (self.n - 2.0)

    @property
    def exponent(self) -> float:
        return (self.n + 2.0) / (self.n - 2.0)

    def residual(self, u: np.ndarray) -> np.ndarray:
        """Weak-form residual on the free nodes (boundary rows are zero)."""
        K, M = assemble(self.domain)
        p = self.exponent
        F = self.kappa * (K.matrix @ u) + M.matrix @ (self.R_bar * u - self.R_target * u**p)
        F[self.domain.boundary] = 0.0
        return F


@dataclass(frozen=True, eq=False)
class Solution:
    values: np.ndarray
    start_label: str
    iterations: int
    residual_norm: float

    @property
    def sup_deviation(self) -> float:
        return float(np.max(np.abs(self.values - 1.0)))


@dataclass(frozen=True, eq=False)
class SolutionSet:
    problem: BvpProblem
    solutions: tuple
    failures: tuple

    @property
    def count(self) -> int:
        return len(self.solutions)

    def closest_to_one(self) -> Solution:
        if not self.solutions:
            raise SolverError("no solution was found from any start")
        return min(self.solutions, key=lambda s: s.sup_deviation)


def default_starts(problem: BvpProblem):
    """Multi-start policy: flat start, eigenfunction bumps, concentrated bump.

    The eigenfunction perturbations probe the two directions the linearized
    operator first loses definiteness in; the concentrated bump probes the
    large-amplitude branch that bifurcates away from u = 1.
    """
    dom = problem.domain
    ones = np.ones(dom.node_count)
    starts = [("flat", ones)]
    if dom.boundary.size:
        eig = dirichlet_lambda1(dom)
        bump = eig.u1 / np.max(np.abs(eig.u1))
        starts.append(("eig+", ones + 0.3 * bump))
        starts.append(("eig-", ones - 0.3 * bump))
    try:
        bubble = bubble_test_field(dom)
        starts.append(("bump", ones + 0.5 * bubble / np.max(bubble)))
    except InputError:
        pass
    return starts


def _newton(problem: BvpProblem, u0, *, tol, max_iter):
    """Damped Newton with positivity guard.  Raises SolverError on stall."""
    dom = problem.domain
    K, M = assemble(dom)
    free = dom.interior
    p = problem.exponent
    kap = problem.kappa
    u = np.array(u0, dtype=float)
    u[dom.boundary] = 1.0
    if np.any(u <= 0.0):
        raise SolverError("start iterate is not positive")

    def terms(vec):
        return (
            kap * (K.matrix @ vec),
            M.matrix @ (problem.R_bar * vec),
            M.matrix @ (problem.R_target * vec**p),
        )

    history = []
    for it in range(max_iter):
        t1, t2, t3 = terms(u)
        F = (t1 + t2 - t3)[free]
        scale = max(
            1.0,
            float(np.max(np.abs(t1))),
            float(np.max(np.abs(t2))),
            float(np.max(np.abs(t3))),
        )
        norm = float(np.max(np.abs(F)))
        history.append(norm)
        if norm <= tol * scale:
            return u, it, norm
        J = kap * K.matrix + M.matrix @ sp.diags(
            problem.R_bar - p * problem.R_target * u ** (p - 1.0)
        )
        step = spsolve(J.tocsc()[np.ix_(free, free)], -F)
        if not np.all(np.isfinite(step)):
            raise SolverError("singular linearization", history=history)
        t = 1.0
        for _ in range(NEWTON_MAX_HALVINGS):
            trial = u.copy()
            trial[free] = u[free] + t * step
            if np.min(trial) > 0.0:
                Ft = problem.residual(trial)[free]
                if float(np.max(np.abs(Ft))) < norm:
                    u = trial
                    break
            t *= 0.5
        else:
            raise SolverError("line search stalled", history=history)
    raise SolverError("Newton did not converge", history=history)


def solve_bvp(
    problem: BvpProblem,
    *,
    starts=None,
    tol: float = 1e-10,
    max_iter: int = 50,
    dedup_tol: float = 1e-6,
) -> SolutionSet:
    """Run Newton from every start and return the distinct solutions found."""
    if starts is None:
        starts = default_starts(problem)
    found = []
    failures = []
    for label, u0 in starts:
        try:
            u, its, norm = _newton(problem, u0, tol=tol, max_iter=max_iter)
        except SolverError as err:
            failures.append((label, str(err)))
            continue
        if any(np.max(np.abs(u - s.values)) <= dedup_tol for s in found):
            continue
        found.append(Solution(values=u, start_label=label, iterations=its, residual_norm=norm))
    if not found:
        raise SolverError(
            "no start converged: " + "; ".join(f"{lb}: {msg}" for lb, msg in failures)
        )
    found.sort(key=lambda s: s.sup_deviation)
    return SolutionSet(problem=problem, solutions=tuple(found), failures=tuple(failures))


# ---------------------------------------------------------------------------
# radial shooting


@dataclass(frozen=True, eq=False)
class ShootResult:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    status: str  # 'ok' | 'hit_zero' | 'blowup'
    slope: float

    @property
    def end_value(self) -> float:
        return float(self.u[-1])


def radial_shoot(
    n: int,
    R_bar: float,
    R_target: float,
    a: float,
    b: float,
    slope: float,
    *,
    u_start: float = 1.0,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    grid: int = 513,
) -> ShootResult:
    """Integrate the radial equation u'' + ((n-1)/r) u' = c_n (R_bar u - R_target u^p)
    outward from r = a with u(a) = u_start, u'(a) = slope.

    Terminal events: loss of positivity and blowup past 1e6.  The returned
    profile is sampled on a uniform grid up to the stopping radius.
    """
    if n < 3:
        raise UnsupportedDimensionError("radial shooting needs n >= 3")
    if not 0.0 < a < b:
        raise InputError("need 0 < a < b")
    cn = (n - 2.0) / (4.0 * (n - 1.0))
    p = (n + 2.0) / (n - 2.0)

    def rhs(r, y):
        u, du = y
        uu = max(u, 0.0)
        return (du, -(n - 1.0) / r * du + cn * (R_bar * u - R_target * uu**p))

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1.0

    def blowup(r, y):
        return y[0] - BLOWUP_CEILING

    blowup.terminal = True
    blowup.direction = 1.0

    rs = np.linspace(a, b, grid)
    sol = solve_ivp(
        rhs,
        (a, b),
        (float(u_start), float(slope)),
        method="DOP853",
        t_eval=rs,
        rtol=rtol,
        atol=atol,
        events=(hit_zero, blowup),
        dense_output=False,
    )
    if not sol.success and sol.status != 1:
        raise SolverError(f"integration failed: {sol.message}")
    if sol.status == 1:
        status = "hit_zero" if sol.t_events[0].size else "blowup"
    else:
        status = "ok"
    return ShootResult(
        r=sol.t, u=sol.y[0], du=sol.y[1], status=status, slope=float(slope)
    )


@dataclass(frozen=True, eq=False)
class ScanSolution:
    slope: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    H_inner: float
    H_outer: float
    sup_deviation: float
    h_mismatch: float = float("nan")  # vs the requested H_target, if any


@dataclass(frozen=True, eq=False)
class ScanResult:
    n: int
    a: float
    b: float
    slopes: np.ndarray
    end_values: np.ndarray
    solutions: tuple

    @property
    def count(self) -> int:
        return len(self.solutions)


def _mismatch(n, R_bar, R_target, a, b, s, rtol, atol) -> float:
    shot = radial_shoot(n, R_bar, R_target, a, b, s, rtol=rtol, atol=atol, grid=5)
    if shot.status == "hit_zero":
        return -np.inf
    if shot.status == "blowup":
        return np.inf
    return shot.end_value - 1.0


def multiplicity_scan(
    n: int,
    R_bar: float,
    R_target: float,
    a: float,
    b: float,
    *,
    H_target: float | None = None,
    slope_max: float = 20.0,
    num: int = 200,
    bisect_tol: float = 1e-12,
    cluster_tol: float = 1e-4,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    grid: int = 513,
) -> ScanResult:
    """Count distinct radial solutions with u = 1 at both ends of the annulus.

    The solution family is parametrized by the inner slope s = u'(a); with a
    nonnegative source term the maximum principle forces s >= 0, so only the
    ray [0, slope_max] is scanned and the count is defined relative to that
    window.  Sign changes of the end mismatch u(b; s) - 1 are refined by
    bisection; profiles closer than cluster_tol in the sup norm count once.
    Boundary mean curvatures of the conformal metric are recorded for each
    solution from the flat values -1/a and 1/b; the slope is the problem's
    only free parameter once u(a) = 1 is fixed, so a given H_target is
    recorded as a per-solution mismatch rather than imposed as a second
    matching condition.
    """
    if num < 2:
        raise InputError("need at least two scan points")
    if slope_max <= 0.0:
        raise InputError("slope_max must be positive")
    slopes = np.linspace(0.0, slope_max, num)
    vals = np.array(
        [_mismatch(n, R_bar, R_target, a, b, s, rtol, atol) for s in slopes]
    )

    roots = []
    for i, (s, m) in enumerate(zip(slopes, vals)):
        if m == 0.0:
            roots.append(float(s))
        elif i + 1 < num:
            m2 = vals[i + 1]
            if m2 == 0.0:
                continue
            lo_neg = (m < 0.0) or (m == -np.inf)
            hi_pos = (m2 > 0.0) or (m2 == np.inf)
            if (lo_neg and hi_pos) or ((not lo_neg) and (not hi_pos) and m2 < 0.0 < m):
                lo, hi = float(s), float(slopes[i + 1])
                flo = m
                while hi - lo > bisect_tol * max(1.0, hi):
                    mid = 0.5 * (lo + hi)
                    fm = _mismatch(n, R_bar, R_target, a, b, mid, rtol, atol)
                    if fm == 0.0:
                        lo = hi = mid
                        break
                    if (fm < 0.0) == (flo < 0.0):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                roots.append(0.5 * (lo + hi))

    solutions = []
    for s in roots:
        shot = radial_shoot(
            n, R_bar, R_target, a, b, s, rtol=rtol, atol=atol, grid=grid
        )
        if shot.status != "ok":
            continue
        if any(
            shot.u.shape == prev.u.shape and np.max(np.abs(shot.u - prev.u)) <= cluster_tol
            for prev in solutions
        ):
            continue
        # flat annulus boundary curvatures, outward normals: -d/dr at a, +d/dr at b
        inner = mean_curvature_transform(
            n,
            -1.0 / a,
            BoundaryTrace(values=[shot.u[0]], normal_derivative=[-shot.du[0]]),
        )
        outer = mean_curvature_transform(
            n,
            1.0 / b,
            BoundaryTrace(values=[shot.u[-1]], normal_derivative=[shot.du[-1]]),
        )
        Hi, Ho = float(inner.values[0]), float(outer.values[0])
        mismatch = float("nan")
        if H_target is not None:
            mismatch = max(abs(Hi - H_target), abs(Ho - H_target))
        solutions.append(
            ScanSolution(
                slope=float(s),
                r=shot.r,
                u=shot.u,
                du=shot.du,
                H_inner=Hi,
                H_outer=Ho,
                sup_deviation=float(np.max(np.abs(shot.u - 1.0))),
                h_mismatch=mismatch,
            )
        )
    return ScanResult(
        n=n,
        a=a,
        b=b,
        slopes=slopes,
        end_values=vals,
        solutions=tuple(solutions),
    )


@dataclass(frozen=True)
class ContinuationTable:
    rows: tuple  # (ratio, count) in increasing ratio order
    first_multiple: float | None  # smallest ratio with count >= 2, if any

    def __len__(self) -> int:
        return len(self.rows)


def ratio_continuation(
    n: int,
    R_bar: float,
    R_target: float,
    a: float,
    ratios,
    **scan_kwargs,
) -> ContinuationTable:
    """Solution counts along an increasing family of outer/inner radius ratios."""
    ratios = [float(r) for r in ratios]
    if any(r <= 1.0 for r in ratios):
        raise InputError("radius ratios must exceed 1")
    if any(b <= a_ for a_, b in zip(ratios, ratios[1:])):
        raise InputError("ratios must increase strictly")
    rows = []
    first = None
    for ratio in ratios:
        scan = multiplicity_scan(n, R_bar, R_target, a, a * ratio, **scan_kwargs)
        rows.append((ratio, scan.count))
        if first is None and scan.count >= 2:
            first = ratio
    return ContinuationTable(rows=tuple(rows), first_multiple=first)


def profiles_to_csv(scan: ScanResult) -> str:
    """Solution profiles in columns: radius, then one column per solution."""
    buf = io.StringIO()
    labels = [f"u_slope_{sol.slope:.12g}" for sol in scan.solutions]
    buf.write(",".join(["r"] + labels) + "\n")
    if scan.solutions:
        r = scan.solutions[0].r
        cols = [sol.u for sol in scan.solutions]
        for i in range(r.size):
            row = [format(r[i], ".17g")] + [format(c[i], ".17g") for c in cols]
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_profiles_csv(scan: ScanResult, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(profiles_to_csv(scan))
