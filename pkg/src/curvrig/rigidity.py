"""Rigidity certificates and the pointwise verifiers behind them.

A certificate compares a computable left side against a computable right
side; the verdict is "rigid" exactly when margin = rhs - lhs > 0.  Three
criteria are provided:

* sobolev:   ((n+2)/(4(n-1))) * (int (R_bar^+)^(n/2) dV)^(2/n)  <  safety * Q
* eigenvalue: sup R_bar / (n-1)  <  lambda_1(domain)
* einstein-volume: vol(Omega)  <  ((n-2)/(n+2))^(n/2) * vol(M)

The verifiers re-check, on concrete discrete data, the pointwise machinery
the criteria rest on: the supersolution inequality -Delta v - A v >= 0 with
v = u - 1, the quadratic form of v over {u < 1}, the eigenfunction-ratio
inequality, and the lapse equation -Delta f = (R_bar/(n-1)) f with its
boundary non-degeneracy.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .conformal import curvature_coupling, positive_part
from .discretize import (
    DiscreteDomain,
    assemble,
    integrate_power,
    nodal_laplacian,
    normal_derivative,
    radial_laplacian,
)
from .errors import FieldDomainError, InputError, SolverError, UnsupportedDimensionError
from .spectral import EigenResult, dirichlet_lambda1

__all__ = [
    "RigidityCertificate",
    "DeficitField",
    "SupersolutionReport",
    "RatioTrace",
    "LapseField",
    "LapseReport",
    "check_sobolev_criterion",
    "check_eigen_criterion",
    "check_einstein_volume",
    "verify_supersolution",
    "eigen_ratio_trace",
    "lapse_residual",
    "certificates_to_csv",
    "write_certificates_csv",
]

CERTIFICATE_COLUMNS = (
    "criterion",
    "n",
    "domain",
    "lhs",
    "rhs",
    "margin",
    "verdict",
    "provenance_hash",
)


@dataclass(frozen=True)
class RigidityCertificate:
    """Outcome of one criterion check.  verdict is 'rigid' iff margin > 0."""

    criterion: str
    n: int
    domain: str
    lhs: float
    rhs: float
    margin: float
    verdict: str
    provenance: str

    @staticmethod
    def build(criterion, n, domain, lhs, rhs, provenance) -> "RigidityCertificate":
        if not (np.isfinite(lhs) and np.isfinite(rhs)):
            raise InputError("certificate sides must be finite")
        margin = rhs - lhs
        verdict = "rigid" if margin > 0.0 else "inconclusive"
        return RigidityCertificate(
            criterion=criterion,
            n=int(n),
            domain=str(domain),
            lhs=float(lhs),
            rhs=float(rhs),
            margin=float(margin),
            verdict=verdict,
            provenance=str(provenance),
        )

    @property
    def provenance_hash(self) -> str:
        blob = "|".join(
            [
                self.criterion,
                str(self.n),
                self.domain,
                repr(self.lhs),
                repr(self.rhs),
                self.provenance,
            ]
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def certificates_to_csv(certificates) -> str:
    """One CSV row per certificate, fixed column order, 17 significant digits."""
    buf = io.StringIO()
    buf.write(",".join(CERTIFICATE_COLUMNS) + "\n")
    for c in certificates:
        row = [
            c.criterion,
            str(c.n),
            c.domain,
            format(c.lhs, ".17g"),
            format(c.rhs, ".17g"),
            format(c.margin, ".17g"),
            c.verdict,
            c.provenance_hash,
        ]
        buf.write(",".join(_csv_cell(x) for x in row) + "\n")
    return buf.getvalue()


def _csv_cell(text: str) -> str:
    if any(ch in text for ch in ",\"\n"):
        return '"' + text.replace('"', '""') + '"'
    return text


def write_certificates_csv(certificates, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(certificates_to_csv(certificates))


# ---------------------------------------------------------------------------
# criteria


def check_sobolev_criterion(
    domain: DiscreteDomain,
    R_bar,
    Q_value: float,
    safety: float = 0.9,
    q_source: str = "user",
) -> RigidityCertificate:
    """Integral smallness of the positive curvature part against the quotient."""
    n = domain.n
    if n < 3:
        raise UnsupportedDimensionError("the integral criterion needs n >= 3")
    if not 0.0 < safety <= 1.0:
        raise InputError("safety factor must lie in (0, 1]")
    if Q_value <= 0.0 or not np.isfinite(Q_value):
        raise InputError("Q_value must be positive and finite")
    Rp = positive_part(_nodal(R_bar, domain)).values
    lhs = (n + 2.0) / (4.0 * (n - 1.0)) * integrate_power(Rp, n / 2.0, domain) ** (2.0 / n)
    rhs = safety * Q_value
    prov = f"criterion=sobolev;q_source={q_source};safety={safety!r};Q={Q_value!r}"
    return RigidityCertificate.build("sobolev", n, domain.describe(), lhs, rhs, prov)


def check_eigen_criterion(
    domain: DiscreteDomain,
    R_bar,
    h_condition: str = "equal",
    eig: EigenResult | None = None,
) -> RigidityCertificate:
    """sup R_bar / (n-1) against the first Dirichlet eigenvalue.

    h_condition records which boundary mean-curvature assertion the caller
    makes ('equal' or 'geq'); equality is the recorded special case.
    """
    n = domain.n
    if n < 2:
        raise UnsupportedDimensionError("the eigenvalue criterion needs n >= 2")
    if h_condition not in ("equal", "geq"):
        raise InputError("h_condition must be 'equal' or 'geq'")
    Rv = _nodal(R_bar, domain)
    lhs = float(np.max(Rv)) / (n - 1.0)
    if eig is None:
        eig = dirichlet_lambda1(domain)
    rhs = float(eig.lambda1)
    prov = (
        f"criterion=eigenvalue;h_condition={h_condition};"
        f"eig_residual={eig.residual!r};eig_iterations={eig.iterations}"
    )
    return RigidityCertificate.build("eigenvalue", n, domain.describe(), lhs, rhs, prov)


def check_einstein_volume(
    n: int, vol_omega: float, vol_M: float, domain_desc: str = "einstein"
) -> RigidityCertificate:
    """Volume smallness for closed Einstein backgrounds."""
    if n < 3:
        raise UnsupportedDimensionError("the volume criterion needs n >= 3")
    if vol_omega <= 0.0 or vol_M <= 0.0:
        raise InputError("volumes must be positive")
    if vol_omega > vol_M:
        raise InputError("the subdomain volume exceeds the manifold volume")
    rhs = ((n - 2.0) / (n + 2.0)) ** (n / 2.0) * vol_M
    prov = f"criterion=einstein-volume;vol_M={vol_M!r}"
    return RigidityCertificate.build(
        "einstein-volume", n, domain_desc, float(vol_omega), rhs, prov
    )


# ---------------------------------------------------------------------------
# verifiers


def _nodal(values, domain) -> np.ndarray:
    arr = values.values if hasattr(values, "values") else np.asarray(values, dtype=float)
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 0:
        arr = np.full(domain.node_count, float(arr))
    if arr.shape != (domain.node_count,):
        raise InputError("nodal data and domain sizes disagree")
    return arr


@dataclass(frozen=True, eq=False)
class DeficitField:
    """v = u - 1 with the nodal partition Omega_1 = {u < 1}, Omega_2 = {u >= 1}."""

    v: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray

    def __post_init__(self):
        if len(self.omega1) + len(self.omega2) != len(self.v):
            raise InputError("partition does not cover the node set")

    @property
    def omega1_empty(self) -> bool:
        return len(self.omega1) == 0


class SupersolutionReport(NamedTuple):
    min_residual: float
    form_value: float
    omega1_count: int
    violation: bool
    atol: float
    coupling_excess: float

    @property
    def bypassed(self) -> bool:
        # nothing to certify when u never dips below 1
        return self.omega1_count == 0


def verify_supersolution(
    u,
    R_bar,
    domain: DiscreteDomain,
    *,
    boundary_tol: float = 1e-8,
    atol: float | None = None,
):
    """Check the discrete supersolution inequality -Delta v - A v >= 0, v = u - 1.

    Returns (DeficitField, SupersolutionReport).  The quadratic form over
    Omega_1 uses extension by zero (v1 = min(v, 0), exact on the partition);
    its value should be <= 0 when the inequality holds.  The residual uses
    the same assembled operators the boundary-value solver uses, so solver
    output is checked against the operator it actually satisfied.
    """
    n = domain.n
    if n < 3:
        raise UnsupportedDimensionError("the supersolution verifier needs n >= 3")
    uv = _nodal(u, domain)
    Rv = _nodal(R_bar, domain)
    if np.any(uv <= 0.0):
        raise FieldDomainError("u must be positive")
    if domain.boundary.size:
        bdev = np.max(np.abs(uv[domain.boundary] - 1.0))
        if bdev > boundary_tol:
            raise InputError(
                f"u deviates from 1 on the boundary by {bdev:.3e} (> {boundary_tol:g})"
            )
    v = uv - 1.0
    omega1 = np.nonzero(v < 0.0)[0]
    omega2 = np.nonzero(v >= 0.0)[0]
    deficit = DeficitField(v=v, omega1=omega1, omega2=omega2)

    A = curvature_coupling(n, Rv, uv).values
    lap_v = nodal_laplacian(v, domain)
    interior = domain.interior
    residual = -lap_v[interior] - A[interior] * v[interior]
    scale = max(1.0, float(np.max(np.abs(A * v))), float(np.max(np.abs(lap_v[interior]))))
    tol = 1e-8 * scale if atol is None else atol

    if omega1.size:
        K, _ = assemble(domain)
        v1 = np.minimum(v, 0.0)
        form = float(v1 @ (K.matrix @ v1)) - float(
            np.dot(domain.weights[omega1], A[omega1] * v[omega1] ** 2)
        )
        Rp = np.maximum(Rv[omega1], 0.0)
        coupling_excess = float(np.max(A[omega1] - Rp / (n - 1.0)))
    else:
        form = 0.0
        coupling_excess = -np.inf

    min_res = float(residual.min()) if interior.size else 0.0
    violation = min_res < -tol or form > tol
    report = SupersolutionReport(
        min_residual=min_res,
        form_value=form,
        omega1_count=int(omega1.size),
        violation=bool(violation),
        atol=float(tol),
        coupling_excess=coupling_excess,
    )
    return deficit, report


@dataclass(frozen=True, eq=False)
class RatioTrace:
    """beta = v / u1 with the nodal residual of its elliptic inequality."""

    beta: np.ndarray
    residual: np.ndarray  # on interior nodes
    interior: np.ndarray

    def sign_pattern(self, atol: float = 0.0):
        neg = int(np.sum(self.residual < -atol))
        pos = int(np.sum(self.residual > atol))
        zero = self.residual.size - neg - pos
        return neg, zero, pos

    @property
    def max_residual(self) -> float:
        return float(self.residual.max())


def _nodal_gradients(vals, domain):
    """Gradient data for the directional term: radial -> d/dr, mesh -> recovered."""
    if domain.is_radial:
        return np.gradient(vals, domain.spacing)
    verts, cells = domain.nodes, domain.cells
    d = verts.shape[1]
    acc = np.zeros((domain.node_count, d))
    wacc = np.zeros(domain.node_count)
    from .discretize import _cell_volume_and_gradients

    for idx, cell in enumerate(cells):
        vol, grads = _cell_volume_and_gradients(verts, cell, idx)
        g = vals[cell] @ grads
        for vtx in cell:
            acc[vtx] += vol * g
            wacc[vtx] += vol
    return acc / wacc[:, None]


def eigen_ratio_trace(
    v,
    eig: EigenResult,
    R_bar,
    domain: DiscreteDomain,
    *,
    positivity_floor: float = 1e-12,
) -> RatioTrace:
    """Ratio beta = v/u1 and the residual Delta beta + (A - lambda) beta + (grad u1/u1).grad beta.

    Interior nodes divide directly; boundary nodes take the one-sided
    l'Hopital value (normal derivative of v over that of u1), which is 0 in
    the matched-boundary setting and 1 when v = u1.
    """
    uv = _nodal(v, domain)
    Rv = _nodal(R_bar, domain)
    u1 = eig.u1
    interior = domain.interior
    if np.any(u1[interior] <= positivity_floor):
        raise SolverError("eigenfunction is not uniformly positive in the interior")

    beta = np.zeros(domain.node_count)
    beta[interior] = uv[interior] / u1[interior]
    if domain.boundary.size:
        tv = normal_derivative(uv, domain)
        tu = normal_derivative(u1, domain)
        ratio = np.where(
            np.abs(tu.normal_derivative) > positivity_floor,
            tv.normal_derivative / np.where(tu.normal_derivative == 0.0, 1.0, tu.normal_derivative),
            0.0,
        )
        beta[domain.boundary] = ratio

    A = curvature_coupling(domain.n, Rv, 1.0 + uv).values
    lam = eig.lambda1
    lap_beta = nodal_laplacian(beta, domain)
    gb = _nodal_gradients(beta, domain)
    gu = _nodal_gradients(u1, domain)
    if domain.is_radial:
        drift = gu[interior] / u1[interior] * gb[interior]
    else:
        drift = np.einsum("ij,ij->i", gu[interior], gb[interior]) / u1[interior]
    residual = lap_beta[interior] + (A[interior] - lam) * beta[interior] + drift
    return RatioTrace(beta=beta, residual=residual, interior=interior)


@dataclass(frozen=True, eq=False)
class LapseField:
    """Static-potential candidate with its zero-set boundary marks."""

    values: np.ndarray
    zero_boundary: np.ndarray  # boundary node indices where f vanishes

    @staticmethod
    def from_values(values, domain: DiscreteDomain, zero_tol: float = 1e-8) -> "LapseField":
        vals = _nodal(values, domain)
        sup = float(np.max(np.abs(vals)))
        marks = domain.boundary[np.abs(vals[domain.boundary]) <= zero_tol * max(sup, 1.0)]
        return LapseField(values=vals, zero_boundary=marks)


class LapseReport(NamedTuple):
    residual: float
    boundary_gradient_min: float
    degenerate: bool


def lapse_residual(f, R_bar, domain: DiscreteDomain, *, zero_tol: float = 1e-8) -> LapseReport:
    """L2 residual of -Delta f = (R_bar/(n-1)) f plus boundary non-degeneracy.

    The residual is evaluated with high-order differences on radial domains
    (the assembled operator's truncation error would swamp analytic input),
    and with the assembled operators on meshes.  boundary_gradient_min is
    min |dnu f| over the zero-set boundary; the pair (f not identically 0,
    gradient bounded away from 0 there) is the non-degeneracy being checked.
    """
    if isinstance(f, LapseField):
        field = f
    else:
        field = LapseField.from_values(f, domain, zero_tol=zero_tol)
    vals = field.values
    Rv = _nodal(R_bar, domain)
    n = domain.n
    if n < 2:
        raise UnsupportedDimensionError("lapse residual needs n >= 2")
    sup = float(np.max(np.abs(vals)))
    if sup == 0.0:
        return LapseReport(residual=0.0, boundary_gradient_min=0.0, degenerate=True)

    if domain.is_radial:
        lap = radial_laplacian(vals, domain)
        res = -lap - Rv / (n - 1.0) * vals
        l2 = float(np.sqrt(np.dot(domain.weights, res * res)))
    else:
        # weak residual per interior row; interior stiffness rows carry no
        # boundary flux, unlike a mass-solve which smears it inward
        K, M = assemble(domain)
        interior = domain.interior
        r = (K.matrix @ vals - M.matrix @ (Rv / (n - 1.0) * vals))[interior]
        res = r / domain.weights[interior]
        l2 = float(np.sqrt(np.dot(domain.weights[interior], res * res)))

    if field.zero_boundary.size:
        trace = normal_derivative(vals, domain)
        pick = np.isin(trace.nodes, field.zero_boundary)
        gmin = float(np.min(np.abs(trace.normal_derivative[pick])))
    else:
        gmin = np.inf
    degenerate = gmin <= zero_tol * max(sup, 1.0)
    return LapseReport(residual=l2, boundary_gradient_min=gmin, degenerate=bool(degenerate))
