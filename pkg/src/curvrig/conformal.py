"""Pointwise conformal transformation laws for scalar and boundary mean curvature.

Conventions, fixed once here and used everywhere in the package:

* n >= 3: the conformal metric is g = u^(4/(n-2)) gbar with u > 0 ("power"
  convention).  n == 2: g = exp(2 w) gbar ("exp" convention, values are w).
* The Laplacian is the rough one, Delta = div grad, so -Delta is positive
  semidefinite.  Discrete operators elsewhere follow the same sign.
* The boundary mean curvature H is normalized so that the transformation law
  reads H[g] = u^(-n/(n-2)) * (H[gbar] + (2/(n-2)) dnu u) for n >= 3 with
  dnu the outward normal derivative, and H[g] = exp(-w) (H[gbar] + dnu w)
  for n == 2.  No alternative normalization is exposed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FieldDomainError, InputError, UnsupportedDimensionError

__all__ = [
    "ScalarField",
    "ConformalFactor",
    "BoundaryTrace",
    "scalar_curvature_transform",
    "mean_curvature_transform",
    "positive_part",
    "curvature_coupling",
]

# switch to the series branch of the coupling function inside this band
COUPLING_SERIES_SWITCH = 1e-6


def _values(obj) -> np.ndarray:
    """Accept a field dataclass or anything array-like; return float ndarray."""
    if hasattr(obj, "values"):
        obj = obj.values
    arr = np.atleast_1d(np.asarray(obj, dtype=float))
    return arr


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a scalar quantity, optionally tied to a point set."""

    values: np.ndarray
    ref: object | None = None  # point set the values live on, when known

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.values, dtype=float))
        _check_finite("ScalarField.values", arr)
        object.__setattr__(self, "values", arr)
        count = getattr(self.ref, "node_count", None)
        if count is not None and arr.shape[0] != count:
            raise InputError(
                f"field has {arr.shape[0]} values but the point set has {count} nodes"
            )

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """Conformal factor data: u > 0 for n >= 3 (power), w for n == 2 (exp)."""

    n: int
    values: np.ndarray
    convention: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise UnsupportedDimensionError("conformal factors need n >= 2")
        conv = self.convention or ("power" if self.n >= 3 else "exp")
        if conv not in ("power", "exp"):
            raise InputError(f"unknown convention {conv!r}")
        if conv == "power" and self.n == 2:
            raise InputError("the power convention is undefined at n = 2")
        if conv == "exp" and self.n >= 3:
            raise InputError("the exp convention is reserved for n = 2")
        arr = np.atleast_1d(np.asarray(self.values, dtype=float))
        _check_finite("ConformalFactor.values", arr)
        if conv == "power" and np.any(arr <= 0.0):
            raise FieldDomainError("conformal factor u must be positive for n >= 3")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "convention", conv)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Boundary values of a field together with its outward normal derivative."""

    values: np.ndarray
    normal_derivative: np.ndarray
    nodes: np.ndarray | None = None  # boundary node indices, when known

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        dnu = np.atleast_1d(np.asarray(self.normal_derivative, dtype=float))
        if vals.shape != dnu.shape:
            raise InputError("boundary values and normal derivatives differ in length")
        _check_finite("BoundaryTrace.values", vals)
        _check_finite("BoundaryTrace.normal_derivative", dnu)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "normal_derivative", dnu)
        if self.nodes is not None:
            idx = np.asarray(self.nodes, dtype=int)
            if idx.shape[0] != vals.shape[0]:
                raise InputError("boundary node index list has the wrong length")
            object.__setattr__(self, "nodes", idx)

    def __len__(self):
        return self.values.shape[0]


def _common_length(*named):
    # length-1 entries broadcast as constants; everything else must agree
    lengths = {arr.shape[0] for _, arr in named if arr.shape[0] != 1}
    if len(lengths) > 1:
        detail = ", ".join(f"{name}: {arr.shape[0]}" for name, arr in named)
        raise InputError(f"field lengths disagree ({detail})")


def _factor_values(n, u):
    """Validate a conformal factor against n and return its raw values."""
    if isinstance(u, ConformalFactor):
        expected = "power" if n >= 3 else "exp"
        if u.n != n or u.convention != expected:
            raise InputError(
                f"conformal factor is {u.convention!r}/n={u.n}, operation expects"
                f" {expected!r}/n={n}"
            )
        return u.values
    arr = _values(u)
    _check_finite("conformal factor", arr)
    return arr


def scalar_curvature_transform(n, R_bar, u, lap_u) -> ScalarField:
    """Scalar curvature of the conformal metric, from background data.

    n >= 3:  R[g] = u^(-(n+2)/(n-2)) * (R_bar u - (4(n-1)/(n-2)) Delta u)
    n == 2:  R[g] = exp(-2 w) * (R_bar - 2 Delta w)

    lap_u is Delta of the factor values (u or w) in the div-grad sign.
    """
    if n < 2:
        raise UnsupportedDimensionError("scalar curvature transform needs n >= 2")
    Rv = _values(R_bar)
    lap = _values(lap_u)
    fv = _factor_values(n, u)
    _common_length(("R_bar", Rv), ("factor", fv), ("lap", lap))
    _check_finite("lap_u", lap)
    if n == 2:
        return ScalarField(np.exp(-2.0 * fv) * (Rv - 2.0 * lap))
    if np.any(fv <= 0.0):
        raise FieldDomainError("u must be positive for n >= 3")
    kappa = 4.0 * (n - 1) / (n - 2)
    return ScalarField(fv ** (-(n + 2.0) / (n - 2.0)) * (Rv * fv - kappa * lap))


def mean_curvature_transform(n, H_bar, u_boundary: BoundaryTrace) -> BoundaryTrace:
    """Boundary mean curvature of the conformal metric.

    u_boundary carries the factor's boundary values and outward normal
    derivative.  H_bar may be a BoundaryTrace or an array of values.
    """
    if n < 2:
        raise UnsupportedDimensionError("mean curvature transform needs n >= 2")
    if not isinstance(u_boundary, BoundaryTrace):
        raise InputError("u_boundary must be a BoundaryTrace")
    Hv = _values(H_bar)
    uv = u_boundary.values
    dnu = u_boundary.normal_derivative
    _common_length(("H_bar", Hv), ("u|boundary", uv))
    if n == 2:
        out = np.exp(-uv) * (Hv + dnu)
    else:
        if np.any(uv <= 0.0):
            raise FieldDomainError("u must be positive on the boundary for n >= 3")
        out = uv ** (-n / (n - 2.0)) * (Hv + (2.0 / (n - 2)) * dnu)
    return BoundaryTrace(out, np.zeros_like(out), nodes=u_boundary.nodes)


def positive_part(R) -> ScalarField:
    """Pointwise max(0, R).  Idempotent and monotone."""
    return ScalarField(np.maximum(0.0, _values(R)))


def _coupling_profile(alpha, u):
    """phi(u) = u (u^alpha - 1)/(u - 1), stable near the removable point u = 1.

    Direct branch: expm1/log1p form, accurate for u > 0 away from 1.
    Series branch (|u-1| below the switch): degree-3 Taylor expansion
    phi(1+s) = alpha + C(alpha+1,2) s + C(alpha+1,3) s^2 + C(alpha+1,4) s^3,
    exact at s = 0 where phi -> alpha.
    """
    s = u - 1.0
    c1 = (alpha + 1.0) * alpha / 2.0
    c2 = c1 * (alpha - 1.0) / 3.0
    c3 = c2 * (alpha - 2.0) / 4.0
    phi = alpha + s * (c1 + s * (c2 + s * c3))
    wide = np.abs(s) >= COUPLING_SERIES_SWITCH
    if np.any(wide):
        sw = s[wide]
        phi[wide] = (1.0 + sw) * np.expm1(alpha * np.log1p(sw)) / sw
    return phi


def curvature_coupling(n, R_bar, u) -> ScalarField:
    """Coupling coefficient tying the curvature comparison to a linear inequality.

    A = ((n-2)/(4(n-1))) * R_bar * u * (u^(4/(n-2)) - 1)/(u - 1), with the
    removable singularity at u = 1 evaluated by series; the value there is
    R_bar/(n-1).  For 0 < u < 1 and R_bar >= 0 it satisfies
    A <= max(0, R_bar)/(n-1).  Not defined at n = 2 (the exp convention has
    no algebraic analogue); such calls are rejected.
    """
    if n == 2:
        raise UnsupportedDimensionError("the coupling coefficient is undefined at n = 2")
    if n < 2:
        raise UnsupportedDimensionError("curvature coupling needs n >= 3")
    Rv = _values(R_bar)
    uv = _factor_values(n, u)
    Rv, uv = np.broadcast_arrays(Rv, uv)
    if np.any(uv <= 0.0):
        raise FieldDomainError("u must be positive")
    alpha = 4.0 / (n - 2)
    phi = _coupling_profile(alpha, np.array(uv, dtype=float))
    return ScalarField((n - 2.0) / (4.0 * (n - 1)) * Rv * phi)
