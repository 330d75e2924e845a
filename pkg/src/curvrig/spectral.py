"""First Dirichlet eigenvalue of -Delta and Rayleigh quotients.

The eigensolver of record is shift-inverted power iteration with zero shift:
repeatedly solve K y = M x by conjugate gradients and renormalize.  The
first eigenfunction is returned positive in the interior with unit L2 norm,
integral of u1^2 dV = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .discretize import DiscreteDomain, assemble
from .errors import InputError, SolverError

__all__ = ["EigenResult", "dirichlet_lambda1", "rayleigh_quotient"]


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Converged first Dirichlet eigenpair.

    residual is ||K u1 - lambda1 M u1|| / ||M u1|| over the free nodes; the
    solver accepts when it falls below tol * max(1, lambda1) or below the
    float64 cancellation floor of the pencil (a multiple of machine epsilon
    times the largest generalized Rayleigh quotient), whichever is larger.
    On fine grids that floor, not tol, is the attainable accuracy.
    """

    lambda1: float
    u1: np.ndarray
    residual: float
    iterations: int
    domain: DiscreteDomain

    @property
    def interior_values(self) -> np.ndarray:
        return self.u1[self.domain.interior]


def _cg_solve(A, b, x0, jacobi):
    x, info = cg(A, b, x0=x0, rtol=1e-12, atol=0.0, maxiter=20 * A.shape[0], M=jacobi)
    if info != 0:
        raise SolverError(f"inner conjugate-gradient solve failed (info={info})")
    return x


def dirichlet_lambda1(domain: DiscreteDomain, tol: float = 1e-10, max_iter: int = 500) -> EigenResult:
    """Smallest eigenvalue of K u = lambda M u on the free (non-Dirichlet) nodes."""
    free = domain.interior
    if free.size == 0:
        raise InputError("the domain has no interior nodes")
    if domain.boundary.size == 0:
        raise InputError("dirichlet_lambda1 needs a domain with boundary")
    K, M = assemble(domain)
    Kf = K.free_block(free)
    Mf = M.free_block(free)
    diag = Kf.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("stiffness diagonal must be positive on free nodes")
    jacobi = sp.diags(1.0 / diag).tocsr()
    # residual floor: roundoff in K y - lam M y scales with the top of the
    # generalized spectrum, bounded by Gershgorin row sums of M^-1 K
    row_abs = np.asarray(np.abs(Kf).sum(axis=1)).ravel()
    mass = np.asarray(np.abs(Mf).sum(axis=1)).ravel()
    floor = 32.0 * np.finfo(float).eps * float(np.max(row_abs / mass))

    x = np.ones(free.size)
    x /= np.sqrt(x @ (Mf @ x))
    lam = float(x @ (Kf @ x))
    residual = np.inf
    history = []
    y = x
    for it in range(1, max_iter + 1):
        y = _cg_solve(Kf, Mf @ x, x / max(lam, 1e-30), jacobi)
        nrm = np.sqrt(y @ (Mf @ y))
        if not np.isfinite(nrm) or nrm <= 0.0:
            raise SolverError("power iteration produced a degenerate vector", history)
        y /= nrm
        Ky = Kf @ y
        My = Mf @ y
        lam = float(y @ Ky)  # y is M-normalized
        residual = float(np.linalg.norm(Ky - lam * My) / np.linalg.norm(My))
        history.append(residual)
        x = y
        if residual <= max(tol * max(1.0, lam), floor):
            break
    else:
        raise SolverError(
            f"eigenvalue iteration did not reach tolerance {tol:g}"
            f" (last residual {residual:.3e})",
            history,
        )

    u = np.zeros(domain.node_count)
    u[free] = y
    if u[free].mean() < 0.0:
        u = -u
    # normalize: integral of u1^2 dV = 1
    nrm2 = float(u @ (M.matrix @ u))
    u /= np.sqrt(nrm2)
    return EigenResult(lambda1=lam, u1=u, residual=residual, iterations=it, domain=domain)


def rayleigh_quotient(field, domain: DiscreteDomain) -> float:
    """(f' K f) / (f' M f) for a field vanishing on the Dirichlet nodes."""
    vals = field.values if hasattr(field, "values") else np.asarray(field, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (domain.node_count,):
        raise InputError("field and domain sizes disagree")
    sup = np.max(np.abs(vals))
    if sup == 0.0:
        raise InputError("rayleigh_quotient of the zero field is undefined")
    if domain.boundary.size and np.max(np.abs(vals[domain.boundary])) > 1e-12 * sup:
        raise InputError("field must vanish on the Dirichlet boundary nodes")
    K, M = assemble(domain)
    num = float(vals @ (K.matrix @ vals))
    den = float(vals @ (M.matrix @ vals))
    return num / den
