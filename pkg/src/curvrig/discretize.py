"""Discrete domains and the operators that realize gradients and integrals.

Two families of domains:

* Radial grids: uniform in the radial coordinate r (flat geometries) or in
  the polar angle theta (round sphere geometries).  The full angular volume
  factor vol(S^(n-1)) is folded into the quadrature weights, so a weighted
  sum is a genuine integral over the n-dimensional domain.  Stiffness comes
  from the self-adjoint form (d/dr)(w(r) d/dr) with edge-midpoint weights;
  mass is the diagonal of per-edge contributions, so mass row sums equal the
  quadrature weights exactly.  The coordinate singularity at r = 0 (or the
  poles of the sphere) needs no special row: w vanishes there, which is the
  reflection / natural-flux treatment of the regularity condition u'(0) = 0.

* Simplicial meshes: piecewise-linear elements with exact element mass
  matrices (no lumping).  Quadrature weights are the mass row sums.

Sign convention: stiffness K realizes the Dirichlet form, v' K u ~
integral grad u . grad v, so the nodal Laplacian (div grad) is -M^(-1) K on
interior rows.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import gamma

from .conformal import BoundaryTrace
from .errors import AssemblyError, InputError, UnsupportedDimensionError

__all__ = [
    "RadialGeometry",
    "DiscreteDomain",
    "SparseSymmetricOperator",
    "annulus",
    "ball",
    "cap",
    "interval",
    "sphere",
    "build_radial_domain",
    "build_box_mesh",
    "read_mesh",
    "write_mesh",
    "assemble",
    "integrate_power",
    "normal_derivative",
    "nodal_laplacian",
    "radial_laplacian",
    "sphere_area",
]

MIN_RADIAL_NODES = 16


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^(k+1)."""
    if k < 0:
        raise InputError("sphere dimension must be >= 0")
    return 2.0 * np.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0)


@dataclass(frozen=True)
class RadialGeometry:
    """Named radial geometry with its defining parameters."""

    kind: str  # interval | annulus | ball | cap | sphere
    params: tuple = ()

    def describe(self) -> str:
        inner = ",".join(f"{p:g}" for p in self.params)
        return f"{self.kind}({inner})" if inner else self.kind


def interval(a: float, b: float) -> RadialGeometry:
    return RadialGeometry("interval", (float(a), float(b)))


def annulus(a: float, b: float) -> RadialGeometry:
    return RadialGeometry("annulus", (float(a), float(b)))


def ball(b: float) -> RadialGeometry:
    return RadialGeometry("ball", (float(b),))


def cap(theta0: float) -> RadialGeometry:
    return RadialGeometry("cap", (float(theta0),))


def sphere() -> RadialGeometry:
    return RadialGeometry("sphere", ())


@dataclass(frozen=True, eq=False)
class DiscreteDomain:
    """A discretized computational domain.

    nodes is (m,) radial coordinates for radial domains or (m, d) vertex
    coordinates for meshes.  weights are strictly positive quadrature
    weights summing to the domain volume.  boundary is the sorted array of
    Dirichlet-eligible node indices (may be empty for closed domains).
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    boundary: np.ndarray
    geometry: RadialGeometry | None = None
    cells: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        boundary = np.asarray(self.boundary, dtype=int)
        if weights.ndim != 1 or weights.shape[0] != nodes.shape[0]:
            raise InputError("weights must be one per node")
        if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
            raise InputError("quadrature weights must be positive and finite")
        if boundary.size and (boundary.min() < 0 or boundary.max() >= nodes.shape[0]):
            raise InputError("boundary indices out of range")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "boundary", np.unique(boundary))
        if self.cells is not None:
            object.__setattr__(self, "cells", np.asarray(self.cells, dtype=int))

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def is_radial(self) -> bool:
        return self.geometry is not None

    @property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.node_count, dtype=bool)
        mask[self.boundary] = False
        return np.nonzero(mask)[0]

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    @property
    def spacing(self) -> float:
        if not self.is_radial:
            raise InputError("spacing is defined for radial domains only")
        return float(self.nodes[1] - self.nodes[0])

    def describe(self) -> str:
        if self.is_radial:
            return f"{self.geometry.describe()};n={self.n};m={self.node_count}"
        return f"mesh;d={self.n};v={self.node_count};c={len(self.cells)}"


def _radial_setup(geometry: RadialGeometry, n: int):
    """Return (r_lo, r_hi, weight profile w(r), boundary ends, angular factor)."""
    kind, p = geometry.kind, geometry.params
    if kind == "interval":
        if n != 1:
            raise InputError("interval geometry is one dimensional (n = 1)")
        a, b = p
        if not 0.0 <= a < b:
            raise InputError("interval needs 0 <= a < b")
        return a, b, (lambda r: np.ones_like(r)), (True, True), 1.0
    if n < 2:
        raise UnsupportedDimensionError(f"{kind} geometry needs n >= 2")
    omega = sphere_area(n - 1)
    if kind == "annulus":
        a, b = p
        if not 0.0 < a < b:
            raise InputError("annulus needs 0 < a < b")
        return a, b, (lambda r: r ** (n - 1)), (True, True), omega
    if kind == "ball":
        (b,) = p
        if b <= 0.0:
            raise InputError("ball radius must be positive")
        return 0.0, b, (lambda r: r ** (n - 1)), (False, True), omega
    if kind == "cap":
        (theta0,) = p
        if not 0.0 < theta0 < np.pi:
            raise InputError("cap opening angle must lie in (0, pi)")
        return 0.0, theta0, (lambda t: np.sin(t) ** (n - 1)), (False, True), omega
    if kind == "sphere":
        return 0.0, np.pi, (lambda t: np.sin(t) ** (n - 1)), (False, False), omega
    raise InputError(f"unknown radial geometry {kind!r}")


def build_radial_domain(geometry, n: int, m: int) -> DiscreteDomain:
    """Uniform radial grid with m nodes for the given geometry.

    Quadrature weights are edge-midpoint based: node i gets
    (h/2) * (w(r_{i-1/2}) + w(r_{i+1/2})) times the angular factor, with the
    one-sided halves at the ends.  They agree with w(r_i) h away from the
    ends to second order, sum to the volume to second order, and equal the
    mass-matrix row sums exactly.
    """
    if isinstance(geometry, str):
        geometry = parse_geometry(geometry)
    if m < MIN_RADIAL_NODES:
        raise InputError(f"radial grids need at least {MIN_RADIAL_NODES} nodes")
    lo, hi, profile, (bdry_lo, bdry_hi), omega = _radial_setup(geometry, n)
    r = np.linspace(lo, hi, m)
    h = (hi - lo) / (m - 1)
    wmid = omega * profile(0.5 * (r[:-1] + r[1:]))  # one value per edge
    weights = np.zeros(m)
    weights[:-1] += 0.5 * h * wmid
    weights[1:] += 0.5 * h * wmid
    boundary = []
    if bdry_lo:
        boundary.append(0)
    if bdry_hi:
        boundary.append(m - 1)
    return DiscreteDomain(
        n=n,
        nodes=r,
        weights=weights,
        boundary=np.array(boundary, dtype=int),
        geometry=geometry,
    )


def parse_geometry(text: str) -> RadialGeometry:
    """Parse shorthand like 'cap:1.2', 'annulus:1:2', 'ball:1', 'sphere'."""
    parts = text.strip().split(":")
    kind = parts[0]
    try:
        params = tuple(float(p) for p in parts[1:])
    except ValueError as exc:
        raise InputError(f"bad geometry parameter in {text!r}") from exc
    arity = {"interval": 2, "annulus": 2, "ball": 1, "cap": 1, "sphere": 0}
    if kind not in arity:
        raise InputError(f"unknown geometry {kind!r}")
    if len(params) != arity[kind]:
        raise InputError(f"{kind} takes {arity[kind]} parameter(s), got {len(params)}")
    return RadialGeometry(kind, params)


# ---------------------------------------------------------------------------
# meshes


def build_box_mesh(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> DiscreteDomain:
    """Structured triangulation of [0, lx] x [0, ly] with nx x ny cells per side."""
    if nx < 1 or ny < 1:
        raise InputError("box mesh needs at least one cell per side")
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    cells = np.array(cells, dtype=int)
    boundary = np.nonzero(
        (np.isclose(verts[:, 0], 0.0))
        | (np.isclose(verts[:, 0], lx))
        | (np.isclose(verts[:, 1], 0.0))
        | (np.isclose(verts[:, 1], ly))
    )[0]
    return _mesh_domain(verts, cells, boundary)


def _mesh_domain(verts, cells, boundary) -> DiscreteDomain:
    weights = _mesh_weights(verts, cells)
    return DiscreteDomain(
        n=verts.shape[1],
        nodes=verts,
        weights=weights,
        boundary=np.asarray(boundary, dtype=int),
        geometry=None,
        cells=cells,
    )


def _cell_volume_and_gradients(verts, cell, index):
    """Volume and barycentric gradients of one simplex; error names the cell."""
    x = verts[cell]
    d = verts.shape[1]
    edges = (x[1:] - x[0]).T  # columns are edge vectors
    det = np.linalg.det(edges)
    vol = abs(det) / np.prod(np.arange(1, d + 1))
    if vol <= 0.0 or not np.isfinite(vol):
        raise AssemblyError(f"degenerate cell {index}: volume {vol!r}")
    # rows of inv(edges) are the gradients of barycentric coords 1..d;
    # the 0th gradient is minus their sum
    grads_rest = np.linalg.inv(edges)
    grads = np.vstack([-grads_rest.sum(axis=0), grads_rest])
    return vol, grads


def _mesh_weights(verts, cells):
    m = verts.shape[0]
    d = verts.shape[1]
    weights = np.zeros(m)
    for idx, cell in enumerate(cells):
        vol, _ = _cell_volume_and_gradients(verts, cell, idx)
        weights[cell] += vol / (d + 1)
    return weights


def boundary_faces(cells: np.ndarray) -> np.ndarray:
    """Faces of the simplicial complex that belong to exactly one cell."""
    from collections import Counter

    counts = Counter()
    for cell in cells:
        k = len(cell)
        for drop in range(k):
            face = tuple(sorted(np.delete(cell, drop)))
            counts[face] += 1
    faces = [f for f, c in counts.items() if c == 1]
    return np.array(sorted(faces), dtype=int)


def read_mesh(path) -> DiscreteDomain:
    """Read the plain-text mesh format.

    Line 1: 'nV nC nB'.  Then nV lines of vertex coordinates, nC lines of
    0-based simplex vertex indices, and nB boundary vertex indices.
    """
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 3:
        raise InputError("mesh file too short")
    nv, nc, nb = (int(t) for t in tokens[:3])
    rest = tokens[3:]
    # infer the coordinate dimension from the token count
    total = len(rest)
    # nv*d + nc*(d+1) + nb = total  ->  d = (total - nb - nc) / (nv + nc)
    num = total - nb - nc
    den = nv + nc
    if den <= 0 or num % den:
        raise InputError("mesh file token count does not match its header")
    d = num // den
    if d < 1:
        raise InputError("mesh dimension must be >= 1")
    pos = 0
    verts = np.array(rest[pos : pos + nv * d], dtype=float).reshape(nv, d)
    pos += nv * d
    cells = np.array(rest[pos : pos + nc * (d + 1)], dtype=int).reshape(nc, d + 1)
    pos += nc * (d + 1)
    boundary = np.array(rest[pos : pos + nb], dtype=int)
    if cells.size and (cells.min() < 0 or cells.max() >= nv):
        raise InputError("cell vertex index out of range")
    if boundary.size and (boundary.min() < 0 or boundary.max() >= nv):
        raise InputError("boundary vertex index out of range")
    return _mesh_domain(verts, cells, boundary)


def write_mesh(domain: DiscreteDomain, path) -> None:
    """Write a mesh domain in the same plain-text format read_mesh accepts."""
    if domain.is_radial or domain.cells is None:
        raise InputError("write_mesh expects a mesh domain")
    buf = io.StringIO()
    nv, nc, nb = domain.node_count, len(domain.cells), len(domain.boundary)
    buf.write(f"{nv} {nc} {nb}\n")
    for v in domain.nodes:
        buf.write(" ".join(repr(float(c)) for c in v) + "\n")
    for cell in domain.cells:
        buf.write(" ".join(str(int(i)) for i in cell) + "\n")
    for b in domain.boundary:
        buf.write(f"{int(b)}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True, eq=False)
class SparseSymmetricOperator:
    """A symmetric sparse matrix plus the constrained (Dirichlet) index set."""

    matrix: sp.csr_matrix
    constrained: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def free_block(self, free: np.ndarray) -> sp.csr_matrix:
        return self.matrix[np.ix_(free, free)].tocsr()

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


_ASSEMBLY_CACHE: dict[int, tuple] = {}


def assemble(domain: DiscreteDomain):
    """Stiffness and mass operators for the domain.

    Returns (K, M) as SparseSymmetricOperator.  K realizes the weighted
    Dirichlet form; its interior rows annihilate constants exactly because
    each edge/element contribution cancels itself.  Operators are assembled
    once per domain object and shared; they are never mutated.
    """
    key = id(domain)
    hit = _ASSEMBLY_CACHE.get(key)
    if hit is not None and hit[0] is domain:
        return hit[1], hit[2]
    if domain.is_radial:
        K, M = _assemble_radial(domain)
    else:
        K, M = _assemble_mesh(domain)
    pair = (
        SparseSymmetricOperator(K, domain.boundary),
        SparseSymmetricOperator(M, domain.boundary),
    )
    _ASSEMBLY_CACHE[key] = (domain, pair[0], pair[1])
    return pair


def _assemble_radial(domain):
    geometry, n, m = domain.geometry, domain.n, domain.node_count
    _, _, profile, _, omega = _radial_setup(geometry, n)
    r = domain.nodes
    h = domain.spacing
    wmid = omega * profile(0.5 * (r[:-1] + r[1:]))
    ks = wmid / h
    i = np.arange(m - 1)
    rows = np.concatenate([i, i + 1, i, i + 1])
    cols = np.concatenate([i, i + 1, i + 1, i])
    vals = np.concatenate([ks, ks, -ks, -ks])
    K = sp.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()
    M = sp.diags(domain.weights).tocsr()
    return K, M


def _assemble_mesh(domain):
    verts, cells = domain.nodes, domain.cells
    m, d = verts.shape
    rows, cols, kvals, mvals = [], [], [], []
    base_mass = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    for idx, cell in enumerate(cells):
        vol, grads = _cell_volume_and_gradients(verts, cell, idx)
        ke = vol * grads @ grads.T
        me = vol * base_mass
        for a in range(d + 1):
            for b in range(d + 1):
                rows.append(cell[a])
                cols.append(cell[b])
                kvals.append(ke[a, b])
                mvals.append(me[a, b])
    K = sp.coo_matrix((kvals, (rows, cols)), shape=(m, m)).tocsr()
    M = sp.coo_matrix((mvals, (rows, cols)), shape=(m, m)).tocsr()
    return K, M


def _field_values(field, domain) -> np.ndarray:
    vals = field.values if hasattr(field, "values") else np.asarray(field, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == 0:
        vals = np.full(domain.node_count, float(vals))
    if vals.shape != (domain.node_count,):
        raise InputError(
            f"field has shape {vals.shape}, domain has {domain.node_count} nodes"
        )
    if not np.all(np.isfinite(vals)):
        raise InputError("field contains non-finite entries")
    return vals


def integrate_power(field, p: float, domain: DiscreteDomain) -> float:
    """sum_i w_i |f_i|^p.  Callers apply any outer exponent themselves."""
    if p < 1.0:
        raise InputError("integrate_power needs p >= 1")
    vals = _field_values(field, domain)
    return float(np.dot(domain.weights, np.abs(vals) ** p))


def normal_derivative(field, domain: DiscreteDomain) -> BoundaryTrace:
    """Outward normal derivative of a nodal field on the boundary.

    Radial domains: one-sided second-order differences, oriented outward
    (d/dr at the outer end, -d/dr at the inner end).  Meshes: variational
    flux, the stiffness residual on boundary rows divided by the lumped
    boundary measure of each boundary vertex.
    """
    vals = _field_values(field, domain)
    if domain.boundary.size == 0:
        return BoundaryTrace(np.zeros(0), np.zeros(0), nodes=domain.boundary)
    if domain.is_radial:
        h = domain.spacing
        out_vals, out_dnu = [], []
        m = domain.node_count
        for b in domain.boundary:
            if b == m - 1:
                dnu = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * h)
            elif b == 0:
                dnu = (3.0 * vals[0] - 4.0 * vals[1] + vals[2]) / (2.0 * h)
            else:
                raise InputError("radial boundary nodes must be grid endpoints")
            out_vals.append(vals[b])
            out_dnu.append(dnu)
        return BoundaryTrace(np.array(out_vals), np.array(out_dnu), nodes=domain.boundary)
    K, _ = assemble(domain)
    flux = K.apply(vals)
    bmass = _boundary_measure(domain)
    b = domain.boundary
    return BoundaryTrace(vals[b], flux[b] / bmass, nodes=b)


def _boundary_measure(domain) -> np.ndarray:
    """Lumped boundary measure per boundary vertex, from boundary faces."""
    verts, cells = domain.nodes, domain.cells
    faces = boundary_faces(cells)
    per_vertex = np.zeros(domain.node_count)
    d = verts.shape[1]
    for face in faces:
        x = verts[face]
        if d == 1:
            measure = 1.0
        elif d == 2:
            measure = float(np.linalg.norm(x[1] - x[0]))
        else:
            edges = (x[1:] - x[0]).T
            gram = edges.T @ edges
            measure = float(np.sqrt(max(np.linalg.det(gram), 0.0)))
            measure /= np.prod(np.arange(1, d))
        per_vertex[face] += measure / d
    bm = per_vertex[domain.boundary]
    if np.any(bm <= 0.0):
        raise AssemblyError("a marked boundary vertex lies on no boundary face")
    return bm


def nodal_laplacian(field, domain: DiscreteDomain, operators=None) -> np.ndarray:
    """Discrete div-grad of the field, -M^(-1) K f.

    Consistent on interior rows; boundary rows also carry the outward flux
    and should not be read as Laplacian values.
    """
    vals = _field_values(field, domain)
    if operators is None:
        operators = assemble(domain)
    K, M = operators
    rhs = -K.apply(vals)
    if domain.is_radial:
        return rhs / M.matrix.diagonal()
    from scipy.sparse.linalg import spsolve

    return spsolve(M.matrix.tocsc(), rhs)


# fourth-order stencils on a uniform grid (derivative * h resp. * h^2)
_D1_EDGE = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_D1_NEXT = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
_D2_EDGE = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0
_D2_NEXT = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0


def _derivatives_hi(vals, h):
    """Fourth-order first and second derivatives on a uniform grid."""
    m = vals.shape[0]
    if m < 6:
        raise InputError("high-order derivatives need at least 6 nodes")
    d1 = np.empty(m)
    d2 = np.empty(m)
    d1[2:-2] = (vals[:-4] - 8.0 * vals[1:-3] + 8.0 * vals[3:-1] - vals[4:]) / 12.0
    d2[2:-2] = (
        -vals[:-4] + 16.0 * vals[1:-3] - 30.0 * vals[2:-2] + 16.0 * vals[3:-1] - vals[4:]
    ) / 12.0
    head5, head6 = vals[:5], vals[:6]
    tail5, tail6 = vals[-5:][::-1], vals[-6:][::-1]
    d1[0] = _D1_EDGE @ head5
    d1[1] = _D1_NEXT @ head5
    d1[-1] = -(_D1_EDGE @ tail5)
    d1[-2] = -(_D1_NEXT @ tail5)
    d2[0] = _D2_EDGE @ head6
    d2[1] = _D2_NEXT @ head6
    d2[-1] = _D2_EDGE @ tail6
    d2[-2] = _D2_NEXT @ tail6
    return d1 / h, d2 / (h * h)


def radial_laplacian(field, domain: DiscreteDomain) -> np.ndarray:
    """High-order (fourth-order) radial Laplacian for smooth nodal fields.

    Flat geometries: f'' + (n-1)/r f'.  Sphere geometries: f'' +
    (n-1) cot(theta) f'.  At a coordinate pole the limit n f'' is used,
    with the even-reflection stencil for f''.
    """
    if not domain.is_radial:
        raise InputError("radial_laplacian needs a radial domain")
    vals = _field_values(field, domain)
    r = domain.nodes
    h = domain.spacing
    n = domain.n
    kind = domain.geometry.kind
    d1, d2 = _derivatives_hi(vals, h)
    if kind == "interval":
        return d2
    if kind in ("annulus",):
        return d2 + (n - 1) * d1 / r
    if kind in ("ball", "cap", "sphere"):
        out = np.empty_like(vals)
        poles = []
        if kind in ("ball", "cap", "sphere"):
            poles.append(0)
        if kind == "sphere":
            poles.append(len(vals) - 1)
        inner = np.ones(len(vals), dtype=bool)
        for p in poles:
            inner[p] = False
        coord = r
        if kind == "ball":
            coef = (n - 1) / coord[inner]
        else:
            coef = (n - 1) / np.tan(coord[inner])
        out[inner] = d2[inner] + coef * d1[inner]
        for p in poles:
            # even reflection across the pole: 4th order f'' stencil
            if p == 0:
                f0, f1, f2 = vals[0], vals[1], vals[2]
            else:
                f0, f1, f2 = vals[-1], vals[-2], vals[-3]
            d2_pole = (-30.0 * f0 + 32.0 * f1 - 2.0 * f2) / (12.0 * h * h)
            out[p] = n * d2_pole
        return out
    raise InputError(f"unknown radial geometry {kind!r}")
