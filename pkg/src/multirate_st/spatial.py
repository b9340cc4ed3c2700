"""Structured interval/rectangle meshes, Lagrange Q1/Q2 spaces and assembly.

Every bilinear form is assembled the same way: a sparse *evaluation
matrix* maps DoF coefficients to values (or gradients) at quadrature
points, and ``E_row.T @ diag(w) @ E_col`` gives the matrix.  Vector
spaces number their DoFs component-blocked: ``dof = comp * n_nodes + node``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

__all__ = [
    "AssemblyError",
    "SpatialMesh",
    "FunctionSpace",
    "Quadrature",
    "build_mesh",
    "volume_quadrature",
    "side_quadrature",
    "assemble_operator",
    "assemble_traction_vector",
    "LoadAssembler",
    "OPERATOR_KINDS",
]

OPERATOR_KINDS = (
    "mass",
    "stiffness",
    "convection",
    "elasticity",
    "pressure_gradient_coupling",
    "divergence_coupling",
    "boundary_mass",
    "interface_mass",
    "interface_normal_derivative",
)

_SIDES = {1: ("left", "right"), 2: ("left", "right", "bottom", "top")}
# (axis, 0 for the lower end / 1 for the upper end)
_SIDE_GEOMETRY = {"left": (0, 0), "right": (0, 1), "bottom": (1, 0), "top": (1, 1)}


class AssemblyError(ValueError):
    """Bad operator kind, unknown marker or non-conforming interface."""


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform tensor-product grid of intervals (1D) or rectangles (2D).

    Cells and vertices are numbered lexicographically with x fastest.
    ``markers`` maps a boundary name to the geometric side it labels.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    cells: tuple[int, ...]
    markers: Mapping[str, str] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @cached_property
    def h(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.cells)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def n_vertices(self) -> int:
        return int(np.prod([c + 1 for c in self.cells]))

    @property
    def measure(self) -> float:
        return float(np.prod(np.asarray(self.upper) - np.asarray(self.lower)))

    def side(self, marker: str) -> str:
        try:
            return self.markers[marker]
        except KeyError:
            raise AssemblyError(f"unknown boundary marker {marker!r}; have {sorted(self.markers)}") from None

    def outward_normal(self, marker: str) -> np.ndarray:
        axis, end = _SIDE_GEOMETRY[self.side(marker)]
        n = np.zeros(self.dim)
        n[axis] = 1.0 if end else -1.0
        return n

    def side_coordinate(self, marker: str) -> float:
        axis, end = _SIDE_GEOMETRY[self.side(marker)]
        return float(self.upper[axis] if end else self.lower[axis])

    @property
    def cell_diameter(self) -> float:
        """Longest cell diagonal; the length used in penalty scalings ``gamma / h``."""
        return float(np.linalg.norm(self.h))

    def facet_size(self, marker: str) -> float:
        """Diameter used in penalty scalings ``gamma / h`` on this side.

        In 1D the facet is a point, so the adjacent cell length is used.
        """
        axis, _ = _SIDE_GEOMETRY[self.side(marker)]
        if self.dim == 1:
            return float(self.h[0])
        return float(self.h[1 - axis])

    def vertex_coordinates(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, n + 1) for lo, hi, n in zip(self.lower, self.upper, self.cells)]
        grids = np.meshgrid(*axes, indexing="xy")
        return np.stack([g.ravel() for g in grids], axis=1)

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cell index and reference coordinates in [0, 1]^d for each point.

        Points on the outer boundary are attributed to the adjacent cell.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lower)
        rel = (points - lo) / self.h
        idx = np.clip(np.floor(rel).astype(int), 0, np.asarray(self.cells) - 1)
        ref = rel - idx
        cell = idx[:, 0].copy()
        if self.dim == 2:
            cell += idx[:, 1] * self.cells[0]
        return cell, ref


def build_mesh(lower, upper, cells, names: Mapping[str, str] | None = None) -> SpatialMesh:
    """Structured mesh on the box ``[lower, upper]``.

    ``names`` renames geometric sides, e.g. ``{"right": "interface"}``;
    unnamed sides keep their geometric name.
    """
    lower = tuple(float(v) for v in np.atleast_1d(lower))
    upper = tuple(float(v) for v in np.atleast_1d(upper))
    cells = tuple(int(c) for c in np.atleast_1d(cells))
    if not (len(lower) == len(upper) == len(cells)) or len(cells) not in (1, 2):
        raise ValueError("meshes are 1D or 2D with matching extents and cell counts")
    if any(c < 1 for c in cells):
        raise ValueError(f"cell counts must be positive, got {cells}")
    if any(hi <= lo for lo, hi in zip(lower, upper)):
        raise ValueError("upper extents must exceed lower extents")
    names = dict(names or {})
    sides = _SIDES[len(cells)]
    unknown = set(names) - set(sides)
    if unknown:
        raise ValueError(f"unknown sides {sorted(unknown)}")
    markers = {names.get(s, s): s for s in sides}
    return SpatialMesh(lower, upper, cells, markers)


# -- reference Lagrange basis on [0, 1] with equispaced nodes -----------------

def _lagrange_1d(p: int, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xi = np.asarray(xi, dtype=float)
    if p == 1:
        return np.stack([1 - xi, xi]), np.stack([-np.ones_like(xi), np.ones_like(xi)])
    if p == 2:
        val = np.stack([2 * (xi - 0.5) * (xi - 1), -4 * xi * (xi - 1), 2 * xi * (xi - 0.5)])
        der = np.stack([4 * xi - 3, -8 * xi + 4, 4 * xi - 1])
        return val, der
    raise ValueError(f"Lagrange degree {p} not supported")


@dataclass(frozen=True)
class Quadrature:
    points: np.ndarray
    weights: np.ndarray


def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def volume_quadrature(mesh: SpatialMesh, n: int) -> Quadrature:
    """Tensor Gauss rule with ``n`` points per axis on every cell."""
    xg, wg = _gauss01(n)
    h = mesh.h
    lo = np.asarray(mesh.lower)
    if mesh.dim == 1:
        starts = lo[0] + h[0] * np.arange(mesh.cells[0])
        pts = (starts[:, None] + h[0] * xg[None, :]).reshape(-1, 1)
        wts = np.tile(wg * h[0], mesh.cells[0])
        return Quadrature(pts, wts)
    nx, ny = mesh.cells
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ix, iy = ix.ravel(), iy.ravel()
    qx, qy = np.meshgrid(xg, xg, indexing="xy")
    wq = np.outer(wg, wg).ravel() * h[0] * h[1]
    px = lo[0] + h[0] * (ix[:, None] + qx.ravel()[None, :])
    py = lo[1] + h[1] * (iy[:, None] + qy.ravel()[None, :])
    pts = np.stack([px.ravel(), py.ravel()], axis=1)
    return Quadrature(pts, np.tile(wq, ix.size))


def side_quadrature(mesh: SpatialMesh, marker: str, n: int) -> Quadrature:
    """Gauss rule on one boundary side (a single unit-weight point in 1D)."""
    side = mesh.side(marker)
    axis, end = _SIDE_GEOMETRY[side]
    if mesh.dim == 1:
        return Quadrature(np.array([[mesh.side_coordinate(marker)]]), np.ones(1))
    t_axis = 1 - axis
    xg, wg = _gauss01(n)
    h = mesh.h[t_axis]
    starts = mesh.lower[t_axis] + h * np.arange(mesh.cells[t_axis])
    tang = (starts[:, None] + h * xg[None, :]).ravel()
    pts = np.empty((tang.size, 2))
    pts[:, t_axis] = tang
    pts[:, axis] = mesh.side_coordinate(marker)
    return Quadrature(pts, np.tile(wg * h, starts.size))


class FunctionSpace:
    """Continuous Lagrange space of degree 1 or 2, scalar or vector valued."""

    def __init__(self, mesh: SpatialMesh, degree: int, n_components: int = 1):
        if degree not in (1, 2):
            raise ValueError(f"degree must be 1 or 2, got {degree}")
        self.mesh = mesh
        self.degree = degree
        self.n_components = n_components
        self.nodes_per_axis = tuple(degree * c + 1 for c in mesh.cells)
        self.n_nodes = int(np.prod(self.nodes_per_axis))
        self.ndofs = self.n_nodes * n_components

    def __repr__(self):
        return f"FunctionSpace(Q{self.degree}, cells={self.mesh.cells}, components={self.n_components})"

    @cached_property
    def node_coordinates(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, n) for lo, hi, n in zip(self.mesh.lower, self.mesh.upper, self.nodes_per_axis)]
        grids = np.meshgrid(*axes, indexing="xy")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def cell_nodes(self) -> np.ndarray:
        """Global node indices of each cell, local nodes lexicographic."""
        p = self.degree
        if self.mesh.dim == 1:
            base = p * np.arange(self.mesh.cells[0])
            return base[:, None] + np.arange(p + 1)[None, :]
        nx, ny = self.mesh.cells
        Nx = self.nodes_per_axis[0]
        ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        ax, ay = np.meshgrid(np.arange(p + 1), np.arange(p + 1), indexing="xy")
        gx = p * ix.ravel()[:, None] + ax.ravel()[None, :]
        gy = p * iy.ravel()[:, None] + ay.ravel()[None, :]
        return gx + Nx * gy

    def boundary_nodes(self, marker: str) -> np.ndarray:
        axis, end = _SIDE_GEOMETRY[self.mesh.side(marker)]
        coord = self.mesh.side_coordinate(marker)
        span = self.mesh.upper[axis] - self.mesh.lower[axis]
        return np.flatnonzero(np.abs(self.node_coordinates[:, axis] - coord) <= 1e-12 * span)

    def boundary_dofs(self, marker: str, component: int | None = None) -> np.ndarray:
        nodes = self.boundary_nodes(marker)
        comps = range(self.n_components) if component is None else [component]
        return np.concatenate([c * self.n_nodes + nodes for c in comps])

    def evaluation(self, points: np.ndarray) -> tuple[sp.csr_matrix, list[sp.csr_matrix]]:
        """Scalar basis values and gradients at ``points``.

        Returns ``(V, [G_x, G_y])`` of shape ``(n_points, n_nodes)``.
        """
        points = np.atleast_2d(points)
        cell, ref = self.mesh.locate(points)
        p = self.degree
        npts = points.shape[0]
        dofs = self.cell_nodes[cell]  # (npts, nloc)
        if self.mesh.dim == 1:
            v, d = _lagrange_1d(p, ref[:, 0])
            vals = v.T
            grads = [d.T / self.mesh.h[0]]
        else:
            vx, dx = _lagrange_1d(p, ref[:, 0])
            vy, dy = _lagrange_1d(p, ref[:, 1])
            # local index a = ax + (p+1) ay
            vals = (vy[:, None, :] * vx[None, :, :]).reshape(-1, npts).T
            gx = (vy[:, None, :] * dx[None, :, :]).reshape(-1, npts).T / self.mesh.h[0]
            gy = (dy[:, None, :] * vx[None, :, :]).reshape(-1, npts).T / self.mesh.h[1]
            grads = [gx, gy]
        rows = np.repeat(np.arange(npts), dofs.shape[1])
        cols = dofs.ravel()
        shape = (npts, self.n_nodes)

        def mk(data):
            return sp.csr_matrix((data.ravel(), (rows, cols)), shape=shape)

        return mk(vals), [mk(g) for g in grads]

    def component(self, E: sp.spmatrix, c: int) -> sp.csr_matrix:
        """Lift a scalar evaluation matrix to act on component ``c`` of this space."""
        blocks = [E if i == c else sp.csr_matrix(E.shape) for i in range(self.n_components)]
        return sp.hstack(blocks, format="csr")

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Point values, shape ``(n_points,)`` or ``(n_points, n_components)``."""
        V, _ = self.evaluation(points)
        c = np.asarray(coeffs).reshape(self.n_components, self.n_nodes)
        out = np.stack([V @ c[i] for i in range(self.n_components)], axis=1)
        return out[:, 0] if self.n_components == 1 else out


def _quad_points(degree: int) -> int:
    # order 2*degree + 1 is exact for every constant-coefficient form here
    return degree + 1


def _weighted(A: sp.spmatrix, w: np.ndarray, B: sp.spmatrix) -> sp.csr_matrix:
    return (A.T @ sp.diags(w) @ B).tocsr()


def _same_geometry(a: SpatialMesh, b: SpatialMesh) -> bool:
    return a.cells == b.cells and np.allclose(a.lower, b.lower) and np.allclose(a.upper, b.upper)


def _divergence(space: FunctionSpace, grads: list[sp.csr_matrix]) -> sp.csr_matrix:
    return sum(space.component(grads[d], d) for d in range(space.mesh.dim))


def _check_interface(row: FunctionSpace, row_marker: str, col: FunctionSpace, col_marker: str):
    mr, mc = row.mesh, col.mesh
    if mr.dim != mc.dim:
        raise AssemblyError("interface spaces must share the spatial dimension")
    ar, _ = _SIDE_GEOMETRY[mr.side(row_marker)]
    ac, _ = _SIDE_GEOMETRY[mc.side(col_marker)]
    if ar != ac or not np.isclose(mr.side_coordinate(row_marker), mc.side_coordinate(col_marker)):
        raise AssemblyError("interface sides do not coincide")
    if mr.dim == 2:
        t = 1 - ar
        if (mr.cells[t] != mc.cells[t] or not np.isclose(mr.lower[t], mc.lower[t])
                or not np.isclose(mr.upper[t], mc.upper[t])):
            raise AssemblyError("non-conforming interface: facet endpoints do not match")


def assemble_operator(space_row: FunctionSpace, space_col: FunctionSpace, kind: str, **params) -> sp.csr_matrix:
    """Sparse matrix ``A[i, j] = a(phi_col_j, phi_row_i)`` for the named form.

    Parameters by kind: ``convection(beta)``, ``elasticity(mu, lam)``,
    ``pressure_gradient_coupling(alpha, marker)``, ``divergence_coupling(alpha)``,
    ``boundary_mass(marker)``, ``interface_mass(row_marker, col_marker)``,
    ``interface_normal_derivative(row_marker, col_marker)``.
    """
    if kind not in OPERATOR_KINDS:
        raise AssemblyError(f"unknown operator kind {kind!r}")
    if kind in ("interface_mass", "interface_normal_derivative"):
        rm, cm = params["row_marker"], params["col_marker"]
        _check_interface(space_row, rm, space_col, cm)
        q = side_quadrature(space_row.mesh, rm, max(space_row.degree, space_col.degree) + 1)
        Vr, _ = space_row.evaluation(q.points)
        Vc, Gc = space_col.evaluation(q.points)
        if kind == "interface_mass":
            return _weighted(Vr, q.weights, Vc)
        n = space_col.mesh.outward_normal(cm)
        dn = sum(n[d] * Gc[d] for d in range(len(n)))
        return _weighted(Vr, q.weights, dn)

    if not _same_geometry(space_row.mesh, space_col.mesh):
        raise AssemblyError("volume forms need both spaces on the same mesh")
    mesh = space_row.mesh
    if kind == "boundary_mass":
        q = side_quadrature(mesh, params["marker"], max(space_row.degree, space_col.degree) + 1)
        Vr, _ = space_row.evaluation(q.points)
        Vc, _ = space_col.evaluation(q.points)
        return _weighted(Vr, q.weights, Vc)

    q = volume_quadrature(mesh, _quad_points(max(space_row.degree, space_col.degree)))
    Vr, Gr = space_row.evaluation(q.points)
    Vc, Gc = space_col.evaluation(q.points)
    w = q.weights

    if kind in ("mass", "stiffness", "convection"):
        if space_row.n_components != space_col.n_components:
            raise AssemblyError(f"{kind} needs spaces with equal component counts")
        if kind == "mass":
            block = _weighted(Vr, w, Vc)
        elif kind == "stiffness":
            block = sum(_weighted(Gr[d], w, Gc[d]) for d in range(mesh.dim))
        else:
            beta = np.atleast_1d(np.asarray(params["beta"], dtype=float))
            block = _weighted(Vr, w, sum(beta[d] * Gc[d] for d in range(mesh.dim)))
        return sp.block_diag([block] * space_row.n_components, format="csr")

    if kind == "elasticity":
        mu, lam = params["mu"], params["lam"]
        s = space_row
        dim = mesh.dim
        eps = {}
        for c in range(dim):
            for d in range(dim):
                eps[c, d] = 0.5 * (s.component(Gr[d], c) + s.component(Gr[c], d))
        out = sum(2 * mu * _weighted(eps[c, d], w, eps[c, d]) for c in range(dim) for d in range(dim))
        div = _divergence(s, Gr)
        return (out + lam * _weighted(div, w, div)).tocsr()

    if kind == "divergence_coupling":
        # rows: scalar (pressure) test functions, cols: vector trial functions
        alpha = params["alpha"]
        return (alpha * _weighted(Vr, w, _divergence(space_col, Gc))).tocsr()

    # pressure_gradient_coupling: rows vector test, cols scalar trial
    alpha = params["alpha"]
    marker = params["marker"]
    vol = -alpha * _weighted(_divergence(space_row, Gr), w, Vc)
    qs = side_quadrature(mesh, marker, max(space_row.degree, space_col.degree) + 1)
    Vrs, _ = space_row.evaluation(qs.points)
    Vcs, _ = space_col.evaluation(qs.points)
    n = mesh.outward_normal(marker)
    trace = sum(n[d] * space_row.component(Vrs, d) for d in range(mesh.dim))
    return (vol + alpha * _weighted(trace, qs.weights, Vcs)).tocsr()


def assemble_traction_vector(space: FunctionSpace, marker: str, traction) -> np.ndarray:
    """Load vector of a constant traction on one boundary side."""
    traction = np.atleast_1d(np.asarray(traction, dtype=float))
    if traction.size != space.n_components:
        raise ValueError("traction needs one entry per component")
    q = side_quadrature(space.mesh, marker, space.degree + 1)
    V, _ = space.evaluation(q.points)
    base = V.T @ q.weights
    return np.concatenate([t * base for t in traction])


class LoadAssembler:
    """Load vectors ``int f(x) phi_i dx`` for pointwise-evaluated functions.

    The quadrature uses ``degree + 3`` points per axis, enough for the smooth
    non-polynomial data of the manufactured solutions.
    """

    def __init__(self, space: FunctionSpace, n_points: int | None = None):
        if space.n_components != 1:
            raise ValueError("loads are assembled per scalar component")
        self.space = space
        self.quadrature = volume_quadrature(space.mesh, n_points or space.degree + 3)
        V, _ = space.evaluation(self.quadrature.points)
        self._VTw = (V.T @ sp.diags(self.quadrature.weights)).tocsr()

    @property
    def points(self) -> np.ndarray:
        return self.quadrature.points

    def __call__(self, values: np.ndarray | Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        if callable(values):
            values = values(self.quadrature.points)
        return self._VTw @ np.asarray(values, dtype=float)
