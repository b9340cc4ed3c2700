"""Temporal meshes, dG(r) bases and the purely temporal element matrices.

A slab ``(t_{m-1}, t_m)`` of the coarse mesh carries, per field group, a
uniform subdivision into ``n`` sub-elements.  All temporal matrices are
small and dense; they are combined with sparse spatial matrices later.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "NestingError",
    "UnsupportedOrderError",
    "TemporalMesh",
    "TemporalHierarchy",
    "TemporalBasis",
    "build_hierarchy",
    "dg_basis",
    "restriction_matrix",
    "temporal_matrix",
    "TEMPORAL_KINDS",
]

TEMPORAL_KINDS = ("mass", "dt_mass", "jump_plus_initial")


class NestingError(ValueError):
    """Raised when a coarse temporal mesh is not nested in a fine one."""


class UnsupportedOrderError(ValueError):
    """Raised for dG orders other than 0 and 1."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TemporalMesh:
    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("a temporal mesh needs at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if bp[0] != 0.0:
            raise ValueError("temporal meshes start at t = 0")
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

    @property
    def T(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_elements(self) -> int:
        return self.breakpoints.size - 1

    @property
    def elements(self) -> list[tuple[float, float]]:
        bp = self.breakpoints
        return [(float(a), float(b)) for a, b in zip(bp[:-1], bp[1:])]

    def __len__(self) -> int:
        return self.n_elements


@dataclass(frozen=True)
class TemporalHierarchy:
    """Coarse mesh, the two per-group meshes and their common refinement.

    ``sub_counts[m]`` holds ``(n_1, n_2)``, the number of sub-elements of
    each field group inside coarse slab ``m``.
    """

    coarse: TemporalMesh
    field_meshes: tuple[TemporalMesh, TemporalMesh]
    fine: TemporalMesh
    sub_counts: tuple[tuple[int, int], ...]

    @property
    def n_slabs(self) -> int:
        return self.coarse.n_elements

    def slab(self, m: int) -> tuple[float, float]:
        return self.coarse.elements[m]

    @property
    def ratio_label(self) -> str:
        n1, n2 = self.sub_counts[0]
        return f"{n1}:{n2}"


def build_hierarchy(T: float, M_coarse: int, ratio_1: int, ratio_2: int) -> TemporalHierarchy:
    """Uniform coarse mesh of ``M_coarse`` slabs on ``[0, T]``; group ``i`` splits
    every slab into ``ratio_i`` equal parts."""
    if not T > 0:
        raise ValueError(f"end time must be positive, got {T}")
    if M_coarse < 1:
        raise ValueError(f"need at least one coarse element, got {M_coarse}")
    for r in (ratio_1, ratio_2):
        if not _is_power_of_two(int(r)):
            raise ValueError(f"refinement ratios must be powers of 2, got {r}")
    coarse_bp = np.linspace(0.0, T, M_coarse + 1)
    coarse_bp[-1] = T

    def refine(r: int) -> np.ndarray:
        k = np.diff(coarse_bp)
        pts = coarse_bp[:-1, None] + k[:, None] * (np.arange(r) / r)[None, :]
        return np.append(pts.ravel(), T)

    m1, m2 = refine(ratio_1), refine(ratio_2)
    # nested powers of 2: the union is simply the finer of the two
    fine_bp = m1 if ratio_1 >= ratio_2 else m2
    sub = tuple((int(ratio_1), int(ratio_2)) for _ in range(M_coarse))
    return TemporalHierarchy(
        coarse=TemporalMesh(coarse_bp),
        field_meshes=(TemporalMesh(m1), TemporalMesh(m2)),
        fine=TemporalMesh(fine_bp),
        sub_counts=sub,
    )


# reference basis on [0, 1]; dG(1) uses Lagrange nodes at both endpoints
def _ref_values(r: int, tau: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if r == 0:
        return np.ones((1,) + tau.shape)
    return np.stack([1.0 - tau, tau])


def _ref_derivs(r: int, tau: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if r == 0:
        return np.zeros((1,) + tau.shape)
    return np.stack([-np.ones_like(tau), np.ones_like(tau)])


@dataclass(frozen=True)
class TemporalBasis:
    """dG(r) basis on a slab split into sub-elements.

    DoFs are numbered element by element; within a dG(1) element the left
    node comes first.
    """

    order: int
    breakpoints: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.order not in (0, 1):
            raise UnsupportedOrderError(f"dG({self.order}) is not supported; use 0 or 1")
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("sub-element breakpoints must be strictly increasing")
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

    @property
    def n_elements(self) -> int:
        return self.breakpoints.size - 1

    @property
    def dofs_per_element(self) -> int:
        return self.order + 1

    @property
    def ndofs(self) -> int:
        return self.dofs_per_element * self.n_elements

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def element_dofs(self, e: int) -> np.ndarray:
        p = self.dofs_per_element
        return np.arange(e * p, (e + 1) * p)

    def locate(self, t) -> np.ndarray:
        """Index of the sub-element containing each time (right-continuous)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        e = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.clip(e, 0, self.n_elements - 1)

    def evaluate(self, t, element=None, derivative: bool = False) -> np.ndarray:
        """Basis values (or time derivatives) at ``t``; shape ``(ndofs, len(t))``.

        ``element`` pins the sub-element used, which selects one-sided
        traces at breakpoints.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        e = self.locate(t) if element is None else np.broadcast_to(np.asarray(element), t.shape)
        a = self.breakpoints[e]
        k = self.lengths[e]
        tau = (t - a) / k
        local = _ref_derivs(self.order, tau) / k if derivative else _ref_values(self.order, tau)
        out = np.zeros((self.ndofs, t.size))
        cols = np.arange(t.size)
        for j in range(self.dofs_per_element):
            out[e * self.dofs_per_element + j, cols] = local[j]
        return out

    def start_values(self) -> np.ndarray:
        """Right-sided traces at the slab start, one entry per DoF."""
        return self.evaluate(self.breakpoints[0], element=0)[:, 0]

    def end_values(self) -> np.ndarray:
        """Left-sided traces at the slab end, one entry per DoF."""
        return self.evaluate(self.breakpoints[-1], element=self.n_elements - 1)[:, 0]

    def quadrature(self, n_points: int, cuts=()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gauss-Legendre points, weights and owning sub-element on every sub-element.

        Any time in ``cuts`` lying strictly inside a sub-element splits its
        panel, so integrands with jumps there are still integrated exactly.
        """
        xg, wg = np.polynomial.legendre.leggauss(n_points)
        xg = 0.5 * (xg + 1.0)
        wg = 0.5 * wg
        pts, wts, els = [], [], []
        cuts = np.asarray(sorted(cuts), dtype=float)
        for e in range(self.n_elements):
            a, b = self.breakpoints[e], self.breakpoints[e + 1]
            inner = cuts[(cuts > a) & (cuts < b)]
            edges = np.concatenate(([a], inner, [b]))
            for lo, hi in zip(edges[:-1], edges[1:]):
                pts.append(lo + (hi - lo) * xg)
                wts.append((hi - lo) * wg)
                els.append(np.full(n_points, e))
        return np.concatenate(pts), np.concatenate(wts), np.concatenate(els)


def dg_basis(slab: tuple[float, float], n_sub: int, r: int) -> TemporalBasis:
    """dG(r) basis on ``slab`` uniformly split into ``n_sub`` sub-elements."""
    if n_sub < 1:
        raise ValueError(f"need at least one sub-element, got {n_sub}")
    if r not in (0, 1):
        raise UnsupportedOrderError(f"dG({r}) is not supported; use 0 or 1")
    a, b = slab
    bp = a + (b - a) * np.arange(n_sub + 1) / n_sub
    bp[-1] = b
    return TemporalBasis(order=r, breakpoints=bp)


def restriction_matrix(coarse: TemporalBasis, fine: TemporalBasis) -> np.ndarray:
    """Matrix ``R`` with ``phi_coarse = R @ phi_fine`` on the whole slab.

    Each coarse basis function is interpolated at the nodes of the fine
    basis; nesting makes this exact.
    """
    if coarse.order != fine.order:
        raise ValueError("restriction needs bases of equal order")
    cb, fb = coarse.breakpoints, fine.breakpoints
    scale = max(abs(cb[-1]), abs(cb[0]), cb[-1] - cb[0])
    tol = 1e-12 * scale
    if abs(cb[0] - fb[0]) > tol or abs(cb[-1] - fb[-1]) > tol:
        raise NestingError("coarse and fine bases live on different slabs")
    for t in cb:
        if np.min(np.abs(fb - t)) > tol:
            raise NestingError(f"coarse breakpoint {t} is not a fine breakpoint")

    R = np.zeros((coarse.ndofs, fine.ndofs))
    p = fine.dofs_per_element
    for e in range(fine.n_elements):
        a, b = fb[e], fb[e + 1]
        mid = 0.5 * (a + b)
        ce = int(coarse.locate(mid)[0])
        nodes = np.array([mid]) if fine.order == 0 else np.array([a, b])
        vals = coarse.evaluate(nodes, element=np.full(nodes.size, ce))
        R[:, e * p:(e + 1) * p] = vals
    return R


def _same_mesh(a: TemporalBasis, b: TemporalBasis) -> bool:
    return a.breakpoints.shape == b.breakpoints.shape and np.allclose(
        a.breakpoints, b.breakpoints, rtol=0, atol=1e-12 * max(1.0, abs(a.breakpoints[-1]))
    )


def temporal_matrix(basis_row: TemporalBasis, basis_col: TemporalBasis, kind: str) -> np.ndarray:
    """Dense temporal matrix ``T[i, j]`` pairing test function ``i`` with trial ``j``.

    ``mass``: int phi_j phi_i;  ``dt_mass``: int phi_j' phi_i over the
    sub-elements;  ``jump_plus_initial``: sum_m ([u]_m, phi_m^+) + (u_0^+, phi_0^+)
    restricted to couplings inside the slab (the previous slab's trace goes
    to the right-hand side).
    """
    if kind not in TEMPORAL_KINDS:
        raise ValueError(f"unknown temporal kind {kind!r}")
    if not _same_mesh(basis_row, basis_col):
        raise ValueError("temporal matrices need row and column bases on the same sub-elements")
    n_el = basis_row.n_elements
    pr, pc = basis_row.dofs_per_element, basis_col.dofs_per_element
    out = np.zeros((basis_row.ndofs, basis_col.ndofs))

    if kind == "jump_plus_initial":
        for e in range(n_el):
            t0 = basis_row.breakpoints[e]
            test = basis_row.evaluate(t0, element=e)[e * pr:(e + 1) * pr, 0]
            plus = basis_col.evaluate(t0, element=e)[e * pc:(e + 1) * pc, 0]
            out[e * pr:(e + 1) * pr, e * pc:(e + 1) * pc] += np.outer(test, plus)
            if e > 0:
                minus = basis_col.evaluate(t0, element=e - 1)[(e - 1) * pc:e * pc, 0]
                out[e * pr:(e + 1) * pr, (e - 1) * pc:e * pc] -= np.outer(test, minus)
        return out

    nq = max(basis_row.order, basis_col.order) + 2
    xg, wg = np.polynomial.legendre.leggauss(nq)
    tau = 0.5 * (xg + 1.0)
    for e in range(n_el):
        k = basis_row.lengths[e]
        w = 0.5 * wg * k
        phi_i = _ref_values(basis_row.order, tau)
        if kind == "mass":
            phi_j = _ref_values(basis_col.order, tau)
        else:
            phi_j = _ref_derivs(basis_col.order, tau) / k
        out[e * pr:(e + 1) * pr, e * pc:(e + 1) * pc] = (phi_i * w) @ phi_j.T
    return out
