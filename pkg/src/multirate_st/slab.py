"""Monolithic multirate assembly and solution on coarse time slabs.

A problem is a declarative list of :class:`TermSpec` entries, each the
tensor product of a temporal kind and a sparse spatial matrix.  On every
slab the assembler builds the temporal factors, contracts cross-group
terms with the restriction matrices, and scatters ``kron(T, S)`` blocks
into one sparse matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .linalg import BlockLayout, LUSolver, SingularSystemError, kron
from .spatial import FunctionSpace
from .temporal import (
    TEMPORAL_KINDS,
    TemporalBasis,
    TemporalHierarchy,
    dg_basis,
    restriction_matrix,
    temporal_matrix,
)

__all__ = [
    "FieldSpec",
    "TermSpec",
    "Source",
    "ProblemSpec",
    "SlabSystem",
    "SlabSolution",
    "SlabAssembler",
    "SlabError",
    "assemble_slab",
    "solve_slab",
    "march",
]

log = logging.getLogger(__name__)

# "gauss": loads integrated against the temporal basis; "right": the
# rectangle rule at each sub-element's right end (classical backward Euler,
# only meaningful for dG(0))
SOURCE_RULES = ("gauss", "right")


class SlabError(RuntimeError):
    """A slab failed to assemble or solve; carries the slab index."""

    def __init__(self, slab: int, message: str):
        super().__init__(f"slab {slab}: {message}")
        self.slab = slab


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """One unknown: its spatial space, temporal group (0 or 1) and the
    homogeneous Dirichlet DoFs removed from the system."""

    name: str
    group: int
    space: FunctionSpace
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def ndofs(self) -> int:
        return self.space.ndofs

    @cached_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.ndofs, dtype=bool)
        mask[np.asarray(self.constrained, dtype=int)] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class TermSpec:
    """``coeff * (temporal kind) ⊗ matrix``, rows tested with ``row``, columns
    acting on ``col``.  ``matrix`` has full (unconstrained) dimensions."""

    row: str
    col: str
    kind: str
    matrix: sp.spmatrix
    coeff: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.kind not in TEMPORAL_KINDS:
            raise ValueError(f"unknown temporal kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Source:
    """Time-dependent load ``t -> vector`` tested with ``field``'s functions.

    ``discontinuities`` lists times where the load jumps; temporal
    quadrature panels are split there.
    """

    field: str
    load: Callable[[float], np.ndarray]
    discontinuities: tuple[float, ...] = ()


@dataclass(eq=False)
class ProblemSpec:
    name: str
    T: float
    fields: Sequence[FieldSpec]
    terms: Sequence[TermSpec]
    sources: Sequence[Source] = ()
    initial: Mapping[str, np.ndarray] = field(default_factory=dict)
    group_names: tuple[str, str] = ("1", "2")
    time_quadrature: int = 3
    source_rule: str = "gauss"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source_rule not in SOURCE_RULES:
            raise ValueError(f"source_rule must be one of {SOURCE_RULES}")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise ValueError("field names must be unique")
        for t in self.terms:
            for n in (t.row, t.col):
                if n not in names:
                    raise ValueError(f"term {t.label or t.kind!r} references unknown field {n!r}")
            r, c = self.field(t.row), self.field(t.col)
            if t.matrix.shape != (r.ndofs, c.ndofs):
                raise ValueError(f"term {t.label!r}: matrix shape {t.matrix.shape} != {(r.ndofs, c.ndofs)}")
        for s in self.sources:
            if s.field not in names:
                raise ValueError(f"source references unknown field {s.field!r}")

    def field(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    def zero_initial(self) -> dict[str, np.ndarray]:
        return {f.name: np.zeros(f.ndofs) for f in self.fields}


@dataclass(eq=False)
class SlabSystem:
    layout: BlockLayout
    matrix: sp.csr_matrix
    rhs: np.ndarray
    key: tuple = ()


@dataclass(eq=False)
class SlabSolution:
    """Coefficients per field, shape ``(n_time_dofs, n_space_dofs)`` with
    constrained DoFs filled in as zeros."""

    interval: tuple[float, float]
    bases: dict[str, TemporalBasis]
    coefficients: dict[str, np.ndarray]

    def end_trace(self, name: str) -> np.ndarray:
        return self.bases[name].end_values() @ self.coefficients[name]

    def start_trace(self, name: str) -> np.ndarray:
        return self.bases[name].start_values() @ self.coefficients[name]

    def evaluate(self, name: str, t, derivative: bool = False) -> np.ndarray:
        """Spatial coefficient vectors at times ``t``; shape ``(len(t), n_space)``."""
        vals = self.bases[name].evaluate(t, derivative=derivative)
        return vals.T @ self.coefficients[name]


class SlabAssembler:
    """Builds (and caches) slab matrices and factorizations for one problem.

    Slabs of equal length and sub-element counts share one matrix, so a
    uniform march factors once.
    """

    def __init__(self, problem: ProblemSpec, order: int):
        if problem.source_rule == "right" and order != 0:
            raise ValueError("the right-end source rule is a dG(0) (backward Euler) option")
        self.problem = problem
        self.order = order
        self._fields = {f.name: f for f in problem.fields}
        self._reduced = {}
        for t in problem.terms:
            r, c = self._fields[t.row], self._fields[t.col]
            self._reduced[id(t)] = sp.csr_matrix(t.matrix)[r.free][:, c.free].tocsr()
        self._matrices: dict[tuple, tuple[BlockLayout, sp.csr_matrix]] = {}
        self._solvers: dict[tuple, LUSolver] = {}

    # -- temporal pieces ----------------------------------------------------
    def bases(self, interval, n_sub) -> tuple[list[TemporalBasis], TemporalBasis, list[np.ndarray]]:
        """Per-group bases, the common fine basis and the two restriction matrices."""
        group = [dg_basis(interval, n_sub[g], self.order) for g in (0, 1)]
        fine = group[0] if n_sub[0] >= n_sub[1] else group[1]
        R = [restriction_matrix(b, fine) for b in group]
        return group, fine, R

    def term_temporal(self, term: TermSpec, group, fine, R) -> np.ndarray:
        gr = self._fields[term.row].group
        gc = self._fields[term.col].group
        if gr == gc:
            return temporal_matrix(group[gr], group[gr], term.kind)
        # cross-group: integrate on the fine basis, restrict before scattering
        return R[gr] @ temporal_matrix(fine, fine, term.kind) @ R[gc].T

    def layout(self, group) -> BlockLayout:
        return BlockLayout(tuple(
            (f.name, group[f.group].ndofs, f.free.size) for f in self.problem.fields
        ))

    def _key(self, interval, n_sub) -> tuple:
        k = interval[1] - interval[0]
        return (int(n_sub[0]), int(n_sub[1]), round(k / self.problem.T, 12))

    def matrix(self, interval, n_sub) -> tuple[BlockLayout, sp.csr_matrix]:
        key = self._key(interval, n_sub)
        if key not in self._matrices:
            group, fine, R = self.bases(interval, n_sub)
            lay = self.layout(group)
            names = [f.name for f in self.problem.fields]
            blocks = {(r, c): None for r in names for c in names}
            for t in self.problem.terms:
                T = self.term_temporal(t, group, fine, R)
                contrib = t.coeff * kron(T, self._reduced[id(t)])
                prev = blocks[t.row, t.col]
                blocks[t.row, t.col] = contrib if prev is None else prev + contrib
            grid = []
            for r in names:
                nt_r, ns_r = lay.shape_of(r)
                row = []
                for c in names:
                    b = blocks[r, c]
                    if b is None:
                        nt_c, ns_c = lay.shape_of(c)
                        b = sp.csr_matrix((nt_r * ns_r, nt_c * ns_c))
                    row.append(b)
                grid.append(row)
            A = sp.bmat(grid, format="csr")
            A.sum_duplicates()
            self._matrices[key] = (lay, A)
        return self._matrices[key]

    def solver(self, interval, n_sub, label: str = "slab") -> LUSolver:
        key = self._key(interval, n_sub)
        if key not in self._solvers:
            _, A = self.matrix(interval, n_sub)
            self._solvers[key] = LUSolver(A, label)
        return self._solvers[key]

    def rhs(self, interval, n_sub, traces: Mapping[str, np.ndarray]) -> np.ndarray:
        group, _, _ = self.bases(interval, n_sub)
        lay = self.layout(group)
        b = np.zeros(lay.size)
        parts = lay.split(b)  # views into b
        for t in self.problem.terms:
            if t.kind != "jump_plus_initial":
                continue
            if t.col not in traces:
                raise KeyError(f"missing initial trace for field {t.col!r}")
            rf = self._fields[t.row]
            start = group[rf.group].start_values()
            spatial = t.matrix[rf.free] @ np.asarray(traces[t.col], dtype=float)
            parts[t.row] += t.coeff * np.outer(start, spatial)
        nq = self.problem.time_quadrature
        for s in self.problem.sources:
            f = self._fields[s.field]
            basis = group[f.group]
            if self.problem.source_rule == "right":
                els = np.arange(basis.n_elements)
                tq, wq = basis.breakpoints[1:], basis.lengths
                phi = basis.evaluate(tq, element=els)
            else:
                tq, wq, _ = basis.quadrature(nq, cuts=s.discontinuities)
                phi = basis.evaluate(tq)  # (ndofs, nq_total)
            for j in range(tq.size):
                load = np.asarray(s.load(float(tq[j])), dtype=float)[f.free]
                parts[s.field] += np.outer(wq[j] * phi[:, j], load)
        return b

    def assemble(self, interval, n_sub, traces) -> SlabSystem:
        lay, A = self.matrix(interval, n_sub)
        return SlabSystem(lay, A, self.rhs(interval, n_sub, traces), self._key(interval, n_sub))

    def expand(self, interval, n_sub, x: np.ndarray) -> SlabSolution:
        group, _, _ = self.bases(interval, n_sub)
        lay = self.layout(group)
        coeffs = {}
        for name, arr in lay.split(x).items():
            f = self._fields[name]
            full = np.zeros((arr.shape[0], f.ndofs))
            full[:, f.free] = arr
            coeffs[name] = full
        bases = {f.name: group[f.group] for f in self.problem.fields}
        return SlabSolution(tuple(interval), bases, coeffs)

    def solve(self, interval, n_sub, traces, label: str = "slab") -> SlabSolution:
        b = self.rhs(interval, n_sub, traces)
        x = self.solver(interval, n_sub, label).solve(b)
        return self.expand(interval, n_sub, x)


def assemble_slab(problem: ProblemSpec, order: int, interval, n_sub, traces) -> SlabSystem:
    """One-off assembly of the slab system (no caching across calls)."""
    return SlabAssembler(problem, order).assemble(interval, n_sub, traces)


def solve_slab(system: SlabSystem, label: str = "slab") -> np.ndarray:
    """Solve an assembled slab system; returns the global coefficient vector."""
    return LUSolver(system.matrix, label).solve(system.rhs)


Observer = Callable[[int, SlabSolution], None]


def march(
    problem: ProblemSpec,
    hierarchy: TemporalHierarchy,
    order: int,
    observers: Iterable[Observer] = (),
    initial: Mapping[str, np.ndarray] | None = None,
    assembler: SlabAssembler | None = None,
) -> dict[str, np.ndarray]:
    """Solve slab after slab; returns the end-of-interval traces per field."""
    observers = list(observers)
    asm = assembler or SlabAssembler(problem, order)
    traces = dict(problem.zero_initial())
    traces.update(initial if initial is not None else problem.initial)
    for m in range(hierarchy.n_slabs):
        interval = hierarchy.slab(m)
        n_sub = hierarchy.sub_counts[m]
        try:
            sol = asm.solve(interval, n_sub, traces, label=f"slab {m}")
        except SingularSystemError as exc:
            raise SlabError(m, str(exc)) from exc
        for obs in observers:
            obs(m, sol)
        traces = {name: sol.end_trace(name) for name in sol.coefficients}
    return traces
