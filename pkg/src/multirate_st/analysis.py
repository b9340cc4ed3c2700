"""Error norms, goal functionals, convergence rates and CSV output.

Everything here is an *observer*: a callable ``obs(m, sol)`` that
``march`` invokes after each slab and that accumulates a running
integral.  Temporal integrals use Gauss points on each field's own
sub-elements, so dG jumps never sit inside a quadrature panel.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .spatial import FunctionSpace, volume_quadrature

__all__ = [
    "L2ErrorObserver",
    "EnergyQoI",
    "ConvergenceRow",
    "eoc",
    "fill_eoc",
    "format_float",
    "rows_to_csv",
    "EOC_UNDEFINED",
]

EOC_UNDEFINED = "undef"
TIME_RULES = ("gauss", "right", "midpoint")
REFERENCES = ("exact", "interpolant")


class L2ErrorObserver:
    """Accumulates ``||w_kh - w_ref||^2`` over ``I x Omega`` per field.

    ``spaces`` maps field names to their (scalar) spatial spaces;
    ``exact(x, t)`` returns a mapping with one array per field, broadcast
    over ``x`` of shape ``(nx,)`` (1D) or ``(nx, 2)`` and ``t`` of shape ``(nt, 1)``.

    ``reference="exact"`` compares with the analytic solution itself;
    ``reference="interpolant"`` compares with its nodal interpolant in
    space (still exact in time), which removes the spatial interpolation
    error from the measure.  ``time_rule`` selects Gauss points per
    sub-element or a one-point rule (``"right"``, ``"midpoint"``).
    """

    def __init__(self, spaces: Mapping[str, FunctionSpace], exact: Callable, time_points: int = 4,
                 space_points: int | None = None, time_rule: str = "gauss", reference: str = "exact"):
        if time_rule not in TIME_RULES:
            raise ValueError(f"time_rule must be one of {TIME_RULES}")
        if reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")
        self.exact = exact
        self.time_points = time_points
        self.time_rule = time_rule
        self.reference = reference
        self._quad = {}
        for name, space in spaces.items():
            if space.n_components != 1:
                raise ValueError(f"field {name!r}: only scalar spaces are supported")
            n = space_points or space.degree + 3
            q = volume_quadrature(space.mesh, n)
            V, _ = space.evaluation(q.points)
            pts = q.points if reference == "exact" else space.node_coordinates
            x = pts[:, 0] if space.mesh.dim == 1 else pts
            self._quad[name] = (sp.csr_matrix(V), q.weights, x)
        self.squared = {name: 0.0 for name in spaces}

    def __call__(self, m, sol):
        for name, (V, wx, x) in self._quad.items():
            basis = sol.bases[name]
            tq, wt = self._time_rule(basis)
            coeff = sol.evaluate(name, tq)  # (nt, ndofs)
            ref = np.asarray(self.exact(x, tq[:, None])[name], dtype=float)
            if self.reference == "interpolant":
                diff = (V @ (coeff - ref).T).T
            else:
                diff = (V @ coeff.T).T - ref
            self.squared[name] += float(wt @ (diff**2 @ wx))

    def _time_rule(self, basis):
        if self.time_rule == "gauss":
            tq, wt, _ = basis.quadrature(self.time_points)
            return tq, wt
        b = basis.breakpoints
        if self.time_rule == "right":
            return b[1:], np.diff(b)
        return 0.5 * (b[1:] + b[:-1]), np.diff(b)

    def eta(self, names: Sequence[str] | None = None) -> float:
        names = list(self.squared) if names is None else names
        return math.sqrt(sum(self.squared[n] for n in names))


class EnergyQoI:
    """``coeff * int_I w(t)^T A w(t) dt`` for a field ``w`` and a spatial matrix ``A``.

    With ``A`` the stiffness matrix this is ``coeff * ||grad w||^2`` over
    space-time.  Exact for dG(r) when ``time_points >= r + 1``.
    """

    def __init__(self, field: str, matrix: sp.spmatrix, coeff: float = 1.0, time_points: int = 3):
        self.field = field
        self.matrix = sp.csr_matrix(matrix)
        self.coeff = coeff
        self.time_points = time_points
        self.value = 0.0

    def __call__(self, m, sol):
        basis = sol.bases[self.field]
        tq, wt, _ = basis.quadrature(self.time_points)
        W = sol.evaluate(self.field, tq)  # (nt, ndofs)
        quad = np.einsum("ij,ij->i", W, (self.matrix @ W.T).T)
        self.value += self.coeff * float(wt @ quad)


def eoc(previous: float, current: float):
    """``log2(previous / current)``; ``EOC_UNDEFINED`` if either error is zero.

    Written as a difference of logs so swapping the arguments negates the
    result exactly.
    """
    if previous == 0.0 or current == 0.0:
        return EOC_UNDEFINED
    return math.log2(abs(previous)) - math.log2(abs(current))


@dataclass
class ConvergenceRow:
    """One line of a convergence table.

    ``values`` holds the measured quantities in column order, e.g.
    ``{"eta_f": .., "eta_s": .., "eta_total": ..}`` or ``{"qoi": .., "qoi_error": ..}``.
    ``key`` names the entry of ``values`` the EOC is computed from.
    """

    coarse: int
    elems: tuple[int, int]
    ratio: str
    values: dict[str, float] = field(default_factory=dict)
    key: str = "eta_total"
    eoc: float | str | None = None


def fill_eoc(rows: Sequence[ConvergenceRow]) -> list[ConvergenceRow]:
    """Fill ``eoc`` from consecutive rows (first row gets ``None``)."""
    rows = list(rows)
    for i, row in enumerate(rows):
        row.eoc = None if i == 0 else eoc(rows[i - 1].values[rows[i - 1].key], row.values[row.key])
    return rows


def format_float(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, str):
        return x
    return f"{x:.15g}"


def rows_to_csv(rows: Sequence[ConvergenceRow], columns: Sequence[str]) -> str:
    """Render rows with fixed ``columns``; the first four are the row
    metadata (coarse count, two element counts, ratio), the last is ``eoc``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        line = [str(r.coarse), str(r.elems[0]), str(r.elems[1]), r.ratio]
        line += [format_float(r.values[c]) for c in columns[4:-1]]
        line.append(format_float(r.eoc))
        w.writerow(line)
    return buf.getvalue()
