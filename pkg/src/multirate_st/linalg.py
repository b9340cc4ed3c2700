"""Sparse kernels shared by the slab assembler: Kronecker products, block
layouts and a direct LU solve (SuperLU through scipy)."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["SingularSystemError", "BlockLayout", "kron", "LUSolver", "lu_solve", "RESIDUAL_TOL"]

RESIDUAL_TOL = 1e-10


class SingularSystemError(RuntimeError):
    """The LU factorization met a zero pivot or the solve lost accuracy."""


def kron(A, B) -> sp.csr_matrix:
    """``A ⊗ B`` with ``A`` a small dense (temporal) matrix and ``B`` sparse."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return sp.kron(sp.csr_matrix(A), sp.csr_matrix(B), format="csr")


@dataclass(frozen=True)
class BlockLayout:
    """Global numbering ``(field, time dof, space dof) -> index``.

    Blocks are stored field after field; within a field the temporal DoF
    is the slow index, matching ``kron(temporal, spatial)``.
    """

    blocks: tuple[tuple[str, int, int], ...]

    @property
    def offsets(self) -> dict[str, int]:
        out, pos = {}, 0
        for name, nt, ns in self.blocks:
            out[name] = pos
            pos += nt * ns
        return out

    @property
    def size(self) -> int:
        return sum(nt * ns for _, nt, ns in self.blocks)

    def shape_of(self, name: str) -> tuple[int, int]:
        for n, nt, ns in self.blocks:
            if n == name:
                return nt, ns
        raise KeyError(name)

    def slice_of(self, name: str) -> slice:
        start = self.offsets[name]
        nt, ns = self.shape_of(name)
        return slice(start, start + nt * ns)

    def index(self, name: str, time_dof: int, space_dof: int) -> int:
        nt, ns = self.shape_of(name)
        if not (0 <= time_dof < nt and 0 <= space_dof < ns):
            raise IndexError((name, time_dof, space_dof))
        return self.offsets[name] + time_dof * ns + space_dof

    def split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """View a global vector as ``{field: (n_time, n_space)}`` arrays."""
        return {n: x[self.slice_of(n)].reshape(nt, ns) for n, nt, ns in self.blocks}


class LUSolver:
    """Factor once, solve many right-hand sides.

    Rows and then columns are scaled to unit max-norm before factoring.
    Coupled slab systems mix rows of very different magnitude (elasticity
    against storage terms), and unscaled partial pivoting loses the small
    rows.  COLAMD ordering keeps repeated runs bit-identical.
    """

    def __init__(self, A: sp.spmatrix, label: str = "system"):
        A = sp.csr_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"{label}: matrix must be square, got {A.shape}")
        self.A = A
        self.label = label
        absA = abs(A)
        r = np.asarray(absA.max(axis=1).todense()).ravel()
        if np.any(r == 0):
            raise SingularSystemError(f"{label}: zero row {int(np.flatnonzero(r == 0)[0])}")
        self._row = 1.0 / r
        c = np.asarray((sp.diags(self._row) @ absA).max(axis=0).todense()).ravel()
        if np.any(c == 0):
            raise SingularSystemError(f"{label}: zero column {int(np.flatnonzero(c == 0)[0])}")
        self._col = 1.0 / c
        scaled = (sp.diags(self._row) @ A @ sp.diags(self._col)).tocsc()
        with warnings.catch_warnings():
            warnings.simplefilter("error", category=spla.MatrixRankWarning)
            try:
                self._lu = spla.splu(scaled, permc_spec="COLAMD")
            except (RuntimeError, spla.MatrixRankWarning) as exc:
                raise SingularSystemError(f"{label}: singular matrix ({exc})") from exc

    def _solve(self, b):
        return self._col * self._lu.solve(self._row * b)

    def residual(self, x: np.ndarray, b: np.ndarray) -> tuple[float, float]:
        """Global ``|Ax-b|/|b|`` and the componentwise backward error
        ``max_i |Ax-b|_i / (|A||x| + |b|)_i``."""
        r = np.abs(self.A @ x - b)
        bn = np.max(np.abs(b))
        glob = np.max(r) / bn if bn > 0 else np.max(r)
        scale = abs(self.A) @ np.abs(x) + np.abs(b)
        comp = np.max(np.divide(r, scale, out=np.zeros_like(r), where=scale > 0))
        return float(glob), float(comp)

    def solve(self, b: np.ndarray, check: bool = True) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x = self._solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularSystemError(f"{self.label}: non-finite solution")
        if check and np.any(b):
            res = max(self.residual(x, b))
            if res >= RESIDUAL_TOL:
                # one step of iterative refinement before giving up
                x = x + self._solve(b - self.A @ x)
                res = max(self.residual(x, b))
            if res >= RESIDUAL_TOL:
                raise SingularSystemError(f"{self.label}: relative residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
        return x


def lu_solve(A: sp.spmatrix, b: np.ndarray, label: str = "system") -> np.ndarray:
    return LUSolver(A, label).solve(b)
