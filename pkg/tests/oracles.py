"""Independent single-rate oracles.

Each problem is written out by hand as a semi-discrete system
``M X' + A X = F(t)`` on the free DoFs, then marched with a minimal
dG(0) (backward Euler with the load averaged over the step) or dG(1)
(endpoint-Lagrange) stepper.  Nothing here goes through the term
registry, restriction matrices or the slab assembler.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from multirate_st.spatial import assemble_operator, assemble_traction_vector

GAUSS5 = np.polynomial.legendre.leggauss(5)


class SemiDiscrete:
    def __init__(self, names, sizes, M, A, load, free):
        self.names = names
        self.sizes = sizes
        self.M = sp.csr_matrix(M)
        self.A = sp.csr_matrix(A)
        self.load = load  # t -> full-length vector over all fields
        self.free = free  # global indices kept
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])

    def reduce(self, X):
        return sp.csr_matrix(X)[self.free][:, self.free]

    def split(self, x_free):
        full = np.zeros(self.offsets[-1])
        full[self.free] = x_free
        return {n: full[self.offsets[i]:self.offsets[i + 1]] for i, n in enumerate(self.names)}


def _integrate(f, a, b, weight=lambda t: 1.0, cut=None):
    """Gauss-Legendre on [a, b], split at ``cut`` if it lies inside."""
    pieces = [(a, b)] if cut is None or not (a < cut < b) else [(a, cut), (cut, b)]
    x, w = GAUSS5
    out = 0.0
    for lo, hi in pieces:
        t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        for tj, wj in zip(t, 0.5 * (hi - lo) * w):
            out = out + wj * weight(tj) * f(tj)
    return out


class DenseSolver:
    """Dense LU of a row/column max-scaled copy, plus two steps of
    iterative refinement.  The Biot system mixes entries across ~20 orders
    of magnitude, and dense partial pivoting on the coupled heat-wave dG(1)
    systems leaves componentwise backward errors near 1e-4 without
    refinement."""

    def __init__(self, S):
        self.S = sp.csr_matrix(S)
        D = self.S.toarray()
        self.r = 1.0 / np.abs(D).max(axis=1)
        D = D * self.r[:, None]
        self.c = 1.0 / np.abs(D).max(axis=0)
        self.lu = sla.lu_factor(D * self.c)

    def _solve(self, b):
        return self.c * sla.lu_solve(self.lu, self.r * b)

    def solve(self, b):
        x = self._solve(b)
        for _ in range(2):
            x = x + self._solve(b - self.S @ x)
        return x


def march_single_rate(sd: SemiDiscrete, T: float, n_steps: int, order: int, cut=None):
    """End-of-step states (free DoFs) of the single-rate dG(order) scheme."""
    M, A = sd.reduce(sd.M), sd.reduce(sd.A)
    load = lambda t: sd.load(t)[sd.free]
    x = np.zeros(sd.free.size)
    k = T / n_steps
    out = []
    if order == 0:
        lu = DenseSolver(M + k * A)
        for n in range(n_steps):
            a, b = n * k, (n + 1) * k
            x = lu.solve(M @ x + _integrate(load, a, b, cut=cut))
            out.append(x)
        return out
    # dG(1) with nodal values at the step ends: unknowns (x_a, x_b)
    Dt = np.array([[-0.5, 0.5], [-0.5, 0.5]])
    J = np.array([[1.0, 0.0], [0.0, 0.0]])
    Mt = k / 6 * np.array([[2.0, 1.0], [1.0, 2.0]])
    S = sp.kron(sp.csr_matrix(Dt + J), M) + sp.kron(sp.csr_matrix(Mt), A)
    lu = DenseSolver(S)
    nf = sd.free.size
    for n in range(n_steps):
        a, b = n * k, (n + 1) * k
        fa = _integrate(load, a, b, weight=lambda t: (b - t) / k, cut=cut)
        fb = _integrate(load, a, b, weight=lambda t: (t - a) / k, cut=cut)
        y = lu.solve(np.concatenate([M @ x + fa, fb]))
        x = y[nf:]
        out.append(x)
    return out


def heatwave_semidiscrete(problem) -> SemiDiscrete:
    """Unknown order ``(uf, vf, us, vs)``; blocks transcribed from the weak form."""
    ex = problem.extras
    p = ex["params"]
    F, S = ex["fluid"], ex["solid"]
    op = assemble_operator
    Mf, Kf = op(F, F, "mass"), op(F, F, "stiffness")
    Cf = op(F, F, "convection", beta=p.beta)
    Ms, Ks = op(S, S, "mass"), op(S, S, "stiffness")
    Gff = op(F, F, "interface_mass", row_marker="interface", col_marker="interface")
    Nff = op(F, F, "interface_normal_derivative", row_marker="interface", col_marker="interface")
    Gfs = op(F, S, "interface_mass", row_marker="interface", col_marker="interface")
    Nss = op(S, S, "interface_normal_derivative", row_marker="interface", col_marker="interface")
    Nsf = op(S, F, "interface_normal_derivative", row_marker="interface", col_marker="interface")
    g, nu, h = p.gamma, p.nu, p.h
    Zf, Zs, Zfs, Zsf = (sp.csr_matrix(s) for s in ((F.ndofs,) * 2, (S.ndofs,) * 2,
                                                   (F.ndofs, S.ndofs), (S.ndofs, F.ndofs)))
    M = sp.block_diag([Zf, Mf, Ms, Ms])
    A = sp.bmat([
        [Kf - Nff + g / h * Gff, Zf, -g / h * Gfs, Zfs],
        [Zf, nu * Kf + Cf - nu * Nff + g * nu / h * Gff, Zfs, -g * nu / h * Gfs],
        [Zsf, Zsf, Zs, -Ms],
        [Zsf, nu * Nsf, p.lam * Ks, p.delta * Ks - p.delta * Nss],
    ])
    sizes = [F.ndofs, F.ndofs, S.ndofs, S.ndofs]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    names = ["uf", "vf", "us", "vs"]
    free = np.concatenate([offs[i] + problem.field(n).free for i, n in enumerate(names)])
    slot = {"vf": 1, "vs": 3}

    def load(t):
        out = np.zeros(offs[-1])
        for s in problem.sources:
            i = slot[s.field]
            out[offs[i]:offs[i + 1]] += s.load(t)
        return out

    return SemiDiscrete(names, sizes, M, A, load, free)


def mandel_semidiscrete(problem) -> SemiDiscrete:
    """Unknown order ``(u, p)``: quasi-static elasticity and storage/flow."""
    ex = problem.extras
    p = ex["params"]
    U, P = ex["u_space"], ex["p_space"]
    Sigma = assemble_operator(U, U, "elasticity", mu=p.mu, lam=p.lam)
    Bup = assemble_operator(U, P, "pressure_gradient_coupling", alpha=p.alpha, marker="top")
    Bpu = assemble_operator(P, U, "divergence_coupling", alpha=p.alpha)
    Mp, Kp = assemble_operator(P, P, "mass"), assemble_operator(P, P, "stiffness")
    Zu, Zp = sp.csr_matrix((U.ndofs, U.ndofs)), sp.csr_matrix((U.ndofs, P.ndofs))
    M = sp.bmat([[Zu, Zp], [Bpu, p.c * Mp]])
    A = sp.bmat([[Sigma, Bup], [Zp.T, p.K / p.nu * Kp]])
    Fu = assemble_traction_vector(U, "top", (0.0, -p.traction))
    free = np.concatenate([problem.field("u").free, U.ndofs + problem.field("p").free])
    return SemiDiscrete(["u", "p"], [U.ndofs, P.ndofs], M, A,
                        lambda t: np.concatenate([Fu, np.zeros(P.ndofs)]), free)


def brute_temporal(row, col, kind, slab):
    """Mixed-basis temporal matrix by direct quadrature on the union of
    both sub-element sets (no restriction matrices involved)."""
    bps = np.union1d(row.breakpoints, col.breakpoints)
    x, w = np.polynomial.legendre.leggauss(4)
    out = np.zeros((row.ndofs, col.ndofs))
    for a, b in zip(bps[:-1], bps[1:]):
        t = 0.5 * (b - a) * x + 0.5 * (a + b)
        wt = 0.5 * (b - a) * w
        pr = row.evaluate(t)
        pc = col.evaluate(t, derivative=(kind == "dt_mass"))
        if kind in ("mass", "dt_mass"):
            out += (pr * wt) @ pc.T
    if kind == "jump_plus_initial":
        # (u(t0+), phi(t0+)) plus the jumps of u at interior breakpoints
        out += np.outer(row.evaluate(slab[0], element=0)[:, 0], col.evaluate(slab[0], element=0)[:, 0])
        for t in bps[1:-1]:
            er = int(np.searchsorted(row.breakpoints, t, side="right") - 1)
            ec = int(np.searchsorted(col.breakpoints, t, side="right") - 1)
            ec_left = int(np.searchsorted(col.breakpoints, t, side="left") - 1)
            jump = col.evaluate(t, element=ec)[:, 0] - col.evaluate(t, element=ec_left)[:, 0]
            out += np.outer(row.evaluate(t, element=er)[:, 0], jump)
    return out
