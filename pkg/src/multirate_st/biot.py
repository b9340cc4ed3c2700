"""Volume-coupled Biot poroelasticity and Mandel's benchmark.

Displacement ``u`` (vector Q2, temporal group 0) and pressure ``p``
(scalar Q1, group 1) live on one mesh.  The displacement equation is
quasi-static, so it carries no temporal derivative or jump of its own.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .slab import FieldSpec, ProblemSpec, Source, TermSpec
from .spatial import (
    FunctionSpace,
    assemble_operator,
    assemble_traction_vector,
    build_mesh,
    side_quadrature,
    volume_quadrature,
)

__all__ = ["BiotParams", "MANDEL", "biot_terms", "mandel_problem", "BottomPressureQoI", "PressureProbe"]


@dataclass(frozen=True)
class BiotParams:
    M: float = 1.75e7
    alpha: float = 1.0
    nu: float = 1e-3
    K: float = 1e-13
    rho: float = 1.0
    traction: float = 1e7
    mu: float = 1e8
    lam: float = 2e8 / 3
    g: tuple[float, float] = (0.0, 0.0)
    T: float = 5e6

    def __post_init__(self):
        if not (self.M > 0 and self.nu > 0 and self.K > 0 and self.mu > 0):
            raise ValueError("need M, nu, K, mu > 0")

    @property
    def c(self) -> float:
        return 1.0 / self.M


MANDEL = BiotParams()


def biot_terms(params: BiotParams, u_space: FunctionSpace, p_space: FunctionSpace,
               top_marker: str = "top") -> list[TermSpec]:
    """Term registry of the Biot weak form, labelled by block."""
    Sigma = assemble_operator(u_space, u_space, "elasticity", mu=params.mu, lam=params.lam)
    Mp = assemble_operator(p_space, p_space, "mass")
    Kp = assemble_operator(p_space, p_space, "stiffness")
    Bup = assemble_operator(u_space, p_space, "pressure_gradient_coupling", alpha=params.alpha, marker=top_marker)
    Bpu = assemble_operator(p_space, u_space, "divergence_coupling", alpha=params.alpha)
    return [
        TermSpec("u", "u", "mass", Sigma, 1.0, "A1 elasticity"),
        TermSpec("p", "p", "dt_mass", Mp, params.c, "A2 c dt p"),
        TermSpec("p", "p", "mass", Kp, params.K / params.nu, "A2 K/nu grad p"),
        TermSpec("p", "p", "jump_plus_initial", Mp, params.c, "A2 c jump p"),
        TermSpec("u", "p", "mass", Bup, 1.0, "B1 -alpha p div + top trace"),
        TermSpec("p", "u", "dt_mass", Bpu, 1.0, "B2 alpha dt div u"),
        TermSpec("p", "u", "jump_plus_initial", Bpu, 1.0, "B2 alpha jump div u"),
    ]


def mandel_problem(cells: tuple[int, int] = (16, 16), params: BiotParams = MANDEL) -> ProblemSpec:
    """Mandel's problem on (0, 100) x (0, 20) with zero initial data."""
    mesh = build_mesh((0.0, 0.0), (100.0, 20.0), cells)
    u_space = FunctionSpace(mesh, 2, n_components=2)
    p_space = FunctionSpace(mesh, 1)
    u_fixed = np.union1d(u_space.boundary_dofs("bottom", component=1), u_space.boundary_dofs("left", component=0))
    p_fixed = p_space.boundary_dofs("right")
    F = assemble_traction_vector(u_space, "top", (0.0, -params.traction))
    sources = [Source("u", lambda t, F=F: F)]
    if np.any(params.g):
        q = _gravity_load(p_space, params)
        sources.append(Source("p", lambda t, q=q: q))
    problem = ProblemSpec(
        name="mandel",
        T=params.T,
        fields=[FieldSpec("u", 0, u_space, u_fixed), FieldSpec("p", 1, p_space, p_fixed)],
        terms=biot_terms(params, u_space, p_space),
        sources=sources,
        group_names=("u", "p"),
        time_quadrature=2,
    )
    problem.extras.update(params=params, u_space=u_space, p_space=p_space, traction_vector=F)
    return problem


def _gravity_load(p_space: FunctionSpace, params: BiotParams) -> np.ndarray:
    # (K rho / nu) (g, grad phi_p) for a constant body-force direction g
    q = volume_quadrature(p_space.mesh, p_space.degree + 1)
    _, G = p_space.evaluation(q.points)
    out = sum(params.g[d] * (G[d].T @ q.weights) for d in range(2))
    return params.K * params.rho / params.nu * out


class BottomPressureQoI:
    """Running value of ``int_I int_{Gamma_bottom} p dx dt``."""

    def __init__(self, p_space: FunctionSpace, marker: str = "bottom", field: str = "p"):
        q = side_quadrature(p_space.mesh, marker, p_space.degree + 1)
        V, _ = p_space.evaluation(q.points)
        self.weights = V.T @ q.weights
        self.field = field
        self.value = 0.0

    def __call__(self, m, sol):
        basis = sol.bases[self.field]
        tq, wq, _ = basis.quadrature(basis.order + 1)
        p_t = sol.evaluate(self.field, tq)  # (nq, ndofs)
        self.value += float(wq @ (p_t @ self.weights))


class PressureProbe:
    """Records the pressure at one node at the end of every pressure sub-element."""

    def __init__(self, p_space: FunctionSpace, point=(0.0, 0.0), field: str = "p"):
        d = np.linalg.norm(p_space.node_coordinates - np.asarray(point), axis=1)
        self.node = int(np.argmin(d))
        self.field = field
        self.times: list[float] = []
        self.values: list[float] = []

    def __call__(self, m, sol):
        basis = sol.bases[self.field]
        c = sol.coefficients[self.field]
        for e in range(basis.n_elements):
            t = basis.breakpoints[e + 1]
            vals = basis.evaluate(t, element=e)[:, 0]
            self.times.append(float(t))
            self.values.append(float(vals @ c[:, self.node]))
