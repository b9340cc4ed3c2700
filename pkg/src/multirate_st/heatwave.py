"""Interface-coupled heat (fluid) and wave (solid) equations.

Fluid group: harmonic extension ``u_f`` and heat velocity ``v_f``.
Solid group: displacement ``u_s`` and velocity ``v_s``.  Interface
conditions are imposed weakly with a penalty on the fluid side; the
fluid's normal flux enters the solid equation as a Neumann datum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .slab import FieldSpec, ProblemSpec, Source, TermSpec
from .spatial import FunctionSpace, LoadAssembler, assemble_operator, build_mesh

__all__ = [
    "HeatWaveParams",
    "heatwave_terms",
    "manufactured_solution_1d",
    "manufactured_sources_1d",
    "config2_sources",
    "heatwave1d_problem",
    "heatwave2d_problem",
    "FLUID_FIELDS",
    "SOLID_FIELDS",
]

FLUID_FIELDS = ("uf", "vf")
SOLID_FIELDS = ("us", "vs")


@dataclass(frozen=True)
class HeatWaveParams:
    nu: float = 0.001
    beta: tuple[float, ...] = (0.0,)
    lam: float = 1000.0
    delta: float = 0.0
    gamma: float = 1000.0
    h: float = 1.0  # cell diameter in the penalty gamma / h

    def __post_init__(self):
        if not (self.nu > 0 and self.lam > 0 and self.gamma >= 0 and self.h > 0):
            raise ValueError("need nu, lam, h > 0 and gamma >= 0")
        if self.delta < 0:
            raise ValueError("damping delta must be non-negative")


def heatwave_terms(params: HeatWaveParams, fluid: FunctionSpace, solid: FunctionSpace,
                   fluid_marker: str = "interface", solid_marker: str = "interface") -> list[TermSpec]:
    """Term registry of the coupled weak form.

    Labels name the block each term belongs to (``A1``, ``A2``, ``B1``, ``B2``).
    No symmetric Nitsche consistency term is added.
    """
    nu, lam, delta, gamma, h = params.nu, params.lam, params.delta, params.gamma, params.h
    Mf = assemble_operator(fluid, fluid, "mass")
    Kf = assemble_operator(fluid, fluid, "stiffness")
    Cf = assemble_operator(fluid, fluid, "convection", beta=params.beta)
    Ms = assemble_operator(solid, solid, "mass")
    Ks = assemble_operator(solid, solid, "stiffness")
    iface = dict(row_marker=fluid_marker, col_marker=fluid_marker)
    Gff = assemble_operator(fluid, fluid, "interface_mass", **iface)
    Nff = assemble_operator(fluid, fluid, "interface_normal_derivative", **iface)
    Gfs = assemble_operator(fluid, solid, "interface_mass", row_marker=fluid_marker, col_marker=solid_marker)
    Nss = assemble_operator(solid, solid, "interface_normal_derivative",
                            row_marker=solid_marker, col_marker=solid_marker)
    Nsf = assemble_operator(solid, fluid, "interface_normal_derivative",
                            row_marker=solid_marker, col_marker=fluid_marker)
    return [
        # A1: heat equation for v_f and harmonic extension u_f
        TermSpec("vf", "vf", "dt_mass", Mf, 1.0, "A1 dt v_f"),
        TermSpec("vf", "vf", "mass", Kf, nu, "A1 nu grad v_f"),
        TermSpec("vf", "vf", "mass", Cf, 1.0, "A1 convection"),
        TermSpec("uf", "uf", "mass", Kf, 1.0, "A1 grad u_f"),
        TermSpec("vf", "vf", "mass", Nff, -nu, "A1 -nu dn v_f"),
        TermSpec("uf", "uf", "mass", Nff, -1.0, "A1 -dn u_f"),
        TermSpec("vf", "vf", "mass", Gff, gamma * nu / h, "A1 penalty v_f"),
        TermSpec("uf", "uf", "mass", Gff, gamma / h, "A1 penalty u_f"),
        TermSpec("vf", "vf", "jump_plus_initial", Mf, 1.0, "A1 jump v_f"),
        # A2: wave equation in first-order form
        TermSpec("vs", "vs", "dt_mass", Ms, 1.0, "A2 dt v_s"),
        TermSpec("vs", "us", "mass", Ks, lam, "A2 lam grad u_s"),
        TermSpec("vs", "vs", "mass", Ks, delta, "A2 delta grad v_s"),
        TermSpec("us", "us", "dt_mass", Ms, 1.0, "A2 dt u_s"),
        TermSpec("us", "vs", "mass", Ms, -1.0, "A2 -v_s"),
        TermSpec("vs", "vs", "mass", Nss, -delta, "A2 -delta dn v_s"),
        TermSpec("vs", "vs", "jump_plus_initial", Ms, 1.0, "A2 jump v_s"),
        TermSpec("us", "us", "jump_plus_initial", Ms, 1.0, "A2 jump u_s"),
        # B1: penalty coupling to the solid traces
        TermSpec("vf", "vs", "mass", Gfs, -gamma * nu / h, "B1 penalty v_s"),
        TermSpec("uf", "us", "mass", Gfs, -gamma / h, "B1 penalty u_s"),
        # B2: fluid flux into the solid
        TermSpec("vs", "vf", "mass", Nsf, nu, "B2 nu dn v_f"),
    ]


def manufactured_solution_1d(x, t, nu: float = 0.001, lam: float = 1000.0) -> dict[str, np.ndarray]:
    """Exact fields and sources of the 1+1D test.

    ``x`` may mix fluid (x <= 2) and solid (x >= 2) points; each entry is
    evaluated by its own formula regardless, callers pick the subdomain.
    The fluid velocity is not the time derivative of ``u_f``: the fluid
    group imposes no such relation.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    cs = np.cos(np.pi * (x - 2) / 2)
    sf = np.sin(np.pi * x / 4)
    return {
        "us": t**2 * cs,
        "vs": 2 * t * cs,
        "uf": t**2 * x / 2,
        "vf": 2 * t * sf,
        "gs": 2 * cs + np.pi**2 * t**2 * lam * cs / 4,
        "gf": 2 * sf + np.pi**2 * t * nu * sf / 8,
    }


def manufactured_sources_1d(fluid: FunctionSpace, solid: FunctionSpace, nu: float, lam: float) -> list[Source]:
    lf, ls = LoadAssembler(fluid), LoadAssembler(solid)
    xf, xs = lf.points[:, 0], ls.points[:, 0]
    # both sources are affine in a power of t: g = a(x) + t^p b(x)
    sin_f = lf(np.sin(np.pi * xf / 4))
    cos_s = ls(np.cos(np.pi * (xs - 2) / 2))

    def g_f(t):
        return (2.0 + np.pi**2 * t * nu / 8) * sin_f

    def g_s(t):
        return (2.0 + np.pi**2 * t**2 * lam / 4) * cos_s

    return [Source("vf", g_f), Source("vs", g_s)]


CUTOFF = 0.1


def config2_sources(variant: str):
    """Pointwise sources ``(g_f, g_s)`` of the 2D configurations.

    ``fluid_source``: Gaussian centred at (1/2, 1/2) in the fluid while
    ``t <= 0.1``; ``solid_source``: the same centred at (1/2, -1/2) in the solid.
    """
    if variant not in ("fluid_source", "solid_source"):
        raise ValueError(f"unknown variant {variant!r}")
    cy = 0.5 if variant == "fluid_source" else -0.5

    def bump(x, t):
        x = np.atleast_2d(x)
        on = np.asarray(t) <= CUTOFF
        return np.exp(-((x[:, 0] - 0.5) ** 2 + (x[:, 1] - cy) ** 2)) * on

    def zero(x, t):
        return np.zeros(np.atleast_2d(x).shape[0])

    return (bump, zero) if variant == "fluid_source" else (zero, bump)


def _fields(fluid, solid, fluid_dirichlet, solid_dirichlet):
    cf = np.unique(np.concatenate([fluid.boundary_dofs(m) for m in fluid_dirichlet] or [np.zeros(0, int)]))
    cs = np.unique(np.concatenate([solid.boundary_dofs(m) for m in solid_dirichlet] or [np.zeros(0, int)]))
    return [
        FieldSpec("uf", 0, fluid, cf),
        FieldSpec("vf", 0, fluid, cf),
        FieldSpec("us", 1, solid, cs),
        FieldSpec("vs", 1, solid, cs),
    ]


def heatwave1d_problem(cells_fluid: int = 50, cells_solid: int = 50, gamma: float = 1000.0,
                       nu: float = 0.001, lam: float = 1000.0) -> ProblemSpec:
    """1+1D manufactured-solution test on (0, 2) | (2, 4), T = 4."""
    fm = build_mesh(0.0, 2.0, cells_fluid, names={"left": "dirichlet", "right": "interface"})
    sm = build_mesh(2.0, 4.0, cells_solid, names={"left": "interface", "right": "neumann"})
    fluid, solid = FunctionSpace(fm, 1), FunctionSpace(sm, 1)
    params = HeatWaveParams(nu=nu, beta=(0.0,), lam=lam, delta=0.0, gamma=gamma, h=fm.cell_diameter)
    problem = ProblemSpec(
        name="heatwave1d",
        T=4.0,
        fields=_fields(fluid, solid, ["dirichlet"], []),
        terms=heatwave_terms(params, fluid, solid),
        sources=manufactured_sources_1d(fluid, solid, nu, lam),
        group_names=("fluid", "solid"),
        time_quadrature=3,
    )
    problem.extras.update(params=params, fluid=fluid, solid=solid,
                          exact=lambda x, t: manufactured_solution_1d(x, t, nu, lam))
    return problem


def heatwave2d_problem(variant: str, cells_x: int = 80, cells_y: int = 10, gamma: float = 1000.0) -> ProblemSpec:
    """2+1D configurations on (0,4)x(0,1) | (0,4)x(-1,0), T = 1.

    ``cells_x`` x ``cells_y`` is the grid of *each* subdomain; the default
    80 x 10 per side makes an 80 x 20 grid over the whole rectangle.
    """
    fm = build_mesh((0.0, 0.0), (4.0, 1.0), (cells_x, cells_y),
                    names={"top": "dirichlet", "bottom": "interface"})
    sm = build_mesh((0.0, -1.0), (4.0, 0.0), (cells_x, cells_y),
                    names={"top": "interface", "left": "dirichlet_left", "right": "dirichlet_right"})
    fluid, solid = FunctionSpace(fm, 1), FunctionSpace(sm, 1)
    params = HeatWaveParams(nu=0.001, beta=(2.0, 0.0), lam=1000.0, delta=0.1, gamma=gamma, h=fm.cell_diameter)
    g_f, g_s = config2_sources(variant)
    sources = []
    for name, space, g in (("vf", fluid, g_f), ("vs", solid, g_s)):
        shape = LoadAssembler(space)(lambda x, g=g: g(x, 0.0))
        if np.any(shape):
            sources.append(Source(name, lambda t, v=shape: v * (t <= CUTOFF), discontinuities=(CUTOFF,)))
    problem = ProblemSpec(
        name=f"heatwave2d_{variant.split('_')[0]}",
        T=1.0,
        fields=_fields(fluid, solid, ["dirichlet"], ["dirichlet_left", "dirichlet_right"]),
        terms=heatwave_terms(params, fluid, solid),
        sources=sources,
        group_names=("fluid", "solid"),
        time_quadrature=3,
    )
    problem.extras.update(params=params, fluid=fluid, solid=solid, variant=variant)
    return problem
