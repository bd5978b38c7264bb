"""Assemble a complete cavity problem and its skeleton machinery.

``build_problem`` wires the whole chain: mesh, partition, skeleton index,
per-subdomain forms, impedance blocks, boundary condition, exchange and
scattering operators.  Everything is immutable after construction and
safe to share across threads for read-only application.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .assembly import Coefficients, LoadTuple, LocalForms
from .boundary_conditions import (BoundaryCondition, gamma_d_positions_from_tags,
                                  make_boundary_condition)
from .geometry import (Mesh, Partition, SkeletonIndex, build_rect_mesh,
                       partition_checkerboard, skeleton_index, tag_boundary)
from .impedance import (BlockImpedance, DtnBlock, boundary_h1_impedance,
                        boundary_mass, collar_impedance)
from .skeleton import ExchangeOperator, LocalImpedanceSolver, ScatteringOperator

__all__ = [
    "Problem",
    "build_problem",
    "monolithic_matrix",
    "monolithic_rhs",
    "solve_monolithic",
    "make_load",
    "h1_norm",
    "side_tagger",
]

_SIDES = ("left", "right", "bottom", "top")


def side_tagger(sides, width: float, height: float):
    """Predicate tagging edges on the listed rectangle sides 'D', others 'N'."""
    sides = tuple(sides)
    for s in sides:
        if s not in _SIDES:
            raise ValueError(f"unknown side {s!r}, expected one of {_SIDES}")
    tolx, toly = 1e-12 * max(width, 1.0), 1e-12 * max(height, 1.0)

    def tag(x, y):
        on = (("left" in sides and abs(x) < tolx)
              or ("right" in sides and abs(x - width) < tolx)
              or ("bottom" in sides and abs(y) < toly)
              or ("top" in sides and abs(y - height) < toly))
        return "D" if on else "N"

    return tag


@dataclass
class Problem:
    """All assembled operators of one cavity configuration."""

    mesh: Mesh
    partition: Partition
    index: SkeletonIndex
    coeffs: Coefficients
    bc: BoundaryCondition
    forms: tuple
    global_forms: LocalForms = field(repr=False)
    dtn: tuple = field(repr=False)
    impedance: BlockImpedance = field(repr=False)
    gamma_mass: np.ndarray = field(repr=False)
    exchange: ExchangeOperator = field(repr=False)
    solver: LocalImpedanceSolver = field(repr=False)
    scattering: ScatteringOperator = field(repr=False)
    tgamma_kind: str = "collar"

    @property
    def num_subdomains(self) -> int:
        return self.partition.num_subdomains

    @property
    def n_interior(self):
        return tuple(lf.n_interior for lf in self.forms)

    @property
    def omega_sizes(self):
        return tuple(lf.n_dofs for lf in self.forms)

    @property
    def block_sizes(self):
        return self.index.block_sizes

    @property
    def dual_dim(self) -> int:
        return self.impedance.total

    @property
    def n_gamma(self) -> int:
        return len(self.partition.gamma_dofs)


def build_problem(nx: int, ny: int, px: int = 2, py: int = 2, *,
                  width: float = 1.0, height: float = 1.0,
                  k: float = 5.0, mu: complex = 1.0, kappa_sq=None, gamma=None,
                  bc_kind: str = "robin", lambda_scale: float = 1.0,
                  gamma_d_sides=("left", "bottom"), g_d=None, g_n=None,
                  tgamma: str = "collar", rcond_floor: float = 1e-12) -> Problem:
    """Build every operator of a cavity configuration.

    Defaults follow the reference setup: unit square, robin condition with
    impedance k times the boundary mass, gamma = 1/k, exterior-collar
    surrogate for the outer impedance.
    """
    coeffs = Coefficients(k=k, mu=mu, kappa_sq=kappa_sq, gamma=gamma)
    mesh = build_rect_mesh(nx, ny, width, height)
    if bc_kind == "mixed":
        mesh = tag_boundary(mesh, side_tagger(gamma_d_sides, width, height),
                            require_mixed=True)
    partition = partition_checkerboard(mesh, px, py)
    index = skeleton_index(partition)

    forms, global_forms = assembly.assemble_forms(mesh, partition, coeffs)
    dtn = tuple(DtnBlock(lf) for lf in forms)

    if tgamma == "collar":
        t_gamma = collar_impedance(mesh, partition.gamma_dofs, coeffs.gamma)
    elif tgamma == "boundary_h1":
        t_gamma = boundary_h1_impedance(mesh, partition.gamma_dofs, coeffs.gamma)
    else:
        raise ValueError(f"unknown tgamma surrogate {tgamma!r}")

    impedance = BlockImpedance([t_gamma] + [d.T for d in dtn])
    m_gamma = boundary_mass(mesh, partition.gamma_dofs)

    lam = None
    gamma_d_positions = None
    if bc_kind == "robin":
        lam = lambda_scale * k * m_gamma
    elif bc_kind == "mixed":
        gamma_d_positions = gamma_d_positions_from_tags(mesh, partition.gamma_dofs)
    bc = make_boundary_condition(bc_kind, t_gamma, lam=lam,
                                 gamma_d_positions=gamma_d_positions,
                                 g_d=g_d, g_n=g_n)

    exchange = ExchangeOperator(index, impedance)
    solver = LocalImpedanceSolver(forms, impedance, bc, rcond_floor=rcond_floor)
    scattering = ScatteringOperator(solver, impedance, bc)

    return Problem(mesh, partition, index, coeffs, bc, forms, global_forms,
                   dtn, impedance, m_gamma, exchange, solver, scattering,
                   tgamma_kind=tgamma)


def make_load(problem: Problem, f=0.0, gamma_pair=None) -> LoadTuple:
    """Right-hand side from a volume source plus the boundary data of the bc.

    ``gamma_pair`` overrides the boundary functionals directly (used by
    tests); otherwise they come from the condition's stored data.
    """
    load = assembly.assemble_load(problem.mesh, problem.partition, f)
    if gamma_pair is not None:
        ga = (np.asarray(gamma_pair[0], complex), np.asarray(gamma_pair[1], complex))
    else:
        ga = problem.bc.load_pair(problem.n_gamma)
    return LoadTuple(ga, load.omega)


def monolithic_matrix(problem: Problem) -> sp.csc_matrix:
    """Direct assembly of the cavity operator over (volume, multiplier)."""
    return assembly.assemble_primary(problem.mesh, problem.coeffs, problem.bc,
                                     problem.partition.gamma_dofs)


def monolithic_rhs(problem: Problem, load: LoadTuple) -> np.ndarray:
    """Fold a block load into the monolithic right-hand side."""
    from .geometry import local_dofs

    nv = problem.mesh.num_vertices
    rhs = np.zeros(nv + problem.n_gamma, complex)
    np.add.at(rhs[:nv], problem.partition.gamma_dofs, load.gamma[0])
    for j, block in enumerate(load.omega):
        np.add.at(rhs[:nv], local_dofs(problem.partition, j), block)
    rhs[nv:] = load.gamma[1]
    return rhs


def solve_monolithic(problem: Problem, load: LoadTuple):
    """Direct sparse solve of the monolithic system; returns (u, p)."""
    A = monolithic_matrix(problem)
    rhs = monolithic_rhs(problem, load)
    sol = spla.spsolve(A, rhs)
    nv = problem.mesh.num_vertices
    return sol[:nv], sol[nv:]


def h1_norm(problem: Problem, u: np.ndarray) -> float:
    """Gamma-weighted H1 norm of a global volume vector."""
    H = problem.global_forms.H
    return float(np.sqrt(np.real(np.conj(u) @ (H @ u))))
