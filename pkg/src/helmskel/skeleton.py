"""Exchange operator, scattering operator and the skeleton system.

The cavity problem is recast as an equation for a tuple q of outgoing
Robin traces on the skeleton: (Id + Pi S) q = f.  S solves the impedance
problem of each block independently and flips incoming to outgoing
traces; Pi is the non-local exchange operator, a reflection across the
single-trace subspace in the inverse-impedance metric.  Pi couples every
block meeting a skeleton dof at once, which is exactly what makes cross
points unproblematic here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import SkeletonIndex
from .impedance import BlockImpedance
from .traces import (SkeletonField, VolumeTuple, harmonic_lift, lift_adjoint,
                     single_trace_adjoint, single_trace_embed, trace_adjoint,
                     trace_apply)

__all__ = [
    "AssumptionViolation",
    "ExchangeOperator",
    "LocalImpedanceSolver",
    "ScatteringOperator",
    "CauchyPair",
    "RecoveredSolution",
    "apply_A",
    "skeleton_apply",
    "skeleton_rhs",
    "recover_volume",
    "cauchy_decompose",
    "kernel_lift",
    "cauchy_pair_from",
    "cauchy_membership_residual",
]


class AssumptionViolation(RuntimeError):
    """A local impedance problem is numerically singular.

    The theory requires every block operator A_b - i B_b^T T_b B_b to be
    invertible.  Discretely this can fail for unlucky coefficient choices;
    the failure must be loud, with a hint at which knobs to turn.
    """


class ExchangeOperator:
    """Reflection across the impedance image of the single-trace space.

    With E the single-trace embedding and G = E^T T E, the projection is
    Q q = T E G^-1 E^T q and the exchange operator is Pi = 2Q - Id.  Pi is
    an involution and an isometry for the T^-1 norm; it fixes tuples of
    matching Neumann data and negates tuples of opposite Neumann jumps.
    Applying it costs one SPD solve with the prefactored G.
    """

    def __init__(self, index: SkeletonIndex, impedance: BlockImpedance):
        self.index = index
        self.impedance = impedance
        n = index.n_sigma
        G = np.zeros((n, n))
        for m, T in zip(index.block_map, impedance.blocks):
            G[np.ix_(m, m)] += T
        self.G = G
        self._chol_g = sla.cho_factor(G, lower=True)

    def project(self, q: SkeletonField) -> SkeletonField:
        """Q q: the T^-1-orthogonal projection onto T(single-trace space)."""
        if q.kind != "dual":
            raise ValueError("exchange operator acts on dual fields")
        y = single_trace_adjoint(q, self.index)
        x = sla.cho_solve(self._chol_g, y)
        return self.impedance.apply(single_trace_embed(x, self.index))

    def apply(self, q: SkeletonField) -> SkeletonField:
        """Pi q = 2 Q q - q."""
        return 2.0 * self.project(q) - q


def _estimate_rcond(C: sp.spmatrix, lu) -> float:
    """1-norm reciprocal condition estimate of a factored sparse matrix."""
    norm_c = float(abs(C).sum(axis=0).max())
    inv_op = spla.LinearOperator(C.shape, dtype=complex,
                                 matvec=lambda x: lu.solve(x),
                                 rmatvec=lambda x: lu.solve(x, trans="H"))
    try:
        norm_inv = float(spla.onenormest(inv_op))
    except Exception:
        return 1.0  # estimator failure: do not block the solve
    if norm_c == 0 or norm_inv == 0:
        return 0.0
    return 1.0 / (norm_c * norm_inv)


class LocalImpedanceSolver:
    """Factorizations of the impedance-shifted block operators.

    Per subdomain this is C_j = A_j - i B_j^T T_j B_j, a complex symmetric
    sparse matrix bordered by the dense impedance on its boundary dofs.
    The outer-boundary block is handled by the closed-form inverse of the
    boundary condition.  A reciprocal-condition estimate below the floor
    raises :class:`AssumptionViolation` instead of silently returning
    garbage.
    """

    def __init__(self, forms, impedance: BlockImpedance, bc, rcond_floor: float = 1e-12):
        self.bc = bc
        self.n_interior = tuple(lf.n_interior for lf in forms)
        self.omega_sizes = tuple(lf.n_dofs for lf in forms)
        self._lus = []
        for j, lf in enumerate(forms):
            T = impedance.blocks[j + 1]
            ni = lf.n_interior
            n = lf.n_dofs
            rows = np.repeat(np.arange(ni, n), n - ni)
            cols = np.tile(np.arange(ni, n), n - ni)
            border = sp.coo_matrix((T.ravel(), (rows, cols)), shape=(n, n))
            C = (lf.A - 1j * border.tocsr()).tocsc()
            try:
                lu = spla.splu(C)
            except RuntimeError as exc:
                raise AssumptionViolation(
                    f"impedance problem of block {j + 1} is singular; "
                    "perturb kappa or gamma and retry") from exc
            rcond = _estimate_rcond(C, lu)
            if rcond < rcond_floor:
                raise AssumptionViolation(
                    f"impedance problem of block {j + 1} is numerically singular "
                    f"(rcond ~ {rcond:.2e}); perturb kappa or gamma and retry")
            self._lus.append(lu)

    def solve_block(self, j: int, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        trans = "T" if transpose else "N"
        return self._lus[j].solve(np.asarray(rhs, complex), trans=trans)

    def solve_tuple(self, phi: VolumeTuple, transpose: bool = False) -> VolumeTuple:
        """(A - i B^T T B)^-1 applied to a dual tuple, blockwise.

        All block operators here are complex symmetric (the volume forms by
        construction, the boundary blocks for each supported condition), so
        the transposed solve reuses the same closed form on the boundary
        block and transposed triangular solves in the volume.
        """
        if phi.kind != "dual":
            raise ValueError("solve_tuple expects a dual tuple")
        alpha, p = self.bc.impedance_inverse(phi.gamma[0], phi.gamma[1])
        omega = [self.solve_block(j, b, transpose) for j, b in enumerate(phi.omega)]
        return VolumeTuple((alpha, p), omega, "primal")


class ScatteringOperator:
    """Blockwise map from incoming (p - iTv) to outgoing (p + iTv) traces.

    Interior blocks solve their impedance problem; the outer block uses
    the closed-form boundary scattering.  Without absorption the map is a
    T^-1 isometry; absorption makes it a strict contraction.
    """

    def __init__(self, solver: LocalImpedanceSolver, impedance: BlockImpedance, bc):
        self.solver = solver
        self.impedance = impedance
        self.bc = bc

    def apply(self, q: SkeletonField, transpose: bool = False) -> SkeletonField:
        if q.kind != "dual":
            raise ValueError("scattering operator acts on dual fields")
        blocks = [self.bc.scattering(q.blocks[0])]
        for j, qb in enumerate(q.blocks[1:]):
            ni = self.solver.n_interior[j]
            rhs = np.zeros(self.solver.omega_sizes[j], complex)
            rhs[ni:] = qb
            u = self.solver.solve_block(j, rhs, transpose)
            blocks.append(qb + 2j * (self.impedance.blocks[j + 1] @ u[ni:]))
        return SkeletonField(blocks, "dual")

    def apply_with_volume(self, q: SkeletonField, transpose: bool = False):
        """Return (S q, u) with u the tuple of local impedance solutions."""
        u = self.solver.solve_tuple(trace_adjoint(q, self.solver.n_interior,
                                                  self.solver.omega_sizes),
                                    transpose)
        Bu = trace_apply(u, self.solver.n_interior)
        sq = q + 2j * self.impedance.apply(Bu)
        return sq, u


@dataclass
class CauchyPair:
    """Trace pair (v, p) of a tuple of local solutions, with its witness."""

    v: SkeletonField
    p: SkeletonField
    witness: VolumeTuple


@dataclass
class RecoveredSolution:
    """Volume solution recovered from a skeleton solve.

    ``mismatch`` is the largest discrepancy between duplicated values of
    one skeleton dof across the blocks containing it (including the trace
    unknown on the outer boundary); it is a diagnostic, not an error.
    """

    u: np.ndarray
    p: SkeletonField
    mismatch: float
    gamma_pair: tuple
    tuple: VolumeTuple


def apply_A(problem, u: VolumeTuple) -> VolumeTuple:
    """Block-diagonal Helmholtz operator applied to a volume tuple."""
    if u.kind != "primal":
        raise ValueError("apply_A expects a primal tuple")
    ga = problem.bc.apply(u.gamma[0], u.gamma[1])
    omega = [lf.A @ ub for lf, ub in zip(problem.forms, u.omega)]
    return VolumeTuple(ga, omega, "dual")


def absorption(problem, u: VolumeTuple) -> float:
    """Im <A u, conj(u)>, the dissipated energy of a volume tuple."""
    au = apply_A(problem, u)
    acc = (np.conj(u.gamma[0]) @ au.gamma[0] + np.conj(u.gamma[1]) @ au.gamma[1])
    for ab, ub in zip(au.omega, u.omega):
        acc += np.conj(ub) @ ab
    return float(np.imag(acc))


def skeleton_apply(problem, q: SkeletonField) -> SkeletonField:
    """(Id + Pi S) q, applied operator by operator (never assembled)."""
    return q + problem.exchange.apply(problem.scattering.apply(q))


def load_tuple(load) -> VolumeTuple:
    """View a LoadTuple as a dual volume tuple."""
    return VolumeTuple(load.gamma, list(load.omega), "dual")


def skeleton_rhs(problem, load) -> SkeletonField:
    """Skeleton right-hand side f = -2i Pi T B (A - i B^T T B)^-1 l."""
    u = problem.solver.solve_tuple(load_tuple(load))
    g = problem.impedance.apply(trace_apply(u, problem.n_interior))
    return -2j * problem.exchange.apply(g)


def recover_volume(problem, q: SkeletonField, load) -> RecoveredSolution:
    """Volume solution u = (A - i B^T T B)^-1 (B^T q + l) and p = q + iTBu.

    Duplicated interface dofs take the value of the lowest-indexed
    subdomain block; the spread across blocks is returned as ``mismatch``.
    """
    rhs = trace_adjoint(q, problem.n_interior, problem.omega_sizes) + load_tuple(load)
    u = problem.solver.solve_tuple(rhs)
    Bu = trace_apply(u, problem.n_interior)
    p = q + 1j * problem.impedance.apply(Bu)

    mesh = problem.mesh
    u_global = np.zeros(mesh.num_vertices, complex)
    for j in range(problem.num_subdomains - 1, -1, -1):
        u_global[problem.forms[j].dofs] = u.omega[j]

    index = problem.index
    vals = np.full((index.n_sigma, index.num_blocks), np.nan + 0j)
    vals[index.block_map[0], 0] = u.gamma[0]
    for b in range(1, index.num_blocks):
        vals[index.block_map[b], b] = Bu.blocks[b]
    mismatch = 0.0
    for row in vals:
        fin = row[~np.isnan(row)]
        if len(fin) > 1:
            spread = np.abs(fin[:, None] - fin[None, :]).max()
            mismatch = max(mismatch, float(spread))

    return RecoveredSolution(u_global, p, mismatch, u.gamma, u)


def cauchy_pair_from(problem, q: SkeletonField, transpose: bool = False) -> CauchyPair:
    """The Cauchy pair with incoming trace q: v = Bu, p = q + iTBu."""
    u = problem.solver.solve_tuple(
        trace_adjoint(q, problem.n_interior, problem.omega_sizes), transpose)
    v = trace_apply(u, problem.n_interior)
    p = q + 1j * problem.impedance.apply(v)
    return CauchyPair(v, p, u)


def cauchy_membership_residual(problem, v: SkeletonField, p: SkeletonField) -> float:
    """Relative residual of p + iTv = S(p - iTv); zero iff (v, p) is Cauchy data."""
    itv = 1j * problem.impedance.apply(v)
    outgoing = p + itv
    scattered = problem.scattering.apply(p - itv)
    denom = max(problem.impedance.norm(outgoing), 1e-300)
    return problem.impedance.norm(scattered - outgoing) / denom


def cauchy_decompose(problem, v: SkeletonField, p: SkeletonField):
    """Split a trace pair into Cauchy data plus a graph element (v', iTv').

    Follows the constructive direct-sum argument: lift v by zero extension
    to w, solve the impedance problem for A w - B^T p, and read both parts
    off the solution.  Recomposition is exact up to the local solves.
    """
    ng = len(v.blocks[0])
    omega = []
    for ni, n, vb in zip(problem.n_interior, problem.omega_sizes, v.blocks[1:]):
        w = np.zeros(n, complex)
        w[ni:] = vb
        omega.append(w)
    w = VolumeTuple((v.blocks[0].copy(), np.zeros(ng, complex)), omega, "primal")

    rhs = apply_A(problem, w) - trace_adjoint(p, problem.n_interior, problem.omega_sizes)
    vt = problem.solver.solve_tuple(rhs)
    u1 = trace_apply(vt, problem.n_interior)
    p1 = 1j * problem.impedance.apply(u1)
    u2 = v - u1
    p2 = p - p1
    witness = w - vt
    return CauchyPair(u2, p2, witness), (u1, p1)


def kernel_lift(problem, z: np.ndarray) -> SkeletonField:
    """Map a kernel vector of the monolithic operator to the skeleton kernel.

    z = (u, p) with the volume part first.  The image is q = p' - iTv with
    v the traces of the restriction and p' the pairing of the block
    residual against the harmonic lifting; it satisfies (Id + Pi S) q ~ 0
    whenever z is (numerically) in the kernel.
    """
    from .assembly import restriction_apply

    nv = problem.mesh.num_vertices
    rz = restriction_apply(problem.partition, z[:nv], z[nv:])
    v = trace_apply(rz, problem.n_interior)
    arz = apply_A(problem, rz)
    p = lift_adjoint(arz, problem.dtn)
    return p - 1j * problem.impedance.apply(v)
