"""Boundary operators for the four supported cavity conditions.

Each condition contributes a 2x2 block operator on the boundary pair
(alpha, p): the Dirichlet condition couples the trace and the multiplier
through a plain swap, Neumann and Robin decouple the multiplier, and the
mixed condition routes through an oblique projector onto the functionals
supported on the Dirichlet part.  Every condition also carries the closed
form of its impedance inverse and of its boundary scattering block; the
generic resolvent formula is kept alongside as an independent check.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

__all__ = [
    "BoundaryCondition",
    "make_boundary_condition",
    "mixed_projector",
    "gamma_d_positions_from_tags",
]

_KINDS = ("dirichlet", "neumann", "robin", "mixed")


def mixed_projector(gamma_d_positions: np.ndarray, t_gamma: np.ndarray) -> np.ndarray:
    """Projector onto multipliers supported on the Dirichlet part.

    Orthogonal in the inverse-impedance inner product: with P the column
    selector of the Dirichlet positions, Theta = P (P^T T^-1 P)^-1 P^T T^-1.
    Real, idempotent, and satisfies T^-1 Theta = Theta^T T^-1.
    """
    n = t_gamma.shape[0]
    d = np.asarray(gamma_d_positions, dtype=np.int64)
    if len(d) == 0 or len(np.unique(d)) >= n:
        raise ValueError("Dirichlet dof set must be a nonempty proper subset")
    d = np.unique(d)
    L = np.linalg.cholesky(t_gamma)
    Tinv = sla.cho_solve((L, True), np.eye(n))
    X = np.linalg.solve(Tinv[np.ix_(d, d)], Tinv[d, :])
    theta = np.zeros((n, n))
    theta[d, :] = X
    return theta


def gamma_d_positions_from_tags(mesh, gamma_dofs: np.ndarray) -> np.ndarray:
    """Positions (within the boundary dof ordering) of vertices on 'D' edges.

    A vertex touching both tag sets is assigned to the Dirichlet side.
    """
    d_edges = mesh.boundary_edges[mesh.boundary_tags == "D"]
    d_verts = np.unique(d_edges)
    pos = np.full(mesh.num_vertices, -1, dtype=np.int64)
    pos[gamma_dofs] = np.arange(len(gamma_dofs))
    return np.sort(pos[d_verts])


class BoundaryCondition:
    """One of the four boundary operators, bound to an outer impedance.

    Exposes the operator itself (``apply``), the closed-form inverse of
    the impedance-shifted operator (``impedance_inverse``), the boundary
    scattering block (``scattering``, with ``scattering_generic`` as the
    resolvent-formula cross-check) and the dense 2x2 blocks used by the
    monolithic assembly.
    """

    def __init__(self, kind: str, t_gamma: np.ndarray, lam=None, theta=None,
                 g_d=None, g_n=None):
        if kind not in _KINDS:
            raise ValueError(f"unknown boundary condition kind {kind!r}")
        self.kind = kind
        self.t_gamma = np.ascontiguousarray(t_gamma)
        self.n = t_gamma.shape[0]
        self._chol_t = np.linalg.cholesky(self.t_gamma)
        self.lam = None if lam is None else np.ascontiguousarray(lam)
        self.theta = None if theta is None else np.ascontiguousarray(theta)
        self.g_d = None if g_d is None else np.asarray(g_d, dtype=complex)
        self.g_n = None if g_n is None else np.asarray(g_n, dtype=complex)

        if kind == "robin":
            if self.lam is None:
                raise ValueError("robin condition needs an impedance matrix")
            ev = np.linalg.eigvalsh(0.5 * (self.lam + self.lam.T))
            if ev.min() <= 0:
                raise ValueError("robin impedance must be positive definite")
            try:
                self._chol_lt = np.linalg.cholesky(self.lam + self.t_gamma)
            except np.linalg.LinAlgError as exc:
                raise ValueError("robin impedance plus boundary impedance "
                                 "is not positive definite") from exc
        if kind == "mixed" and self.theta is None:
            raise ValueError("mixed condition needs a projector")

    # -- small solves ---------------------------------------------------------

    def _t_solve(self, q):
        return sla.cho_solve((self._chol_t, True), q)

    def t_inverse(self) -> np.ndarray:
        """Dense inverse of the outer impedance (the multiplier norm Gram)."""
        return sla.cho_solve((self._chol_t, True), np.eye(self.n))

    # -- the boundary operator -------------------------------------------------

    def apply(self, alpha: np.ndarray, p: np.ndarray):
        """A_Gamma(alpha, p) as a pair of functionals."""
        if self.kind == "dirichlet":
            return np.asarray(p, complex).copy(), np.asarray(alpha, complex).copy()
        if self.kind == "neumann":
            return np.zeros(self.n, complex), self._t_solve(p)
        if self.kind == "robin":
            return -1j * (self.lam @ alpha), self._t_solve(p)
        tp = self.theta @ p
        return tp, self.theta.T @ alpha + self._t_solve(p - tp)

    # -- impedance-shifted inverse ----------------------------------------------

    def impedance_inverse(self, p_in: np.ndarray, a_in: np.ndarray):
        """(A_Gamma - i B* T B)^-1 applied to the dual pair (p_in, a_in)."""
        p_in = np.asarray(p_in, complex)
        a_in = np.asarray(a_in, complex)
        if self.kind == "dirichlet":
            return a_in.copy(), p_in + 1j * (self.t_gamma @ a_in)
        if self.kind == "neumann":
            return 1j * self._t_solve(p_in), self.t_gamma @ a_in
        if self.kind == "robin":
            return (1j * sla.cho_solve((self._chol_lt, True), p_in),
                    self.t_gamma @ a_in)
        th = self.theta
        ta = self.t_gamma @ a_in
        alpha = th.T @ a_in + 1j * self._t_solve(p_in - th @ p_in)
        p = ta - th @ ta + 1j * (th @ ta) + th @ p_in
        return alpha, p

    def impedance_apply(self, alpha: np.ndarray, p: np.ndarray):
        """(A_Gamma - i B* T B)(alpha, p), for composition checks."""
        fa, fp = self.apply(alpha, p)
        return fa - 1j * (self.t_gamma @ alpha), fp

    # -- boundary scattering ----------------------------------------------------

    def scattering(self, q: np.ndarray) -> np.ndarray:
        """Closed-form boundary scattering block applied to q."""
        q = np.asarray(q, complex)
        if self.kind == "dirichlet":
            return q.copy()
        if self.kind == "neumann":
            return -q
        if self.kind == "robin":
            return (self.lam - self.t_gamma) @ sla.cho_solve((self._chol_lt, True), q)
        return 2.0 * (self.theta @ q) - q

    def scattering_generic(self, q: np.ndarray) -> np.ndarray:
        """Same block through the resolvent formula Id + 2i T B (..)^-1 B*."""
        alpha, _ = self.impedance_inverse(q, np.zeros(self.n))
        return np.asarray(q, complex) + 2j * (self.t_gamma @ alpha)

    # -- dense blocks for monolithic assembly -----------------------------------

    def a_gamma_blocks(self):
        """(Baa, Bap, Bpa, Bpp) with A_Gamma(alpha,p) = (Baa a + Bap p, Bpa a + Bpp p)."""
        n = self.n
        Z = np.zeros((n, n))
        I = np.eye(n)
        if self.kind == "dirichlet":
            return Z, I, I, Z
        if self.kind == "neumann":
            return Z, Z, Z, self.t_inverse()
        if self.kind == "robin":
            return -1j * self.lam, Z, Z, self.t_inverse()
        Tinv = self.t_inverse()
        return Z, self.theta, self.theta.T, Tinv @ (I - self.theta)

    def load_pair(self, n_gamma: int):
        """Boundary part of the right-hand side for the stored data."""
        za = np.zeros(n_gamma, complex)
        g_d = self.g_d if self.g_d is not None else za
        g_n = self.g_n if self.g_n is not None else za
        if self.kind == "dirichlet":
            return za.copy(), g_d.copy()
        if self.kind in ("neumann", "robin"):
            return g_n.copy(), za.copy()
        return g_n.copy(), self.theta.T @ g_d


def make_boundary_condition(kind: str, t_gamma: np.ndarray, *, lam=None,
                            gamma_d_positions=None, g_d=None, g_n=None) -> BoundaryCondition:
    """Build a condition, deriving the mixed projector when needed."""
    theta = None
    if kind == "mixed":
        if gamma_d_positions is None:
            raise ValueError("mixed condition needs the Dirichlet dof positions")
        theta = mixed_projector(gamma_d_positions, t_gamma)
    return BoundaryCondition(kind, t_gamma, lam=lam, theta=theta, g_d=g_d, g_n=g_n)
