"""Block impedance operator: per-block Dirichlet-to-Neumann maps.

Each trace block carries a real SPD matrix T_b.  For a subdomain this is
the Schur complement of the volume norm Gram H = K + gamma^-2 M onto the
boundary dofs, i.e. the discrete Dirichlet-to-Neumann map of the operator
-Laplace + gamma^-2.  For the outer boundary there is no canonical
bounded exterior, so two SPD surrogates are provided: the Schur complement
of a one-cell exterior collar mesh (default), and a boundary H1 matrix.

The induced norms ||v||_T and ||q||_T^-1 are the working metric of the
whole skeleton formulation; the Cholesky factors of the blocks double as
the whitening transform used by Krylov solvers and the spectral harness.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Mesh, build_rect_mesh
from .assembly import Coefficients, LocalForms

__all__ = [
    "DtnBlock",
    "BlockImpedance",
    "schur_dtn",
    "collar_impedance",
    "boundary_h1_impedance",
    "boundary_mass",
    "boundary_stiffness",
]


def schur_dtn(H: sp.spmatrix, n_interior: int):
    """Schur complement of an SPD matrix onto its trailing boundary block.

    Returns the dense boundary operator T = H_bb - H_bi H_ii^-1 H_ib and
    the interior factorization (reused for harmonic lifting), or None when
    the block has no interior dofs.
    """
    n = H.shape[0]
    ni = n_interior
    Hc = H.tocsc()
    H_bb = Hc[ni:, ni:].toarray()
    if ni == 0:
        return H_bb, None, None
    H_ii = Hc[:ni, :ni]
    H_ib = Hc[:ni, ni:].toarray()
    try:
        lu = spla.splu(H_ii)
    except RuntimeError as exc:  # pragma: no cover - signals an assembly bug
        raise RuntimeError("interior block of H is singular; H should be SPD") from exc
    X = lu.solve(H_ib)
    T = H_bb - H_ib.T @ X
    T = 0.5 * (T + T.T)
    return T, lu, H_ib


def _solve_complex(lu, rhs: np.ndarray) -> np.ndarray:
    """Apply a real factorization to a complex right-hand side."""
    rhs = np.asarray(rhs)
    if not np.iscomplexobj(rhs):
        return lu.solve(rhs)
    return lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)


class DtnBlock:
    """Boundary impedance of one subdomain plus its harmonic lifting.

    ``lift`` extends boundary data by the discrete (-Laplace + gamma^-2)
    harmonic function; ``lift_adjoint`` pairs a volume functional against
    the lifting basis.  Both reuse the interior factorization of H.
    """

    def __init__(self, forms: LocalForms):
        self.n_interior = forms.n_interior
        self.n_boundary = forms.n_boundary
        self.H = forms.H
        self.T, self._interior_lu, self._H_ib = schur_dtn(forms.H, forms.n_interior)

    def lift(self, v: np.ndarray) -> np.ndarray:
        """Harmonic extension of boundary values v into the full local vector."""
        if self.n_interior == 0:
            return np.asarray(v, dtype=complex).copy()
        u_i = -_solve_complex(self._interior_lu, self._H_ib @ v)
        return np.concatenate([u_i, v]).astype(complex)

    def lift_adjoint(self, phi: np.ndarray) -> np.ndarray:
        """Pair a local dual vector with the lifting: (lift)^T phi."""
        if self.n_interior == 0:
            return np.asarray(phi, dtype=complex).copy()
        ni = self.n_interior
        return phi[ni:] - self._H_ib.T @ _solve_complex(self._interior_lu, phi[:ni])

    def h_energy(self, u: np.ndarray) -> float:
        """Squared volume norm u^H H u of a local vector."""
        return float(np.real(np.conj(u) @ (self.H @ u)))


def _boundary_edge_lengths(mesh: Mesh) -> np.ndarray:
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    return np.linalg.norm(b - a, axis=1)


def _gamma_positions(mesh: Mesh, gamma_dofs: np.ndarray) -> np.ndarray:
    pos = np.full(mesh.num_vertices, -1, dtype=np.int64)
    pos[gamma_dofs] = np.arange(len(gamma_dofs))
    return pos


def boundary_mass(mesh: Mesh, gamma_dofs: np.ndarray) -> np.ndarray:
    """1D mass matrix along the outer boundary (dense, SPD)."""
    ng = len(gamma_dofs)
    pos = _gamma_positions(mesh, gamma_dofs)
    M = np.zeros((ng, ng))
    for (va, vb), h in zip(mesh.boundary_edges, _boundary_edge_lengths(mesh)):
        ia, ib = pos[va], pos[vb]
        M[ia, ia] += h / 3.0
        M[ib, ib] += h / 3.0
        M[ia, ib] += h / 6.0
        M[ib, ia] += h / 6.0
    return M


def boundary_stiffness(mesh: Mesh, gamma_dofs: np.ndarray) -> np.ndarray:
    """1D stiffness matrix along the outer boundary (dense, PSD)."""
    ng = len(gamma_dofs)
    pos = _gamma_positions(mesh, gamma_dofs)
    K = np.zeros((ng, ng))
    for (va, vb), h in zip(mesh.boundary_edges, _boundary_edge_lengths(mesh)):
        ia, ib = pos[va], pos[vb]
        K[ia, ia] += 1.0 / h
        K[ib, ib] += 1.0 / h
        K[ia, ib] -= 1.0 / h
        K[ib, ia] -= 1.0 / h
    return K


def boundary_h1_impedance(mesh: Mesh, gamma_dofs: np.ndarray, gamma: float) -> np.ndarray:
    """Boundary H1 surrogate for the outer impedance: K_Gamma + gamma^-1 M_Gamma."""
    T = boundary_stiffness(mesh, gamma_dofs) + boundary_mass(mesh, gamma_dofs) / gamma
    return 0.5 * (T + T.T)


def collar_impedance(mesh: Mesh, gamma_dofs: np.ndarray, gamma: float) -> np.ndarray:
    """Exterior-collar surrogate for the outer impedance.

    Meshes a one-cell-thick ring around the rectangle with the same grid
    spacing, assembles K + gamma^-2 M on it with the natural condition on
    the outer rim, and eliminates every collar dof except those matching
    the boundary vertices.  The result is real SPD by construction.
    """
    dx = mesh.width / mesh.nx
    dy = mesh.height / mesh.ny
    big = build_rect_mesh(mesh.nx + 2, mesh.ny + 2,
                          mesh.width + 2 * dx, mesh.height + 2 * dy)
    shift = np.array([dx, dy])
    verts = big.vertices - shift

    cents = verts[big.triangles].mean(axis=1)
    inside = ((cents[:, 0] > 0) & (cents[:, 0] < mesh.width)
              & (cents[:, 1] > 0) & (cents[:, 1] < mesh.height))
    ring_tris = big.triangles[~inside]
    ring_verts = np.unique(ring_tris)

    # Match ring vertices on the inner rim to the mesh boundary dofs.
    from scipy.spatial import cKDTree

    tree = cKDTree(verts[ring_verts])
    targets = mesh.vertices[gamma_dofs]
    dist, idx = tree.query(targets)
    tol = 1e-9 * max(mesh.width, mesh.height)
    if np.any(dist > tol):
        raise RuntimeError("collar mesh does not line up with the boundary")
    inner = ring_verts[idx]

    # Assemble H on the ring with dofs reordered exterior-first so the
    # Schur elimination lands on the boundary block.
    others = np.setdiff1d(ring_verts, inner)
    order = np.concatenate([others, inner])
    g2l = np.full(big.vertices.shape[0], -1, dtype=np.int64)
    g2l[order] = np.arange(len(order))

    p = verts[ring_tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / det[:, None]
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / det[:, None]
    Ke = area[:, None, None] * (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :])
    Me = area[:, None, None] * ((np.ones((3, 3)) + np.eye(3)) / 12.0)[None, :, :]
    He = Ke + gamma ** (-2) * Me

    tl = g2l[ring_tris]
    n = len(order)
    rows = np.repeat(tl, 3, axis=1).ravel()
    cols = np.tile(tl, (1, 3)).ravel()
    H = sp.coo_matrix((He.ravel(), (rows, cols)), shape=(n, n)).tocsc()

    T, _, _ = schur_dtn(H, len(others))
    return T


class BlockImpedance:
    """Block-diagonal SPD impedance T = diag(T_Gamma, T_1, ..., T_J).

    Holds the Cholesky factor of every block.  ``whiten`` maps a dual
    field to coordinates whose Euclidean norm equals the T^-1 norm, which
    turns the skeleton metric into the plain l2 metric for solvers and
    singular value computations.
    """

    def __init__(self, blocks):
        self.blocks = [np.ascontiguousarray(b) for b in blocks]
        for i, b in enumerate(self.blocks):
            if not np.allclose(b, b.T, rtol=0, atol=1e-12 * (1 + np.abs(b).max())):
                raise ValueError(f"impedance block {i} is not symmetric")
        self.chol = [np.linalg.cholesky(b) for b in self.blocks]
        self.sizes = [b.shape[0] for b in self.blocks]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.total = int(self.offsets[-1])

    # -- block-wise algebra -------------------------------------------------

    def apply(self, field):
        """T v: primal field to dual field."""
        from .traces import SkeletonField

        if field.kind != "primal":
            raise ValueError("impedance applies to primal fields")
        return SkeletonField([T @ v for T, v in zip(self.blocks, field.blocks)], "dual")

    def solve(self, field):
        """T^-1 q: dual field to primal field."""
        from .traces import SkeletonField

        if field.kind != "dual":
            raise ValueError("impedance solve expects dual fields")
        out = []
        for L, q in zip(self.chol, field.blocks):
            out.append(sla.cho_solve((L, True), q))
        return SkeletonField(out, "primal")

    def norm(self, field) -> float:
        """T norm of a primal field, T^-1 norm of a dual field."""
        acc = 0.0
        if field.kind == "primal":
            for L, v in zip(self.chol, field.blocks):
                w = L.T @ v
                acc += float(np.real(np.conj(w) @ w))
        else:
            for L, q in zip(self.chol, field.blocks):
                w = sla.solve_triangular(L, q, lower=True)
                acc += float(np.real(np.conj(w) @ w))
        return np.sqrt(acc)

    # -- whitening ------------------------------------------------------------

    def whiten(self, field) -> np.ndarray:
        """Coordinates w = L^-1 q of a dual field, ||w||_2 = ||q||_T^-1."""
        if field.kind != "dual":
            raise ValueError("whitening is defined for dual fields")
        parts = [sla.solve_triangular(L, q, lower=True)
                 for L, q in zip(self.chol, field.blocks)]
        return np.concatenate(parts)

    def unwhiten(self, w: np.ndarray):
        """Inverse of :meth:`whiten`."""
        from .traces import SkeletonField

        blocks = []
        for L, o, n in zip(self.chol, self.offsets[:-1], self.sizes):
            blocks.append(L @ w[o:o + n])
        return SkeletonField(blocks, "dual")

    def zeros(self, kind: str):
        from .traces import SkeletonField

        return SkeletonField([np.zeros(n, complex) for n in self.sizes], kind)

    def condition_numbers(self):
        """Spectral condition number of every block (finite for SPD blocks)."""
        out = []
        for b in self.blocks:
            ev = np.linalg.eigvalsh(b)
            out.append(float(ev.max() / ev.min()))
        return out
