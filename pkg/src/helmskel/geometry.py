"""Structured triangular meshes, checkerboard partitions and skeleton indexing.

The geometric side of the solver is deliberately minimal: uniform P1
triangulations of a rectangle, partitioned into an axis-aligned grid of
non-overlapping subdomains.  A 2x2 (or finer) partition already produces
interior cross points, which is the configuration the trace machinery is
designed to handle.  Degrees of freedom are mesh vertices throughout.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Mesh",
    "Partition",
    "SkeletonIndex",
    "build_rect_mesh",
    "partition_checkerboard",
    "tag_boundary",
    "skeleton_index",
    "local_dofs",
    "triangle_areas",
    "export_listing",
]


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a rectangle.

    Attributes
    ----------
    vertices : (nv, 2) float array
        Vertex coordinates.
    triangles : (nt, 3) int array
        Vertex indices, counterclockwise.
    boundary_edges : (ne, 2) int array
        Vertex index pairs of edges on the outer boundary.
    boundary_tags : (ne,) array of str
        One tag per boundary edge, "D" or "N".
    nx, ny : int
        Number of grid cells per direction (structured metadata).
    width, height : float
        Rectangle dimensions.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    nx: int
    ny: int
    width: float
    height: float

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True)
class Partition:
    """Non-overlapping decomposition of a mesh into J edge-connected subdomains.

    ``boundary_dofs[j]`` and ``interior_dofs[j]`` split the vertices of the
    closed subdomain; both are sorted by global vertex id, which fixes a
    deterministic ordering for all downstream trace operators.
    """

    mesh: Mesh
    subdomain_of_triangle: np.ndarray
    boundary_dofs: tuple
    interior_dofs: tuple
    gamma_dofs: np.ndarray

    @property
    def num_subdomains(self) -> int:
        return len(self.boundary_dofs)


@dataclass(frozen=True)
class SkeletonIndex:
    """Index of the skeleton (union of all subdomain boundaries).

    ``block_dofs`` lists, per trace block, the global vertex ids carried by
    that block.  Block 0 is the outer boundary; blocks 1..J are the subdomain
    boundaries.  ``block_map[b]`` gives the positions of block b's dofs
    inside ``skeleton_dofs``, so that a single-valued skeleton function can
    be scattered into per-block trace vectors.
    """

    skeleton_dofs: np.ndarray
    block_dofs: tuple
    block_map: tuple
    cross_points: np.ndarray

    @property
    def n_sigma(self) -> int:
        return self.skeleton_dofs.shape[0]

    @property
    def num_blocks(self) -> int:
        return len(self.block_dofs)

    @property
    def block_sizes(self) -> tuple:
        return tuple(len(d) for d in self.block_dofs)


def build_rect_mesh(nx: int, ny: int, width: float = 1.0, height: float = 1.0) -> Mesh:
    """Uniform triangulation of [0, width] x [0, height].

    Each of the nx*ny grid cells is split into two counterclockwise
    triangles along the diagonal from the lower-left corner, giving
    (nx+1)(ny+1) vertices.  All boundary edges start out tagged "D".
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)          # row-major: vertex id = j*(nx+1) + i
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    triangles = np.array(tris, dtype=np.int64)

    edges = []
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0)))            # bottom
    for j in range(ny):
        edges.append((vid(nx, j), vid(nx, j + 1)))          # right
    for i in range(nx, 0, -1):
        edges.append((vid(i, ny), vid(i - 1, ny)))          # top
    for j in range(ny, 0, -1):
        edges.append((vid(0, j), vid(0, j - 1)))            # left
    boundary_edges = np.array(edges, dtype=np.int64)
    boundary_tags = np.full(len(edges), "D", dtype="<U1")

    return Mesh(vertices, triangles, boundary_edges, boundary_tags,
                nx=nx, ny=ny, width=float(width), height=float(height))


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas of all triangles (positive for a valid mesh)."""
    p = mesh.vertices[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def tag_boundary(mesh: Mesh, tag_fn, require_mixed: bool = False) -> Mesh:
    """Retag boundary edges from a predicate on edge midpoints.

    ``tag_fn(x, y)`` must return "D" or "N" for every boundary edge
    midpoint.  With ``require_mixed=True`` both tag sets must end up
    nonempty, which is what a mixed Dirichlet/Neumann condition needs.
    """
    mids = 0.5 * (mesh.vertices[mesh.boundary_edges[:, 0]]
                  + mesh.vertices[mesh.boundary_edges[:, 1]])
    tags = np.array([tag_fn(x, y) for x, y in mids], dtype="<U1")
    bad = set(tags.tolist()) - {"D", "N"}
    if bad:
        raise ValueError(f"boundary tags must be 'D' or 'N', got {sorted(bad)}")
    if require_mixed:
        if not np.any(tags == "D") or not np.any(tags == "N"):
            raise ValueError("mixed conditions need at least one 'D' and one 'N' edge")
    return replace(mesh, boundary_tags=tags)


def partition_checkerboard(mesh: Mesh, px: int, py: int) -> Partition:
    """Partition a structured mesh into a px-by-py grid of subdomains.

    Triangles are assigned by the grid cell containing their centroid.
    px must divide nx and py must divide ny so that subdomain boundaries
    fall on mesh lines.
    """
    if px < 1 or py < 1:
        raise ValueError("partition counts must be >= 1")
    if mesh.nx % px != 0:
        raise ValueError(f"px={px} does not divide nx={mesh.nx}")
    if mesh.ny % py != 0:
        raise ValueError(f"py={py} does not divide ny={mesh.ny}")

    areas = triangle_areas(mesh)
    if np.any(areas <= 0):
        raise ValueError("mesh contains a triangle with non-positive area")

    dx = mesh.width / mesh.nx
    dy = mesh.height / mesh.ny
    cents = mesh.vertices[mesh.triangles].mean(axis=1)
    ci = np.clip(np.floor(cents[:, 0] / dx).astype(int), 0, mesh.nx - 1)
    cj = np.clip(np.floor(cents[:, 1] / dy).astype(int), 0, mesh.ny - 1)
    bi = ci // (mesh.nx // px)
    bj = cj // (mesh.ny // py)
    sub_of_tri = bj * px + bi

    J = px * py
    boundary_dofs = []
    interior_dofs = []
    for j in range(J):
        tris = mesh.triangles[sub_of_tri == j]
        verts = np.unique(tris)
        # An edge used by exactly one subdomain triangle lies on the
        # subdomain boundary (outer boundary or interface).
        e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        e = np.sort(e, axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        bverts = np.unique(uniq[counts == 1])
        boundary_dofs.append(bverts)
        interior_dofs.append(np.setdiff1d(verts, bverts))

    gamma_dofs = np.unique(mesh.boundary_edges)

    return Partition(mesh, sub_of_tri,
                     tuple(boundary_dofs), tuple(interior_dofs), gamma_dofs)


def local_dofs(partition: Partition, j: int) -> np.ndarray:
    """Global vertex ids of subdomain j, interior first then boundary."""
    return np.concatenate([partition.interior_dofs[j], partition.boundary_dofs[j]])


def skeleton_index(partition: Partition) -> SkeletonIndex:
    """Enumerate skeleton dofs and build per-block injections.

    The skeleton ordering is the sorted global vertex id order, so the
    result is a pure function of the partition.  Cross points are vertices
    shared by three or more subdomain boundaries.
    """
    blocks = [partition.gamma_dofs] + list(partition.boundary_dofs)
    skeleton = np.unique(np.concatenate(blocks))
    block_map = tuple(np.searchsorted(skeleton, b) for b in blocks)

    counts = np.zeros(skeleton.shape[0], dtype=int)
    for b in partition.boundary_dofs:
        counts[np.searchsorted(skeleton, b)] += 1
    cross = skeleton[counts >= 3]

    return SkeletonIndex(skeleton, tuple(blocks), block_map, cross)


def export_listing(mesh: Mesh) -> str:
    """Plain-text node/element listing, one record per line (debug aid)."""
    out = io.StringIO()
    for i, (x, y) in enumerate(mesh.vertices):
        out.write(f"node {i} {x:.17g} {y:.17g}\n")
    for i, t in enumerate(mesh.triangles):
        out.write(f"tri {i} {t[0]} {t[1]} {t[2]}\n")
    for i, (e, tag) in enumerate(zip(mesh.boundary_edges, mesh.boundary_tags)):
        out.write(f"edge {i} {e[0]} {e[1]} {tag}\n")
    return out.getvalue()
