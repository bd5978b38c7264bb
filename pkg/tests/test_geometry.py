import numpy as np
import pytest

from helmskel.geometry import (build_rect_mesh, export_listing, local_dofs,
                               partition_checkerboard, skeleton_index,
                               tag_boundary, triangle_areas)


def test_unit_cell_counts():
    mesh = build_rect_mesh(1, 1, 1.0, 1.0)
    assert mesh.num_triangles == 2
    assert mesh.num_vertices == 4


def test_two_by_two_counts():
    mesh = build_rect_mesh(2, 2, 1.0, 1.0)
    assert mesh.num_triangles == 8
    assert mesh.num_vertices == 9
    assert len(mesh.boundary_edges) == 8


def test_area_conservation():
    mesh = build_rect_mesh(4, 4, 1.0, 1.0)
    assert abs(triangle_areas(mesh).sum() - 1.0) < 1e-14


def test_positive_areas_and_rejects():
    mesh = build_rect_mesh(3, 5, 2.0, 0.5)
    assert np.all(triangle_areas(mesh) > 0)
    with pytest.raises(ValueError):
        build_rect_mesh(0, 1)
    with pytest.raises(ValueError):
        build_rect_mesh(1, 0)


def test_boundary_edges_unique_to_one_triangle():
    mesh = build_rect_mesh(3, 3)
    edges = np.vstack([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                       mesh.triangles[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    lookup = {tuple(e): c for e, c in zip(uniq, counts)}
    for e in np.sort(mesh.boundary_edges, axis=1):
        assert lookup[tuple(e)] == 1
    # interior edges belong to exactly two triangles
    boundary = {tuple(e) for e in np.sort(mesh.boundary_edges, axis=1)}
    for e, c in lookup.items():
        assert c == (1 if e in boundary else 2)


def test_checkerboard_basic():
    mesh = build_rect_mesh(2, 2)
    part = partition_checkerboard(mesh, 2, 2)
    assert part.num_subdomains == 4
    index = skeleton_index(part)
    assert len(index.cross_points) == 1
    np.testing.assert_allclose(mesh.vertices[index.cross_points[0]], [0.5, 0.5])
    # coarsest mesh: every vertex lies on the skeleton
    assert index.n_sigma == 9


def test_checkerboard_degenerate_single():
    mesh = build_rect_mesh(4, 4)
    part = partition_checkerboard(mesh, 1, 1)
    assert part.num_subdomains == 1
    index = skeleton_index(part)
    np.testing.assert_array_equal(index.skeleton_dofs, part.gamma_dofs)
    assert len(index.cross_points) == 0


def test_checkerboard_two_strips():
    mesh = build_rect_mesh(4, 2)
    part = partition_checkerboard(mesh, 2, 1)
    assert part.num_subdomains == 2
    interface = np.intersect1d(part.boundary_dofs[0], part.boundary_dofs[1])
    assert len(interface) == 3
    np.testing.assert_allclose(mesh.vertices[interface][:, 0], 0.5)


def test_checkerboard_divisibility_rejected():
    mesh = build_rect_mesh(4, 4)
    with pytest.raises(ValueError, match="divide"):
        partition_checkerboard(mesh, 3, 1)
    with pytest.raises(ValueError, match="divide"):
        partition_checkerboard(mesh, 1, 3)


def test_partition_cover_and_disjoint_dofs():
    mesh = build_rect_mesh(6, 4, 1.5, 1.0)
    part = partition_checkerboard(mesh, 3, 2)
    areas = triangle_areas(mesh)
    total = sum(areas[part.subdomain_of_triangle == j].sum()
                for j in range(part.num_subdomains))
    assert abs(total - 1.5) < 1e-13 * 1.5
    for j in range(part.num_subdomains):
        assert len(np.intersect1d(part.boundary_dofs[j], part.interior_dofs[j])) == 0
        verts = np.unique(mesh.triangles[part.subdomain_of_triangle == j])
        np.testing.assert_array_equal(np.sort(local_dofs(part, j))[::1],
                                      np.sort(verts))


def test_block_count_equality_iff_single_domain():
    mesh = build_rect_mesh(4, 4)
    single = skeleton_index(partition_checkerboard(mesh, 1, 1))
    counted = sum(len(b) for b in single.block_dofs[1:])
    assert counted == single.n_sigma
    quad = skeleton_index(partition_checkerboard(mesh, 2, 2))
    counted = sum(len(b) for b in quad.block_dofs[1:])
    assert counted > quad.n_sigma


def test_skeleton_index_cross_points_and_maps():
    mesh = build_rect_mesh(4, 4)
    part = partition_checkerboard(mesh, 2, 2)
    index = skeleton_index(part)
    assert len(index.cross_points) == 1
    np.testing.assert_allclose(mesh.vertices[index.cross_points[0]], [0.5, 0.5])
    # block maps are consistent injections
    for dofs, mapped in zip(index.block_dofs, index.block_map):
        np.testing.assert_array_equal(index.skeleton_dofs[mapped], dofs)
        assert len(np.unique(mapped)) == len(mapped)
    # interface dofs are hit by >= 2 subdomain blocks
    counts = np.zeros(index.n_sigma, int)
    for m in index.block_map[1:]:
        counts[m] += 1
    on_gamma = np.isin(index.skeleton_dofs, part.gamma_dofs)
    assert np.all(counts[~on_gamma] >= 2)


def test_reproducible_orderings():
    mesh = build_rect_mesh(4, 4)
    a = skeleton_index(partition_checkerboard(mesh, 2, 2))
    b = skeleton_index(partition_checkerboard(build_rect_mesh(4, 4), 2, 2))
    np.testing.assert_array_equal(a.skeleton_dofs, b.skeleton_dofs)
    for ma, mb in zip(a.block_map, b.block_map):
        np.testing.assert_array_equal(ma, mb)


def test_tag_boundary_all_dirichlet():
    mesh = build_rect_mesh(2, 2)
    tagged = tag_boundary(mesh, lambda x, y: "D")
    assert set(tagged.boundary_tags) == {"D"}
    with pytest.raises(ValueError, match="mixed"):
        tag_boundary(mesh, lambda x, y: "D", require_mixed=True)


def test_tag_boundary_bottom_neumann():
    nx = 4
    mesh = build_rect_mesh(nx, 3)
    tagged = tag_boundary(mesh, lambda x, y: "N" if y == 0 else "D",
                          require_mixed=True)
    assert int(np.sum(tagged.boundary_tags == "N")) == nx


def test_tag_boundary_left_dirichlet():
    mesh = build_rect_mesh(2, 2)
    tagged = tag_boundary(mesh, lambda x, y: "D" if x == 0 else "N",
                          require_mixed=True)
    assert int(np.sum(tagged.boundary_tags == "D")) == 2
    with pytest.raises(ValueError, match="'D' or 'N'"):
        tag_boundary(mesh, lambda x, y: "X")


def test_export_listing_roundtrippable_format():
    mesh = build_rect_mesh(2, 1)
    text = export_listing(mesh)
    lines = text.strip().split("\n")
    assert len(lines) == mesh.num_vertices + mesh.num_triangles + len(mesh.boundary_edges)
    assert lines[0].startswith("node 0 ")
    kinds = {ln.split()[0] for ln in lines}
    assert kinds == {"node", "tri", "edge"}
