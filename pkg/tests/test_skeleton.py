import numpy as np
import pytest

import helmskel.skeleton as sk
from helmskel.problem import build_problem, h1_norm, make_load, monolithic_matrix, solve_monolithic
from helmskel.traces import SkeletonField, single_trace_adjoint, single_trace_embed, skew_pair


def _rand_dual(p, rng):
    return SkeletonField([rng.standard_normal(n) + 1j * rng.standard_normal(n)
                          for n in p.block_sizes], "dual")


# ---------------------------------------------------------------------------
# exchange operator
# ---------------------------------------------------------------------------

def test_exchange_fixes_impedance_image(ref_problem, rng):
    p = ref_problem
    for _ in range(10):
        x = rng.standard_normal(p.index.n_sigma) + 1j * rng.standard_normal(p.index.n_sigma)
        q = p.impedance.apply(single_trace_embed(x, p.index))
        out = p.exchange.apply(q)
        assert p.impedance.norm(out - q) <= 1e-12 * p.impedance.norm(q)


def test_exchange_negates_jumps(ref_problem, rng):
    p = ref_problem
    counts = np.zeros(p.index.n_sigma)
    for m in p.index.block_map:
        np.add.at(counts, m, 1.0)
    for _ in range(10):
        r = _rand_dual(p, rng)
        y = single_trace_adjoint(r, p.index)
        proj = SkeletonField([(y / counts)[m] for m in p.index.block_map], "dual")
        q = r - proj
        out = p.exchange.apply(q)
        assert p.impedance.norm(out + q) <= 1e-12 * p.impedance.norm(q)


def test_exchange_against_dense_projector(small_problem, rng):
    p = small_problem
    # dense oracle: Q = T E (E^T T E)^-1 E^T assembled explicitly
    n_sigma = p.index.n_sigma
    E = np.zeros((p.dual_dim, n_sigma))
    offs = p.impedance.offsets
    for b, m in enumerate(p.index.block_map):
        for row, col in enumerate(m):
            E[offs[b] + row, col] = 1.0
    T = np.zeros((p.dual_dim, p.dual_dim))
    for b, Tb in enumerate(p.impedance.blocks):
        T[offs[b]:offs[b + 1], offs[b]:offs[b + 1]] = Tb
    Q = T @ E @ np.linalg.solve(E.T @ T @ E, E.T)
    Pi = 2 * Q - np.eye(p.dual_dim)
    for _ in range(20):
        q = _rand_dual(p, rng)
        got = p.exchange.apply(q).concat()
        want = Pi @ q.concat()
        np.testing.assert_allclose(got, want, atol=1e-11 * np.abs(want).max())


@pytest.mark.parametrize("nx,ny,px,py", [(4, 4, 2, 2), (4, 2, 2, 1),
                                         (6, 6, 3, 3), (4, 4, 1, 1)])
def test_exchange_involution_isometry_matrix(nx, ny, px, py, rng):
    p = build_problem(nx, ny, px, py, k=3.0, bc_kind="robin")
    imp = p.impedance
    worst = 0.0
    for _ in range(25):
        q = _rand_dual(p, rng)
        nq = imp.norm(q)
        piq = p.exchange.apply(q)
        worst = max(worst, imp.norm(p.exchange.apply(piq) - q) / nq,
                    abs(imp.norm(piq) / nq - 1.0))
    assert worst <= 1e-11


def test_split_orthogonality(ref_problem, rng):
    p = ref_problem
    imp = p.impedance
    for _ in range(20):
        q = _rand_dual(p, rng)
        qq = p.exchange.project(q)
        rest = q - qq
        # T^-1 inner product of the two parts vanishes
        acc = 0.0 + 0.0j
        for L, a, b in zip(imp.chol, qq.blocks, rest.blocks):
            import scipy.linalg as sla
            wa = sla.solve_triangular(L, a, lower=True)
            wb = sla.solve_triangular(L, b, lower=True)
            acc += np.conj(wb) @ wa
        assert abs(acc) <= 1e-11 * imp.norm(q) ** 2


# ---------------------------------------------------------------------------
# scattering operator
# ---------------------------------------------------------------------------

def test_scattering_energy_identity(ref_problem, rng):
    p = ref_problem
    imp = p.impedance
    for _ in range(20):
        q = _rand_dual(p, rng)
        sq, u = p.scattering.apply_with_volume(q)
        nq2 = imp.norm(q) ** 2
        res = abs(imp.norm(sq) ** 2 + 4 * abs(sk.absorption(p, u)) - nq2)
        assert res <= 1e-10 * nq2


def test_scattering_isometry_without_absorption(rng):
    # dirichlet and neumann boundary blocks conserve energy for real kappa
    for kind in ("dirichlet", "neumann", "mixed"):
        p = build_problem(8, 8, 2, 2, k=5.0, bc_kind=kind)
        for _ in range(10):
            q = _rand_dual(p, rng)
            sq = p.scattering.apply(q)
            assert abs(p.impedance.norm(sq) / p.impedance.norm(q) - 1) <= 1e-11


def test_scattering_strict_contraction_with_absorption(rng):
    k = 5.0
    p = build_problem(8, 8, 2, 2, k=k, bc_kind="neumann",
                      kappa_sq=lambda x, y: k ** 2 * (1 + 0.5j * (x >= 0.5)))
    for _ in range(20):
        q = _rand_dual(p, rng)
        sq = p.scattering.apply(q)
        assert p.impedance.norm(sq) < p.impedance.norm(q)


def test_scattering_blockwise_vs_tuple_path(ref_problem, rng):
    p = ref_problem
    q = _rand_dual(p, rng)
    fast = p.scattering.apply(q)
    slow, _ = p.scattering.apply_with_volume(q)
    np.testing.assert_allclose(fast.concat(), slow.concat(),
                               atol=1e-12 * np.abs(slow.concat()).max())


# ---------------------------------------------------------------------------
# skeleton system
# ---------------------------------------------------------------------------

def test_rhs_zero_load(ref_problem):
    p = ref_problem
    load = make_load(p, f=0.0, gamma_pair=(np.zeros(p.n_gamma), np.zeros(p.n_gamma)))
    f = sk.skeleton_rhs(p, load)
    assert p.impedance.norm(f) == 0.0


def test_rhs_nonlocality_witness(rng):
    p = build_problem(8, 8, 2, 2, k=5.0, bc_kind="robin")

    def f(x, y):
        return ((x < 0.5) & (y < 0.5)).astype(float)

    load = make_load(p, f=f, gamma_pair=(np.zeros(p.n_gamma), np.zeros(p.n_gamma)))
    # before the exchange step the trace data lives only on block 1
    u = p.solver.solve_tuple(sk.load_tuple(load))
    from helmskel.traces import trace_apply
    g = p.impedance.apply(trace_apply(u, p.n_interior))
    norms = [np.abs(b).max() for b in g.blocks]
    assert norms[1] > 0
    assert max(norms[0], *norms[2:]) <= 1e-14 * norms[1]
    # the exchange spreads it to every block meeting that boundary
    fvec = sk.skeleton_rhs(p, load)
    assert all(np.abs(b).max() > 0 for b in fvec.blocks)


def test_rhs_deterministic(rng):
    a = build_problem(8, 8, 2, 2, k=5.0, bc_kind="robin")
    b = build_problem(8, 8, 2, 2, k=5.0, bc_kind="robin")
    load_a = make_load(a, f=1.0)
    load_b = make_load(b, f=1.0)
    fa = sk.skeleton_rhs(a, load_a).concat()
    fb = sk.skeleton_rhs(b, load_b).concat()
    np.testing.assert_allclose(fa, fb, atol=1e-13 * np.abs(fa).max())


def test_operator_zero_and_norm_bound(ref_problem, rng):
    p = ref_problem
    z = p.impedance.zeros("dual")
    assert p.impedance.norm(sk.skeleton_apply(p, z)) == 0.0
    for _ in range(10):
        q = _rand_dual(p, rng)
        assert p.impedance.norm(sk.skeleton_apply(p, q)) <= 2 * p.impedance.norm(q) * (1 + 1e-12)


def test_transmission_characterization(ref_problem, rng):
    p = ref_problem
    imp = p.impedance
    counts = np.zeros(p.index.n_sigma)
    for m in p.index.block_map:
        np.add.at(counts, m, 1.0)
    for _ in range(20):
        x = rng.standard_normal(p.index.n_sigma) + 1j * rng.standard_normal(p.index.n_sigma)
        u = single_trace_embed(x, p.index)
        r = _rand_dual(p, rng)
        y = single_trace_adjoint(r, p.index)
        proj = SkeletonField([(y / counts)[m] for m in p.index.block_map], "dual")
        jump = r - proj
        itu = 1j * imp.apply(u)
        lhs = -1.0 * jump + itu
        rhs = p.exchange.apply(jump + itu)
        assert imp.norm(lhs - rhs) <= 1e-11 * imp.norm(jump + itu)
        # violating pairs fail by a wide margin
        bad_u = SkeletonField([rng.standard_normal(n) + 1j * rng.standard_normal(n)
                               for n in p.block_sizes], "primal")
        itu = 1j * imp.apply(bad_u)
        lhs = -1.0 * r + itu
        rhs = p.exchange.apply(r + itu)
        assert imp.norm(lhs - rhs) >= 1e-3 * imp.norm(r + itu)


# ---------------------------------------------------------------------------
# recovery and equivalence
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["dirichlet", "neumann", "robin", "mixed"])
def test_recover_matches_monolithic(kind, rng):
    from helmskel.solvers_spectral import gmres_tinv

    p = build_problem(8, 8, 2, 2, k=5.0, bc_kind=kind)
    ones = np.ones(p.n_gamma, complex)
    p.bc.g_d = 0.3 * ones
    p.bc.g_n = 0.5 * (p.gamma_mass @ ones.real).astype(complex)
    load = make_load(p, f=1.0)
    f = sk.skeleton_rhs(p, load)
    q, rep = gmres_tinv(p, f, tol=1e-10)
    assert rep.converged
    rec = sk.recover_volume(p, q, load)
    u_mono, p_mono = solve_monolithic(p, load)
    assert h1_norm(p, rec.u - u_mono) <= 1e-8 * h1_norm(p, u_mono)
    assert rec.mismatch <= 1e-9
    # the boundary pair carries the monolithic multiplier
    np.testing.assert_allclose(rec.gamma_pair[1], p_mono,
                               atol=1e-8 * max(1.0, np.abs(p_mono).max()))


def test_recover_after_one_step_reports_mismatch(ref_problem):
    from helmskel.solvers_spectral import richardson

    p = ref_problem
    load = make_load(p, f=1.0)
    f = sk.skeleton_rhs(p, load)
    q, _ = richardson(p, f, relax=0.5, tol=1e-30, maxit=1)
    rec = sk.recover_volume(p, q, load)
    assert rec.mismatch > 0


def test_recover_zero(ref_problem):
    p = ref_problem
    load = make_load(p, f=0.0, gamma_pair=(np.zeros(p.n_gamma), np.zeros(p.n_gamma)))
    rec = sk.recover_volume(p, p.impedance.zeros("dual"), load)
    assert np.abs(rec.u).max() == 0.0
    assert p.impedance.norm(rec.p) == 0.0


# ---------------------------------------------------------------------------
# closed manifolds: Cauchy data and the graph complement
# ---------------------------------------------------------------------------

def test_cauchy_pair_membership_and_energy_bounds(ref_problem, rng):
    p = ref_problem
    imp = p.impedance
    for _ in range(20):
        q = _rand_dual(p, rng)
        pair = sk.cauchy_pair_from(p, q)
        assert sk.cauchy_membership_residual(p, pair.v, pair.p) <= 1e-11
        a = imp.norm(pair.v) ** 2 + imp.norm(pair.p) ** 2
        b = imp.norm(pair.p - 1j * imp.apply(pair.v)) ** 2
        assert a <= b * (1 + 1e-10)
        assert b <= 2 * a * (1 + 1e-10)


def test_cauchy_decompose_random(ref_problem, rng):
    p = ref_problem
    imp = p.impedance
    for _ in range(10):
        v = SkeletonField([rng.standard_normal(n) + 1j * rng.standard_normal(n)
                           for n in p.block_sizes], "primal")
        q = _rand_dual(p, rng)
        pair, (u1, p1) = sk.cauchy_decompose(p, v, q)
        scale = max(imp.norm(v), imp.norm(q))
        assert imp.norm((pair.v + u1) - v) <= 1e-12 * scale
        assert imp.norm((pair.p + p1) - q) <= 1e-12 * scale
        assert imp.norm(p1 - 1j * imp.apply(u1)) <= 1e-12 * scale
        assert sk.cauchy_membership_residual(p, pair.v, pair.p) <= 1e-9


def test_cauchy_decompose_of_graph_element(ref_problem, rng):
    p = ref_problem
    imp = p.impedance
    v = SkeletonField([rng.standard_normal(n) + 1j * rng.standard_normal(n)
                       for n in p.block_sizes], "primal")
    g = 1j * imp.apply(v)
    pair, (u1, p1) = sk.cauchy_decompose(p, v, g)
    assert imp.norm(pair.v) <= 1e-11 * imp.norm(v)
    assert imp.norm(pair.p) <= 1e-11 * imp.norm(g)
    assert imp.norm(u1 - v) <= 1e-11 * imp.norm(v)


def test_cauchy_decompose_of_cauchy_element(ref_problem, rng):
    p = ref_problem
    imp = p.impedance
    q = _rand_dual(p, rng)
    pair0 = sk.cauchy_pair_from(p, q)
    pair, (u1, p1) = sk.cauchy_decompose(p, pair0.v, pair0.p)
    assert imp.norm(u1) <= 1e-11 * imp.norm(pair0.v)
    assert imp.norm(p1) <= 1e-11 * imp.norm(pair0.p)


def test_cauchy_self_polarity_sampling(ref_problem, rng):
    p = ref_problem
    imp = p.impedance
    pairs_a = [sk.cauchy_pair_from(p, _rand_dual(p, rng)) for _ in range(20)]
    pairs_at = [sk.cauchy_pair_from(p, _rand_dual(p, rng), transpose=True)
                for _ in range(20)]
    for ca in pairs_a:
        for cb in pairs_at:
            val = skew_pair((ca.v, ca.p), (cb.v, cb.p))
            scale = ((imp.norm(ca.v) + imp.norm(ca.p))
                     * (imp.norm(cb.v) + imp.norm(cb.p)))
            assert abs(val) <= 1e-10 * scale


# ---------------------------------------------------------------------------
# kernel correspondence at resonance
# ---------------------------------------------------------------------------

def test_kernel_lift_zero(ref_problem):
    p = ref_problem
    z = np.zeros(p.mesh.num_vertices + p.n_gamma, complex)
    q = sk.kernel_lift(p, z)
    assert p.impedance.norm(q) == 0.0


def test_kernel_lift_at_resonance():
    from helmskel.geometry import build_rect_mesh
    from helmskel.solvers_spectral import dirichlet_resonance

    mesh = build_rect_mesh(8, 8)
    lam = dirichlet_resonance(mesh)
    p = build_problem(8, 8, 2, 2, k=5.0, kappa_sq=lam, bc_kind="dirichlet")
    A = monolithic_matrix(p).toarray()
    _, svals, Vh = np.linalg.svd(A)
    assert svals[-1] <= 1e-10 * svals[0]
    z = Vh[-1].conj()
    q = sk.kernel_lift(p, z)
    res = p.impedance.norm(sk.skeleton_apply(p, q)) / p.impedance.norm(q)
    assert res <= 1e-7


def test_local_solvability_guard():
    with pytest.raises(sk.AssumptionViolation, match="perturb"):
        build_problem(4, 4, 2, 2, k=3.0, bc_kind="robin", rcond_floor=1.0)
