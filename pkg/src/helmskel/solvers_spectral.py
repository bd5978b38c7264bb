"""Iterative solvers in the T^-1 metric and the dense spectral harness.

The solvers run on the whitened skeleton operator, so Euclidean residuals
coincide with T^-1 residuals.  The spectral harness turns the structural
guarantees into numbers: inf-sup constants of both formulations, the
coercivity constant of the skeleton operator, kernel dimensions on both
sides, and the wavenumber scaling of the constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import skeleton as sk
from .problem import Problem, monolithic_matrix
from .traces import SkeletonField

__all__ = [
    "SolveReport",
    "SpectralReport",
    "DenseCapExceeded",
    "richardson",
    "gmres_tinv",
    "dense_operator",
    "infsup_skeleton",
    "coercivity_constant",
    "infsup_primary",
    "continuity_modulus",
    "verify_estimates",
    "sweep_wavenumber",
    "write_sweep_csv",
    "dirichlet_resonance",
    "SWEEP_COLUMNS",
]


class DenseCapExceeded(RuntimeError):
    """Requested dense analysis beyond the configured dimension cap."""


@dataclass
class SolveReport:
    """Outcome of one iterative skeleton solve."""

    method: str
    iterations: int
    residual_history: list
    converged: bool
    final_mismatch: float = None
    message: str = ""

    def as_dict(self):
        d = dict(method=self.method, iterations=self.iterations,
                 converged=bool(self.converged), message=self.message,
                 residual_history=[float(r) for r in self.residual_history])
        if self.final_mismatch is not None:
            d["final_mismatch"] = float(self.final_mismatch)
        return d


@dataclass
class SpectralReport:
    """Measured constants and inequality checks of one configuration."""

    n_dual: int
    n_sigma: int
    infsup_skeleton: float
    coercivity: float
    infsup_primary: float
    continuity_a: float
    kernel_dim_primary: int
    kernel_dim_skeleton: int
    pass_estimate_chain: bool
    pass_coercivity_bound: bool
    pass_kernel_match: bool
    pass_index_zero: bool
    single_domain_flagged: bool = False
    sigma_max_skeleton: float = field(default=np.nan)
    sigma_max_primary: float = field(default=np.nan)

    def all_passed(self) -> bool:
        return bool(self.pass_estimate_chain and self.pass_coercivity_bound
                    and self.pass_kernel_match and self.pass_index_zero)

    def as_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else
                    int(v) if isinstance(v, (int, np.integer)) else float(v))
                for k, v in self.__dict__.items()}


# ---------------------------------------------------------------------------
# iterative solvers
# ---------------------------------------------------------------------------

def richardson(problem: Problem, f: SkeletonField, relax: float = 0.5,
               tol: float = 1e-10, maxit: int = 1000):
    """Damped fixed-point iteration q <- q - relax ((Id + Pi S) q - f).

    Residuals are measured in the T^-1 norm.  Ten consecutive residual
    increases are reported as divergence (not raised).
    """
    if not 0.0 < relax < 1.0:
        raise ValueError("relaxation parameter must lie in (0, 1)")
    imp = problem.impedance
    fnorm = imp.norm(f)
    q = imp.zeros("dual")
    if fnorm == 0.0:
        return q, SolveReport("richardson", 0, [], True)

    history = []
    growth = 0
    converged = False
    message = ""
    for _ in range(maxit):
        r = f - sk.skeleton_apply(problem, q)
        rho = imp.norm(r)
        history.append(rho)
        if rho <= tol * fnorm:
            converged = True
            break
        if len(history) > 1 and rho > history[-2]:
            growth += 1
            if growth >= 10:
                message = "divergence: residual grew over 10 consecutive steps"
                break
        else:
            growth = 0
        q = q + relax * r
    if not converged and not message:
        message = f"not converged after {maxit} iterations"
    return q, SolveReport("richardson", len(history), history, converged,
                          message=message)


def _givens(h1: complex, h2: complex):
    t = math.hypot(abs(h1), abs(h2))
    return h1 / t, h2 / t


def _gmres_core(matvec, b, tol, restart, maxit):
    """Restarted GMRES with Givens rotations; returns (x, history, converged)."""
    n = len(b)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n, complex)
    if bnorm == 0.0:
        return x, [], True
    restart = n if restart is None else min(restart, n)
    history = []
    total = 0
    converged = False
    while total < maxit and not converged:
        r = b - matvec(x)
        beta = np.linalg.norm(r)
        if total == 0:
            history.append(beta)
        if beta <= tol * bnorm:
            converged = True
            break
        m = min(restart, maxit - total)
        V = np.zeros((n, m + 1), complex)
        H = np.zeros((m + 1, m), complex)
        cs = np.zeros(m, complex)
        sn = np.zeros(m, complex)
        g = np.zeros(m + 1, complex)
        V[:, 0] = r / beta
        g[0] = beta
        k_used = 0
        for k in range(m):
            w = matvec(V[:, k])
            for i in range(k + 1):
                H[i, k] = np.vdot(V[:, i], w)
                w = w - H[i, k] * V[:, i]
            H[k + 1, k] = np.linalg.norm(w)
            breakdown = H[k + 1, k].real <= 1e-300
            if not breakdown:
                V[:, k + 1] = w / H[k + 1, k]
            for i in range(k):
                hi, hi1 = H[i, k], H[i + 1, k]
                H[i, k] = np.conj(cs[i]) * hi + np.conj(sn[i]) * hi1
                H[i + 1, k] = -sn[i] * hi + cs[i] * hi1
            c, s = _givens(H[k, k], H[k + 1, k])
            cs[k], sn[k] = c, s
            H[k, k] = np.conj(c) * H[k, k] + np.conj(s) * H[k + 1, k]
            H[k + 1, k] = 0.0
            gk = g[k]
            g[k] = np.conj(c) * gk
            g[k + 1] = -s * gk
            total += 1
            k_used = k + 1
            history.append(abs(g[k + 1]))
            if abs(g[k + 1]) <= tol * bnorm or breakdown:
                converged = abs(g[k + 1]) <= tol * bnorm or breakdown
                break
        y = sla.solve_triangular(H[:k_used, :k_used], g[:k_used], lower=False)
        x = x + V[:, :k_used] @ y
    return x, history, converged


def gmres_tinv(problem: Problem, f: SkeletonField, tol: float = 1e-10,
               restart: int = None, maxit: int = None):
    """GMRES on the whitened skeleton operator.

    The operator is conjugated by the impedance Cholesky factor, so the
    Euclidean residual of the Krylov iteration equals the T^-1 residual of
    the skeleton equation.  Full (unrestarted) iteration by default.
    """
    imp = problem.impedance
    b = imp.whiten(f)
    n = len(b)
    if maxit is None:
        maxit = 2 * n

    def matvec(w):
        return imp.whiten(sk.skeleton_apply(problem, imp.unwhiten(w)))

    x, history, converged = _gmres_core(matvec, b, tol, restart, maxit)
    q = imp.unwhiten(x)
    message = "" if converged else f"not converged after {len(history) - 1} iterations"
    return q, SolveReport("gmres", max(len(history) - 1, 0), history, converged,
                          message=message)


# ---------------------------------------------------------------------------
# dense spectral harness
# ---------------------------------------------------------------------------

def dense_operator(problem: Problem, cap: int = 2000) -> np.ndarray:
    """Dense matrix of the whitened skeleton operator, column by column."""
    n = problem.dual_dim
    if n > cap:
        raise DenseCapExceeded(f"skeleton dimension {n} exceeds dense cap {cap}")
    imp = problem.impedance
    M = np.zeros((n, n), complex)
    e = np.zeros(n, complex)
    for i in range(n):
        e[:] = 0.0
        e[i] = 1.0
        M[:, i] = imp.whiten(sk.skeleton_apply(problem, imp.unwhiten(e)))
    return M


def infsup_skeleton(problem: Problem, cap: int = 2000) -> float:
    """Smallest singular value of the whitened skeleton operator."""
    return float(sla.svdvals(dense_operator(problem, cap)).min())


def coercivity_constant(problem: Problem, cap: int = 2000) -> float:
    """Smallest eigenvalue of the Hermitian part of the whitened operator."""
    M = dense_operator(problem, cap)
    return float(sla.eigvalsh(0.5 * (M + M.conj().T)).min())


def _primary_whitener(problem: Problem):
    """Cholesky factors of the (volume, multiplier) norm Gram."""
    H = problem.global_forms.H.toarray()
    L_h = np.linalg.cholesky(H)
    t_inv = problem.bc.t_inverse()
    L_p = np.linalg.cholesky(t_inv)
    return L_h, L_p


def _primary_dense_whitened(problem: Problem) -> np.ndarray:
    A = monolithic_matrix(problem).toarray()
    L_h, L_p = _primary_whitener(problem)
    n = L_h.shape[0]
    L = np.zeros((A.shape[0], A.shape[0]))
    L[:n, :n] = L_h
    L[n:, n:] = L_p
    X = sla.solve_triangular(L, A, lower=True)
    return sla.solve_triangular(L, X.T, lower=True).T


def _primary_extremes_iterative(problem: Problem, tol: float = 1e-8):
    """(sigma_min, sigma_max) of the whitened monolithic operator, matrix-free.

    Both extremes come from Lanczos on SPD pencils: sigma_max^2 is the top
    eigenvalue of (A^H W^-1 A, W) and 1/sigma_min^2 the top eigenvalue of
    (A^-H W A^-1, W^-1), with W the block norm Gram.
    """
    from .impedance import _solve_complex

    A = monolithic_matrix(problem)
    nv = problem.mesh.num_vertices
    ng = problem.n_gamma
    n = nv + ng
    H = problem.global_forms.H.tocsc()
    h_lu = spla.splu(H)
    t_gamma = problem.bc.t_gamma
    t_inv = problem.bc.t_inverse()
    a_lu = spla.splu(A.tocsc())

    def w_mat(x):
        return np.concatenate([H @ x[:nv], t_inv @ x[nv:]])

    def w_inv(x):
        return np.concatenate([_solve_complex(h_lu, x[:nv]), t_gamma @ x[nv:]])

    W = spla.LinearOperator((n, n), matvec=w_mat, dtype=complex)
    Winv = spla.LinearOperator((n, n), matvec=w_inv, dtype=complex)

    K = spla.LinearOperator((n, n), dtype=complex,
                            matvec=lambda x: A.conj().T @ w_inv(A @ x))
    lam_max = spla.eigsh(K, k=1, M=W, Minv=Winv, which="LA",
                         return_eigenvectors=False, tol=tol)[0]

    # 1/sigma_min^2 = max of y^H (A^-1 W A^-H) y over y^H W^-1 y; the two
    # solve orders give the same singular spectrum.
    Ginv = spla.LinearOperator((n, n), dtype=complex,
                               matvec=lambda y: a_lu.solve(w_mat(a_lu.solve(y, trans="H"))))
    lam_inv = spla.eigsh(Ginv, k=1, M=Winv, Minv=W, which="LA",
                         return_eigenvectors=False, tol=tol)[0]
    return float(1.0 / np.sqrt(lam_inv)), float(np.sqrt(lam_max))


def infsup_primary(problem: Problem, dense_cap: int = 2500,
                   svd_threshold: float = 1e-8):
    """(sigma_min, sigma_max, kernel_dim) of the whitened monolithic operator."""
    n = problem.mesh.num_vertices + problem.n_gamma
    if n <= dense_cap:
        svals = sla.svdvals(_primary_dense_whitened(problem))
        smax = float(svals.max())
        kernel = int(np.sum(svals < svd_threshold * smax))
        return float(svals.min()), smax, kernel
    smin, smax = _primary_extremes_iterative(problem)
    kernel = 1 if smin < svd_threshold * smax else 0
    return smin, smax, kernel


def continuity_modulus(problem: Problem) -> float:
    """Operator norm of the block-diagonal form in the block trace norms.

    Block diagonality makes this the maximum over blocks of the whitened
    block norm: the boundary block in the (T, T^-1) pair norm, each
    subdomain in its volume norm.
    """
    best = 0.0
    t = problem.bc.t_gamma
    L_t = np.linalg.cholesky(t)
    L_ti = np.linalg.cholesky(problem.bc.t_inverse())
    Baa, Bap, Bpa, Bpp = problem.bc.a_gamma_blocks()
    Ag = np.block([[Baa, Bap], [Bpa, Bpp]]).astype(complex)
    ng = t.shape[0]
    L = np.zeros((2 * ng, 2 * ng))
    L[:ng, :ng] = L_t
    L[ng:, ng:] = L_ti
    X = sla.solve_triangular(L, Ag, lower=True)
    X = sla.solve_triangular(L, X.T, lower=True).T
    best = max(best, float(sla.svdvals(X).max()))
    for lf in problem.forms:
        L_h = np.linalg.cholesky(lf.H.toarray())
        X = sla.solve_triangular(L_h, lf.A.toarray(), lower=True)
        X = sla.solve_triangular(L_h, X.T, lower=True).T
        best = max(best, float(sla.svdvals(X).max()))
    return best


def verify_estimates(problem: Problem, svd_threshold: float = 1e-8,
                     dense_cap: int = 2000, primary_dense_cap: int = 2500,
                     slack: float = 1e-9) -> SpectralReport:
    """Measure every certified inequality of the configuration.

    Checks, in order: the estimate chain between the two inf-sup constants,
    the coercivity lower bound, the kernel dimension correspondence, and
    the (trivially zero) index consistency through the transposed operator.
    """
    M = dense_operator(problem, dense_cap)
    svals = sla.svdvals(M)
    smax_s = float(svals.max())
    infsup_s = float(svals.min())
    kernel_s = int(np.sum(svals < svd_threshold * smax_s))
    coer = float(sla.eigvalsh(0.5 * (M + M.conj().T)).min())

    infsup_p, smax_p, kernel_p = infsup_primary(problem, primary_dense_cap,
                                                svd_threshold)
    norm_a = continuity_modulus(problem)

    svals_t = sla.svdvals(M.T)
    kernel_t = int(np.sum(svals_t < svd_threshold * float(svals_t.max())))

    return SpectralReport(
        n_dual=problem.dual_dim,
        n_sigma=problem.index.n_sigma,
        infsup_skeleton=infsup_s,
        coercivity=coer,
        infsup_primary=infsup_p,
        continuity_a=norm_a,
        kernel_dim_primary=kernel_p,
        kernel_dim_skeleton=kernel_s,
        pass_estimate_chain=bool(infsup_p <= (1.0 + norm_a) * infsup_s + slack),
        pass_coercivity_bound=bool(coer >= 0.5 * infsup_s ** 2 - slack),
        pass_kernel_match=bool(kernel_p == kernel_s),
        pass_index_zero=bool(kernel_s == kernel_t),
        single_domain_flagged=bool(problem.num_subdomains == 1),
        sigma_max_skeleton=smax_s,
        sigma_max_primary=smax_p,
    )


# ---------------------------------------------------------------------------
# wavenumber sweep
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("k", "n_sigma", "infsup_primary", "norm_A", "infsup_skeleton",
                 "coercivity", "kernel_primary", "kernel_skeleton",
                 "pass_thm_final", "pass_cor_coercivity")


def _resolution(k: float, px: int, py: int, points_per_wavelength: float) -> int:
    cells = max(int(math.ceil(points_per_wavelength * k / (2.0 * math.pi))), 1)
    step = math.lcm(px, py)
    return ((cells + step - 1) // step) * step


def sweep_wavenumber(k_values, px: int = 2, py: int = 2,
                     points_per_wavelength: float = 10.0,
                     tgamma: str = "collar", lambda_scale: float = 1.0,
                     dense_cap: int = 2000, primary_dense_cap: int = 2500,
                     svd_threshold: float = 1e-8):
    """Constants of the robin reference family across wavenumbers.

    Per k: resolution from the points-per-wavelength rule rounded to the
    partition grid, gamma = 1/k, robin impedance k times the boundary
    mass.  Returns (rows, slopes); slopes are the log-log regression
    coefficients of the skeleton inf-sup and coercivity constants against
    k, or None for fewer than two wavenumbers.
    """
    k_values = list(k_values)
    if not k_values:
        raise ValueError("empty wavenumber list")
    from .problem import build_problem

    rows = []
    for k in k_values:
        n = _resolution(k, px, py, points_per_wavelength)
        problem = build_problem(n, n, px, py, k=float(k), bc_kind="robin",
                                lambda_scale=lambda_scale, tgamma=tgamma)
        rep = verify_estimates(problem, svd_threshold=svd_threshold,
                               dense_cap=dense_cap,
                               primary_dense_cap=primary_dense_cap)
        rows.append({
            "k": float(k), "n_sigma": rep.n_dual,
            "infsup_primary": rep.infsup_primary, "norm_A": rep.continuity_a,
            "infsup_skeleton": rep.infsup_skeleton, "coercivity": rep.coercivity,
            "kernel_primary": rep.kernel_dim_primary,
            "kernel_skeleton": rep.kernel_dim_skeleton,
            "pass_thm_final": rep.pass_estimate_chain,
            "pass_cor_coercivity": rep.pass_coercivity_bound,
        })

    slopes = None
    if len(k_values) >= 2:
        lk = np.log([r["k"] for r in rows])
        slopes = {
            "infsup_skeleton": float(np.polyfit(lk, np.log([r["infsup_skeleton"]
                                                            for r in rows]), 1)[0]),
            "coercivity": float(np.polyfit(lk, np.log([r["coercivity"]
                                                       for r in rows]), 1)[0]),
        }
    return rows, slopes


def write_sweep_csv(rows, slopes, stream) -> None:
    """Emit the sweep table with slope footer lines."""
    stream.write(",".join(SWEEP_COLUMNS) + "\n")
    for r in rows:
        cells = []
        for c in SWEEP_COLUMNS:
            v = r[c]
            if isinstance(v, bool):
                cells.append("true" if v else "false")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(f"{float(v):.12g}")
        stream.write(",".join(cells) + "\n")
    if slopes is not None:
        stream.write(f"# slope log infsup_skeleton vs log k = "
                     f"{slopes['infsup_skeleton']:.6g}\n")
        stream.write(f"# slope log coercivity vs log k = "
                     f"{slopes['coercivity']:.6g}\n")


# ---------------------------------------------------------------------------
# resonance engineering
# ---------------------------------------------------------------------------

def dirichlet_resonance(mesh) -> float:
    """Smallest discrete Dirichlet eigenvalue of (-Laplace) on the mesh.

    Returned as kappa^2: running the Dirichlet cavity at exactly this
    value gives the monolithic operator a one-dimensional kernel (the
    eigenvalue is simple on a rectangle), which the skeleton operator
    must inherit.
    """
    from .assembly import Coefficients, _assemble_on

    coeffs = Coefficients(k=1.0, kappa_sq=0.0, gamma=1.0)
    glob = _assemble_on(mesh, np.arange(mesh.num_triangles),
                        np.arange(mesh.num_vertices), 0, coeffs)
    gamma = np.unique(mesh.boundary_edges)
    interior = np.setdiff1d(np.arange(mesh.num_vertices), gamma)
    K = glob.K.tocsc()[np.ix_(interior, interior)]
    M = glob.M.tocsc()[np.ix_(interior, interior)]
    ni = len(interior)
    if ni <= 1500:
        vals = sla.eigh(K.toarray(), M.toarray(), eigvals_only=True,
                        subset_by_index=[0, 0])
        return float(vals[0])
    vals = spla.eigsh(K, k=1, M=M, sigma=0.0, which="LM",
                      return_eigenvectors=False)
    return float(vals[0])
