"""Dense symmetric linear-algebra kernels.

Solvers shared by the rest of the package: discrete algebraic Riccati
equation, discrete Lyapunov equation, PSD matrix square root, spectral
radius, equality-constrained QP with multiplier extraction, and a
feasibility search for the storage-shape matrix.  Everything is plain
dense numpy; problem sizes are tiny (n <= 10).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinalgError",
    "NonConvergence",
    "NotStabilizable",
    "UnstableMatrix",
    "NotPsd",
    "SingularKkt",
    "NotDetectable",
    "FeasibilitySearchFailed",
    "KktSolution",
    "sym",
    "spectral_radius",
    "sqrtm_psd",
    "solve_dare",
    "solve_discrete_lyapunov",
    "solve_equality_qp",
    "is_detectable",
    "find_storage_shape",
]


class LinalgError(Exception):
    """Base class for kernel failures."""


class NonConvergence(LinalgError):
    pass


class NotStabilizable(LinalgError):
    pass


class UnstableMatrix(LinalgError):
    pass


class NotPsd(LinalgError):
    pass


class SingularKkt(LinalgError):
    pass


class NotDetectable(LinalgError):
    pass


class FeasibilitySearchFailed(LinalgError):
    pass


def sym(M):
    """Symmetrize a square matrix (absorbs round-off drift)."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def sqrtm_psd(M, tol: float = 1e-8):
    """Symmetric square root of a positive semidefinite matrix.

    Eigenvalues are clipped at zero to absorb round-off; a genuinely
    negative spectrum raises ``NotPsd``.

    Parameters
    ----------
    M : array_like (d, d)
        Symmetric positive semidefinite matrix.
    tol : float
        Relative threshold separating round-off from true indefiniteness.

    Returns
    -------
    ndarray (d, d)
        Symmetric S >= 0 with ``S @ S`` close to ``M``.
    """
    M = sym(M)
    w, V = np.linalg.eigh(M)
    scale = 1.0 + float(np.max(np.abs(w), initial=0.0))
    if np.min(w, initial=0.0) < -tol * scale:
        raise NotPsd(f"matrix has eigenvalue {np.min(w):.3e} below -{tol:.0e}*(1+|M|)")
    w = np.clip(w, 0.0, None)
    return sym((V * np.sqrt(w)) @ V.T)


def solve_dare(A, B, Q, R, tol: float = 1e-12, max_iter: int = 10**6):
    """Solve the discrete algebraic Riccati equation by fixed-point iteration.

    Iterates ``P <- A'PA + Q - A'PB (R + B'PB)^{-1} B'PA`` from ``P = Q``
    until the update is below ``tol`` in max norm, and returns the
    stabilizing pair ``(P, K)`` with ``K = -(R + B'PB)^{-1} B'PA``.

    Raises
    ------
    NotStabilizable
        If the iterates blow up (monitored through ``|P|``).
    NonConvergence
        If ``max_iter`` updates do not reach the tolerance.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = sym(Q)
    R = sym(R)
    P = Q.copy()
    blowup = 1e12 * (1.0 + np.max(np.abs(Q)))
    for _ in range(max_iter):
        G = R + B.T @ P @ B
        K = -np.linalg.solve(G, B.T @ P @ A)
        P_next = sym(A.T @ P @ A + Q + A.T @ P @ B @ K)
        if np.max(np.abs(P_next)) > blowup:
            raise NotStabilizable("Riccati iterates diverge; (A, B) not stabilizable")
        if np.max(np.abs(P_next - P)) <= tol:
            P = P_next
            break
        P = P_next
    else:
        raise NonConvergence(f"DARE fixed point not reached in {max_iter} iterations")
    G = R + B.T @ P @ B
    K = -np.linalg.solve(G, B.T @ P @ A)
    resid = np.max(np.abs(P - sym(A.T @ P @ A + Q + A.T @ P @ B @ K)))
    if resid > 1e-9 * (1.0 + np.max(np.abs(P))):
        raise NonConvergence(f"DARE residual {resid:.3e} above tolerance")
    return P, K


def solve_discrete_lyapunov(Acl, W, tol: float = 1e-12, max_iter: int = 10**6):
    """Solve ``Sigma = Acl Sigma Acl' + W`` by fixed-point iteration.

    Requires ``spectral_radius(Acl) < 1``; convergence is geometric at
    rate ``rho(Acl)**2``.
    """
    Acl = np.asarray(Acl, dtype=float)
    W = sym(W)
    if spectral_radius(Acl) >= 1.0 - 1e-9:
        raise UnstableMatrix("closed-loop matrix is not Schur stable")
    S = W.copy()
    for _ in range(max_iter):
        S_next = sym(Acl @ S @ Acl.T + W)
        if np.max(np.abs(S_next - S)) <= tol * (1.0 + np.max(np.abs(S_next))):
            S = S_next
            break
        S = S_next
    else:
        raise NonConvergence(f"Lyapunov fixed point not reached in {max_iter} iterations")
    resid = np.max(np.abs(S - sym(Acl @ S @ Acl.T + W)))
    if resid > 1e-10 * (1.0 + np.max(np.abs(S))):
        raise NonConvergence(f"Lyapunov residual {resid:.3e} above tolerance")
    return S


@dataclass(frozen=True)
class KktSolution:
    """Solution of an equality-constrained QP with its multiplier.

    The sign convention is fixed so that stationarity reads
    ``2 H z + g + Ceq' multiplier = 0`` with ``z = (x_opt, u_opt)``.
    """

    x_opt: np.ndarray
    u_opt: np.ndarray
    multiplier: np.ndarray


def solve_equality_qp(H, g, Ceq, n_x: int | None = None) -> KktSolution:
    """Minimize ``z' H z + g' z`` subject to ``Ceq z = 0``.

    Parameters
    ----------
    H : array_like (d, d)
        Positive definite Hessian half (the objective is ``z'Hz + g'z``).
    g : array_like (d,)
        Linear coefficient.
    Ceq : array_like (m, d)
        Full-row-rank constraint matrix.
    n_x : int, optional
        Split index between the state and control parts of ``z``;
        defaults to the number of constraints ``m``.

    Returns
    -------
    KktSolution
        With ``x_opt = z[:n_x]``, ``u_opt = z[n_x:]`` and the multiplier
        of the constraint block.
    """
    H = sym(H)
    g = np.asarray(g, dtype=float)
    Ceq = np.atleast_2d(np.asarray(Ceq, dtype=float))
    m, d = Ceq.shape
    if n_x is None:
        n_x = m
    kkt = np.block([[2.0 * H, Ceq.T], [Ceq, np.zeros((m, m))]])
    if np.linalg.cond(kkt) > 1e14:
        raise SingularKkt("KKT matrix numerically singular")
    rhs = np.concatenate([-g, np.zeros(m)])
    sol = np.linalg.solve(kkt, rhs)
    z, mult = sol[:d], sol[d:]
    stat = np.max(np.abs(2.0 * H @ z + g + Ceq.T @ mult))
    feas = np.max(np.abs(Ceq @ z), initial=0.0)
    scale = 1.0 + np.max(np.abs(g)) + np.max(np.abs(H))
    if stat > 1e-10 * scale or feas > 1e-10 * scale:
        raise SingularKkt(f"KKT residuals too large (stat={stat:.3e}, feas={feas:.3e})")
    return KktSolution(x_opt=z[:n_x], u_opt=z[n_x:], multiplier=mult)


def is_detectable(A, C, tol: float = 1e-10) -> bool:
    """PBH detectability test of the pair ``(A, C)``.

    Every eigenvalue of ``A`` with modulus >= 1 must be observable
    through ``C``: ``rank([A - lam I; C]) = n``.
    """
    A = np.asarray(A, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) < 1.0 - 1e-12:
            continue
        M = np.vstack([A - lam * np.eye(n), C.astype(complex)])
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] <= tol * sv[0]:
            return False
    return True


def find_storage_shape(A, Q1, margin_tol: float = 1e-8, max_iter: int = 10**4):
    """Find S > 0 with ``Q1 + S - A'SA`` positive definite.

    For a Schur-stable ``A`` the discrete Lyapunov solution of
    ``S = A'SA + I`` does the job directly.  Otherwise a projected
    subgradient ascent maximizes ``lam_min(Q1 + S - A'SA)`` over the box
    ``I <= S <= 1e6 I``, using eigenvector outer products as
    supergradients of the concave objective.

    Requires ``(A, Q1^{1/2})`` detectable, which guarantees a feasible
    point exists.
    """
    A = np.asarray(A, dtype=float)
    Q1 = sym(Q1)
    n = A.shape[0]
    if not is_detectable(A, sqrtm_psd(Q1)):
        raise NotDetectable("(A, Q1^{1/2}) fails the PBH detectability test")

    def shape_margin(S):
        return float(np.min(np.linalg.eigvalsh(sym(Q1 + S - A.T @ S @ A))))

    if spectral_radius(A) < 1.0:
        S = solve_discrete_lyapunov(A.T, np.eye(n))
        if shape_margin(S) >= margin_tol:
            return S

    cap = 1e6
    S = np.eye(n)
    best_S, best_margin = S.copy(), shape_margin(S)
    for it in range(max_iter):
        M = sym(Q1 + S - A.T @ S @ A)
        w, V = np.linalg.eigh(M)
        vmin = V[:, 0]
        grad = np.outer(vmin, vmin) - np.outer(A @ vmin, A @ vmin)
        S = S + grad / np.sqrt(it + 1.0)
        w2, V2 = np.linalg.eigh(sym(S))
        S = sym((V2 * np.clip(w2, 1.0, cap)) @ V2.T)
        m = shape_margin(S)
        if m > best_margin:
            best_margin, best_S = m, S.copy()
    if best_margin < margin_tol:
        raise FeasibilitySearchFailed(
            f"storage-shape search stalled at margin {best_margin:.3e}"
        )
    return best_S
