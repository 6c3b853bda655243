"""Stationary pair, storage function, and the mean-square dissipativity residual.

The stationary state process runs the Riccati feedback around a shifted
anchor: ``U(k) = K (X(k) - x_tilde - x_s) + u_tilde + u_s``.  The storage
function is quadratic-plus-linear in the gap to the (shifted) stationary
process and certifies strict dissipativity with margin ``r`` per unit of
mean-square distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .linalg import sym
from .model import MomentState, ProblemSpec, shift_problem, stage_cost_from_moments

__all__ = [
    "GammaSearchFailed",
    "StationaryPair",
    "StorageData",
    "coupling_matrix",
    "build_storage",
    "build_stationary_pair",
    "eval_storage",
    "storage_lower_bound",
    "propagate_joint_step",
    "dissipativity_residual",
]


class GammaSearchFailed(Exception):
    pass


@dataclass(frozen=True)
class StationaryPair:
    """Feedback gain, anchors, and stationary moments of the turnpike process."""

    K: np.ndarray
    x_s: np.ndarray
    u_s: np.ndarray
    x_tilde: np.ndarray
    u_tilde: np.ndarray
    mu_s: np.ndarray
    Sigma_s: np.ndarray
    control_offset: np.ndarray
    stationary_cost: float

    def control_const(self) -> np.ndarray:
        """Constant part of the stationary feedback written as U = K X + d."""
        return self.control_offset - self.K @ (self.x_tilde + self.x_s)

    @property
    def mu_u(self) -> np.ndarray:
        """Stationary control mean (equals the control offset)."""
        return self.K @ (self.mu_s - self.x_tilde - self.x_s) + self.control_offset

    @property
    def Sigma_u(self) -> np.ndarray:
        return self.K @ self.Sigma_s @ self.K.T


@dataclass(frozen=True)
class StorageData:
    """Matrices, anchors, and constants of the storage function."""

    P: np.ndarray
    S: np.ndarray
    q: np.ndarray
    r: float
    gamma: float
    H: np.ndarray
    x_s: np.ndarray
    x_tilde: np.ndarray
    u_tilde: np.ndarray


def coupling_matrix(gamma: float, S_tilde, A, B, Q1, R1):
    """Hessian half of the rotated quadratic form.

    Defined by the identity
    ``(x,u)' H (x,u) = x'Q1 x + u'R1 u + gamma*(|x|^2_St - |Ax+Bu|^2_St)``;
    positive definite for gamma small enough.
    """
    St = gamma * np.asarray(S_tilde, dtype=float)
    Hxx = Q1 + St - A.T @ St @ A
    Hxu = -A.T @ St @ B
    Huu = R1 - B.T @ St @ B
    return sym(np.block([[Hxx, Hxu], [Hxu.T, Huu]]))


def build_storage(spec: ProblemSpec, max_halvings: int = 60) -> StorageData:
    """Construct the storage data (P, S, q, r) for a problem instance.

    The scale ``gamma`` is halved from 1 until the coupled Hessian H is
    positive definite; the anchor pair and the multiplier come from the
    equality-constrained QP ``min z'Hz + (s_hat, v_hat)'z`` subject to
    ``(I-A)x - Bu = 0``; the margin ``r`` is the smallest eigenvalue of
    the control-block Schur complement of H.
    """
    sys_, cost = spec.system, spec.cost
    A, B = sys_.A, sys_.B
    shifted = shift_problem(spec)
    P, _ = linalg.solve_dare(A, B, cost.Q1 + cost.Q2, cost.R1 + cost.R2)
    S_tilde = linalg.find_storage_shape(A, cost.Q1)

    gamma = 1.0
    H = coupling_matrix(gamma, S_tilde, A, B, cost.Q1, cost.R1)
    for _ in range(max_halvings):
        if np.min(np.linalg.eigvalsh(H)) >= 1e-10:
            break
        gamma *= 0.5
        H = coupling_matrix(gamma, S_tilde, A, B, cost.Q1, cost.R1)
    else:
        raise GammaSearchFailed("no gamma in the dyadic grid makes H positive definite")

    n = sys_.n
    g = np.concatenate([shifted.s_hat, shifted.v_hat])
    Ceq = np.hstack([np.eye(n) - A, -B])
    kkt = linalg.solve_equality_qp(H, g, Ceq, n_x=n)

    Hxx, Hxu, Huu = H[:n, :n], H[:n, n:], H[n:, n:]
    schur = sym(Hxx - Hxu @ np.linalg.solve(Huu, Hxu.T))
    r = float(np.min(np.linalg.eigvalsh(schur)))
    return StorageData(
        P=P,
        S=sym(gamma * S_tilde),
        q=kkt.multiplier,
        r=r,
        gamma=gamma,
        H=H,
        x_s=shifted.x_s,
        x_tilde=kkt.x_opt,
        u_tilde=kkt.u_opt,
    )


def build_stationary_pair(spec: ProblemSpec, storage: StorageData | None = None) -> StationaryPair:
    """Assemble the stationary pair of the dissipativity construction.

    K is the Riccati gain for weights (Q1+Q2, R1+R2); the mean anchor is
    ``mu_s = x_s + x_tilde`` and the stationary covariance solves the
    closed-loop discrete Lyapunov equation driven by ``E Sigma_W E'``.
    """
    sys_, cost = spec.system, spec.cost
    A, B, E = sys_.A, sys_.B, sys_.E
    if storage is None:
        storage = build_storage(spec)
    _, K = linalg.solve_dare(A, B, cost.Q1 + cost.Q2, cost.R1 + cost.R2)
    shifted = shift_problem(spec)
    x_s, u_s = shifted.x_s, shifted.u_s
    x_t, u_t = storage.x_tilde, storage.u_tilde

    mu_s = x_s + x_t
    offset = u_t + u_s
    Sigma_s = linalg.solve_discrete_lyapunov(A + B @ K, E @ spec.noise.cov @ E.T)
    mu_u = K @ (mu_s - x_t - x_s) + offset
    joint = MomentState.joined(
        {"X": (mu_s, Sigma_s), "U": (mu_u, K @ Sigma_s @ K.T)},
        cross={("X", "U"): Sigma_s @ K.T},
    )
    c_star = stage_cost_from_moments(cost, joint)
    return StationaryPair(
        K=K, x_s=x_s, u_s=u_s, x_tilde=x_t, u_tilde=u_t,
        mu_s=mu_s, Sigma_s=Sigma_s, control_offset=offset,
        stationary_cost=c_star,
    )


def eval_storage(storage: StorageData, joint: MomentState) -> float:
    """Evaluate the storage function from joint (X, Xs) moments.

    ``E[|X - (Xs - x_tilde)|^2_{P+S}] - E[|X - x_s|^2_P]
    + q'(E X - (E Xs - x_tilde))``, expanded through means, covariances
    and the X-Xs cross-covariance.
    """
    if "Xs" not in joint.blocks:
        raise KeyError("joint moment state must carry an 'Xs' block")
    mX, mXs = joint.block_mean("X"), joint.block_mean("Xs")
    SX, SXs = joint.block_cov("X"), joint.block_cov("Xs")
    C = joint.block_cov("X", "Xs")
    PS = storage.P + storage.S
    mY = mX - mXs + storage.x_tilde
    SY = SX + SXs - C - C.T
    quad_gap = float(np.trace(PS @ SY) + mY @ PS @ mY)
    dx = mX - storage.x_s
    quad_abs = float(np.trace(storage.P @ SX) + dx @ storage.P @ dx)
    return quad_gap - quad_abs + float(storage.q @ mY)


def storage_lower_bound(storage: StorageData, pair: StationaryPair) -> float:
    """Uniform lower bound M on the storage function.

    Minimizes the integrand pointwise in x for fixed anchor
    ``a = Xs(k) - x_tilde`` (a convex quadratic with Hessian 2S), which
    yields a quadratic in a; its expectation is taken under the
    stationary moments of a.
    """
    P, S, q, x_s = storage.P, storage.S, storage.q, storage.x_s
    PS = P + S
    w = q + 2.0 * P @ x_s
    Qm = sym(PS - PS @ np.linalg.solve(S, PS))
    lm = PS @ np.linalg.solve(S, w) - q
    cm = -0.25 * float(w @ np.linalg.solve(S, w)) - float(x_s @ P @ x_s)
    mu_a = pair.mu_s - pair.x_tilde
    Sigma_a = pair.Sigma_s
    return float(np.trace(Qm @ Sigma_a) + mu_a @ Qm @ mu_a + lm @ mu_a + cm)


def propagate_joint_step(spec: ProblemSpec, pair: StationaryPair, joint: MomentState) -> MomentState:
    """Exact one-step propagation of (X, U, Xs) moments to (X+, Xs+).

    Both successors share the same noise draw, so ``E Sigma_W E'`` enters
    the X+ block, the Xs+ block, and their cross block in full.
    """
    sys_ = spec.system
    A, B, E, z = sys_.A, sys_.B, sys_.E, sys_.z
    n, l = sys_.n, sys_.l
    K = pair.K
    d_s = pair.control_const()

    mz = np.concatenate([joint.block_mean("X"), joint.block_mean("U"), joint.block_mean("Xs")])
    Sz = np.block([
        [joint.block_cov("X"), joint.block_cov("X", "U"), joint.block_cov("X", "Xs")],
        [joint.block_cov("X", "U").T, joint.block_cov("U"), joint.block_cov("U", "Xs")],
        [joint.block_cov("X", "Xs").T, joint.block_cov("U", "Xs").T, joint.block_cov("Xs")],
    ])
    L = np.block([
        [A, B, np.zeros((n, n))],
        [np.zeros((n, n)), np.zeros((n, l)), A + B @ K],
    ])
    const = np.concatenate([z, B @ d_s + z])
    EE = np.vstack([E, E])
    m_new = L @ mz + const + EE @ spec.noise.mean
    S_new = sym(L @ Sz @ L.T + EE @ spec.noise.cov @ EE.T)
    return MomentState(
        mean=m_new, cov=S_new,
        blocks={"X": slice(0, n), "Xs": slice(n, 2 * n)},
    )


def dissipativity_residual(
    spec: ProblemSpec,
    pair: StationaryPair,
    storage: StorageData,
    joint: MomentState,
) -> float:
    """Slack of the mean-square dissipativity inequality at a joint probe.

    ``stage_cost - C_star + storage(k) - storage(k+1) - r * E|X - Xs|^2``;
    nonnegative for every joint moment state whose Xs block carries the
    stationary moments.
    """
    for lab in ("X", "U", "Xs"):
        if lab not in joint.blocks:
            raise KeyError(f"joint moment state missing block {lab!r}")
    ell = stage_cost_from_moments(spec.cost, joint)
    lam_now = eval_storage(storage, joint)
    lam_next = eval_storage(storage, propagate_joint_step(spec, pair, joint))
    dX = joint.block_mean("X") - joint.block_mean("Xs")
    msd = float(
        dX @ dX
        + np.trace(joint.block_cov("X"))
        + np.trace(joint.block_cov("Xs"))
        - 2.0 * np.trace(joint.block_cov("X", "Xs"))
    )
    return ell - pair.stationary_cost + lam_now - lam_next - storage.r * msd
