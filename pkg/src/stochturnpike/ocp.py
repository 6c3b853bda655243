"""Exact finite-horizon solver and exact moment propagation.

Additive noise plus quadratic cost decouples the problem into a
deterministic affine LQ problem for the means and a zero-mean stochastic
LQ problem for the deviations, so the optimal policy is affine with
deterministic gains:

    U(k) = u_bar_k + K_k (X(k) - m_k),

where ``m_k`` is the nominal mean path induced by ``u_bar``.  Both parts
are solved by backward Riccati recursions with zero terminal cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import sym
from .model import MomentState, ProblemSpec, stage_cost_from_moments
from .stationary import StationaryPair, StorageData, eval_storage

__all__ = [
    "AffinePolicy",
    "MomentTrajectory",
    "solve_ocp",
    "nominal_mean_path",
    "propagate_moments",
    "cost_of",
    "rotated_cost",
    "near_optimal_policy",
]


@dataclass(frozen=True)
class AffinePolicy:
    """Time-varying affine feedback: gains per step plus mean controls."""

    gains: np.ndarray       # (N, l, n)
    mean_controls: np.ndarray  # (N, l)
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=float))
        object.__setattr__(self, "mean_controls", np.asarray(self.mean_controls, dtype=float))
        if self.gains.shape[0] != self.horizon or self.mean_controls.shape[0] != self.horizon:
            raise ValueError("policy arrays must have one entry per step")


@dataclass(frozen=True)
class MomentTrajectory:
    """Exact joint moments of (X, Xs) plus control moments along a run."""

    joints: list          # N+1 MomentState over blocks X, Xs
    control_means: np.ndarray   # (N, l)
    control_covs: np.ndarray    # (N, l, l)
    horizon: int


def solve_ocp(spec: ProblemSpec) -> AffinePolicy:
    """Solve the stochastic OCP exactly via mean/deviation decomposition.

    The mean-control sequence solves the deterministic affine LQ problem
    in the state mean (weights Q1, R1, with the linear terms and the
    constant drift ``E mu_W + z``); the deviation gains solve the
    zero-mean LQ recursion with weights (Q1+Q2, R1+R2).  Terminal cost is
    zero in both parts.
    """
    sys_, cost = spec.system, spec.cost
    A, B = sys_.A, sys_.B
    n, l, N = sys_.n, sys_.l, spec.horizon
    d = sys_.E @ spec.noise.mean + sys_.z

    # mean problem: value function mu'P mu + b'mu + e, backward from zero
    P = np.zeros((n, n))
    b = np.zeros(n)
    F = np.zeros((N, l, n))
    g = np.zeros((N, l))
    for k in reversed(range(N)):
        Rbar = cost.R1 + B.T @ P @ B
        M = B.T @ P @ A
        m_vec = B.T @ P @ d + 0.5 * cost.v + 0.5 * B.T @ b
        F[k] = -np.linalg.solve(Rbar, M)
        g[k] = -np.linalg.solve(Rbar, m_vec)
        b = cost.s + 2.0 * A.T @ P @ d + A.T @ b - 2.0 * M.T @ np.linalg.solve(Rbar, m_vec)
        P = sym(cost.Q1 + A.T @ P @ A - M.T @ np.linalg.solve(Rbar, M))

    mu = spec.init.mean.copy()
    u_bar = np.zeros((N, l))
    for k in range(N):
        u_bar[k] = F[k] @ mu + g[k]
        mu = A @ mu + B @ u_bar[k] + d

    # deviation problem: standard Riccati recursion, terminal zero
    Qd = cost.Q1 + cost.Q2
    Rd = cost.R1 + cost.R2
    Pt = np.zeros((n, n))
    K = np.zeros((N, l, n))
    for k in reversed(range(N)):
        Rbar = Rd + B.T @ Pt @ B
        K[k] = -np.linalg.solve(Rbar, B.T @ Pt @ A)
        Pt = sym(Qd + A.T @ Pt @ A + A.T @ Pt @ B @ K[k])

    return AffinePolicy(gains=K, mean_controls=u_bar, horizon=N)


def nominal_mean_path(spec: ProblemSpec, policy: AffinePolicy) -> np.ndarray:
    """Mean path induced by the policy's mean controls from the initial mean."""
    sys_ = spec.system
    d = sys_.E @ spec.noise.mean + sys_.z
    m = np.zeros((policy.horizon + 1, sys_.n))
    m[0] = spec.init.mean
    for k in range(policy.horizon):
        m[k + 1] = sys_.A @ m[k] + sys_.B @ policy.mean_controls[k] + d
    return m


def propagate_moments(
    spec: ProblemSpec,
    policy: AffinePolicy,
    pair: StationaryPair,
    init_cross=None,
) -> MomentTrajectory:
    """Exact forward propagation of the coupled (X, Xs) moments.

    X runs the policy, Xs runs the stationary feedback, both driven by
    the same noise; X0 comes from the problem spec and Xs(0) carries the
    stationary moments.  ``init_cross`` is the initial Cov(X0, Xs0);
    omitted it is zero (independent initial values).
    """
    sys_ = spec.system
    A, B, E, z = sys_.A, sys_.B, sys_.E, sys_.z
    n, l, N = sys_.n, sys_.l, policy.horizon
    m_nom = nominal_mean_path(spec, policy)
    d_s = pair.control_const()

    mz = np.concatenate([spec.init.mean, pair.mu_s])
    Sz = np.zeros((2 * n, 2 * n))
    Sz[:n, :n] = spec.init.cov
    Sz[n:, n:] = pair.Sigma_s
    if init_cross is not None:
        Sz[:n, n:] = init_cross
        Sz[n:, :n] = np.asarray(init_cross).T
    EE = np.vstack([E, E])
    noise_inj = EE @ spec.noise.cov @ EE.T

    joints = []
    u_means = np.zeros((N, l))
    u_covs = np.zeros((N, l, l))
    blocks = {"X": slice(0, n), "Xs": slice(n, 2 * n)}
    for k in range(N + 1):
        # clip round-off indefiniteness before storing
        w, V = np.linalg.eigh(sym(Sz))
        Sz = sym((V * np.clip(w, 0.0, None)) @ V.T)
        joints.append(MomentState(mean=mz.copy(), cov=Sz.copy(), blocks=dict(blocks)))
        if k == N:
            break
        Kk = policy.gains[k]
        u_means[k] = Kk @ (mz[:n] - m_nom[k]) + policy.mean_controls[k]
        u_covs[k] = Kk @ Sz[:n, :n] @ Kk.T
        L = np.zeros((2 * n, 2 * n))
        L[:n, :n] = A + B @ Kk
        L[n:, n:] = A + B @ pair.K
        const = np.concatenate([
            B @ (policy.mean_controls[k] - Kk @ m_nom[k]) + z,
            B @ d_s + z,
        ])
        mz = L @ mz + const + EE @ spec.noise.mean
        Sz = sym(L @ Sz @ L.T + noise_inj)
    return MomentTrajectory(joints=joints, control_means=u_means, control_covs=u_covs, horizon=N)


def cost_of(spec: ProblemSpec, trajectory: MomentTrajectory) -> float:
    """Exact cost of a propagated trajectory (sum of stage costs)."""
    total = 0.0
    for k in range(trajectory.horizon):
        joint = trajectory.joints[k]
        stage = MomentState.joined(
            {
                "X": (joint.block_mean("X"), joint.block_cov("X")),
                "U": (trajectory.control_means[k], trajectory.control_covs[k]),
            }
        )
        total += stage_cost_from_moments(spec.cost, stage)
    return total


def rotated_cost(
    spec: ProblemSpec,
    trajectory: MomentTrajectory,
    pair: StationaryPair,
    storage: StorageData,
) -> float:
    """Rotated cost: stage costs recentered at the stationary cost with
    storage telescoping terms, summed term by term.

    Equals ``cost_of - N*C_star + storage(0) - storage(N)`` up to
    round-off, and is nonnegative under strict dissipativity.
    """
    total = 0.0
    for k in range(trajectory.horizon):
        joint = trajectory.joints[k]
        stage = MomentState.joined(
            {
                "X": (joint.block_mean("X"), joint.block_cov("X")),
                "U": (trajectory.control_means[k], trajectory.control_covs[k]),
            }
        )
        ell = stage_cost_from_moments(spec.cost, stage)
        lam_now = eval_storage(storage, joint)
        lam_next = eval_storage(storage, trajectory.joints[k + 1])
        total += ell - pair.stationary_cost + lam_now - lam_next
    return total


def near_optimal_policy(spec: ProblemSpec, policy: AffinePolicy, extra_cost: float) -> AffinePolicy:
    """Perturb the mean controls to add exactly ``extra_cost`` to the cost.

    The cost is a convex quadratic in the mean-control sequence with its
    minimum at the optimal policy, so a direction scaled by
    ``sqrt(extra_cost / curvature)`` lands on the target level set.
    """
    if extra_cost <= 0.0:
        return policy
    N, l = policy.horizon, policy.mean_controls.shape[1]
    direction = np.zeros((N, l))
    direction[:, 0] = np.cos(np.arange(N))  # fixed bounded direction
    direction /= np.linalg.norm(direction)

    def perturbed(scale):
        return AffinePolicy(
            gains=policy.gains,
            mean_controls=policy.mean_controls + scale * direction,
            horizon=N,
        )

    base = _mean_cost_only(spec, policy)
    probe = _mean_cost_only(spec, perturbed(1.0))
    curvature = probe - base
    if curvature <= 0.0:
        raise ValueError("perturbation direction has no curvature")
    return perturbed(float(np.sqrt(extra_cost / curvature)))


def _mean_cost_only(spec: ProblemSpec, policy: AffinePolicy) -> float:
    """Deterministic mean-part cost of a policy (deviation part is gain-fixed)."""
    sys_, cost = spec.system, spec.cost
    d = sys_.E @ spec.noise.mean + sys_.z
    mu = spec.init.mean.copy()
    total = 0.0
    for k in range(policy.horizon):
        u = policy.mean_controls[k]
        total += float(mu @ cost.Q1 @ mu + u @ cost.R1 @ u + cost.s @ mu + cost.v @ u + cost.c)
        mu = sys_.A @ mu + sys_.B @ u + d
    return total
