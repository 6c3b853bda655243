"""Stationary optimization over affine feedback laws.

Minimizes the stage cost over stationary closed-loop distributions
parametrized by ``U = K X + d`` with ``A + B K`` Schur stable.  The
fixed-point moments are available in closed form, so the objective is a
smooth function of (K, d); a penalized Nelder-Mead search with multiple
restarts recovers the global optimum, which by the dissipativity theory
coincides with the stationary pair's distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .model import MomentState, ProblemSpec, stage_cost_from_moments
from .stationary import StationaryPair

__all__ = [
    "Infeasible",
    "NoStabilizingStart",
    "AffineFeedback",
    "StationaryCandidate",
    "stationary_cost",
    "solve_stationary_problem",
    "verify_uniqueness",
    "objective_gradient",
]

_RHO_MARGIN = 1e-6
_PENALTY = 1e6
_INFEASIBLE_BASE = 1e8


class Infeasible(Exception):
    pass


class NoStabilizingStart(Exception):
    pass


@dataclass(frozen=True)
class AffineFeedback:
    """Affine law U = K X + d."""

    K: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", np.atleast_2d(np.asarray(self.K, dtype=float)))
        object.__setattr__(self, "d", np.atleast_1d(np.asarray(self.d, dtype=float)))


@dataclass(frozen=True)
class StationaryCandidate:
    """A stationary closed-loop law with its moments and cost."""

    feedback: AffineFeedback
    mu: np.ndarray
    Sigma: np.ndarray
    cost: float


def stationary_cost(spec: ProblemSpec, fb: AffineFeedback) -> StationaryCandidate:
    """Stationary moments and cost of an affine feedback law.

    ``mu = (I - A - BK)^{-1} (B d + E mu_W + z)`` and Sigma solves the
    closed-loop Lyapunov equation; raises ``Infeasible`` when the closed
    loop is not comfortably Schur stable.
    """
    sys_ = spec.system
    A, B = sys_.A, sys_.B
    Acl = A + B @ fb.K
    if linalg.spectral_radius(Acl) > 1.0 - _RHO_MARGIN:
        raise Infeasible("closed loop not Schur stable")
    n = sys_.n
    mu = np.linalg.solve(np.eye(n) - Acl, B @ fb.d + sys_.E @ spec.noise.mean + sys_.z)
    Sigma = linalg.solve_discrete_lyapunov(Acl, sys_.E @ spec.noise.cov @ sys_.E.T)
    mu_u = fb.K @ mu + fb.d
    joint = MomentState.joined(
        {"X": (mu, Sigma), "U": (mu_u, fb.K @ Sigma @ fb.K.T)},
        cross={("X", "U"): Sigma @ fb.K.T},
    )
    return StationaryCandidate(feedback=fb, mu=mu, Sigma=Sigma,
                               cost=stage_cost_from_moments(spec.cost, joint))


def _objective(spec: ProblemSpec, theta: np.ndarray) -> float:
    sys_ = spec.system
    n, l = sys_.n, sys_.l
    K = theta[: l * n].reshape(l, n)
    d = theta[l * n:]
    rho = linalg.spectral_radius(sys_.A + sys_.B @ K)
    if rho > 1.0 - _RHO_MARGIN:
        return _INFEASIBLE_BASE + _PENALTY * (rho - 1.0 + _RHO_MARGIN)
    return stationary_cost(spec, AffineFeedback(K=K, d=d)).cost


def _best_offset(spec: ProblemSpec, K: np.ndarray) -> np.ndarray:
    """Cost-minimizing d for a fixed stabilizing gain (closed form).

    The stationary mean is affine in d and the cost quadratic, so the
    optimal offset solves a small positive definite linear system.
    """
    sys_, cost = spec.system, spec.cost
    n, l = sys_.n, sys_.l
    Acl = sys_.A + sys_.B @ K
    T = np.linalg.solve(np.eye(n) - Acl, sys_.B)           # d -> mu map
    t0 = np.linalg.solve(np.eye(n) - Acl, sys_.E @ spec.noise.mean + sys_.z)
    # mu(d) = T d + t0, mu_u(d) = (K T + I) d + K t0
    Mu = K @ T + np.eye(l)
    mu0 = K @ t0
    Hd = T.T @ cost.Q1 @ T + Mu.T @ cost.R1 @ Mu
    gd = 2.0 * (T.T @ cost.Q1 @ t0 + Mu.T @ cost.R1 @ mu0) + T.T @ cost.s + Mu.T @ cost.v
    try:
        return np.linalg.solve(2.0 * Hd, -gd)
    except np.linalg.LinAlgError:
        return np.zeros(l)


def solve_stationary_problem(
    spec: ProblemSpec,
    restarts: int = 8,
    seed: int = 0,
    verify_against: StationaryPair | None = None,
    maxfev: int = 50_000,
) -> StationaryCandidate:
    """Minimize the stationary cost over affine feedback laws.

    Nelder-Mead with an infeasibility penalty, restarted from the
    Riccati gain (with its closed-form optimal offset), perturbations of
    it, and random stabilizing gains.  With ``verify_against`` set, the
    returned moments must match the stationary pair within 1e-3
    elementwise.
    """
    sys_, cost = spec.system, spec.cost
    n, l = sys_.n, sys_.l
    rng = np.random.default_rng(seed)
    _, K0 = linalg.solve_dare(sys_.A, sys_.B, cost.Q1 + cost.Q2, cost.R1 + cost.R2)
    d0 = _best_offset(spec, K0)
    theta0 = np.concatenate([K0.ravel(), d0])

    starts = [theta0]
    for scale in (0.05, 0.1, 0.2, 0.4):
        starts.append(theta0 + scale * rng.standard_normal(theta0.shape))
    while len(starts) < restarts:
        found = False
        for _ in range(200):
            K_try = K0 + rng.uniform(-1.0, 1.0, size=(l, n))
            if linalg.spectral_radius(sys_.A + sys_.B @ K_try) < 1.0 - 1e-3:
                d_try = _best_offset(spec, K_try)
                starts.append(np.concatenate([K_try.ravel(), d_try]))
                found = True
                break
        if not found:
            break
    starts = starts[:restarts]
    if not any(_objective(spec, th) < _INFEASIBLE_BASE for th in starts):
        raise NoStabilizingStart("no restart point yields a Schur-stable closed loop")

    best_theta, best_val = None, np.inf
    for th in starts:
        res = minimize(
            lambda t: _objective(spec, t),
            th,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-10, "maxfev": maxfev},
        )
        if res.fun < best_val:
            best_val, best_theta = res.fun, res.x

    K = best_theta[: l * n].reshape(l, n)
    d = best_theta[l * n:]
    candidate = stationary_cost(spec, AffineFeedback(K=K, d=d))
    if verify_against is not None:
        d_mu = np.max(np.abs(candidate.mu - verify_against.mu_s))
        d_sig = np.max(np.abs(candidate.Sigma - verify_against.Sigma_s))
        if d_mu > 1e-3 or d_sig > 1e-3:
            raise ValueError(
                f"stationary-problem solution off the stationary pair "
                f"(mean gap {d_mu:.2e}, cov gap {d_sig:.2e})"
            )
    return candidate


def verify_uniqueness(spec: ProblemSpec, candidates: list, pair: StationaryPair, tol: float = 1e-3) -> dict:
    """Check that every cost-optimal candidate shares the stationary moments.

    Candidates with cost above ``C_star + 1e-9`` are excluded (the
    uniqueness claim only covers solutions of the stationary problem).
    Distance is Wasserstein-2 on the Gaussian moment surrogates.
    """
    from .metrics import wasserstein2_gaussian

    ref = MomentState(pair.mu_s, pair.Sigma_s)
    checked, violators = [], []
    for cand in candidates:
        if cand.cost > pair.stationary_cost + 1e-9:
            continue
        dist = wasserstein2_gaussian(MomentState(cand.mu, cand.Sigma), ref)
        checked.append(dist)
        if dist > tol:
            violators.append((cand, dist))
    return {
        "checked": len(checked),
        "max_distance": max(checked, default=0.0),
        "violators": violators,
        "feedback_class": "affine",
    }


def objective_gradient(spec: ProblemSpec, fb: AffineFeedback, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the stationary cost at a feedback."""
    n, l = spec.system.n, spec.system.l
    theta = np.concatenate([fb.K.ravel(), fb.d])
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (_objective(spec, up) - _objective(spec, dn)) / (2.0 * step)
    return grad
