"""Turnpike statistics, their theoretical bounds, and distribution distances.

Four per-step distances are tracked between the controlled process and
the stationary process: mean-square distance, empirical exceedance
probability, Gaussian Wasserstein-2 distance, and first/second moment
gaps.  Each induces a counter (number of steps inside an epsilon tube)
with a lower bound of the form ``N - (delta + C) / alpha(.)`` where
``alpha(s) = r s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import sqrtm_psd, sym
from .model import MomentState, ProblemSpec
from .montecarlo import PathBundle, empirical_exceedance
from .ocp import MomentTrajectory
from .stationary import StationaryPair, StorageData, eval_storage, storage_lower_bound

__all__ = [
    "TurnpikeReport",
    "wasserstein2_gaussian",
    "mean_square_distance",
    "trajectory_series",
    "turnpike_counters",
    "stationary_convergence",
]


def wasserstein2_gaussian(a: MomentState, b: MomentState) -> float:
    """Wasserstein-2 distance between Gaussians with the given moments.

    ``sqrt(|mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sb^{1/2} Sa Sb^{1/2})^{1/2}))``
    with the inner value clipped at zero.  For non-Gaussian laws with
    these moments this is the Gelbrich lower bound (a moment surrogate).
    """
    dm = a.mean - b.mean
    Sa, Sb = a.cov, b.cov
    root_b = sqrtm_psd(Sb)
    inner = sqrtm_psd(sym(root_b @ Sa @ root_b))
    val = float(dm @ dm + np.trace(Sa) + np.trace(Sb) - 2.0 * np.trace(inner))
    return float(np.sqrt(max(val, 0.0)))


def mean_square_distance(joint: MomentState) -> float:
    """``E |X - Xs|^2`` from joint moments with the cross block."""
    if "Xs" not in joint.blocks:
        raise KeyError("joint moment state must carry an 'Xs' block")
    dm = joint.block_mean("X") - joint.block_mean("Xs")
    return float(
        dm @ dm
        + np.trace(joint.block_cov("X"))
        + np.trace(joint.block_cov("Xs"))
        - 2.0 * np.trace(joint.block_cov("X", "Xs"))
    )


def trajectory_series(trajectory: MomentTrajectory) -> dict:
    """Per-step distance series of a propagated joint trajectory.

    Returns arrays of length N+1: mean-square distance, Gaussian W2,
    mean gap norm, and the gap of sqrt-trace-covariances.
    """
    msd, w2, mgap, cgap = [], [], [], []
    for joint in trajectory.joints:
        mX, mXs = joint.block_mean("X"), joint.block_mean("Xs")
        SX, SXs = joint.block_cov("X"), joint.block_cov("Xs")
        msd.append(mean_square_distance(joint))
        w2.append(wasserstein2_gaussian(MomentState(mX, SX), MomentState(mXs, SXs)))
        mgap.append(float(np.linalg.norm(mX - mXs)))
        cgap.append(abs(float(np.sqrt(max(np.trace(SX), 0.0)) - np.sqrt(max(np.trace(SXs), 0.0)))))
    return {
        "msd": np.array(msd),
        "w2": np.array(w2),
        "mean_gap": np.array(mgap),
        "covtrace_gap": np.array(cgap),
    }


@dataclass(frozen=True)
class TurnpikeReport:
    """Counters and bounds for one (epsilon, eta) configuration."""

    horizon: int
    epsilon: float
    eta: float
    delta: float
    C: float
    series: dict
    exceedance: np.ndarray | None
    counters: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    gaussian_exact: bool = True

    def violations(self) -> list[str]:
        """Counters falling below their (zero-floored) bounds."""
        out = []
        for name, count in self.counters.items():
            if count is None:
                continue
            if count < max(self.bounds[name], 0.0):
                out.append(f"{name}: counter {count} < bound {self.bounds[name]:.3f}")
        return out


def turnpike_counters(
    trajectory: MomentTrajectory,
    bundle: PathBundle | None,
    storage: StorageData,
    pair: StationaryPair,
    J_N: float,
    epsilon: float,
    eta: float,
    spec: ProblemSpec | None = None,
) -> TurnpikeReport:
    """Count time steps inside the epsilon tubes and compute their bounds.

    ``delta`` is inferred from the trajectory cost as ``J_N - N C_star``
    (values below -1e-9 signal an inconsistent policy claim); ``C`` is
    the initial storage value minus the uniform storage lower bound.
    The exceedance counter requires a path bundle and is None otherwise.
    """
    N = trajectory.horizon
    delta = J_N - N * pair.stationary_cost
    if delta < -1e-9:
        raise ValueError(f"negative delta {delta:.3e}: cost below N*C_star is inconsistent")
    delta = max(delta, 0.0)
    C = eval_storage(storage, trajectory.joints[0]) - storage_lower_bound(storage, pair)
    series = trajectory_series(trajectory)
    r = storage.r

    exceed = None
    if bundle is not None:
        exceed = empirical_exceedance(bundle, epsilon)

    def count(values, threshold):
        return int(np.sum(np.asarray(values)[:N] <= threshold))

    counters = {
        "L": count(series["msd"], epsilon),
        "S": count(exceed, eta) if exceed is not None else None,
        "D": count(series["w2"], epsilon),
        "M1": count(series["mean_gap"], epsilon),
        "M2": count(series["covtrace_gap"], epsilon),
    }
    budget = delta + C
    bounds = {
        "L": N - budget / (r * epsilon),
        "S": N - budget / (r * epsilon**2 * eta),
        "D": N - budget / (r * np.sqrt(epsilon)),
        "M1": N - budget / (r * np.sqrt(epsilon)),
        "M2": N - budget / (r * np.sqrt(2.0 * epsilon)),
    }
    gaussian_exact = spec is None or (spec.noise.kind == "gaussian" and spec.init_kind in ("gaussian", "dirac"))
    return TurnpikeReport(
        horizon=N, epsilon=epsilon, eta=eta, delta=delta, C=C,
        series=series, exceedance=exceed, counters=counters, bounds=bounds,
        gaussian_exact=gaussian_exact,
    )


def _as_feedback(obj):
    """Normalize a stationary object to (K, d, mu, Sigma)."""
    if isinstance(obj, StationaryPair):
        return obj.K, obj.control_const(), obj.mu_s, obj.Sigma_s
    if hasattr(obj, "feedback"):
        return obj.feedback.K, obj.feedback.d, obj.mu, obj.Sigma
    raise TypeError(f"cannot interpret {type(obj).__name__} as a stationary feedback")


def stationary_convergence(
    spec: ProblemSpec,
    pair_a,
    pair_b,
    horizon: int,
    coupled_init: bool = False,
) -> np.ndarray:
    """Exact per-step mean-square gap between two stationary processes.

    Both processes run their own affine feedback under the same noise.
    With ``coupled_init`` the initial values are identified (requires
    identical stationary moments); otherwise they start independent.
    """
    sys_ = spec.system
    A, B, E, z = sys_.A, sys_.B, sys_.E, sys_.z
    n = sys_.n
    Ka, da, mu_a, Sig_a = _as_feedback(pair_a)
    Kb, db, mu_b, Sig_b = _as_feedback(pair_b)

    mz = np.concatenate([mu_a, mu_b])
    Sz = np.zeros((2 * n, 2 * n))
    Sz[:n, :n] = Sig_a
    Sz[n:, n:] = Sig_b
    if coupled_init:
        Sz[:n, n:] = Sig_a
        Sz[n:, :n] = Sig_a
    EE = np.vstack([E, E])
    gaps = np.zeros(horizon + 1)
    for k in range(horizon + 1):
        dm = mz[:n] - mz[n:]
        gaps[k] = float(
            dm @ dm + np.trace(Sz[:n, :n]) + np.trace(Sz[n:, n:]) - 2.0 * np.trace(Sz[:n, n:])
        )
        if k == horizon:
            break
        L = np.zeros((2 * n, 2 * n))
        L[:n, :n] = A + B @ Ka
        L[n:, n:] = A + B @ Kb
        const = np.concatenate([B @ da + z, B @ db + z])
        mz = L @ mz + const + EE @ spec.noise.mean
        Sz = sym(L @ Sz @ L.T + EE @ spec.noise.cov @ EE.T)
    return gaps
