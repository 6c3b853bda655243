"""Randomized certification of the mean-square dissipativity inequality.

Probes are joint moment states over (X, U, Xs): the Xs block is pinned
at the stationary moments, the (X, U) block gets random means and a
random PSD covariance, and the cross block to Xs is a random contraction
so the joint covariance stays PSD.  For the quadratic cost family the
inequality depends on the joint law only through these moments, so
moment probes cover it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import sqrtm_psd
from .model import MomentState, ProblemSpec
from .montecarlo import RngStream, make_generator
from .stationary import (
    StationaryPair,
    StorageData,
    build_stationary_pair,
    build_storage,
    dissipativity_residual,
)

__all__ = ["ProbeSpec", "ProbeReport", "random_probe", "run_probes", "deterministic_degeneration_check"]


@dataclass(frozen=True)
class ProbeSpec:
    """Configuration of the randomized probe sweep."""

    count: int = 10_000
    mean_box: float = 3.0
    cov_scale: float = 1.0
    coupling: str = "random-psd-cross"
    seed: int = 0

    def __post_init__(self):
        if self.coupling not in ("independent", "random-psd-cross"):
            raise ValueError(f"unknown coupling mode {self.coupling!r}")
        if self.cov_scale <= 0:
            raise ValueError("covariance scale must be positive")


@dataclass(frozen=True)
class ProbeReport:
    min_residual: float
    argmin_probe: MomentState
    histogram: tuple
    count: int
    failed: bool


def random_probe(
    spec: ProblemSpec,
    pair: StationaryPair,
    probes: ProbeSpec,
    rng: np.random.Generator,
) -> MomentState:
    """Draw one joint (X, U, Xs) moment probe around the stationary pair."""
    n, l = spec.system.n, spec.system.l
    d = n + l
    mu_x = pair.mu_s + rng.uniform(-probes.mean_box, probes.mean_box, size=n)
    mu_u = pair.mu_u + rng.uniform(-probes.mean_box, probes.mean_box, size=l)
    G = rng.standard_normal((d, d))
    S_zu = G @ G.T * (probes.cov_scale * rng.uniform(0.05, 1.0))
    if probes.coupling == "independent":
        C = np.zeros((d, n))
    else:
        Om = rng.standard_normal((d, n))
        top = np.linalg.svd(Om, compute_uv=False)[0]
        Om *= rng.uniform(0.0, 1.0) / top
        C = sqrtm_psd(S_zu) @ Om @ sqrtm_psd(pair.Sigma_s)
    return MomentState.joined(
        {
            "X": (mu_x, S_zu[:n, :n]),
            "U": (mu_u, S_zu[n:, n:]),
            "Xs": (pair.mu_s, pair.Sigma_s),
        },
        cross={
            ("X", "U"): S_zu[:n, n:],
            ("X", "Xs"): C[:n, :],
            ("U", "Xs"): C[n:, :],
        },
    )


def run_probes(
    spec: ProblemSpec,
    pair: StationaryPair,
    storage: StorageData,
    probes: ProbeSpec,
) -> ProbeReport:
    """Evaluate the dissipativity residual on randomized moment probes.

    Each probe draws from its own stream, so the sweep is reproducible
    and order-independent.  The report flags failure when the minimum
    residual falls below -1e-8.
    """
    residuals = np.zeros(probes.count)
    worst_probe, best = None, np.inf
    for i in range(probes.count):
        rng = make_generator(RngStream(probes.seed, i))
        joint = random_probe(spec, pair, probes, rng)
        residuals[i] = dissipativity_residual(spec, pair, storage, joint)
        if residuals[i] < best:
            best = residuals[i]
            worst_probe = joint
    counts, edges = np.histogram(residuals, bins=20)
    min_res = float(residuals.min())
    return ProbeReport(
        min_residual=min_res,
        argmin_probe=worst_probe,
        histogram=(counts.tolist(), edges.tolist()),
        count=probes.count,
        failed=min_res < -1e-8,
    )


def deterministic_degeneration_check(spec: ProblemSpec, grid: int = 21, box: float = 2.0) -> dict:
    """Compare the storage construction against a directly coded
    deterministic strict-dissipativity inequality on a grid of (x, u).

    Requires zero noise and zero drift so the problem degenerates to the
    deterministic one; the storage then reads ``|x|^2_S + q'x`` and the
    stationary pair is the Dirac pair (x_tilde, u_tilde).
    """
    if np.any(spec.noise.cov != 0.0) or np.any(spec.noise.mean != 0.0) or np.any(spec.system.z != 0.0):
        raise ValueError("degeneration check needs zero noise and z = 0")
    sys_, cost = spec.system, spec.cost
    A, B = sys_.A, sys_.B
    n, l = sys_.n, sys_.l
    storage = build_storage(spec)
    pair = build_stationary_pair(spec, storage)
    S, q, r = storage.S, storage.q, storage.r
    x_t, u_t = pair.x_tilde, pair.u_tilde

    def ell_det(x, u):
        return float(x @ cost.Q1 @ x + u @ cost.R1 @ u + cost.s @ x + cost.v @ u + cost.c)

    def lam_det(x):
        return float(x @ S @ x + q @ x)

    ell_anchor = ell_det(x_t, u_t)

    def margin_det(x, u):
        xp = A @ x + B @ u
        return ell_det(x, u) - ell_anchor + lam_det(x) - lam_det(xp) - r * float((x - x_t) @ (x - x_t))

    axes = [np.linspace(-box, box, grid)] * (n + l)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    min_margin = np.inf
    max_residual_gap = 0.0
    for pt in points:
        x, u = pt[:n], pt[n:]
        m = margin_det(x, u)
        min_margin = min(min_margin, m)
        joint = MomentState.joined(
            {"X": (x, np.zeros((n, n))), "U": (u, np.zeros((l, l))), "Xs": (x_t, np.zeros((n, n)))}
        )
        res = dissipativity_residual(spec, pair, storage, joint)
        max_residual_gap = max(max_residual_gap, abs(res - m))
    at_anchor = margin_det(x_t, u_t)
    return {
        "min_margin": float(min_margin),
        "max_residual_gap": float(max_residual_gap),
        "margin_at_anchor": float(at_anchor),
        "grid_points": len(points),
        "passed": bool(min_margin >= -1e-9 and abs(at_anchor) <= 1e-10),
    }
