"""Problem definition: dynamics, stage cost, noise, and moment containers.

The OCP instance is ``X(k+1) = A X(k) + B U(k) + E W(k) + z`` with stage
cost ``E[X'Q1 X + U'R1 U + s'X + v'U + c] + Tr(Q2 Cov X) + Tr(R2 Cov U)``.
All cost evaluation happens on first/second moments, which is exact for
this quadratic family.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import sym

__all__ = [
    "ModelError",
    "NoSteadyState",
    "SystemSpec",
    "CostSpec",
    "NoiseSpec",
    "MomentState",
    "ProblemSpec",
    "ShiftedCost",
    "stage_cost_from_moments",
    "shift_problem",
    "validate",
    "problem_from_dict",
    "problem_to_dict",
    "load_problem",
]


class ModelError(Exception):
    pass


class NoSteadyState(ModelError):
    """The linear steady-state equation has no solution."""


def _arr(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class SystemSpec:
    """Linear dynamics ``x+ = A x + B u + E w + z``."""

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _arr(self.A))
        object.__setattr__(self, "B", np.atleast_2d(_arr(self.B)))
        object.__setattr__(self, "E", np.atleast_2d(_arr(self.E)))
        object.__setattr__(self, "z", _arr(self.z))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def l(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.E.shape[1]


@dataclass(frozen=True)
class CostSpec:
    """Quadratic stage-cost data; Q2/R2 penalize covariance only."""

    Q1: np.ndarray
    Q2: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    s: np.ndarray
    v: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        for name in ("Q1", "Q2", "R1", "R2"):
            object.__setattr__(self, name, sym(np.atleast_2d(_arr(getattr(self, name)))))
        object.__setattr__(self, "s", _arr(self.s))
        object.__setattr__(self, "v", np.atleast_1d(_arr(self.v)))
        object.__setattr__(self, "c", float(self.c))


@dataclass(frozen=True)
class NoiseSpec:
    """Noise distribution; either Gaussian or a box of independent uniforms."""

    kind: str
    mean: np.ndarray | None = None
    cov: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform_box"):
            raise ModelError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian":
            object.__setattr__(self, "mean", _arr(self.mean))
            object.__setattr__(self, "cov", sym(np.atleast_2d(_arr(self.cov))))
        else:
            lower, upper = _arr(self.lower), _arr(self.upper)
            if np.any(lower >= upper):
                raise ModelError("uniform_box requires lower < upper componentwise")
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)
            object.__setattr__(self, "mean", 0.5 * (lower + upper))
            object.__setattr__(self, "cov", np.diag((upper - lower) ** 2 / 12.0))

    @property
    def m(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class MomentState:
    """Mean and covariance of a (possibly stacked) random vector.

    ``blocks`` labels segments of the stacked vector, e.g.
    ``{"X": slice(0, 2), "U": slice(2, 3)}``.
    """

    mean: np.ndarray
    cov: np.ndarray
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        mean = np.atleast_1d(_arr(self.mean))
        cov = np.atleast_2d(sym(_arr(self.cov)))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ModelError("covariance shape does not match mean")
        w = np.linalg.eigvalsh(cov)
        if np.min(w, initial=0.0) < -1e-10 * (1.0 + np.max(np.abs(w), initial=0.0)):
            raise ModelError(f"covariance indefinite (lam_min={np.min(w):.3e})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if not self.blocks:
            object.__setattr__(self, "blocks", {"X": slice(0, mean.shape[0])})

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def block_mean(self, label: str) -> np.ndarray:
        return self.mean[self.blocks[label]]

    def block_cov(self, a: str, b: str | None = None) -> np.ndarray:
        sa = self.blocks[a]
        sb = self.blocks[b] if b is not None else sa
        return self.cov[sa, sb]

    @staticmethod
    def joined(parts: dict, cross: dict | None = None) -> "MomentState":
        """Stack labeled (mean, cov) pairs into one joint moment state.

        ``cross`` maps label pairs to cross-covariance blocks; omitted
        pairs are independent (zero cross-covariance).
        """
        labels = list(parts)
        dims = {lab: np.atleast_1d(_arr(parts[lab][0])).shape[0] for lab in labels}
        total = sum(dims.values())
        mean = np.zeros(total)
        cov = np.zeros((total, total))
        blocks, pos = {}, 0
        for lab in labels:
            d = dims[lab]
            blocks[lab] = slice(pos, pos + d)
            mean[pos:pos + d] = np.atleast_1d(_arr(parts[lab][0]))
            cov[pos:pos + d, pos:pos + d] = np.atleast_2d(_arr(parts[lab][1]))
            pos += d
        for (a, b), C in (cross or {}).items():
            C = np.atleast_2d(_arr(C))
            cov[blocks[a], blocks[b]] = C
            cov[blocks[b], blocks[a]] = C.T
        return MomentState(mean=mean, cov=cov, blocks=blocks)


@dataclass(frozen=True)
class ProblemSpec:
    """Full OCP instance: system, cost, noise, initial law, horizon."""

    system: SystemSpec
    cost: CostSpec
    noise: NoiseSpec
    init: MomentState
    init_kind: str = "gaussian"
    horizon: int = 1

    def __post_init__(self):
        if self.init_kind not in ("gaussian", "uniform_box", "dirac"):
            raise ModelError(f"unknown init kind {self.init_kind!r}")
        if self.horizon < 1:
            raise ModelError("horizon must be a positive integer")


def stage_cost_from_moments(cost: CostSpec, joint: MomentState) -> float:
    """Exact stage cost from the joint (X, U) moments.

    Evaluates ``mu_X'Q1 mu_X + mu_U'R1 mu_U + s'mu_X + v'mu_U + c
    + Tr((Q1+Q2) Cov X) + Tr((R1+R2) Cov U)``.
    """
    mx = joint.block_mean("X")
    mu = joint.block_mean("U")
    Sx = joint.block_cov("X")
    Su = joint.block_cov("U")
    if mx.shape[0] != cost.Q1.shape[0] or mu.shape[0] != cost.R1.shape[0]:
        raise ModelError("joint moment blocks do not match cost dimensions")
    return float(
        mx @ cost.Q1 @ mx
        + mu @ cost.R1 @ mu
        + cost.s @ mx
        + cost.v @ mu
        + cost.c
        + np.trace((cost.Q1 + cost.Q2) @ Sx)
        + np.trace((cost.R1 + cost.R2) @ Su)
    )


@dataclass(frozen=True)
class ShiftedCost:
    """Stage cost re-centered at a deterministic steady pair (x_s, u_s)."""

    s_hat: np.ndarray
    v_hat: np.ndarray
    c_hat: float
    x_s: np.ndarray
    u_s: np.ndarray


def shift_problem(spec: ProblemSpec) -> ShiftedCost:
    """Move the constant forcing ``E mu_W + z`` into the stage cost.

    Solves ``(I - A) x - B u = E mu_W + z`` (minimal-norm solution when
    underdetermined) and returns the shifted linear/constant cost terms
    ``s_hat = s + 2 Q1 x_s``, ``v_hat = v + 2 R1 u_s`` and
    ``c_hat = x_s'Q1 x_s + u_s'R1 u_s + s'x_s + v'u_s + c``.
    """
    sys_, cost = spec.system, spec.cost
    n = sys_.n
    M = np.hstack([np.eye(n) - sys_.A, -sys_.B])
    b = sys_.E @ spec.noise.mean + sys_.z
    sol, *_ = np.linalg.lstsq(M, b, rcond=None)
    if np.max(np.abs(M @ sol - b), initial=0.0) > 1e-9 * (1.0 + np.max(np.abs(b), initial=0.0)):
        raise NoSteadyState("steady-state equation (I-A)x - Bu = E mu_W + z inconsistent")
    x_s, u_s = sol[:n], sol[n:]
    s_hat = cost.s + 2.0 * cost.Q1 @ x_s
    v_hat = cost.v + 2.0 * cost.R1 @ u_s
    c_hat = float(x_s @ cost.Q1 @ x_s + u_s @ cost.R1 @ u_s + cost.s @ x_s + cost.v @ u_s + cost.c)
    return ShiftedCost(s_hat=s_hat, v_hat=v_hat, c_hat=c_hat, x_s=x_s, u_s=u_s)


def validate(spec: ProblemSpec) -> list[str]:
    """Collect invariant violations of a problem instance (empty = valid)."""
    out: list[str] = []
    sys_, cost, noise = spec.system, spec.cost, spec.noise
    n, l = sys_.n, sys_.l
    if sys_.A.shape != (n, n):
        out.append("A not square")
    if sys_.B.shape[0] != n:
        out.append("B row count does not match A")
    if sys_.E.shape[0] != n:
        out.append("E row count does not match A")
    if sys_.z.shape[0] != n:
        out.append("z length does not match A")
    for name, M, d in (("Q1", cost.Q1, n), ("Q2", cost.Q2, n), ("R1", cost.R1, l), ("R2", cost.R2, l)):
        if M.shape != (d, d):
            out.append(f"{name} has wrong shape")
    if cost.s.shape[0] != n:
        out.append("s length does not match state dimension")
    if cost.v.shape[0] != l:
        out.append("v length does not match control dimension")
    if out:
        return out  # eigen/rank checks need consistent shapes
    tol = 1e-10
    for name, M in (("Q1", cost.Q1), ("Q2", cost.Q2), ("R2", cost.R2)):
        if M.shape[0] == M.shape[1] and np.min(np.linalg.eigvalsh(M)) < -tol:
            out.append(f"{name} not positive semidefinite")
    if cost.R1.shape[0] == cost.R1.shape[1] and np.min(np.linalg.eigvalsh(cost.R1)) <= tol:
        out.append("R1 not positive definite")
    if noise.m != sys_.m:
        out.append("noise dimension does not match E columns")
    if np.min(np.linalg.eigvalsh(noise.cov)) < -tol:
        out.append("noise covariance not positive semidefinite")
    if spec.init.dim != n:
        out.append("initial moment dimension does not match state")
    if not all(np.all(np.isfinite(M)) for M in (sys_.A, sys_.B, sys_.E, sys_.z)):
        out.append("system matrices contain non-finite entries")
    # stabilizability: every |lam| >= 1 mode of A must be controllable (PBH)
    for lam in np.linalg.eigvals(sys_.A):
        if abs(lam) < 1.0 - 1e-12:
            continue
        M = np.hstack([sys_.A - lam * np.eye(n), sys_.B.astype(complex)])
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            out.append(f"(A, B) not stabilizable (mode {lam:.4f} uncontrollable)")
            break
    return out


def problem_to_dict(spec: ProblemSpec) -> dict:
    """Serialize a problem instance to the JSON problem-file schema."""
    noise = spec.noise
    if noise.kind == "gaussian":
        noise_d = {"kind": "gaussian", "mean": noise.mean.tolist(), "cov": noise.cov.tolist()}
    else:
        noise_d = {"kind": "uniform_box", "lower": noise.lower.tolist(), "upper": noise.upper.tolist()}
    return {
        "system": {
            "A": spec.system.A.tolist(),
            "B": spec.system.B.tolist(),
            "E": spec.system.E.tolist(),
            "z": spec.system.z.tolist(),
        },
        "cost": {
            "Q1": spec.cost.Q1.tolist(),
            "Q2": spec.cost.Q2.tolist(),
            "R1": spec.cost.R1.tolist(),
            "R2": spec.cost.R2.tolist(),
            "s": spec.cost.s.tolist(),
            "v": spec.cost.v.tolist(),
            "c": spec.cost.c,
        },
        "noise": noise_d,
        "init": {
            "kind": spec.init_kind,
            "mean": spec.init.mean.tolist(),
            "cov": spec.init.cov.tolist(),
        },
        "horizon": spec.horizon,
    }


def problem_from_dict(data: dict) -> ProblemSpec:
    """Build a problem instance from the JSON problem-file schema."""
    sys_d, cost_d, noise_d, init_d = data["system"], data["cost"], data["noise"], data["init"]
    system = SystemSpec(A=sys_d["A"], B=sys_d["B"], E=sys_d["E"], z=sys_d["z"])
    cost = CostSpec(
        Q1=cost_d["Q1"], Q2=cost_d["Q2"], R1=cost_d["R1"], R2=cost_d["R2"],
        s=cost_d["s"], v=cost_d["v"], c=cost_d.get("c", 0.0),
    )
    if noise_d["kind"] == "gaussian":
        noise = NoiseSpec(kind="gaussian", mean=noise_d["mean"], cov=noise_d["cov"])
    else:
        noise = NoiseSpec(kind="uniform_box", lower=noise_d["lower"], upper=noise_d["upper"])
    init_kind = init_d.get("kind", "gaussian")
    mean = _arr(init_d["mean"])
    cov = _arr(init_d["cov"]) if init_d.get("cov") is not None else np.zeros((mean.shape[0],) * 2)
    if init_kind == "dirac":
        cov = np.zeros((mean.shape[0],) * 2)
    init = MomentState(mean=mean, cov=cov)
    return ProblemSpec(system=system, cost=cost, noise=noise, init=init,
                       init_kind=init_kind, horizon=int(data["horizon"]))


def load_problem(path) -> ProblemSpec:
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
