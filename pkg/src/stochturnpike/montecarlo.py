"""Seeded sampling of noise and coupled path pairs.

Every sample index owns its own counter-based random stream
(Philox keyed by ``(seed, stream)``), so results are independent of
execution order and thread count, and bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import NotPsd
from .model import NoiseSpec, ProblemSpec
from .ocp import AffinePolicy, nominal_mean_path
from .stationary import StationaryPair

__all__ = [
    "RngStream",
    "PathBundle",
    "make_generator",
    "sample_noise",
    "simulate_coupled",
    "empirical_exceedance",
    "dump_bundle",
    "load_bundle",
]


@dataclass(frozen=True)
class RngStream:
    """Identifies one reproducible random stream."""

    seed: int
    stream: int = 0


def make_generator(stream: RngStream) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream id)."""
    key = np.array([stream.seed % 2**64, stream.stream % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _psd_factor(cov) -> np.ndarray:
    """Symmetric factorization F with F F' = cov; tolerates singular cov."""
    cov = np.asarray(cov, dtype=float)
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    if np.min(w, initial=0.0) < -1e-8 * (1.0 + np.max(np.abs(w), initial=0.0)):
        raise NotPsd("noise covariance is not positive semidefinite")
    return V * np.sqrt(np.clip(w, 0.0, None))


def _draw_noise(noise: NoiseSpec, rng: np.random.Generator, shape) -> np.ndarray:
    if noise.kind == "gaussian":
        F = _psd_factor(noise.cov)
        z = rng.standard_normal(shape + (noise.m,))
        return noise.mean + z @ F.T
    width = noise.upper - noise.lower
    u = rng.random(shape + (noise.m,))
    return noise.lower + u * width


def sample_noise(noise: NoiseSpec, stream: RngStream, count: int, horizon: int) -> np.ndarray:
    """I.i.d. noise realizations of shape (horizon, count, m).

    Each sample index draws from its own stream (stream id offset by the
    sample index), so per-sample parallelism cannot change the result.
    """
    out = np.zeros((horizon, count, noise.m))
    for j in range(count):
        rng = make_generator(RngStream(stream.seed, stream.stream + j))
        out[:, j, :] = _draw_noise(noise, rng, (horizon,))
    return out


def _draw_initial(spec: ProblemSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.init_kind == "dirac":
        return spec.init.mean.copy()
    if spec.init_kind == "gaussian":
        F = _psd_factor(spec.init.cov)
        return spec.init.mean + F @ rng.standard_normal(spec.init.dim)
    # uniform_box init: treat cov as diagonal of independent uniforms
    half_width = np.sqrt(3.0 * np.diag(spec.init.cov))
    return spec.init.mean + (2.0 * rng.random(spec.init.dim) - 1.0) * half_width


def _draw_stationary_initial(pair: StationaryPair, rng: np.random.Generator) -> np.ndarray:
    F = _psd_factor(pair.Sigma_s)
    return pair.mu_s + F @ rng.standard_normal(pair.mu_s.shape[0])


@dataclass(frozen=True)
class PathBundle:
    """Realized coupled paths: X under the policy, Xs under the stationary
    feedback, sharing identical noise per sample index."""

    X: np.ndarray    # (N+1, count, n)
    Xs: np.ndarray   # (N+1, count, n)
    U: np.ndarray    # (N, count, l)
    Us: np.ndarray   # (N, count, l)
    W: np.ndarray    # (N, count, m)

    @property
    def count(self) -> int:
        return self.X.shape[1]

    @property
    def horizon(self) -> int:
        return self.W.shape[0]


def replay_paths(
    spec: ProblemSpec,
    policy: AffinePolicy,
    pair: StationaryPair,
    x0: np.ndarray,
    xs0: np.ndarray,
    W: np.ndarray,
) -> PathBundle:
    """Run the coupled recursion for fixed initial values and noise.

    ``x0``/``xs0`` have shape (count, n) and ``W`` shape (N, count, m);
    one-sample inputs may drop the count axis.  ``simulate_coupled``
    delegates here after drawing, so feeding a bundle's stored noise and
    initial values back reproduces its stored paths bit for bit.
    """
    sys_ = spec.system
    A, B, E, z = sys_.A, sys_.B, sys_.E, sys_.z
    n, l, m = sys_.n, sys_.l, sys_.m
    N = policy.horizon
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    xs0 = np.atleast_2d(np.asarray(xs0, dtype=float))
    W = np.asarray(W, dtype=float).reshape(N, -1, m)
    count = x0.shape[0]

    X = np.zeros((N + 1, count, n))
    Xs = np.zeros((N + 1, count, n))
    U = np.zeros((N, count, l))
    Us = np.zeros((N, count, l))
    X[0], Xs[0] = x0, xs0
    m_nom = nominal_mean_path(spec, policy)
    d_s = pair.control_const()
    for k in range(N):
        U[k] = (X[k] - m_nom[k]) @ policy.gains[k].T + policy.mean_controls[k]
        Us[k] = Xs[k] @ pair.K.T + d_s
        X[k + 1] = X[k] @ A.T + U[k] @ B.T + W[k] @ E.T + z
        Xs[k + 1] = Xs[k] @ A.T + Us[k] @ B.T + W[k] @ E.T + z
    return PathBundle(X=X, Xs=Xs, U=U, Us=Us, W=W)


def simulate_coupled(
    spec: ProblemSpec,
    policy: AffinePolicy,
    pair: StationaryPair,
    stream: RngStream,
    count: int,
) -> PathBundle:
    """Simulate coupled (X, Xs) paths with shared noise per sample.

    X0 and Xs(0) are drawn independently; per sample j the draw order is
    X0, Xs0, then the noise sequence, all from stream ``stream + j``.
    """
    sys_ = spec.system
    n, m = sys_.n, sys_.m
    N = policy.horizon
    x0 = np.zeros((count, n))
    xs0 = np.zeros((count, n))
    W = np.zeros((N, count, m))
    for j in range(count):
        rng = make_generator(RngStream(stream.seed, stream.stream + j))
        x0[j] = _draw_initial(spec, rng)
        xs0[j] = _draw_stationary_initial(pair, rng)
        W[:, j, :] = _draw_noise(spec.noise, rng, (N,))
    return replay_paths(spec, policy, pair, x0, xs0, W)


def empirical_exceedance(bundle: PathBundle, eps: float) -> np.ndarray:
    """Per-step fraction of samples with ||X(k) - Xs(k)|| >= eps."""
    if bundle.count == 0:
        raise ValueError("empty path bundle")
    gaps = np.linalg.norm(bundle.X - bundle.Xs, axis=2)
    return np.mean(gaps >= eps, axis=1)


def dump_bundle(bundle: PathBundle, prefix) -> None:
    """Write flat little-endian float64 arrays plus a JSON shape header."""
    prefix = Path(prefix)
    header = {}
    for name in ("X", "Xs", "U", "Us", "W"):
        arr = getattr(bundle, name)
        header[name] = {"shape": list(arr.shape), "dtype": "<f8"}
        arr.astype("<f8").tofile(prefix.with_suffix(f".{name}.bin"))
    with open(prefix.with_suffix(".json"), "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)


def load_bundle(prefix) -> PathBundle:
    prefix = Path(prefix)
    with open(prefix.with_suffix(".json")) as fh:
        header = json.load(fh)
    arrays = {}
    for name, meta in header.items():
        raw = np.fromfile(prefix.with_suffix(f".{name}.bin"), dtype="<f8")
        arrays[name] = raw.reshape(meta["shape"])
    return PathBundle(**arrays)
