"""Command-line orchestration of end-to-end experiments.

Subcommands: ``stationary``, ``solve``, ``sweep``, ``paths``,
``statopt``, ``dissipativity-check``, ``reproduce-paper``.  Outputs are
JSON artifacts and CSV tables (one per metric, columns N,k,value plus a
bounds table); everything is deterministic for a fixed config and seed.

Exit codes: 0 success, 1 validation failure, 2 numerical failure,
3 acceptance failure of the built-in reference study.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dissipativity as dcheck
from . import metrics, montecarlo, ocp, statopt
from .linalg import LinalgError
from .model import (
    ModelError,
    MomentState,
    NoiseSpec,
    ProblemSpec,
    load_problem,
    problem_to_dict,
    validate,
)
from .stationary import GammaSearchFailed, build_stationary_pair, build_storage, dissipativity_residual

__all__ = [
    "ExperimentConfig",
    "benchmark_problem",
    "cmd_stationary",
    "cmd_solve",
    "cmd_sweep",
    "cmd_paths",
    "cmd_statopt",
    "cmd_dissipativity_check",
    "cmd_reproduce_paper",
    "main",
]

_PATH_STREAM_BASE = 2**32  # keeps fixed-realization streams clear of MC sample streams

# reference constants of the built-in study (stationary gain / moments /
# offset, rounded; see the acceptance suite)
REFERENCE_CONSTANTS = {
    "K": [[-7.679, -0.388]],
    "mu_s": [-1.116, -0.199],
    "Sigma_s": [[0.063, 0.054], [0.054, 0.619]],
    "control_offset": [-1.323],
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep configuration; ``problem=None`` selects the built-in instance."""

    problem: str | None = None
    horizons: tuple = (20, 30, 40, 50, 60, 70, 80)
    epsilons: tuple = (1e-1, 1e-2, 1e-3)
    etas: tuple = (0.05,)
    deltas: tuple = (0.0, 0.1, 1.0)
    mc_samples: int = 10_000
    seed: int = 1234
    output_dir: str = "out"
    emit_paths: bool = True
    path_realizations: int = 2
    noise: str = "gaussian"

    def __post_init__(self):
        if not self.horizons or list(self.horizons) != sorted(self.horizons):
            raise ModelError("horizons must be nonempty and ascending")
        if self.mc_samples < 1:
            raise ModelError("mc_samples must be at least 1")

    @staticmethod
    def from_file(path, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        for key in ("horizons", "epsilons", "etas", "deltas"):
            if key in data:
                data[key] = tuple(data[key])
        data.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(**data)


def benchmark_problem(noise: str = "gaussian", horizon: int = 20) -> ProblemSpec:
    """Built-in 2-D benchmark instance used by the reference study."""
    from .model import CostSpec, SystemSpec

    system = SystemSpec(
        A=[[1.12, 0.0], [0.26, 0.88]],
        B=[[0.05], [-0.05]],
        E=[[1.0, 0.0], [0.0, 1.0]],
        z=[0.0, 0.0],
    )
    cost = CostSpec(
        Q1=[[1.0, 0.0], [0.0, 5.0]],
        Q2=[[5.0, 0.0], [0.0, 0.0]],
        R1=[[1.0]],
        R2=[[0.0]],
        s=[1.0, 0.0],
        v=[-0.5],
        c=0.0,
    )
    if noise == "gaussian":
        noise_spec = NoiseSpec(kind="gaussian", mean=[0.2, 0.2], cov=[[0.03, 0.0], [0.0, 0.03]])
    elif noise == "uniform":
        noise_spec = NoiseSpec(kind="uniform_box", lower=[-0.1, -0.1], upper=[0.5, 0.5])
    else:
        raise ModelError(f"unknown noise flavor {noise!r}")
    init = MomentState(mean=[0.5, 0.8], cov=[[0.05**2, 0.0], [0.0, 0.08**2]])
    return ProblemSpec(system=system, cost=cost, noise=noise_spec, init=init,
                       init_kind="gaussian", horizon=horizon)


def _resolve_problem(config: ExperimentConfig) -> ProblemSpec:
    if config.problem is None:
        spec = benchmark_problem(noise=config.noise)
    else:
        spec = load_problem(config.problem)
    problems = validate(spec)
    if problems:
        raise ModelError("; ".join(problems))
    return spec


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) if isinstance(c, (int, str)) else _fmt(c) for c in row) + "\n")


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _np(obj):
    """Recursively convert numpy containers for JSON emission."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _np(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_np(v) for v in obj]
    return obj


def cmd_stationary(config: ExperimentConfig) -> Path:
    """Build the stationary pair and storage data; dump them as JSON."""
    spec = _resolve_problem(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    storage = build_storage(spec)
    pair = build_stationary_pair(spec, storage)
    _write_json(out / "stationary_pair.json", _np({
        "K": pair.K,
        "x_s": pair.x_s,
        "u_s": pair.u_s,
        "x_tilde": pair.x_tilde,
        "u_tilde": pair.u_tilde,
        "mu_s": pair.mu_s,
        "Sigma_s": pair.Sigma_s,
        "control_offset": pair.control_offset,
        "stationary_cost": pair.stationary_cost,
    }))
    from .stationary import storage_lower_bound

    _write_json(out / "storage.json", _np({
        "P": storage.P,
        "S": storage.S,
        "q": storage.q,
        "r": storage.r,
        "gamma": storage.gamma,
        "lower_bound": storage_lower_bound(storage, pair),
    }))
    return out


def cmd_solve(config: ExperimentConfig) -> Path:
    """Solve the OCP for every horizon; dump policies and exact costs."""
    spec = _resolve_problem(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    storage = build_storage(spec)
    pair = build_stationary_pair(spec, storage)
    solutions = []
    for N in config.horizons:
        spec_n = dataclasses.replace(spec, horizon=int(N))
        policy = ocp.solve_ocp(spec_n)
        traj = ocp.propagate_moments(spec_n, policy, pair)
        J = ocp.cost_of(spec_n, traj)
        solutions.append({
            "N": int(N),
            "cost": J,
            "delta": J - N * pair.stationary_cost,
            "mean_controls": policy.mean_controls,
            "gains": policy.gains,
        })
    _write_json(out / "solutions.json", _np({"solutions": solutions}))
    return out


def cmd_sweep(config: ExperimentConfig) -> Path:
    """Sweep horizons: exact series, empirical exceedance, counters, bounds."""
    spec = _resolve_problem(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    storage = build_storage(spec)
    pair = build_stationary_pair(spec, storage)

    series_rows = {name: [] for name in ("msd", "w2", "mean_gap", "covtrace_gap")}
    exceed_rows = {eps: [] for eps in config.epsilons}
    moment_rows = []
    bound_rows = []
    for N in config.horizons:
        spec_n = dataclasses.replace(spec, horizon=int(N))
        policy = ocp.solve_ocp(spec_n)
        traj = ocp.propagate_moments(spec_n, policy, pair)
        J = ocp.cost_of(spec_n, traj)
        bundle = montecarlo.simulate_coupled(
            spec_n, policy, pair, montecarlo.RngStream(config.seed, 0), config.mc_samples
        )
        series = metrics.trajectory_series(traj)
        for name in series_rows:
            for k, val in enumerate(series[name]):
                series_rows[name].append((int(N), k, val))
        for eps in config.epsilons:
            exc = montecarlo.empirical_exceedance(bundle, eps)
            for k, val in enumerate(exc):
                exceed_rows[eps].append((int(N), k, val))
        for k, joint in enumerate(traj.joints):
            mX = joint.block_mean("X")
            SX = joint.block_cov("X")
            for comp in range(mX.shape[0]):
                moment_rows.append((int(N), k, comp + 1, mX[comp], SX[comp, comp]))
        for eps in config.epsilons:
            for eta in config.etas:
                report = metrics.turnpike_counters(
                    traj, bundle, storage, pair, J, eps, eta, spec=spec_n
                )
                for name in ("L", "S", "D", "M1", "M2"):
                    bound_rows.append((
                        int(N), name, eps, eta,
                        report.counters[name], report.bounds[name],
                    ))

    header = ["N", "k", "value"]
    _write_csv(out / "msd.csv", header, series_rows["msd"])
    _write_csv(out / "wasserstein.csv", header, series_rows["w2"])
    _write_csv(out / "mean_gap.csv", header, series_rows["mean_gap"])
    _write_csv(out / "covtrace_gap.csv", header, series_rows["covtrace_gap"])
    for eps, rows in exceed_rows.items():
        _write_csv(out / f"exceedance_eps{eps:g}.csv", header, rows)
    _write_csv(out / "moments.csv", ["N", "k", "component", "mean", "variance"], moment_rows)
    _write_csv(out / "bounds.csv", ["N", "metric", "epsilon", "eta", "counter", "bound"], bound_rows)
    _write_csv(
        out / "stationary_reference.csv",
        ["component", "mean", "variance"],
        [(i + 1, pair.mu_s[i], pair.Sigma_s[i, i]) for i in range(pair.mu_s.shape[0])],
    )
    return out


def cmd_paths(config: ExperimentConfig) -> Path:
    """Replay fixed noise realizations across horizons; dump paths.csv."""
    spec = _resolve_problem(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    storage = build_storage(spec)
    pair = build_stationary_pair(spec, storage)
    n, l = spec.system.n, spec.system.l
    max_n = max(config.horizons)

    rows = []
    for i in range(config.path_realizations):
        rng = montecarlo.make_generator(montecarlo.RngStream(config.seed, _PATH_STREAM_BASE + i))
        x0 = montecarlo._draw_initial(spec, rng)
        xs0 = montecarlo._draw_stationary_initial(pair, rng)
        W = montecarlo._draw_noise(spec.noise, rng, (max_n,))
        for N in config.horizons:
            spec_n = dataclasses.replace(spec, horizon=int(N))
            policy = ocp.solve_ocp(spec_n)
            run = montecarlo.replay_paths(spec_n, policy, pair, x0, xs0, W[:N])
            for k in range(N):
                rows.append(
                    (i, int(N), k)
                    + tuple(run.X[k, 0]) + tuple(run.U[k, 0])
                    + tuple(run.Xs[k, 0]) + tuple(run.Us[k, 0])
                )
    header = (
        ["realization", "N", "k"]
        + [f"X{j+1}" for j in range(n)]
        + [f"U{j+1}" for j in range(l)]
        + [f"Xs{j+1}" for j in range(n)]
        + [f"Us{j+1}" for j in range(l)]
    )
    _write_csv(out / "paths.csv", header, rows)
    return out


def cmd_statopt(config: ExperimentConfig, restarts: int = 8) -> Path:
    """Solve the stationary optimization problem; dump candidate + report."""
    spec = _resolve_problem(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    storage = build_storage(spec)
    pair = build_stationary_pair(spec, storage)
    candidate = statopt.solve_stationary_problem(spec, restarts=restarts, seed=config.seed)
    uniq = statopt.verify_uniqueness(spec, [candidate], pair)
    grad = statopt.objective_gradient(spec, candidate.feedback)
    _write_json(out / "statopt.json", _np({
        "K": candidate.feedback.K,
        "d": candidate.feedback.d,
        "mu": candidate.mu,
        "Sigma": candidate.Sigma,
        "cost": candidate.cost,
        "stationary_cost": pair.stationary_cost,
        "mu_gap": float(np.max(np.abs(candidate.mu - pair.mu_s))),
        "Sigma_gap": float(np.max(np.abs(candidate.Sigma - pair.Sigma_s))),
        "gradient_norm": float(np.linalg.norm(grad)),
        "uniqueness": {
            "checked": uniq["checked"],
            "max_distance": uniq["max_distance"],
            "violations": len(uniq["violators"]),
            "feedback_class": uniq["feedback_class"],
        },
    }))
    return out


def cmd_dissipativity_check(config: ExperimentConfig, probes: int = 10_000) -> Path:
    """Randomized residual certification; dump a JSON report."""
    spec = _resolve_problem(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    storage = build_storage(spec)
    pair = build_stationary_pair(spec, storage)
    report = dcheck.run_probes(
        spec, pair, storage, dcheck.ProbeSpec(count=probes, seed=config.seed)
    )
    coupled = MomentState.joined(
        {
            "X": (pair.mu_s, pair.Sigma_s),
            "U": (pair.mu_u, pair.Sigma_u),
            "Xs": (pair.mu_s, pair.Sigma_s),
        },
        cross={
            ("X", "U"): pair.Sigma_s @ pair.K.T,
            ("X", "Xs"): pair.Sigma_s,
            ("U", "Xs"): pair.K @ pair.Sigma_s,
        },
    )
    coupled_res = dissipativity_residual(spec, pair, storage, coupled)
    _write_json(out / "dissipativity.json", _np({
        "probes": report.count,
        "min_residual": report.min_residual,
        "coupled_residual": coupled_res,
        "failed": bool(report.failed or abs(coupled_res) > 1e-9),
        "histogram_counts": report.histogram[0],
        "histogram_edges": report.histogram[1],
    }))
    return out


def _check(name: str, ok: bool, detail: str = "") -> dict:
    line = f"{'PASS' if ok else 'FAIL'} - {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    return {"name": name, "passed": bool(ok), "detail": detail}


def cmd_reproduce_paper(
    output_dir: str = "out",
    mc_samples: int = 10_000,
    seed: int = 1234,
    horizons: tuple | None = None,
    probes: int = 10_000,
) -> int:
    """Run the built-in reference study end to end and verify its numbers.

    Returns 0 when all checks pass, 3 otherwise.
    """
    kwargs = {} if horizons is None else {"horizons": tuple(horizons)}
    config = ExperimentConfig(output_dir=output_dir, mc_samples=mc_samples, seed=seed, **kwargs)
    out = Path(output_dir)
    checks = []

    cmd_stationary(config)
    with open(out / "stationary_pair.json") as fh:
        pair_d = json.load(fh)
    for key, ref in REFERENCE_CONSTANTS.items():
        got = np.asarray(pair_d[key])
        ok = np.allclose(got, np.asarray(ref), atol=1e-3, rtol=0.0)
        checks.append(_check(f"stationary constant {key}", ok,
                             f"got {np.round(got, 4).tolist()}"))

    cmd_sweep(config)
    bound_viol = 0
    counters_l = {}
    with open(out / "bounds.csv") as fh:
        next(fh)
        for line in fh:
            N, metric, eps, eta, counter, bound = line.strip().split(",")
            if counter == "None":
                continue
            if float(counter) < max(float(bound), 0.0):
                bound_viol += 1
            if metric == "L" and float(eps) == 1e-2:
                counters_l[int(N)] = float(counter)
    checks.append(_check("turnpike counters respect bounds", bound_viol == 0,
                         f"{bound_viol} violations"))
    if 40 in config.horizons and 80 in config.horizons:
        plateau = counters_l.get(80, 0) - counters_l.get(40, 0)
        checks.append(_check("plateau growth L(80)-L(40) in [38,42]", 38 <= plateau <= 42,
                             f"difference {plateau:g}"))

    if config.emit_paths:
        cmd_paths(config)
        uniform_cfg = dataclasses.replace(
            config, noise="uniform", output_dir=str(out / "uniform")
        )
        cmd_paths(uniform_cfg)

    cmd_statopt(config)
    with open(out / "statopt.json") as fh:
        so = json.load(fh)
    checks.append(_check("stationary problem recovers the pair",
                         so["mu_gap"] <= 1e-3 and so["Sigma_gap"] <= 1e-3,
                         f"mu gap {so['mu_gap']:.2e}, cov gap {so['Sigma_gap']:.2e}"))
    checks.append(_check("stationary problem cost matches",
                         abs(so["cost"] - so["stationary_cost"]) <= 1e-6,
                         f"gap {abs(so['cost'] - so['stationary_cost']):.2e}"))

    cmd_dissipativity_check(config, probes=probes)
    with open(out / "dissipativity.json") as fh:
        dd = json.load(fh)
    checks.append(_check("dissipativity residual certification", not dd["failed"],
                         f"min residual {dd['min_residual']:.3e}"))

    _write_json(out / "summary.json", {"checks": checks,
                                       "passed": all(c["passed"] for c in checks)})
    return 0 if all(c["passed"] for c in checks) else 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochturnpike",
        description="Stationary pairs, storage functions, and turnpike "
                    "certification for stochastic linear-quadratic optimal control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="experiment config JSON")
    common.add_argument("--seed", type=int, default=None, help="base RNG seed")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    common.add_argument("--noise", choices=("gaussian", "uniform"), default=None,
                        help="noise flavor of the built-in instance")
    for name in ("stationary", "solve", "sweep", "paths", "statopt"):
        sub.add_parser(name, parents=[common])
    p_diss = sub.add_parser("dissipativity-check", parents=[common])
    p_diss.add_argument("--probes", type=int, default=10_000)
    p_rep = sub.add_parser("reproduce-paper")
    p_rep.add_argument("--out", type=str, default="out")
    p_rep.add_argument("--samples", type=int, default=10_000)
    p_rep.add_argument("--seed", type=int, default=1234)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "mc_samples": args.samples,
        "noise": args.noise,
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "reproduce-paper":
            return cmd_reproduce_paper(args.out, args.samples, args.seed)
        config = _config_from_args(args)
        dispatch = {
            "stationary": cmd_stationary,
            "solve": cmd_solve,
            "sweep": cmd_sweep,
            "paths": cmd_paths,
            "statopt": cmd_statopt,
        }
        if args.command == "dissipativity-check":
            cmd_dissipativity_check(config, probes=args.probes)
        else:
            dispatch[args.command](config)
        return 0
    except (ModelError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (LinalgError, GammaSearchFailed, statopt.NoStabilizingStart, statopt.Infeasible) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
