"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -s`` to see
them inline).  Tolerances and runtime budgets are fixed here, not
calibrated elsewhere."""

import dataclasses
import time

import numpy as np
import pytest

from stochturnpike import dissipativity, metrics, montecarlo, ocp, statopt, stationary
from stochturnpike.cli import benchmark_problem
from stochturnpike.model import MomentState, stage_cost_from_moments


def _report(name, ok, detail=""):
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'} - {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def bench():
    spec = benchmark_problem()
    storage = stationary.build_storage(spec)
    pair = stationary.build_stationary_pair(spec, storage)
    return spec, storage, pair


def test_reference_constants(bench):
    spec, _, _ = bench
    t0 = time.perf_counter()
    storage = stationary.build_storage(spec)
    pair = stationary.build_stationary_pair(spec, storage)
    elapsed = time.perf_counter() - t0
    ok = (
        np.allclose(pair.K, [[-7.679, -0.388]], atol=1e-3)
        and np.allclose(pair.mu_s, [-1.116, -0.199], atol=1e-3)
        and np.allclose(pair.Sigma_s, [[0.063, 0.054], [0.054, 0.619]], atol=1e-3)
        and np.allclose(pair.control_offset, [-1.323], atol=1e-3)
        and elapsed < 1.0
    )
    _report("reference constants (K, mu_s, Sigma_s, offset) at 1e-3",
            ok, f"runtime {elapsed:.2f}s")


def test_dissipativity_certification(bench):
    spec, storage, pair = bench
    t0 = time.perf_counter()
    report = dissipativity.run_probes(
        spec, pair, storage, dissipativity.ProbeSpec(count=10_000, seed=0)
    )
    coupled = MomentState.joined(
        {"X": (pair.mu_s, pair.Sigma_s), "U": (pair.mu_u, pair.Sigma_u),
         "Xs": (pair.mu_s, pair.Sigma_s)},
        cross={("X", "U"): pair.Sigma_s @ pair.K.T, ("X", "Xs"): pair.Sigma_s,
               ("U", "Xs"): pair.K @ pair.Sigma_s},
    )
    coupled_res = stationary.dissipativity_residual(spec, pair, storage, coupled)
    elapsed = time.perf_counter() - t0
    ok = report.min_residual >= -1e-8 and abs(coupled_res) <= 1e-9 and elapsed < 10.0
    _report("dissipativity: 1e4 probes >= -1e-8, coupled probe |res| <= 1e-9",
            ok, f"min {report.min_residual:.2e}, coupled {coupled_res:.2e}, "
                f"runtime {elapsed:.1f}s")


def test_turnpike_bounds_and_plateau(bench):
    spec, storage, pair = bench
    t0 = time.perf_counter()
    violations = []
    counters_l = {}
    for N in range(20, 90, 10):
        spec_n = dataclasses.replace(spec, horizon=N)
        base_policy = ocp.solve_ocp(spec_n)
        for delta_target in (0.0, 1.0):
            policy = ocp.near_optimal_policy(spec_n, base_policy, delta_target)
            traj = ocp.propagate_moments(spec_n, policy, pair)
            J = ocp.cost_of(spec_n, traj)
            bundle = montecarlo.simulate_coupled(
                spec_n, policy, pair, montecarlo.RngStream(2024), 10_000
            )
            for eps in (1e-1, 1e-2, 1e-3):
                rep = metrics.turnpike_counters(
                    traj, bundle, storage, pair, J, eps, 0.05, spec=spec_n
                )
                violations.extend(
                    f"N={N} d={delta_target} eps={eps}: {v}" for v in rep.violations()
                )
                if eps == 1e-2 and delta_target == 0.0:
                    counters_l[N] = rep.counters["L"]
    plateau = counters_l[80] - counters_l[40]
    elapsed = time.perf_counter() - t0
    ok = not violations and 38 <= plateau <= 42 and elapsed < 60.0
    _report("turnpike counters meet bounds; plateau L(80)-L(40) in [38,42]",
            ok, f"violations {len(violations)}, plateau {plateau}, "
                f"runtime {elapsed:.1f}s")


def test_ocp_bruteforce_optimality():
    from test_ocp import enumerate_two_point_cost, scalar_two_point_spec

    t0 = time.perf_counter()
    spec, mu_w, w = scalar_two_point_spec()
    pair = stationary.build_stationary_pair(spec)
    policy = ocp.solve_ocp(spec)
    traj = ocp.propagate_moments(spec, policy, pair)
    J_solver = ocp.cost_of(spec, traj)
    k0 = policy.gains[0, 0, 0]
    u0_raw = policy.mean_controls[0, 0] - k0 * spec.init.mean[0]
    u1 = policy.mean_controls[1, 0]
    grid = np.linspace(-1.0, 1.0, 200)
    u0_mesh, u1_mesh = np.meshgrid(u0_raw + grid, u1 + grid, indexing="ij")
    best = np.inf
    for dk in grid:
        costs = enumerate_two_point_cost(spec, mu_w, w, k0 + dk, u0_mesh, u1_mesh)
        best = min(best, float(costs.min()))
    elapsed = time.perf_counter() - t0
    ok = J_solver <= best + 1e-6 and elapsed < 30.0
    _report("solver beats the 200^3 brute-force policy grid",
            ok, f"J={J_solver:.6f}, grid min={best:.6f}, runtime {elapsed:.1f}s")


def test_stationary_optimality(bench):
    spec, _, pair = bench
    candidate = statopt.solve_stationary_problem(spec, restarts=8, seed=0)
    grad = statopt.objective_gradient(spec, candidate.feedback)
    mu_gap = float(np.max(np.abs(candidate.mu - pair.mu_s)))
    sig_gap = float(np.max(np.abs(candidate.Sigma - pair.Sigma_s)))
    cost_gap = abs(candidate.cost - pair.stationary_cost)
    ok = mu_gap <= 1e-3 and sig_gap <= 1e-3 and cost_gap <= 1e-6 and np.linalg.norm(grad) <= 1e-4
    _report("stationary problem recovers the pair (1e-3) and cost (1e-6)",
            ok, f"mu {mu_gap:.1e}, Sigma {sig_gap:.1e}, cost {cost_gap:.1e}, "
                f"grad {np.linalg.norm(grad):.1e}")


def test_telescoping_and_chain_inequalities(bench):
    spec, storage, pair = bench
    rng = np.random.default_rng(41)
    N = 10
    spec_n = dataclasses.replace(spec, horizon=N)
    worst_tel = 0.0
    for _ in range(100):
        policy = ocp.AffinePolicy(
            gains=0.3 * rng.normal(size=(N, 1, 2)),
            mean_controls=0.3 * rng.normal(size=(N, 1)),
            horizon=N,
        )
        traj = ocp.propagate_moments(spec_n, policy, pair)
        J = ocp.cost_of(spec_n, traj)
        jt = ocp.rotated_cost(spec_n, traj, pair, storage)
        lam0 = stationary.eval_storage(storage, traj.joints[0])
        lamN = stationary.eval_storage(storage, traj.joints[N])
        ref = J - N * pair.stationary_cost + lam0 - lamN
        worst_tel = max(worst_tel, abs(jt - ref) / (1 + abs(ref)))
    tel_ok = worst_tel <= 1e-8

    spec_20 = dataclasses.replace(spec, horizon=20)
    policy = ocp.solve_ocp(spec_20)
    traj = ocp.propagate_moments(spec_20, policy, pair)
    series = metrics.trajectory_series(traj)
    chain_ok = bool(
        np.all(series["w2"] <= np.sqrt(series["msd"]) + 1e-9)
        and np.all(series["mean_gap"] <= series["w2"] + 1e-9)
    )

    J = ocp.cost_of(spec_20, traj)
    bundle = montecarlo.simulate_coupled(spec_20, policy, pair,
                                         montecarlo.RngStream(2024), 10_000)
    markov_ok = True
    for eps in (1e-1, 1e-2, 1e-3):
        for eta in (0.05,):
            rep = metrics.turnpike_counters(traj, bundle, storage, pair, J,
                                            eps, eta, spec=spec_20)
            L_small = int(np.sum(series["msd"][:20] <= eps**2 * eta))
            markov_ok = markov_ok and rep.counters["S"] >= L_small
    ok = tel_ok and chain_ok and markov_ok
    _report("telescoping 1e-8; W2 <= sqrt(msd); |dE| <= W2; S >= L(eps^2 eta)",
            ok, f"max telescoping gap {worst_tel:.2e}")


def test_monte_carlo_consistency(bench):
    spec, storage, pair = bench
    count = 10**5
    failures = []
    for flavor in ("gaussian", "uniform"):
        spec_f = dataclasses.replace(benchmark_problem(noise=flavor), horizon=20)
        pair_f = stationary.build_stationary_pair(spec_f)
        policy = ocp.solve_ocp(spec_f)
        traj = ocp.propagate_moments(spec_f, policy, pair_f)
        bundle = montecarlo.simulate_coupled(spec_f, policy, pair_f,
                                             montecarlo.RngStream(77), count)
        sq = np.sum((bundle.X - bundle.Xs) ** 2, axis=2)
        for k in (0, 5, 10, 20):
            joint = traj.joints[k]
            mX, SX = joint.block_mean("X"), joint.block_cov("X")
            est_mean = bundle.X[k].mean(axis=0)
            for i in range(2):
                se = np.sqrt(SX[i, i] / count)
                if abs(est_mean[i] - mX[i]) >= 3 * se + 1e-12:
                    failures.append(f"{flavor} mean k={k} i={i}")
            est_cov = np.cov(bundle.X[k].T, bias=False)
            for i in range(2):
                for j in range(2):
                    se = np.sqrt((SX[i, i] * SX[j, j] + SX[i, j] ** 2) / count)
                    if abs(est_cov[i, j] - SX[i, j]) >= 3 * se + 1e-12:
                        failures.append(f"{flavor} cov k={k} ({i},{j})")
            exact_msd = metrics.mean_square_distance(joint)
            se_msd = sq[k].std(ddof=1) / np.sqrt(count)
            if abs(sq[k].mean() - exact_msd) >= 3 * se_msd + 1e-12:
                failures.append(f"{flavor} msd k={k}")
        # exact cost against the per-path estimator (centered covariance parts)
        J = ocp.cost_of(spec_f, traj)
        cost_samples = np.zeros(count)
        c = spec_f.cost
        for k in range(20):
            xk, uk = bundle.X[k], bundle.U[k]
            mXk = traj.joints[k].block_mean("X")
            mUk = traj.control_means[k]
            dxk, duk = xk - mXk, uk - mUk
            cost_samples += (
                np.einsum("ij,jk,ik->i", xk, c.Q1, xk)
                + np.einsum("ij,jk,ik->i", uk, c.R1, uk)
                + xk @ c.s + uk @ c.v + c.c
                + np.einsum("ij,jk,ik->i", dxk, c.Q2, dxk)
                + np.einsum("ij,jk,ik->i", duk, c.R2, duk)
            )
        se_cost = cost_samples.std(ddof=1) / np.sqrt(count)
        if abs(cost_samples.mean() - J) >= 3 * se_cost:
            failures.append(f"{flavor} cost")
    # bit reproducibility under a fixed seed
    spec_20 = dataclasses.replace(spec, horizon=20)
    policy = ocp.solve_ocp(spec_20)
    b1 = montecarlo.simulate_coupled(spec_20, policy, pair, montecarlo.RngStream(5), 2000)
    b2 = montecarlo.simulate_coupled(spec_20, policy, pair, montecarlo.RngStream(5), 2000)
    if not all(np.array_equal(getattr(b1, n), getattr(b2, n)) for n in ("X", "Xs", "U", "Us", "W")):
        failures.append("bit reproducibility")
    _report("Monte Carlo consistency at 1e5 samples (gaussian + uniform)",
            not failures, "; ".join(failures) if failures else "all gates passed")
