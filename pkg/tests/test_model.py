import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st_

from stochturnpike import model
from stochturnpike.cli import benchmark_problem


def direct_stage_cost(cost, xs, us):
    """Oracle: average the pointwise quadratic over a sample cloud and add
    the covariance-only penalties computed from empirical moments."""
    pointwise = np.mean([
        x @ cost.Q1 @ x + u @ cost.R1 @ u + cost.s @ x + cost.v @ u + cost.c
        for x, u in zip(xs, us)
    ])
    cov_x = np.cov(xs.T, bias=True).reshape(xs.shape[1], xs.shape[1])
    cov_u = np.cov(us.T, bias=True).reshape(us.shape[1], us.shape[1])
    return pointwise + np.trace(cost.Q2 @ cov_x) + np.trace(cost.R2 @ cov_u)


class TestStageCost:
    def test_all_zero(self):
        cost = model.CostSpec(Q1=np.eye(2), Q2=np.zeros((2, 2)), R1=np.eye(1),
                              R2=np.zeros((1, 1)), s=np.zeros(2), v=np.zeros(1), c=0.0)
        joint = model.MomentState.joined(
            {"X": (np.zeros(2), np.zeros((2, 2))), "U": (np.zeros(1), np.zeros((1, 1)))}
        )
        assert model.stage_cost_from_moments(cost, joint) == 0.0

    def test_matches_sample_cloud_oracle(self):
        rng = np.random.default_rng(0)
        cost = benchmark_problem().cost
        xs = rng.normal(size=(4000, 2))
        us = rng.normal(size=(4000, 1))
        mx, Sx = xs.mean(axis=0), np.cov(xs.T, bias=True)
        mu, Su = us.mean(axis=0), np.cov(us.T, bias=True).reshape(1, 1)
        joint = model.MomentState.joined({"X": (mx, Sx), "U": (mu, Su)})
        got = model.stage_cost_from_moments(cost, joint)
        ref = direct_stage_cost(cost, xs, us)
        assert abs(got - ref) < 1e-8 * (1 + abs(ref))

    def test_variance_penalty_increment(self):
        # raising Var(X1) by 1 raises the cost by exactly Q1[0,0] + Q2[0,0]
        cost = benchmark_problem().cost
        base = model.MomentState.joined(
            {"X": (np.ones(2), np.diag([0.4, 0.2])), "U": (np.zeros(1), np.zeros((1, 1)))}
        )
        bumped = model.MomentState.joined(
            {"X": (np.ones(2), np.diag([1.4, 0.2])), "U": (np.zeros(1), np.zeros((1, 1)))}
        )
        inc = model.stage_cost_from_moments(cost, bumped) - model.stage_cost_from_moments(cost, base)
        assert abs(inc - (1.0 + 5.0)) < 1e-12

    def test_stationary_cost_against_monte_carlo(self):
        # the covariance penalties have known means here, so the per-sample
        # estimator uses centered quadratics and stays unbiased
        from stochturnpike import build_stationary_pair

        spec = benchmark_problem()
        pair = build_stationary_pair(spec)
        rng = np.random.default_rng(42)
        n_samp = 10**6
        Fx = np.linalg.cholesky(pair.Sigma_s + 1e-15 * np.eye(2))
        xs = pair.mu_s + rng.standard_normal((n_samp, 2)) @ Fx.T
        us = xs @ pair.K.T + pair.control_const()
        cost = spec.cost
        dx = xs - pair.mu_s
        du = us - pair.mu_u
        vals = (
            np.einsum("ij,jk,ik->i", xs, cost.Q1, xs)
            + np.einsum("ij,jk,ik->i", us, cost.R1, us)
            + xs @ cost.s + us @ cost.v + cost.c
            + np.einsum("ij,jk,ik->i", dx, cost.Q2, dx)
            + np.einsum("ij,jk,ik->i", du, cost.R2, du)
        )
        est, se = vals.mean(), vals.std(ddof=1) / np.sqrt(n_samp)
        assert abs(est - pair.stationary_cost) < 3 * se + 1e-9


class TestShiftProblem:
    def test_no_forcing(self):
        spec = benchmark_problem()
        quiet = dataclasses.replace(
            spec,
            noise=model.NoiseSpec(kind="gaussian", mean=[0.0, 0.0], cov=[[0.0, 0.0], [0.0, 0.0]]),
        )
        sh = model.shift_problem(quiet)
        assert np.allclose(sh.x_s, 0.0) and np.allclose(sh.u_s, 0.0)
        assert np.allclose(sh.s_hat, quiet.cost.s)
        assert np.allclose(sh.v_hat, quiet.cost.v)
        assert sh.c_hat == quiet.cost.c

    def test_scalar_minimal_norm(self):
        system = model.SystemSpec(A=[[0.5]], B=[[1.0]], E=[[1.0]], z=[0.0])
        cost = model.CostSpec(Q1=[[1.0]], Q2=[[0.0]], R1=[[1.0]], R2=[[0.0]],
                              s=[0.0], v=[0.0], c=0.0)
        noise = model.NoiseSpec(kind="gaussian", mean=[0.2], cov=[[0.0]])
        init = model.MomentState(mean=[0.0], cov=[[0.0]])
        spec = model.ProblemSpec(system=system, cost=cost, noise=noise, init=init)
        sh = model.shift_problem(spec)
        # minimal-norm point on the line 0.5 x - u = 0.2
        assert abs(sh.x_s[0] - 0.08) < 1e-12
        assert abs(sh.u_s[0] + 0.16) < 1e-12

    def test_steady_state_residual(self):
        spec = benchmark_problem()
        sh = model.shift_problem(spec)
        lhs = (np.eye(2) - spec.system.A) @ sh.x_s - spec.system.B @ sh.u_s
        rhs = spec.system.E @ spec.noise.mean + spec.system.z
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_inconsistent_system(self):
        # A = I makes (I-A)x - Bu = b unsolvable when b is outside range(B)
        system = model.SystemSpec(A=np.eye(2), B=[[1.0], [0.0]], E=np.eye(2), z=[0.0, 0.0])
        cost = benchmark_problem().cost
        noise = model.NoiseSpec(kind="gaussian", mean=[0.0, 0.3], cov=np.zeros((2, 2)))
        init = model.MomentState(mean=[0.0, 0.0], cov=np.zeros((2, 2)))
        spec = model.ProblemSpec(system=system, cost=cost, noise=noise, init=init)
        with pytest.raises(model.NoSteadyState):
            model.shift_problem(spec)


class TestValidate:
    def test_benchmark_clean(self):
        assert model.validate(benchmark_problem()) == []

    def test_r1_not_positive_definite(self):
        spec = benchmark_problem()
        bad = dataclasses.replace(
            spec,
            cost=dataclasses.replace(spec.cost, R1=np.zeros((1, 1))),
        )
        assert any("R1" in msg for msg in model.validate(bad))

    def test_dimension_mismatch(self):
        spec = benchmark_problem()
        bad = dataclasses.replace(
            spec,
            system=model.SystemSpec(A=spec.system.A, B=[[0.05], [-0.05], [0.1]],
                                    E=spec.system.E, z=spec.system.z),
        )
        assert any("B" in msg for msg in model.validate(bad))

    def test_not_stabilizable_flagged(self):
        spec = benchmark_problem()
        bad = dataclasses.replace(
            spec,
            system=model.SystemSpec(A=[[2.0, 0.0], [0.0, 0.5]], B=[[0.0], [1.0]],
                                    E=spec.system.E, z=spec.system.z),
        )
        assert any("stabilizable" in msg for msg in model.validate(bad))


class TestNoiseSpec:
    def test_uniform_box_moments(self):
        noise = model.NoiseSpec(kind="uniform_box", lower=[-0.1, -0.1], upper=[0.5, 0.5])
        assert np.allclose(noise.mean, [0.2, 0.2])
        assert np.allclose(noise.cov, np.diag([0.03, 0.03]))

    def test_bad_box(self):
        with pytest.raises(model.ModelError):
            model.NoiseSpec(kind="uniform_box", lower=[0.5], upper=[-0.1])


class TestMomentState:
    def test_joined_blocks_and_cross(self):
        j = model.MomentState.joined(
            {"X": (np.array([1.0, 2.0]), np.eye(2)), "U": (np.array([3.0]), [[4.0]])},
            cross={("X", "U"): [[0.5], [0.25]]},
        )
        assert np.allclose(j.block_mean("X"), [1.0, 2.0])
        assert np.allclose(j.block_cov("U"), [[4.0]])
        assert np.allclose(j.block_cov("X", "U"), [[0.5], [0.25]])
        assert np.allclose(j.block_cov("U", "X"), [[0.5, 0.25]])

    def test_rejects_indefinite(self):
        with pytest.raises(model.ModelError):
            model.MomentState(mean=[0.0], cov=[[-1.0]])


class TestJsonInterchange:
    def test_round_trip(self, tmp_path):
        spec = benchmark_problem()
        path = tmp_path / "problem.json"
        with open(path, "w") as fh:
            json.dump(model.problem_to_dict(spec), fh)
        loaded = model.load_problem(path)
        assert np.allclose(loaded.system.A, spec.system.A)
        assert np.allclose(loaded.cost.Q2, spec.cost.Q2)
        assert loaded.noise.kind == "gaussian"
        assert np.allclose(loaded.init.mean, spec.init.mean)
        assert loaded.horizon == spec.horizon

    def test_uniform_round_trip(self, tmp_path):
        spec = benchmark_problem(noise="uniform")
        path = tmp_path / "problem.json"
        with open(path, "w") as fh:
            json.dump(model.problem_to_dict(spec), fh)
        loaded = model.load_problem(path)
        assert loaded.noise.kind == "uniform_box"
        assert np.allclose(loaded.noise.cov, np.diag([0.03, 0.03]))


@settings(max_examples=30, deadline=None)
@given(st_.integers(min_value=0, max_value=2**32 - 1))
def test_stage_cost_depends_only_on_moments(seed):
    # rotating the underlying cloud while matching (mean, cov) is invisible
    rng = np.random.default_rng(seed)
    cost = benchmark_problem().cost
    xs = rng.normal(size=(500, 2))
    us = rng.normal(size=(500, 1))
    mx, Sx = xs.mean(axis=0), np.cov(xs.T, bias=True)
    mu, Su = us.mean(axis=0), np.cov(us.T, bias=True).reshape(1, 1)
    joint = model.MomentState.joined({"X": (mx, Sx), "U": (mu, Su)})
    got = model.stage_cost_from_moments(cost, joint)
    ref = direct_stage_cost(cost, xs, us)
    assert abs(got - ref) < 1e-8 * (1 + abs(ref))
