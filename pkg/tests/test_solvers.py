import numpy as np
import pytest

from deepcfft.bench import make_instance
from deepcfft.problem import (
    AlState,
    assemble_problem,
    kkt_residual,
    p_matvec,
    recovered_trajectory,
)
from deepcfft.solvers import (
    AlConfig,
    DegenerateCurvatureError,
    LbfgsConfig,
    LbfgsMemory,
    STATUS_CONVERGED,
    dense_problem_matrices,
    exact_line_search,
    lbfgs_minimize,
    solve_al_gd,
    solve_al_lbfgs,
    solve_dense_kkt,
    solve_minres_kkt,
    two_loop_apply,
)
from oracles import bfgs_inverse_dense, model_ocp_trajectory


def build_problem(n=3, m=1, horizon=4, seed=5, track=True, **kw):
    inst = make_instance(n, m, horizon, seed, track=track, **kw)
    problem = assemble_problem(
        inst["trajectory"],
        horizon,
        inst["x0"],
        setpoint=inst["setpoint"] if track else None,
    )
    return inst, problem


class TestConfigs:
    def test_al_config_validation(self):
        with pytest.raises(ValueError):
            AlConfig(mu0=0.0)
        with pytest.raises(ValueError):
            AlConfig(mu_delta=-1.0)
        with pytest.raises(ValueError):
            AlConfig(max_outer=0)

    def test_lbfgs_config_validation(self):
        with pytest.raises(ValueError):
            LbfgsConfig(window=0)
        with pytest.raises(ValueError):
            LbfgsConfig(grad_tol=0.0)


class TestLbfgsMemory:
    def test_window_bound(self, rng):
        mem = LbfgsMemory(window=3)
        for _ in range(7):
            s = rng.standard_normal(4)
            mem.push(s, s)  # s'y = ||s||^2 > 0
        assert len(mem) == 3

    def test_nonpositive_curvature_rejected(self, rng):
        mem = LbfgsMemory(window=5)
        s = rng.standard_normal(4)
        assert not mem.push(s, -s)
        assert not mem.push(s, np.zeros(4))
        assert len(mem) == 0


class TestTwoLoopApply:
    def test_empty_memory_is_steepest_descent(self, rng):
        g = rng.standard_normal(6)
        assert np.array_equal(two_loop_apply(LbfgsMemory(window=4), g), -g)

    def test_single_pair_two_by_two_hand_case(self):
        s = np.array([1.0, 0.0])
        y = np.array([0.5, 0.5])
        rho = 1.0 / float(s @ y)
        mem = LbfgsMemory(window=2)
        assert mem.push(s, y)
        g = np.array([2.0, -1.0])
        gamma = float(s @ y) / float(y @ y)
        eye = np.eye(2)
        h = (eye - rho * np.outer(s, y)) @ (gamma * eye) @ (
            eye - rho * np.outer(y, s)
        ) + rho * np.outer(s, s)
        assert np.allclose(two_loop_apply(mem, g), -h @ g, atol=1e-14)

    def test_matches_dense_recursion(self, rng):
        for dim, pairs in [(5, 3), (20, 10), (30, 7)]:
            mem = LbfgsMemory(window=pairs)
            stored = []
            while len(stored) < pairs:
                s = rng.standard_normal(dim)
                y = rng.standard_normal(dim)
                if mem.push(s, y):
                    stored.append((s, y, 1.0 / float(s @ y)))
            h = bfgs_inverse_dense(stored, dim)
            for _ in range(5):
                g = rng.standard_normal(dim)
                want = -h @ g
                got = two_loop_apply(mem, g)
                assert np.linalg.norm(got - want) <= 1e-12 * (1 + np.linalg.norm(want))


class TestExactLineSearch:
    def test_identity_hessian_unit_step(self, rng):
        g = rng.standard_normal(5)
        assert abs(exact_line_search(g, -g, lambda v: v) - 1.0) < 1e-14

    def test_scalar_closed_form(self):
        a = 4.0
        z = 3.0
        g = np.array([a * z])
        p = -g
        alpha = exact_line_search(g, p, lambda v: a * v)
        assert abs(alpha - 1.0 / a) < 1e-14

    def test_grid_search_oracle(self, rng):
        dim = 6
        root = rng.standard_normal((dim, dim))
        hess = root @ root.T + dim * np.eye(dim)
        z = rng.standard_normal(dim)
        g = hess @ z
        p = -g + 0.1 * rng.standard_normal(dim)
        alpha = exact_line_search(g, p, lambda v: hess @ v)

        def f(step):
            w = z + step * p
            return 0.5 * float(w @ (hess @ w))

        grid = np.linspace(alpha - 0.5, alpha + 0.5, 2001)
        best = grid[np.argmin([f(s) for s in grid])]
        assert abs(alpha - best) <= (grid[1] - grid[0])

    def test_descent_guaranteed(self, rng):
        dim = 8
        root = rng.standard_normal((dim, dim))
        hess = root @ root.T + np.eye(dim)
        z = rng.standard_normal(dim)
        g = hess @ z
        p = -g
        alpha = exact_line_search(g, p, lambda v: hess @ v)
        f0 = 0.5 * float(z @ (hess @ z))
        z1 = z + alpha * p
        assert 0.5 * float(z1 @ (hess @ z1)) <= f0

    def test_degenerate_direction_raises(self):
        g = np.array([1.0, 0.0])
        p = np.array([0.0, 1.0])  # zero curvature along p, yet g'p may be 0
        hess = np.diag([1.0, 0.0])
        with pytest.raises(DegenerateCurvatureError):
            exact_line_search(np.array([0.0, 1.0]), p, lambda v: hess @ v)


class TestLbfgsMinimize:
    def test_identity_quadratic_single_step(self, rng):
        z0 = rng.standard_normal(7)
        z, report = lbfgs_minimize(
            lambda z: z, lambda v: v, z0, LbfgsConfig(window=5, grad_tol=1e-12)
        )
        assert report.iterations == 1
        assert np.linalg.norm(z) <= 1e-12

    def test_diagonal_quadratic_conjugate_termination(self, rng):
        diag = np.array([1.0, 3.0, 7.0, 12.0, 30.0])
        z0 = rng.standard_normal(5)
        z, report = lbfgs_minimize(
            lambda z: diag * z,
            lambda v: diag * v,
            z0,
            LbfgsConfig(window=6, grad_tol=1e-10, max_inner=50),
        )
        assert report.iterations <= 6
        assert np.linalg.norm(diag * z) <= 1e-10

    def test_singular_psd_quadratic_reaches_minimum(self, rng):
        # Inner aL objective shape: PSD with a null space, started at zero.
        dim = 12
        basis = rng.standard_normal((dim, 7))
        hess = basis @ basis.T  # rank 7
        lin = hess @ rng.standard_normal(dim)  # consistent linear term
        z, report = lbfgs_minimize(
            lambda z: hess @ z + lin,
            lambda v: hess @ v,
            np.zeros(dim),
            LbfgsConfig(window=12, grad_tol=1e-9, max_inner=100),
        )
        assert report.status == STATUS_CONVERGED
        z_star = -np.linalg.pinv(hess) @ lin
        f = lambda w: 0.5 * float(w @ (hess @ w)) + float(lin @ w)
        assert f(z) <= f(z_star) + 1e-9 * (1 + abs(f(z_star)))

    def test_quadratic_monotone_descent(self, rng):
        dim = 10
        root = rng.standard_normal((dim, dim))
        hess = root @ root.T + np.eye(dim)
        lin = rng.standard_normal(dim)
        f = lambda w: 0.5 * float(w @ (hess @ w)) + float(lin @ w)
        z = rng.standard_normal(dim)
        mem = LbfgsMemory(window=5)
        values = [f(z)]
        g = hess @ z + lin
        for _ in range(15):
            p = two_loop_apply(mem, g)
            hp = hess @ p
            alpha = exact_line_search(g, p, None, hess_p=hp)
            z = z + alpha * p
            mem.push(alpha * p, alpha * hp)
            g = g + alpha * hp
            values.append(f(z))
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


class TestOuterLoop:
    def test_penalty_schedule_and_multiplier_identity(self):
        from deepcfft.solvers import InnerReport, _outer_loop

        _, problem = build_problem(seed=47)
        rng = np.random.default_rng(0)
        mus = []
        zs = []

        def fake_inner(z, lam, mu, on_iterate):
            mus.append(mu)
            z_next = rng.standard_normal(problem.col_dim)
            zs.append(z_next)
            pz = p_matvec(problem, z_next)
            return z_next, np.zeros_like(z_next), pz, InnerReport(1, 0.0, STATUS_CONVERGED)

        al = AlConfig(mu0=2.0, mu_delta=5.0, max_outer=4, outer_tol=1e-300)
        report = _outer_loop(problem, al, fake_inner, record=False, config_echo={})
        assert mus == [2.0, 7.0, 12.0, 17.0]
        lam = np.zeros(problem.n)
        for mu, z in zip(mus, zs):
            lam = lam - mu * (p_matvec(problem, z) - problem.initial_state)
        assert np.allclose(report.multiplier, lam, atol=1e-12)


class TestSolveAlLbfgs:
    def test_trivially_feasible_origin(self):
        _, problem = build_problem(track=False, seed=53)
        from dataclasses import replace

        feasible = replace(problem, initial_state=np.zeros(problem.n))
        report = solve_al_lbfgs(feasible, AlConfig(), LbfgsConfig())
        assert report.status == STATUS_CONVERGED
        assert report.total_outer == 1
        assert np.array_equal(report.z, np.zeros(problem.col_dim))
        assert np.array_equal(report.multiplier, np.zeros(problem.n))
        assert len(report.records) > 0

    def test_tiny_instance_matches_oracle_trajectory(self):
        _, problem = build_problem(n=3, m=1, horizon=4, seed=5)
        report = solve_al_lbfgs(
            problem,
            AlConfig(mu0=10.0, mu_delta=90.0, inner_tol=1e-9, outer_tol=1e-6),
            LbfgsConfig(window=40, grad_tol=1e-9, max_inner=300),
        )
        assert report.status == STATUS_CONVERGED
        assert report.residual_norm <= 1e-6
        z_star, _ = solve_dense_kkt(problem)
        want = recovered_trajectory(problem, z_star)
        got = recovered_trajectory(problem, report.z)
        assert np.linalg.norm(got - want) <= 1e-5 * (1 + np.linalg.norm(want))

    def test_matches_model_form_ocp(self):
        inst, problem = build_problem(n=4, m=2, horizon=6, seed=59)
        report = solve_al_lbfgs(
            problem,
            AlConfig(mu0=10.0, mu_delta=90.0, inner_tol=1e-9, outer_tol=1e-7),
            LbfgsConfig(window=60, grad_tol=1e-9, max_inner=400),
        )
        assert report.status == STATUS_CONVERGED
        want = model_ocp_trajectory(
            inst["system"],
            6,
            inst["x0"],
            inst["setpoint"],
            problem.q_weight,
            problem.r_weight,
        )
        got = recovered_trajectory(problem, report.z)
        assert np.linalg.norm(got - want) <= 1e-4 * (1 + np.linalg.norm(want))

    def test_medium_instance_residual_drops_six_orders(self):
        _, problem = build_problem(n=20, m=5, horizon=10, seed=61)
        r0 = kkt_residual(problem, np.zeros(problem.col_dim), np.zeros(problem.n))[1]
        report = solve_al_lbfgs(
            problem,
            AlConfig(
                mu0=10.0, mu_delta=90.0, inner_tol=1e-8,
                outer_tol=1e-6 * r0, max_outer=25,
            ),
            LbfgsConfig(window=50, grad_tol=1e-8, max_inner=100),
        )
        assert report.status == STATUS_CONVERGED
        assert report.residual_norm <= 1e-6 * r0
        assert report.total_inner <= 500

    def test_feasibility_nonincreasing_across_outers(self):
        _, problem = build_problem(n=5, m=2, horizon=5, seed=67)
        report = solve_al_lbfgs(
            problem,
            AlConfig(mu0=10.0, mu_delta=90.0, inner_tol=1e-10, outer_tol=1e-10, max_outer=8),
            LbfgsConfig(window=40, grad_tol=1e-10, max_inner=200),
            record=False,
        )
        # One exact-KKT row per outer; stationarity is pinned at the inner
        # tolerance, so the row norms track the feasibility violation.
        history = [rec.residual_norm for rec in report.records]
        assert all(b <= a * 1.01 + 1e-12 for a, b in zip(history, history[1:]))

    def test_warm_start_cuts_iterations(self):
        _, problem = build_problem(n=6, m=2, horizon=6, seed=71)
        al = AlConfig(mu0=10.0, mu_delta=90.0, inner_tol=1e-9, outer_tol=1e-7)
        lb = LbfgsConfig(window=40, grad_tol=1e-9, max_inner=300)
        cold = solve_al_lbfgs(problem, al, lb)
        warm_al = AlConfig(
            mu0=10.0, mu_delta=90.0, inner_tol=1e-9, outer_tol=1e-7,
            z0=cold.z, lambda0=cold.multiplier,
        )
        warm = solve_al_lbfgs(problem, warm_al, lb)
        assert warm.total_inner <= max(2, cold.total_inner // 4)


class TestSolveAlGd:
    def test_trivially_feasible_single_outer(self):
        _, problem = build_problem(track=False, seed=73)
        from dataclasses import replace

        feasible = replace(problem, initial_state=np.zeros(problem.n))
        report = solve_al_gd(feasible, AlConfig(), 50)
        assert report.status == STATUS_CONVERGED
        assert report.total_outer == 1
        assert np.array_equal(report.z, np.zeros(problem.col_dim))

    def test_stagnates_behind_lbfgs_at_equal_budget(self):
        _, problem = build_problem(n=8, m=2, horizon=8, seed=79)
        al = AlConfig(mu0=10.0, mu_delta=90.0, inner_tol=1e-12, outer_tol=1e-10, max_outer=4)
        lbfgs = solve_al_lbfgs(
            problem, al, LbfgsConfig(window=60, grad_tol=1e-12, max_inner=60)
        )
        gd = solve_al_gd(problem, al, 60)
        assert gd.total_inner >= lbfgs.total_inner
        assert gd.residual_norm >= 1e3 * lbfgs.residual_norm


class TestSolveMinres:
    def test_zero_rhs_instant(self):
        _, problem = build_problem(track=False, seed=83)
        from dataclasses import replace

        feasible = replace(problem, initial_state=np.zeros(problem.n))
        report = solve_minres_kkt(feasible, 1e-8, 100)
        assert report.status == STATUS_CONVERGED
        assert report.total_inner == 0
        assert np.array_equal(report.z, np.zeros(problem.col_dim))

    def test_desk_instance_matches_oracle_trajectory(self):
        _, problem = build_problem(n=3, m=2, horizon=5, seed=89)
        report = solve_minres_kkt(problem, 1e-8, 4000)
        z_star, _ = solve_dense_kkt(problem)
        want = recovered_trajectory(problem, z_star)
        got = recovered_trajectory(problem, report.z)
        assert np.linalg.norm(got - want) <= 1e-4 * (1 + np.linalg.norm(want))

    def test_iteration_budget_respected(self):
        _, problem = build_problem(n=4, m=1, horizon=6, seed=97)
        report = solve_minres_kkt(problem, 1e-300, 7, record=True)
        assert report.total_inner <= 7
        assert report.status != STATUS_CONVERGED


class TestDenseKktOracle:
    def test_trivial_zero_solution(self):
        _, problem = build_problem(track=False, seed=101)
        from dataclasses import replace

        feasible = replace(problem, initial_state=np.zeros(problem.n))
        z, lam = solve_dense_kkt(feasible)
        assert np.linalg.norm(z) <= 1e-12
        assert np.linalg.norm(lam) <= 1e-12

    def test_defining_residual(self):
        _, problem = build_problem(seed=103)
        z, lam = solve_dense_kkt(problem)
        _, norm = kkt_residual(problem, z, lam)
        assert norm <= 1e-9

    def test_matches_model_ocp(self):
        inst, problem = build_problem(n=3, m=1, horizon=5, seed=107)
        z, _ = solve_dense_kkt(problem)
        got = recovered_trajectory(problem, z)
        want = model_ocp_trajectory(
            inst["system"], 5, inst["x0"], inst["setpoint"],
            problem.q_weight, problem.r_weight,
        )
        assert np.allclose(got, want, atol=1e-7)

    def test_oversized_instance_refused(self):
        inst, problem = build_problem(n=2, m=1, horizon=4, seed=109, signal_length=2100)
        with pytest.raises(ValueError):
            dense_problem_matrices(problem)
