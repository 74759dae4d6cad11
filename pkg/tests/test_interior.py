import numpy as np
import pytest

from roptd.information import SingularInformationError, build_context, phi1
from roptd.interior import (
    STEP_CAP_SENTINEL,
    SolverOptions,
    bfgs_minimize,
    feasible_step_cap,
    finalize_weights,
    solve,
)
from roptd.model import DesignSpace, FactorSpec, ModelSpec, ResponseBasis, build_grid, correlation_from_covariance

import oracles
from problems import bundled, bundled_context, emax_solution, simple_linear, two_response_toy, weight_at


def test_simple_linear_matches_brute_force():
    model, space, cov = simple_linear()
    ctx = build_context(model, space, cov)
    rep = solve(ctx, space=space)
    assert rep.converged and rep.max_d <= 1e-8
    B = oracles.info_blocks([lambda x: [1.0, x[0]]], space.points, [[1.0]])
    w_bf, _ = oracles.brute_force_minimizer(B, step=1e-3, refine=(1e-4,))
    np.testing.assert_allclose(w_bf, [0.5, 0, 0.5], atol=1e-12)
    np.testing.assert_allclose(rep.weights, w_bf, atol=1e-6)
    assert [p for p, _ in rep.support] == [(-1.0,), (1.0,)]


def test_example1_table_weights():
    cfg, rep = bundled("example1.cfg")
    sp = cfg.space
    assert rep.converged and len(rep.support) == 9
    assert abs(weight_at(rep, sp, (0, 0)) - 0.1492) < 1e-3
    assert abs(weight_at(rep, sp, (1, 5)) - 0.1305) < 1e-3
    assert abs(weight_at(rep, sp, (0, 5)) - 0.0822) < 1e-3


def test_emax_table_weights():
    _, sp, rep = emax_solution()
    got = {p[0]: w for p, w in rep.support}
    assert sorted(got) == [1.0, 4.0, 100.0]
    for x, w in [(1.0, 0.2532), (4.0, 0.2138), (100.0, 0.5330)]:
        assert abs(got[x] - w) < 1e-3


def test_bfgs_two_point_matches_golden_section():
    sp = DesignSpace(np.array([[-1.0], [2.0]]))
    model = ModelSpec([ResponseBasis.monomial([(0,), (1,)])])
    ctx = build_context(model, sp, correlation_from_covariance([[1.0]]))
    t = 3.0
    res = bfgs_minimize(ctx, np.array([0.5]), t)
    ref = oracles.golden_section(lambda a: phi1(ctx, np.array([a]), t), 1e-9, 1 - 1e-9, tol=1e-13)
    assert abs(res.x[0] - ref) < 1e-8
    assert res.status == "gradient"


def test_bfgs_reaches_gradient_tolerance_example1():
    ctx = bundled_context("example1.cfg")
    opts = SolverOptions()
    res = bfgs_minimize(ctx, np.full(ctx.N - 1, 1 / ctx.N), 2.0, opts)
    assert res.status == "gradient"
    assert np.max(np.abs(res.grad)) <= opts.bfgs_grad_tol


@pytest.mark.slow
def test_warm_start_saves_iterations():
    ctx = bundled_context("example1.cfg")
    opts = SolverOptions(max_outer_iters=11)
    warm = solve(ctx, opts, warm_start=True)
    cold = solve(ctx, opts, warm_start=False)
    a = [s.inner_iters for s in warm.outer_trace[1:11]]
    b = [s.inner_iters for s in cold.outer_trace[1:11]]
    assert len(a) == len(b) == 10
    assert sum(x < y for x, y in zip(a, b)) >= 8


def test_step_cap_examples():
    assert feasible_step_cap([0.5], [-1.0]) == pytest.approx(0.495, abs=1e-15)
    assert feasible_step_cap([0.5], [1.0]) == pytest.approx(0.495, abs=1e-15)
    # tiny direction: the boundary is farther than the sentinel
    assert feasible_step_cap([0.3, 0.3], [1e-9, -1e-9]) == STEP_CAP_SENTINEL
    assert feasible_step_cap([0.3, 0.3], [1e-3, -1e-3]) == pytest.approx(0.99 * 300)
    # no coordinate (including the implicit one) decreases
    assert feasible_step_cap([0.3, 0.3], [1e-3, 0.0]) < STEP_CAP_SENTINEL
    assert feasible_step_cap([0.3, 0.3], [1e-3, -1e-3 - 1e-18]) > 0
    assert feasible_step_cap([0.2, 0.3], [0.0, 0.0]) == 0.0


def test_step_cap_keeps_feasibility():
    rng = np.random.default_rng(5)
    for _ in range(200):
        w = rng.dirichlet(np.ones(6))
        p = rng.normal(size=5)
        a = feasible_step_cap(w[:-1], p)
        if a < STEP_CAP_SENTINEL:
            x = w[:-1] + a * p
            assert np.all(x > 0) and 1 - x.sum() > 0


def test_solver_deterministic():
    model, space, cov = two_response_toy()
    ctx = build_context(model, space, cov)
    a, b = solve(ctx), solve(ctx)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert a.outer_trace == b.outer_trace


def test_report_invariants():
    cfg, rep = bundled("example1.cfg")
    thr = rep.options["support_threshold"]
    assert rep.converged == (rep.max_d <= rep.options["delta"])
    sw = [w for _, w in rep.support]
    assert min(sw) > thr and sum(sw) >= 1 - cfg.space.N * thr
    assert abs(rep.weights.sum() - 1) < 1e-14
    assert rep.outer_trace[0].t == 2.0
    assert all(b.t == 2 * a.t for a, b in zip(rep.outer_trace, rep.outer_trace[1:]))


def test_not_converged_flagged():
    model, space, cov = two_response_toy()
    ctx = build_context(model, space, cov)
    rep = solve(ctx, SolverOptions(max_outer_iters=3))
    assert not rep.converged and rep.max_d > 1e-8
    assert len(rep.outer_trace) == 3


def test_single_point_space():
    sp = DesignSpace(np.array([[1.0]]))
    model = ModelSpec([ResponseBasis.monomial([(0,)])])
    rep = solve(build_context(model, sp, correlation_from_covariance([[1.0]])), space=sp)
    assert rep.converged and rep.weights.tolist() == [1.0] and abs(rep.max_d) < 1e-12


def test_singular_problem_rejected():
    sp = build_grid([FactorSpec.continuous("x", 0, 1, 2)])
    model = ModelSpec([ResponseBasis.monomial([(0,), (1,), (2,)])])
    with pytest.raises(SingularInformationError):
        solve(build_context(model, sp, correlation_from_covariance([[1.0]])))


def test_finalize_weights():
    w = finalize_weights([0.5, 1e-16, 0.5 - 1e-16])
    assert w[1] == 0 and abs(w.sum() - 1) < 1e-15


@pytest.mark.parametrize("kw", [dict(t1=0), dict(lam=1.0), dict(delta=-1), dict(step_shrink=1.0),
                                dict(feasibility_margin=1.0), dict(bfgs_max_iters=0)])
def test_options_validation(kw):
    with pytest.raises(ValueError):
        SolverOptions(**kw)
