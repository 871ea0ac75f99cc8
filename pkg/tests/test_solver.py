import math

import numpy as np
import pytest

from adswitch import kkt
from adswitch.problems import ProblemInstance, builtin, eval_objective
from adswitch.solver import (
    Measures,
    NormalStepStalled,
    SolverConfig,
    SolverState,
    adagrad_update,
    check_termination,
    normal_step,
    should_take_tangential,
    solve,
    tangential_step,
)


class TestAdagrad:
    def test_zero_gradient(self):
        gp, a = adagrad_update(0.0, np.zeros(3), 1.0, 1e-5)
        assert gp == 0.0
        assert a == pytest.approx(316.22776601683796, rel=1e-15)

    def test_unit_gradient(self):
        gp, a = adagrad_update(0.0, np.array([1.0, 0.0]), 1.0, 1e-5)
        assert gp == 1.0
        assert a == 1.0 / math.sqrt(1.0 + 1e-5)

    def test_recursion_closed_form(self):
        gamma = 0.0
        for k in range(1, 200):
            gamma, a = adagrad_update(gamma, np.array([0.6, 0.8]), 1.0, 1e-5)
            assert a == pytest.approx(1.0 / math.sqrt(k + 1e-5), rel=1e-13)
            assert a <= 1.0 / math.sqrt(1e-5)


class TestSwitch:
    def test_feasible_point_is_tangential(self):
        assert should_take_tangential(0.0, 0.3, 5.0, 0.01)
        assert should_take_tangential(0.0, 0.3, 0.0, 0.01)

    def test_zero_projected_gradient_is_normal(self):
        assert not should_take_tangential(1e-12, 0.3, 0.0, 0.01)

    def test_arithmetic(self):
        # 1e-3 <= 0.01 * 0.5 * 0.1 = 5e-4 is false
        assert not should_take_tangential(1e-3, 0.5, 0.1, 0.01)
        assert should_take_tangential(4e-4, 0.5, 0.1, 0.01)


class TestTangentialStep:
    def test_zero_gradient_keeps_state(self):
        s = SolverState(x=np.array([1.0, 2.0]), gamma=0.5)
        gp, a = adagrad_update(s.gamma, np.zeros(2), 1.0, 1e-5)
        new = tangential_step(s, np.zeros(2), gp, a)
        np.testing.assert_array_equal(new.x, s.x)
        assert new.gamma == 0.5 and new.k == 1 and new.n_tangential == 1

    def test_step_length(self):
        s = SolverState(x=np.zeros(2))
        g = np.array([1.0, 0.0])
        gp, a = adagrad_update(0.0, g, 1.0, 1e-5)
        new = tangential_step(s, g, gp, a)
        np.testing.assert_array_equal(new.x, [-1.0 / math.sqrt(1.0 + 1e-5), 0.0])
        assert new.gamma == 1.0

    def test_nonfinite(self):
        s = SolverState(x=np.zeros(2))
        with pytest.raises(FloatingPointError):
            tangential_step(s, np.array([np.inf, 0.0]), 1.0, 1.0)

    def test_first_step_on_sphere_is_tangential(self):
        r = solve(builtin("SPHERE-LIN"))
        assert r.history[0].c_norm == 0.0
        assert r.history[0].step_type == "tangential"


def _identity_problem(n=3):
    return lambda x: np.array(x, dtype=float)


class TestNormalStep:
    def test_affine_constraints_exact(self):
        p = builtin("QUAD-PLANE")
        cfg = SolverConfig(delta=0.0)
        x = np.array([3.0, -1.0, 0.5, 2.0, 7.0])
        c = p.constraints(x)
        new = normal_step(SolverState(x=x), c, kkt.factorize(p.jacobian(x)), p.constraints, cfg)
        assert new.backtracks == 0
        assert np.linalg.norm(p.constraints(new.x)) <= 1e-10
        assert new.gamma == 0.0 and new.n_normal == 1 and new.k == 1

    def test_identity_jacobian(self):
        x = np.array([0.3, -2.0, 1.5])
        new = normal_step(SolverState(x=x), x.copy(), kkt.factorize(np.eye(3)), _identity_problem(), SolverConfig(delta=0.0))
        np.testing.assert_allclose(new.x, 0.0, atol=1e-15)

    def test_sphere_arithmetic(self):
        p = builtin("SPHERE-LIN")
        x = np.array([2.0, 0.0])
        c = p.constraints(x)
        assert c[0] == 3.0
        f = kkt.factorize(p.jacobian(x))
        d = kkt.normal_direction(f, c, 1e-5)
        np.testing.assert_allclose(d, [-0.75, 0.0], atol=1e-6)
        np.testing.assert_allclose(d, [-12.0 / (16.0 + 1e-5), 0.0], rtol=1e-14)
        new = normal_step(SolverState(x=x), c, f, p.constraints, SolverConfig())
        assert abs(p.constraints(new.x)[0]) < 3.0

    def test_trust_region_cap(self):
        # c(x) = 1e-3 x: the Gauss-Newton step is 1000 ||c|| long
        c_fun = lambda x: 1e-3 * x  # noqa: E731
        x = np.array([3.0, -4.0])
        c = c_fun(x)
        f = kkt.factorize(1e-3 * np.eye(2))
        assert np.linalg.norm(kkt.normal_direction(f, c, 0.0)) == pytest.approx(1000 * np.linalg.norm(c))
        new = normal_step(SolverState(x=x), c, f, c_fun, SolverConfig(theta=2.0, delta=0.0))
        assert new.backtracks == 0
        assert np.linalg.norm(new.x - x) == pytest.approx(2.0 * np.linalg.norm(c), rel=1e-12)

    def test_stalls_on_infeasible_critical_point(self):
        # c(x) = x^2 + 1 has J^T c = 0 at x = 0
        c_fun = lambda x: np.array([x[0] ** 2 + 1.0])  # noqa: E731
        x = np.array([0.0, 0.0])
        f = kkt.factorize(np.array([[0.0, 0.0]]))
        with pytest.raises(NormalStepStalled):
            normal_step(SolverState(x=x), c_fun(x), f, c_fun, SolverConfig())

    def test_stalls_without_decrease(self):
        # direction looks like descent but c does not decrease along it
        x = np.array([1.0, 0.0])
        c_fun = lambda y: np.array([1.0 + abs(y[0] - 1.0)])  # noqa: E731
        f = kkt.factorize(np.array([[1.0, 0.0]]))
        with pytest.raises(NormalStepStalled):
            normal_step(SolverState(x=x), c_fun(x), f, c_fun, SolverConfig(max_backtracks=5))


class TestTermination:
    cfg = SolverConfig(epsilon=1e-5)

    def test_converged(self):
        st = check_termination(Measures(5e-6, 8e-8, 1.0), 3, self.cfg)
        assert st.kind == "Converged" and st.exitc == "convg" and st.k_final == 3

    def test_infeasible(self):
        st = check_termination(Measures(3.0, 0.5, 1e-6), 2, self.cfg)
        assert st.kind == "InfeasibleStationary" and st.exitc == "infeas"

    def test_accepted(self):
        calls = []

        def f():
            calls.append(1)
            return -1.0 * (1 + 1e-8)

        st = check_termination(Measures(1.0, 1e-6, 1.0), 7, self.cfg, f_star=-1.0, objective=f)
        assert st.kind == "AcceptedOptimal" and st.f == pytest.approx(-1.0)
        assert len(calls) == 1

    def test_accept_near_zero_fstar(self):
        st = check_termination(Measures(1.0, 1e-6, 1.0), 7, self.cfg, f_star=0.0, objective=lambda: 5e-8)
        assert st.kind == "AcceptedOptimal"
        assert check_termination(Measures(1.0, 1e-6, 1.0), 7, self.cfg, f_star=0.0, objective=lambda: 2e-7) is None

    def test_objective_only_when_nearly_feasible(self):
        def boom():
            raise AssertionError("objective evaluated")

        assert check_termination(Measures(1.0, 1e-2, 1.0), 1, self.cfg, f_star=-1.0, objective=boom) is None

    def test_maxit_and_continue(self):
        assert check_termination(Measures(1.0, 1.0, 1.0), 100_000, SolverConfig()).kind == "MaxIterations"
        assert check_termination(Measures(1.0, 1.0, 1.0), 99_999, SolverConfig()) is None

    def test_converged_has_priority(self):
        st = check_termination(Measures(1e-6, 1e-6, 1e-9), 10**6, self.cfg)
        assert st.kind == "Converged"


class TestConfig:
    @pytest.mark.parametrize(
        "bad",
        [dict(beta=0.0), dict(beta=1.5), dict(eta=0.0), dict(varsigma=2.0), dict(theta=1.0),
         dict(epsilon=1.0), dict(delta=-1.0), dict(omega=0.0), dict(rho_diag=-1.0)],
    )
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            SolverConfig(**bad)

    def test_defaults(self):
        c = SolverConfig()
        assert (c.beta, c.eta, c.theta, c.delta, c.varsigma, c.omega) == (0.01, 1.0, 1000.0, 1e-5, 1e-5, 1.0)
        assert (c.epsilon, c.max_iter) == (1e-5, 100_000)


class TestSolve:
    def test_hs8(self):
        r = solve(builtin("HS8"))
        assert r.status.kind == "Converged"
        assert r.status.k_final <= 10
        assert eval_objective(builtin("HS8"), r.x_final) == pytest.approx(-1.0, abs=1e-5)

    def test_maratos(self):
        p = builtin("MARATOS")
        r = solve(p)
        assert r.status.kind == "Converged"
        assert eval_objective(p, r.x_final) == pytest.approx(-1.0, abs=1e-5)

    def test_quad_plane(self):
        p = builtin("QUAD-PLANE")
        r = solve(p)
        assert r.status.kind == "Converged"
        np.testing.assert_allclose(r.x_final, [0.5, 0.5, 0.5, 0.5, 2.0], atol=1e-4)

    def test_hs61_infeasible(self):
        r = solve(builtin("HS61"))
        assert r.status.kind == "InfeasibleStationary"
        assert r.status.c_norm > 1e-5

    def test_accept_rule(self):
        p = builtin("MARATOS")
        r = solve(p, SolverConfig(accept_rule=True))
        assert r.status.kind in ("AcceptedOptimal", "Converged")
        assert r.objective_evals > 0
        assert solve(p).objective_evals == 0

    def test_max_iter(self):
        r = solve(builtin("HS8"), SolverConfig(max_iter=1))
        assert r.status.kind == "MaxIterations" and r.status.k_final == 1
        assert len(r.history) == 2

    def test_numerical_failure(self):
        p = builtin("HS6")
        bad = p.with_overrides(gradient=lambda x: np.array([np.nan, 0.0]))
        r = solve(bad)
        assert r.status.kind == "NumericalFailure"
        assert not r.status.success

    def test_custom_start(self):
        r = solve(builtin("SPHERE-LIN", 3), x0=[0.0, 0.0, 2.0])
        assert r.status.kind == "Converged"
        with pytest.raises(ValueError):
            solve(builtin("SPHERE-LIN", 3), x0=[0.0, 2.0])

    def test_diagnostics_records_objective_and_psi(self):
        r = solve(builtin("QUAD-PLANE"), SolverConfig(diagnostics=True, rho_diag=10.0))
        assert all(rec.f is not None and rec.psi is not None for rec in r.history)
        assert r.status.f == pytest.approx(4.5, abs=1e-4)


INVARIANT_PROBLEMS = ["HS6", "HS7", "HS8", "BT1", "BT2", "MARATOS", "BYRDSPHR", "HS40", "HS77", "SPHERE-LIN", "QUAD-PLANE"]


@pytest.mark.parametrize("name", INVARIANT_PROBLEMS)
def test_run_invariants(name):
    p = builtin(name)
    cfg = SolverConfig()
    r = solve(p, cfg, keep_iterates=True)
    h = r.history
    assert len(h) == r.status.k_final + 1
    steps = [rec.step_type for rec in h[:-1]]
    assert set(steps) <= {"tangential", "normal"}
    assert h[-1].step_type is None
    n_t = steps.count("tangential")
    assert n_t + steps.count("normal") == r.status.k_final

    # Gamma: frozen across normal steps, strictly grows on tangential steps with g_T != 0
    committed = 0.0
    alphas = []
    for rec in h[:-1]:
        assert rec.gamma == pytest.approx(committed + rec.gT_norm**2, rel=1e-12, abs=0)
        if rec.step_type == "tangential":
            if rec.gT_norm > 0:
                assert rec.gamma > committed
            committed = rec.gamma
            alphas.append(rec.alpha_T)
    assert all(a2 <= a1 for a1, a2 in zip(alphas, alphas[1:]))
    assert all(a <= cfg.eta / math.sqrt(cfg.varsigma) for a in alphas)

    for i, rec in enumerate(h[:-1]):
        (x0, J), (x1, _) = r.iterates[i], r.iterates[i + 1]
        s = x1 - x0
        if rec.step_type == "tangential":
            # second term: rounding of x_{k+1} itself, which J @ (x1 - x0) cannot see past
            tol = 1e-10 * np.linalg.norm(J) * np.linalg.norm(s) + 4 * np.finfo(float).eps * np.linalg.norm(J) * np.linalg.norm(x1)
            assert np.linalg.norm(J @ s) <= tol
        else:
            assert h[i + 1].c_norm < rec.c_norm
            assert np.linalg.norm(s) <= cfg.theta * rec.c_norm * (1 + 1e-14)

    assert r.audits_passed(), {k: a for k, a in r.audit.items() if not a.passed}


def test_solver_never_calls_objective():
    p = builtin("HS8").with_overrides(f_star=None)
    calls = []

    def counted(x):
        calls.append(1)
        return p.objective(x)

    r = solve(p.with_overrides(objective=counted), SolverConfig(accept_rule=True))
    assert r.status.kind == "Converged"
    assert calls == [] and r.objective_evals == 0
