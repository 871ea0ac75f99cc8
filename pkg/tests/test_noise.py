import numpy as np
import pytest

from adswitch.noise import NoiseSpec, make_rng, perturb_gradient, run_seed, run_study
from adswitch.problems import builtin
from adswitch.solver import SolverConfig, solve

STUDY_CFG = SolverConfig(epsilon=1e-3, accept_rule=True)


def test_level_zero_is_exact():
    g = np.array([1.5, -2.25, 1e-300])
    out = perturb_gradient(g, NoiseSpec(0.0), make_rng(1))
    assert np.array_equal(out, g)


def test_zero_gradient_stays_zero():
    assert np.array_equal(perturb_gradient(np.zeros(4), NoiseSpec(0.5), make_rng(1)), np.zeros(4))


def test_negative_level_rejected():
    with pytest.raises(ValueError):
        NoiseSpec(-0.1)


def test_monte_carlo_moments():
    g = np.array([2.0, -0.5, 10.0])
    rng = make_rng(123)
    draws = np.array([perturb_gradient(g, NoiseSpec(0.5), rng) for _ in range(100_000)])
    n = draws.shape[0]
    np.testing.assert_array_less(np.abs(draws.mean(axis=0) - g), 3 * 0.5 * np.abs(g) / np.sqrt(n))
    np.testing.assert_allclose(draws.std(axis=0), 0.5 * np.abs(g), rtol=0.05)


def test_streams_are_independent_by_key():
    a = np.random.Generator(np.random.Philox(run_seed(7, 0, 0, 0))).standard_normal(5)
    b = np.random.Generator(np.random.Philox(run_seed(7, 0, 0, 1))).standard_normal(5)
    a2 = np.random.Generator(np.random.Philox(run_seed(7, 0, 0, 0))).standard_normal(5)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, a2)


def test_level_zero_study_is_deterministic():
    s = run_study([builtin("HS8")], [0.0], 10, STUDY_CFG, seed=3)
    c = s.cells[0]
    assert c.successes == 10
    assert len({o.iterations for o in c.outcomes}) == 1


def test_level_zero_matches_noiseless():
    p = builtin("BT1")
    s = run_study([p], [0.0], 3, STUDY_CFG, seed=11)
    ref = solve(p, STUDY_CFG)
    for o in s.cells[0].outcomes:
        assert o.iterations == ref.status.k_final
        assert o.gT_norm == ref.status.gT_norm and o.c_norm == ref.status.c_norm


def test_study_reproducible():
    probs = [builtin("MARATOS"), builtin("HS6")]
    a = run_study(probs, [0.25], 3, STUDY_CFG, seed=5)
    b = run_study(probs, [0.25], 3, STUDY_CFG, seed=5)
    assert a.to_dict() == b.to_dict()


def test_parallel_matches_serial():
    probs = [builtin("MARATOS"), builtin("BT1")]
    a = run_study(probs, [0.05, 0.5], 3, STUDY_CFG, seed=9)
    b = run_study(probs, [0.05, 0.5], 3, STUDY_CFG, seed=9, workers=4)
    assert a.to_dict() == b.to_dict()


def test_changing_runs_only_adds_streams():
    p = [builtin("MARATOS")]
    a = run_study(p, [0.5], 2, STUDY_CFG, seed=1)
    b = run_study(p, [0.5], 3, STUDY_CFG, seed=1)
    assert a.cells[0].outcomes == b.cells[0].outcomes[:2]


def test_summary_statistics():
    p = builtin("MARATOS")
    s = run_study([p], [0.15], 4, STUDY_CFG, seed=2)
    c = s.cell("MARATOS", 0.15)
    ok = [o for o in c.outcomes if o.success]
    assert 0 <= c.successes <= c.runs
    assert c.avg_iterations == pytest.approx(np.mean([o.iterations for o in ok]))
    assert c.avg_f == pytest.approx(np.mean([o.f for o in ok]))


def test_hs8_noise50():
    s = run_study([builtin("HS8")], [0.5], 10, STUDY_CFG, seed=0)
    assert s.cells[0].successes == 10


def test_reliability_and_exports(tmp_path):
    s = run_study([builtin("HS8"), builtin("MARATOS")], [0.05, 0.5], 2, STUDY_CFG, seed=0)
    rel = s.reliability()
    assert [r[0] for r in rel] == [0.05, 0.5]
    for level, fail, ok in rel:
        assert fail + ok <= 2
    path = s.write_level_csv(0.5, tmp_path / "lvl.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "problem,n,m,avg_f,avg_gT_norm,avg_c_norm,avg_its,successes"
    assert len(lines) == 3
    s.write_json(tmp_path / "s.json")


def test_runs_must_be_positive():
    with pytest.raises(ValueError):
        run_study([builtin("HS8")], [0.0], 0)
