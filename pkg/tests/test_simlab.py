import io
import math

import mpmath
import numpy as np
import pytest
from scipy import stats

from privatebhq import simlab
from privatebhq.errors import ParameterError
from privatebhq.procedures import bhq_cutoffs, is_compliant
from privatebhq.simlab import (
    ExperimentConfig,
    adversarial_compliant,
    gen_block_example,
    gen_normal_example,
    gen_student_example,
    normal_example_covariance,
    normal_example_sqrt,
    run_experiment,
    t_pvalues,
    t_statistics,
    z_pvalues,
)


@pytest.mark.parametrize("m,m1", [(10, 3), (7, 1), (12, 6), (40, 39)])
def test_covariance_square_root_identity(m, m1):
    S = normal_example_sqrt(m, m1)
    np.testing.assert_allclose(S @ S, normal_example_covariance(m, m1), atol=1e-12)
    np.testing.assert_allclose(S, S.T, atol=0)


def test_covariance_cross_block_value():
    cov = normal_example_covariance(10, 3)
    assert cov[0, 5] == pytest.approx(-1 / math.sqrt(21))
    assert cov[0, 1] == 0 and cov[4, 5] == 0 and cov[4, 4] == 1


def test_covariance_is_singular_psd():
    w = np.linalg.eigvalsh(normal_example_covariance(10, 3))
    assert w.min() == pytest.approx(0, abs=1e-12) and w.max() == pytest.approx(2)


def test_normal_example_empirical_covariance():
    x, is_null = gen_normal_example(20, 5, 0.0, np.random.default_rng(0), size=100_000)
    assert np.abs(np.cov(x, rowvar=False) - normal_example_covariance(20, 5)).max() <= 0.02
    assert is_null.tolist() == [False] * 5 + [True] * 15


def test_normal_example_mean_and_sampler_matches_dense_sqrt():
    rng = np.random.default_rng(1)
    x, _ = gen_normal_example(10, 3, 2.0, rng)
    z = np.random.default_rng(1).standard_normal((1, 10))
    want = z[0] @ normal_example_sqrt(10, 3) + np.r_[np.full(3, 2.0), np.zeros(7)]
    np.testing.assert_allclose(x, want, atol=1e-12)


def test_normal_example_degenerate_split():
    rng = np.random.default_rng(0)
    for m1 in (0, 10):
        with pytest.raises(ParameterError):
            gen_normal_example(10, m1, 2.0, rng)


def test_t_statistic_example():
    t = t_statistics(np.array([[1.0], [2.0], [3.0]]))
    assert t[0] == pytest.approx(math.sqrt(3) * 2, rel=1e-14)
    assert t[0] == pytest.approx(3.4641, abs=1e-4)


def test_t_statistics_match_scipy():
    obs = np.random.default_rng(2).normal(size=(10, 30))
    np.testing.assert_allclose(t_statistics(obs), stats.ttest_1samp(obs, 0.0).statistic, rtol=1e-12)


def test_t_pvalues_examples():
    p, bad = t_pvalues([0.0], 9)
    assert p[0] == 0.5 and bad == 0
    p, _ = t_pvalues([2.0, -2.0], 9, "two-sided")
    assert p[0] == p[1] == pytest.approx(2 * stats.t.sf(2.0, 9), rel=1e-12)


def test_t_pvalues_against_mpmath():
    for df in (3, 9):
        for t in (0.3, 1.5, 4.0, 9.0):
            with mpmath.workdps(40):
                x = df / (df + t * t)
                want = float(mpmath.betainc(df / 2, 0.5, 0, x, regularized=True) / 2)
            assert t_pvalues([t], df)[0][0] == pytest.approx(want, rel=1e-10)


def test_t_pvalues_zero_variance_counter():
    obs = np.ones((10, 3))
    obs[:, 1] = np.arange(10)
    p, bad = t_pvalues(t_statistics(obs), 9, nu=1e-4)
    assert bad == 2 and p[0] == 1e-4 and p[2] == 1e-4


def test_z_pvalues_examples():
    assert z_pvalues(0.0) == 0.5
    assert z_pvalues(1.6449) == pytest.approx(0.05, abs=1e-4)
    np.testing.assert_array_equal(z_pvalues([1.3], "two"), z_pvalues([-1.3], "two-sided"))
    with pytest.raises(ParameterError):
        z_pvalues([1.0], "left")


def test_z_pvalues_against_mpmath():
    for x in np.linspace(-8, 8, 33):
        with mpmath.workdps(40):
            want = float(mpmath.ncdf(-x))
        assert z_pvalues(x) == pytest.approx(want, rel=1e-12)


def test_block_example_rho_minus_one():
    x, is_null = gen_block_example(1000, 1.5, -1.0, np.random.default_rng(3))
    np.testing.assert_allclose(x[:1000] - 1.5, -x[1000:], atol=1e-15)
    assert is_null.mean() == 0.5 and not is_null[:1000].any()


@pytest.mark.parametrize("rho", [-0.7, -0.1])
def test_block_example_correlation(rho):
    x, _ = gen_block_example(100_000, 1.5, rho, np.random.default_rng(4))
    assert np.corrcoef(x[:100_000], x[100_000:])[0, 1] == pytest.approx(rho, abs=0.01)
    with pytest.raises(ParameterError):
        gen_block_example(5, 1.5, -1.2, np.random.default_rng(4))


def test_null_pvalues_are_uniform():
    rng = np.random.default_rng(5)
    pools = {"normal": [], "student": [], "block": []}
    for _ in range(40):
        x, nul = gen_normal_example(200, 50, 2.0, rng)
        pools["normal"].append(z_pvalues(x[nul], "two-sided"))
        t, nul = gen_student_example(200, 50, 2.0, 10, rng)
        pools["student"].append(t_pvalues(t[nul], 9)[0])
        x, nul = gen_block_example(200, 1.5, -0.4, rng)
        pools["block"].append(z_pvalues(x[nul]))
    for name, chunks in pools.items():
        p = np.concatenate(chunks)
        # Rejecting only below the 1% level.
        assert stats.kstest(p, "uniform").pvalue > 0.01, name


def test_adversarial_draw_is_compliant_and_matches_formula():
    rng = np.random.default_rng(6)
    m, m0, q = 100_000, 300, 0.05
    seen = 0
    for _ in range(300):
        d = adversarial_compliant(m, m0, 2, q, rng)
        if not d.feasible:
            continue
        seen += 1
        assert d.record.V == d.j_star
        assert d.record.R == max(math.ceil(m * d.u_star / q), d.j_star)
        assert d.record.R <= m
    assert seen > 100


def test_adversarial_rejections_pass_is_compliant_directly():
    # Rebuild the full p-value vector for a small case and check with the
    # public compliance check against all m BHq cutoffs.
    m, m0, q = 2000, 20, 0.1
    for seed in range(50):
        rng = np.random.default_rng(seed)
        u = np.random.default_rng(seed).random(m0)
        d = adversarial_compliant(m, m0, 2, q, rng)
        if not d.feasible:
            continue
        order = np.argsort(u)
        zeros = d.record.R - d.j_star
        p = np.concatenate([u, np.zeros(m - m0)])
        rej = np.concatenate([order[: d.j_star], m0 + np.arange(zeros)])
        rs = simlab.RejectionSet(rej, m, V=d.j_star)
        assert is_compliant(rs, p, bhq_cutoffs(q, m))


def test_adversarial_infeasible_when_few_false_nulls():
    # Ten false nulls cover U_(j*) only up to about 0.01.
    draws = [adversarial_compliant(110, 100, 2, 0.1, np.random.default_rng(s)) for s in range(50)]
    assert sum(not d.feasible for d in draws) > 25
    assert all(d.u_star > 0.01 for d in draws if not d.feasible)


def test_adversarial_argument_checks():
    rng = np.random.default_rng(0)
    with pytest.raises(ParameterError):
        adversarial_compliant(10, 10, 2, 0.1, rng)
    with pytest.raises(ParameterError):
        adversarial_compliant(10, 5, 1, 0.1, rng)


def test_experiment_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig("normal", m=100, m1_values=(0,))
    with pytest.raises(ParameterError):
        ExperimentConfig("cauchy")
    with pytest.raises(ParameterError):
        ExperimentConfig("block", rhos=(-1.5,))
    with pytest.raises(ParameterError):
        ExperimentConfig("adversarial", ks=(1, 2))


def test_run_experiment_deterministic_pvalues_give_zero_se(monkeypatch):
    def fixed(m, m1, mu, rng, size=None):
        x = np.zeros(m)
        x[:m1] = 5.0
        x[m1] = 3.5  # one null that is always rejected
        return x, simlab._labels(m, m1)

    monkeypatch.setattr(simlab, "gen_normal_example", fixed)
    cfg = ExperimentConfig("normal", m=100, m1_values=(10,), reps=7, alternatives=("one-sided",))
    res = run_experiment(cfg)
    row = res.get(10.0, "one-sided", 1)
    assert row.stderr == 0.0 and row.fdr_hat == pytest.approx(1 / 11)
    assert res.get(10.0, "one-sided", 2).fdr_hat == 0.0


def test_run_experiment_rows_and_thread_independence():
    cfg = ExperimentConfig("normal", m=200, m1_values=(20, 60), reps=20, seed=11)
    a, b = run_experiment(cfg), run_experiment(cfg, threads=3)
    fa, fb = io.StringIO(), io.StringIO()
    a.write_csv(fa)
    b.write_csv(fb)
    assert fa.getvalue() == fb.getvalue()
    assert len(a.rows) == 2 * 2 * 3
    for point in (20.0, 60.0):
        for alt in ("one-sided", "two-sided"):
            f = [a.get(point, alt, k).fdr_hat for k in (1, 2, 5)]
            assert f[0] >= f[1] >= f[2]


def test_run_experiment_adversarial_counts_infeasible():
    cfg = ExperimentConfig("adversarial", m=1000, m1_values=(10,), q=0.1, reps=30, ks=(2,), seed=1)
    res = run_experiment(cfg)
    assert res.infeasible.get(10.0, 0) > 0
    assert res.rows[0].alternative == "na"


@pytest.mark.slow
def test_adversarial_attains_c2_when_false_nulls_are_plentiful():
    # With m - m0 = 99 m0 almost every draw is feasible (about 5% are not),
    # so the feasible-only mean of FDP_2 / (pi0 q) should sit near C_2.
    from privatebhq.fdr import ck_table

    m, m0, q = 5_000_000, 50_000, 0.01
    vals = []
    for ss in np.random.SeedSequence(42).spawn(5000):
        d = adversarial_compliant(m, m0, 2, q, np.random.default_rng(ss))
        if d.feasible:
            vals.append(d.record.fdp_k(2) / (m0 / m * q))
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    ref = ck_table()[2]
    assert vals.size > 4500
    assert abs(vals.mean() - ref.mean) <= 3 * math.hypot(se, ref.std_error)
