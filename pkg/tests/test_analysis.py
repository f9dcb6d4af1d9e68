import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import synthesized
from gkl import analysis, geometry
from gkl.analysis import (CheckResult, InconsistentNormError, bound_algebraic, bound_exponential,
                          check_abstract_product_inequality, check_improved_power_estimate,
                          check_residual_product_lemma, check_theorem_final, fit_loglog_slope,
                          geometric_mean_window, h_alpha, l1_error_segment, lower_bound_curves)
from gkl.greedy import SelectionRule, StopCriteria, run_greedy
from gkl.kernels import GAUSSIAN_W2, WENDLAND_K0, get_kernel
from gkl.trace import RunTrace, TraceFormatError, read_trace_csv, write_trace_csv

# frozen 30-digit mpmath values
BOUND_ALG_1_1_20 = 1.15162869580539074177
BOUND_EXP_1_8_1_2 = 0.191392993020821847921
BOUND_EXP_THIRD_1_2_8 = 1.34486941291126611083
L1_025_05_051 = 0.00146485711158618735394
H_1E6_051 = 0.161816835509681257747


def test_geometric_mean_window_examples():
    assert geometric_mean_window([0.3] * 9, 4) == pytest.approx(0.3, rel=1e-15)
    seq = [2.0**-i for i in range(10)]
    assert geometric_mean_window(seq, 1) == 0.25
    assert geometric_mean_window(seq, 2) == pytest.approx(2**-3.5, rel=1e-15)
    assert geometric_mean_window([1, 1, 1, 0, 1], 2) == 0.0
    with pytest.raises(ValueError):
        geometric_mean_window(seq[:4], 2)


def test_abstract_inequality_examples():
    ones = np.ones(5)
    r = check_abstract_product_inequality(ones, ones, ones, 0, 2, 1)
    assert r.lhs_log == 0.0 and r.rhs_log == pytest.approx(math.log(4)) and r.passed
    with pytest.raises(ValueError):
        check_abstract_product_inequality(ones, ones, ones, 0, 2, 2)


def test_abstract_inequality_with_finer_run_width():
    pts = geometry.sample_random(0, 400, 2).points
    fine = run_greedy(GAUSSIAN_W2, geometry.sample_random(9, 1500, 2).points, None,
                      SelectionRule.Beta(0), StopCriteria(60))
    coarse = run_greedy(GAUSSIAN_W2, pts, None, SelectionRule.Beta(0), StopCriteria(40))
    rng = np.random.default_rng(0)
    for _ in range(100):
        K = int(rng.integers(2, 38))
        N = int(rng.integers(0, 39 - K))
        m = int(rng.integers(1, K))
        assert check_abstract_product_inequality(coarse.nu, coarse.sigma, fine.sigma, N, K, m).passed


def test_bound_algebraic():
    assert bound_algebraic(10, 0, 1) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert bound_algebraic(20, 1, 1) == pytest.approx(BOUND_ALG_1_1_20, rel=1e-14)
    with pytest.raises(ValueError):
        bound_algebraic(2, 1, 1)


def test_bound_exponential():
    for n in (2, 10, 1000):
        assert bound_exponential(n, 0.7, 0, 1) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert bound_exponential(2, 1, 8, 1) == pytest.approx(BOUND_EXP_1_8_1_2, rel=1e-14)
    assert bound_exponential(8, 1 / 3, 1, 2) == pytest.approx(BOUND_EXP_THIRD_1_2_8, rel=1e-14)
    with pytest.raises(ValueError):
        bound_exponential(1, 1, 1, 1)


def test_bound_algebraic_dominates_synthetic_sequences():
    # nu_i <= sigma_i <= d-model, so the algebraic bound caps the window mean
    rng = np.random.default_rng(0)
    for alpha, C0 in [(0.5, 1.0), (1.0, 2.0), (2.0, 0.5)]:
        d = C0 * np.arange(1, 401, dtype=float) ** -alpha
        d[0] = 1.0
        nu = d * rng.uniform(0.0, 1.0, d.size) ** 0.1
        for n in range(3, 200):
            assert geometric_mean_window(nu, n) <= bound_algebraic(n, alpha, C0)


def test_fit_slope_examples():
    n = np.arange(1, 101, dtype=float)
    assert fit_loglog_slope(n, n**-2.0).slope == pytest.approx(-2.0, abs=1e-12)
    fit = fit_loglog_slope(n, 3 * n**-0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)
    wobble = n**-1.0 * (1 + 0.01 * (-1) ** n)
    assert -1.02 <= fit_loglog_slope(n, wobble, (10, 100)).slope <= -0.98


def test_fit_slope_skips_and_rejects():
    n = np.arange(1, 11, dtype=float)
    v = n**-1.0
    v[3] = 0.0
    fit = fit_loglog_slope(n, v)
    assert fit.n_skipped == 1 and fit.n_used == 9
    with pytest.raises(ValueError):
        fit_loglog_slope([1, 2, 3], [1.0, 0.0, -1.0])


def test_l1_error_segment_examples():
    assert l1_error_segment(0, 1, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert l1_error_segment(0, 1, 0.5) == pytest.approx(1 / 6, abs=1e-15)
    assert l1_error_segment(0.25, 0.5, 0.51) == pytest.approx(L1_025_05_051, abs=1e-15)
    with pytest.raises(ValueError):
        l1_error_segment(0.5, 0.5, 0.6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.99), st.floats(0.001, 1), st.floats(0.5001, 1.0))
def test_l1_error_segment_matches_quadrature(z1, width, alpha):
    z2 = min(z1 + width, 1.0)
    if z2 <= z1:
        return
    chord = lambda x: x**alpha - (z1**alpha + (z2**alpha - z1**alpha) * (x - z1) / (z2 - z1))
    ref, _ = quad(chord, z1, z2, epsabs=1e-14, epsrel=1e-13, limit=200)
    got = l1_error_segment(z1, z2, alpha)
    assert abs(got - ref) <= 1e-9
    assert got >= -1e-14


def test_h_alpha():
    assert abs(h_alpha(1 + 1e-6, 0.51)) < 1e-5
    assert h_alpha(1e6, 0.51) == pytest.approx(H_1E6_051, rel=1e-12)
    assert h_alpha(1e12, 0.51) == pytest.approx(1 / 1.51 - 0.5, abs=1e-5)
    with pytest.raises(ValueError):
        h_alpha(1.0, 0.51)
    ks = np.geomspace(1.5, 1e6, 2000)
    vals = np.array([h_alpha(k, 0.51) for k in ks])
    assert vals.min() == vals[0] and vals[0] > 0


def test_lower_bound_curves():
    assert lower_bound_curves(4, 0.5, "uniform") == 0.5
    assert lower_bound_curves(10, 0.3, "optimal") == pytest.approx(0.01, rel=1e-15)
    n = np.arange(10, 101)
    assert fit_loglog_slope(n, lower_bound_curves(n, 0.51)).slope == pytest.approx(-0.51, abs=1e-12)
    assert fit_loglog_slope(n, lower_bound_curves(n, 0.51, "optimal")).slope == pytest.approx(-2, abs=1e-12)
    with pytest.raises(ValueError):
        lower_bound_curves(3, 0.5, "median")


def _run(kernel, dim, rule, seed=0, count=150, max_points=60):
    model = get_kernel(kernel)
    pts = geometry.sample_random(seed, count, dim).points
    f, norm_sq = synthesized(model, pts, seed=seed + 11)
    return run_greedy(model, pts, f, rule, StopCriteria(max_points)), norm_sq


def test_lemma_exact_trace_passes_trivially():
    pts = np.linspace(0, 1, 11)[:, None]
    t = run_greedy(WENDLAND_K0, pts, pts[:, 0], SelectionRule.Beta(0), StopCriteria(10, 0, 0))
    r = check_residual_product_lemma(t, 1.0, 2)
    assert r.lhs_log == -math.inf and r.passed


@pytest.mark.parametrize("rule", [SelectionRule.Beta(0), SelectionRule.Beta(1),
                                  SelectionRule.Random(4)])
def test_lemma_holds_for_any_sequence(rule):
    t, norm_sq = _run("gaussian_w2", 3, rule)
    for n in range(1, min(20, (len(t) - 1) // 2) + 1):
        assert check_residual_product_lemma(t, norm_sq, n).passed


def test_improved_estimate_beta_one_identity():
    t, norm_sq = _run("gaussian_w2", 3, SelectionRule.Beta(1))
    ok = ~np.isnan(t.nu)
    assert np.allclose(t.max_residual[ok], t.residual_at_selected[ok], rtol=1e-15)
    assert check_improved_power_estimate(t, norm_sq, SelectionRule.Beta(1)).passed


@pytest.mark.parametrize("rule", [SelectionRule.Beta(0), SelectionRule.FOverP()])
def test_improved_estimate(rule):
    t, norm_sq = _run("wendland_k0", 1, rule, max_points=50)
    assert check_improved_power_estimate(t, norm_sq, rule).passed


def test_theorem_final_and_short_trace():
    t, norm_sq = _run("gaussian_w2", 3, SelectionRule.Beta(1))
    for n in range(1, 21):
        assert check_theorem_final(t, norm_sq, SelectionRule.Beta(1), n).passed
    t0, norm0 = _run("gaussian_w2", 3, SelectionRule.Beta(0))
    assert check_theorem_final(t0, norm0, SelectionRule.Beta(0), 5).passed
    with pytest.raises(ValueError):
        check_theorem_final(t, norm_sq, SelectionRule.Beta(1), len(t))


def test_inconsistent_norm_rejected():
    t, norm_sq = _run("gaussian_w2", 1, SelectionRule.Beta(1), max_points=10)
    with pytest.raises(InconsistentNormError):
        check_residual_product_lemma(t, 0.5 * float(np.nanmax(t.partial_native_norm)), 1)


def test_check_result_pass_flag():
    assert CheckResult("x", 1, 1.0, 1.0, 1e-10).passed
    assert not CheckResult("x", 1, 1.0 + 1e-6, 1.0, 1e-10).passed
    assert CheckResult("x", 1, 2.0 + 1e-10, 2.0, 1e-10).passed
    assert not CheckResult("x", 1, math.nan, 1.0, 1e-10).passed
    r = CheckResult("x", 1, 1.5, 1.0, 1e-10)
    assert r.violation == pytest.approx(0.5) and r.margin == pytest.approx(-0.5)


def test_nu_sigma_windows_agree_for_p_greedy():
    t = run_greedy(GAUSSIAN_W2, geometry.sample_random(0, 2000, 3).points, None,
                   SelectionRule.Beta(0), StopCriteria(61))
    assert np.array_equal(t.nu, t.sigma)
    for n in range(1, 31):
        assert geometric_mean_window(t.nu, n) == geometric_mean_window(t.sigma, n)


def test_run_checks_and_csv(tmp_path):
    t, norm_sq = _run("gaussian_w2", 1, SelectionRule.Beta(0.5), max_points=40)
    results = analysis.run_checks(t, norm_sq, SelectionRule.Beta(0.5))
    names = {r.name for r in results}
    assert names == {"abstract_product", "residual_product_lemma", "theorem_final",
                     "improved_power_estimate"}
    assert all(r.passed for r in results)
    text = analysis.write_checks_csv(results, tmp_path / "c.csv")
    assert text.splitlines()[0] == "check_name,n,lhs_log,rhs_log,margin,pass"
    assert (tmp_path / "c.csv").read_text() == text
    only_abstract = analysis.run_checks(t)
    assert {r.name for r in only_abstract} == {"abstract_product"}


def test_rate_report():
    t, norm_sq = _run("wendland_k0", 1, SelectionRule.Beta(1), count=300, max_points=80)
    rep = analysis.rate_report(t, "max_residual", (5, 60), norm_sq, SelectionRule.Beta(1),
                               bound={"alpha": 1.0, "C0": 1.0})
    assert rep.fit is not None and rep.fit.n_used > 3
    assert rep.all_passed
    assert rep.bound_curve[0].min() >= 3


def test_trace_csv_roundtrip(tmp_path):
    t, norm_sq = _run("gaussian_w2", 3, SelectionRule.FOverP(), max_points=15)
    t.meta["f_norm_sq"] = norm_sq
    text = write_trace_csv(t, tmp_path / "t.csv")
    header = [l for l in text.splitlines() if not l.startswith("#")][0]
    assert header == ("n,selected_index,x_1,x_2,x_3,nu,sigma,residual_at_selected,"
                      "max_residual,criterion_value,coefficient,partial_native_norm")
    back = read_trace_csv(tmp_path / "t.csv")
    assert back.meta["f_norm_sq"] == norm_sq and back.meta["rule"] == "beta=inf"
    for col in t.columns:
        assert np.array_equal(back.column(col), t.column(col), equal_nan=True)
    assert write_trace_csv(back) == text


@pytest.mark.parametrize("content", ["", "# a=1\n", "n,foo\n1,2\n",
                                     "n,selected_index,x_1,nu\n0,1,0.5,abc\n"])
def test_trace_csv_corrupt(tmp_path, content):
    p = tmp_path / "bad.csv"
    p.write_text(content)
    with pytest.raises(TraceFormatError):
        read_trace_csv(p)
