import math

import numpy as np
import pytest
from statsmodels.stats.proportion import proportion_confint

from bizsel.biz_core import BizParams, RunOutcome, run_biz
from bizsel.distributions import alternative_streams
from bizsel.harness import (
    McResult,
    ReplicationError,
    binomial_ci,
    estimate_pcs,
    log_grid,
    replicate,
    sweep_delta,
)
from bizsel.problem import ProblemConfig, ProblemFamily


def outcome(selected, samples=1):
    return RunOutcome(selected=selected, correct=False, total_samples=samples, stages=1)


def always_best(cfg, params, streams):
    return outcome(cfg.best, samples=7)


KNOWN2 = BizParams(k=2, p_star=0.9, delta=1.0, variances=(1.0, 1.0))
CFG2 = ProblemConfig.from_moments([0.0, 1.0], 1.0)


def test_stub_always_correct():
    res = estimate_pcs(CFG2, KNOWN2, 50, 1, procedure=always_best)
    assert (res.pcs, res.correct, res.reps) == (1.0, 50, 50)
    assert res.mean_total_samples == 7.0
    assert (res.ci_low, res.ci_high) == (1.0, 1.0)


def test_normal_interval_hand_value():
    low, high = binomial_ci(9000, 10000)
    assert (low, high) == pytest.approx((0.89412, 0.90588), abs=5e-6)


def test_ci_length_matches_binomial_arithmetic():
    low, high = binomial_ci(9000, 10000)
    assert high - low == pytest.approx(2 * 1.959964 * math.sqrt(0.09 / 1e4), rel=1e-6)
    assert high - low == pytest.approx(0.0118, abs=1e-4)
    assert high - low <= 0.014


def test_boundaries():
    assert binomial_ci(10, 10) == (1.0, 1.0)
    low, high = binomial_ci(10, 10, method="wilson")
    assert high == 1.0 and low < 1.0
    assert binomial_ci(0, 10, method="wilson")[0] == 0.0
    assert binomial_ci(0, 10) == (0.0, 0.0)


@pytest.mark.parametrize("correct,reps", [(0, 10), (3, 10), (9000, 10000), (57, 60), (1, 1000)])
@pytest.mark.parametrize("level", [0.9, 0.95, 0.99])
def test_intervals_match_statsmodels(correct, reps, level):
    for ours, theirs in (("normal", "normal"), ("wilson", "wilson")):
        want = proportion_confint(correct, reps, alpha=1 - level, method=theirs)
        want = (max(0.0, want[0]), min(1.0, want[1]))
        assert binomial_ci(correct, reps, level, ours) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("args", [(1, 0), (-1, 10), (11, 10)])
def test_invalid_ci_inputs(args):
    with pytest.raises(ValueError):
        binomial_ci(*args)


def test_invalid_ci_method():
    with pytest.raises(ValueError):
        binomial_ci(5, 10, method="exact")


def test_coverage_of_bernoulli_stub():
    rng = np.random.default_rng(99)
    covered = 0
    for _ in range(200):
        hits = rng.random(1000) < 0.9
        res = replicate(lambda i: outcome(int(hits[i])), 1000, best=1)
        covered += res.ci_low <= 0.9 <= res.ci_high
    assert 180 <= covered <= 198


def test_correct_counts_selected_equal_best():
    cfg = ProblemConfig.from_moments([0.0, 0.2, 0.1], 1.0)
    assert cfg.best == 1
    picks = [0, 1, 2, 1, 1, 0]
    res = replicate(lambda i: outcome(picks[i]), len(picks), best=cfg.best)
    assert res.correct == 3 and res.pcs == 0.5


def test_correct_accounting_against_direct_runs():
    fam = ProblemFamily.slippage([1.0, 0.5, 2.0])
    cfg = fam.at(0.3)
    p = BizParams(k=3, p_star=0.9, delta=0.3, variances=fam.variances)
    res = estimate_pcs(cfg, p, 100, 17)
    direct = [run_biz(cfg, p, alternative_streams(17, 3, i)) for i in range(100)]
    assert res.correct == sum(o.selected == cfg.best for o in direct)
    assert res.mean_total_samples == sum(o.total_samples for o in direct) / 100


@pytest.mark.parametrize("workers", [1, 4, 16])
def test_worker_count_does_not_change_result(workers):
    fam = ProblemFamily.slippage([1.0, 1.0, 1.0])
    p = BizParams(k=3, p_star=0.9, delta=0.5, variances=fam.variances)
    ref = estimate_pcs(fam.at(0.5), p, 300, 3, workers=1)
    assert estimate_pcs(fam.at(0.5), p, 300, 3, workers=workers) == ref


def test_errors_carry_replication_index():
    def flaky(cfg, params, streams):
        if streams[0].key[-2] == 13:
            raise ArithmeticError("boom")
        return always_best(cfg, params, streams)

    for workers in (1, 4):
        with pytest.raises(ReplicationError) as info:
            estimate_pcs(CFG2, KNOWN2, 40, 1, procedure=flaky, workers=workers)
        assert info.value.index == 13
        assert isinstance(info.value.__cause__, ArithmeticError)


def test_reps_must_be_positive():
    with pytest.raises(ValueError):
        estimate_pcs(CFG2, KNOWN2, 0, 1, procedure=always_best)


def test_result_invariants():
    fam = ProblemFamily.slippage([1.0, 1.0])
    res = estimate_pcs(fam.at(0.5), KNOWN2.with_delta(0.5), 200, 2)
    assert isinstance(res, McResult)
    assert 0 <= res.correct <= res.reps and res.pcs == res.correct / res.reps
    assert res.ci_low <= res.pcs <= res.ci_high


def test_log_grid_endpoints():
    g = log_grid()
    assert len(g) == 20 and g[0] == pytest.approx(10.0) and g[-1] == pytest.approx(0.1)
    assert all(a > b for a, b in zip(g, g[1:]))


def test_single_point_sweep_is_estimate_pcs():
    fam = ProblemFamily.slippage([1.0, 2.0, 0.5])
    p = BizParams(k=3, p_star=0.9, delta=1.0, variances=fam.variances)
    [(delta, res)] = sweep_delta(fam, [0.7], p, 150, 4)
    assert delta == 0.7
    assert res == estimate_pcs(fam.at(0.7), p.with_delta(0.7), 150, 4, key=(0,))


@pytest.mark.parametrize("grid", [[], [1.0, -1.0], [1.0, 2.0, 1.5], [1.0, 1.0]])
def test_sweep_rejects_bad_grids(grid):
    fam = ProblemFamily.slippage([1.0, 1.0])
    with pytest.raises(ValueError):
        sweep_delta(fam, grid, KNOWN2, 10, 1)


def test_sweep_uses_delta_scaled_means_and_fixed_variances():
    fam = ProblemFamily.slippage([1.0, 3.0])
    seen = []

    def spy(cfg, params, streams):
        seen.append((tuple(cfg.means), tuple(cfg.variances), params.delta))
        return always_best(cfg, params, streams)

    sweep_delta(fam, [2.0, 0.5], BizParams(k=2, p_star=0.9, delta=1.0, variances=(1.0, 3.0)), 1, 0, procedure=spy)
    assert seen == [((0.0, 2.0), (1.0, 3.0), 2.0), ((0.0, 0.5), (1.0, 3.0), 0.5)]


def test_two_alternative_trend_toward_target():
    fam = ProblemFamily.slippage([1.0, 1.0])
    grid = log_grid(0.1, 10.0, 6)
    rows = sweep_delta(fam, grid, KNOWN2, 3000, 31)
    pcs = [r.pcs for _, r in rows]
    hw = [r.half_width for _, r in rows]
    for j in range(1, len(rows)):
        # non-increasing as delta shrinks, within 2 half-widths
        assert pcs[j] <= pcs[j - 1] + 2 * max(hw[j], hw[j - 1])
    for p, h in zip(pcs, hw):
        assert p >= 0.9 - 2 * h
