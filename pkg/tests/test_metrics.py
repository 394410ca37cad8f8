import random
from fractions import Fraction

import pytest

from twinforge.metrics import (
    InconsistentM,
    compute_metrics,
    distribution_summary,
    eval_observer,
    fixed,
    observer_eval_from_counts,
    percent,
    runs_from_rates,
)
from twinforge.orchestrator import IterationRecord, LoopConfig, RefinementRun, Terminal
from twinforge.sim import TrialLog

MM_FB = (53, 27, 62, 100, 82, 22, 85, 100, 82, 100)
VANILLA = (16, 2, 65, 99, 66, 19, 90, 72, 1, 44)


def column(rates, M=100):
    return {f"task_{i}": runs_from_rates(f"task_{i}", [n], M) for i, n in enumerate(rates)}


def run_with(task, outcomes, token_count=0, iterations=1, succeeded=True):
    logs = tuple(TrialLog(j, j, (), bool(o)) for j, o in enumerate(outcomes))
    recs = tuple(IterationRecord(i + 1, "", logs, None, token_count) for i in range(iterations))
    return RefinementRun(task, recs, Terminal.SUCCEEDED if succeeded else Terminal.BUDGET_EXHAUSTED,
                         iterations, LoopConfig(M=len(outcomes)))


def test_single_program_rate():
    report = compute_metrics([run_with("t", (1, 1, 1, 0, 1, 1, 1, 0, 1, 0))])
    assert report.tasks["t"].R == (Fraction(7, 10),)
    assert report.ASR == Fraction(7, 10)


@pytest.mark.parametrize("rates, shown", [(MM_FB, "71.3%"), (VANILLA, "47.4%")])
def test_published_columns(rates, shown):
    report = compute_metrics(column(rates))
    assert report.ASR == Fraction(sum(rates), 1000)
    assert percent(report.ASR) == shown


def test_top5_uses_the_best_five():
    runs = [run_with("t", [1] * n + [0] * (10 - n)) for n in (10, 9, 8, 7, 6, 1)]
    t = compute_metrics(runs).tasks["t"]
    assert t.top5 == Fraction(4, 5) and not t.top5_partial


def test_top5_with_few_programs_is_flagged():
    report = compute_metrics([run_with("t", (1, 0)), run_with("t", (1, 1))])
    assert report.tasks["t"].top5 == Fraction(3, 4) and report.tasks["t"].top5_partial
    assert "*" in report.to_text()


def test_inconsistent_trial_counts():
    with pytest.raises(InconsistentM):
        compute_metrics([run_with("a", (1, 0)), run_with("b", (1, 0, 1))])


def test_empty_input():
    with pytest.raises(ValueError):
        compute_metrics([])
    with pytest.raises(ValueError):
        compute_metrics({"t": []})


def test_cr_iter_variants():
    runs = [run_with("t", (1,), iterations=2), run_with("t", (0,), iterations=6, succeeded=False)]
    report = compute_metrics(runs)
    assert report.CR_Iter == 4 and report.CR_Iter_success_only == 2
    assert compute_metrics([runs[1]]).CR_Iter_success_only is None


def test_token_mean_uses_final_programs():
    report = compute_metrics([run_with("t", (1,), token_count=10), run_with("u", (1,), token_count=31)])
    assert report.Token_mean == Fraction(41, 2)
    assert fixed(report.Token_mean, 1) == "20.5"


def test_text_table_columns():
    lines = compute_metrics(column(MM_FB)).to_text().splitlines()
    assert lines[0].split() == ["task", "ASR", "Top5-ASR", "CR-Iter", "Token"]
    mean = next(line for line in lines if line.startswith("mean"))
    assert mean.split()[:2] == ["mean", "71.3%"]
    assert lines[-1].startswith("*")  # one program per task


@pytest.mark.parametrize("x, digits, out", [(Fraction(1, 8), 2, "0.13"), (Fraction(-1, 8), 2, "-0.12"),
                                            (Fraction(7, 4), 0, "2"), (Fraction(176, 100), 2, "1.76")])
def test_fixed_is_half_up(x, digits, out):
    assert fixed(x, digits) == out


def test_percent_half_up():
    assert percent(Fraction(7125, 10000)) == "71.3%"
    assert percent(Fraction(1, 3)) == "33.3%"
    assert percent(Fraction(1)) == "100.0%"


# --- brute-force oracle -----------------------------------------------------------------

def reference(runs_by_task):
    asr_terms, top_terms, cr, tok = [], [], [], []
    for name in sorted(runs_by_task):
        rates = []
        for run in runs_by_task[name]:
            logs = run.iterations[-1].trial_logs
            wins = 0
            for lg in logs:
                if lg.success:
                    wins += 1
            rates.append(Fraction(wins, len(logs)))
            cr.append(run.cr_iter_contribution)
            tok.append(run.iterations[-1].token_count)
        asr_terms.append(sum(rates) / len(rates))
        best = sorted(rates)[::-1][:5]
        top_terms.append(sum(best) / len(best))
    return (sum(asr_terms) / len(asr_terms), sum(top_terms) / len(top_terms), Fraction(sum(cr), len(cr)),
            Fraction(sum(tok), len(tok)))


def test_matches_brute_force_on_random_matrices():
    rng = random.Random(2024)
    for _ in range(1000):
        M = rng.randint(1, 12)
        runs = {}
        for t in range(rng.randint(1, 4)):
            runs[f"t{t}"] = [run_with(f"t{t}", [rng.random() < 0.5 for _ in range(M)], rng.randint(0, 900),
                                      rng.randint(1, 6), rng.random() < 0.5)
                             for _ in range(rng.randint(1, 8))]
        report = compute_metrics(runs)
        assert (report.ASR, report.Top5_ASR, report.CR_Iter, report.Token_mean) == reference(runs)
        for name, t in report.tasks.items():
            assert t.R_task * t.N == sum(t.R)
        assert report.ASR * len(report.tasks) == sum(t.R_task for t in report.tasks.values())


# --- distribution ---------------------------------------------------------------------------

def test_median_of_three():
    assert distribution_summary([0.0, 0.5, 1.0])["median"] == 0.5


def test_all_equal_values():
    d = distribution_summary([0.3] * 7)
    assert d["min"] == d["q1"] == d["median"] == d["q3"] == d["max"] == 0.3
    assert sum(d["bins"]) == 7


def test_grid_quartiles():
    d = distribution_summary([i / 10 for i in range(11)])
    assert d["q1"] == pytest.approx(0.25) and d["q3"] == pytest.approx(0.75)
    assert len(d["bins"]) == 10 and d["bins"][-1] == 2  # 0.9 and 1.0 share the closed last bin


def test_empty_distribution():
    with pytest.raises(ValueError):
        distribution_summary([])


# --- observer evaluation ------------------------------------------------------------------

def test_published_observer_counts():
    r = observer_eval_from_counts(TP=16, FP=61, TN=40, FN=13, localized=12)
    j = r.to_json()
    assert (j["accuracy"], j["precision"], j["recall"], j["f1"]) == ("0.431", "0.208", "0.552", "0.302")
    assert r.localization_accuracy == Fraction(3, 10) and j["localization_accuracy"] == "30.0%"


def test_perfect_observer():
    r = eval_observer([(True, True), (False, False, 2, 2), (True, True)])
    assert r.accuracy == 1 and r.f1 == 1 and r.localization_accuracy == 1


def test_degenerate_f1():
    r = eval_observer([(False, True), (False, False)])
    assert r.precision == 0 and r.recall == 0 and r.f1 == 0


def test_localization_only_counts_detected_failures():
    r = eval_observer([(False, False, 1, 1), (True, False, 1, 1), (False, False, None, None)])
    assert (r.localized, r.localization_total) == (1, 1)


def test_observer_needs_predictions():
    with pytest.raises(ValueError):
        eval_observer([])
    with pytest.raises(ValueError):
        observer_eval_from_counts(1, 1, 1, 1, localized=2)
