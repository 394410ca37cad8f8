"""Program-level success metrics and observer evaluation, in exact rational arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor

import numpy as np

from .orchestrator import IterationRecord, LoopConfig, RefinementRun, Terminal
from .sim import TrialLog

TOP_K = 5
COLUMNS = ("ASR", "Top5-ASR", "CR-Iter", "Token")


class InconsistentM(ValueError):
    pass


def percent(x: Fraction, digits: int = 1) -> str:
    """``x`` as a percentage, rounded half-up: Fraction(713, 1000) -> '71.3%'."""
    scale = 10 ** digits
    v = Fraction(floor(Fraction(x) * 100 * scale + Fraction(1, 2)), scale)
    return f"{float(v):.{digits}f}%"


def fixed(x: Fraction, digits: int = 2) -> str:
    """Half-up decimal rendering of an exact value."""
    scale = 10 ** digits
    v = floor(Fraction(x) * scale + Fraction(1, 2))
    sign = "-" if v < 0 else ""
    v = abs(v)
    return f"{sign}{v // scale}.{v % scale:0{digits}d}" if digits else f"{sign}{v}"


def _mean(values) -> Fraction:
    values = list(values)
    return sum(values, Fraction(0)) / len(values)


@dataclass(frozen=True)
class TaskMetrics:
    task_name: str
    N: int
    M: int
    s: tuple[tuple[int, ...], ...]  # s[i][j]: trial j of program i succeeded
    R: tuple[Fraction, ...]
    R_task: Fraction
    top5: Fraction
    top5_partial: bool  # fewer than five programs were available
    cr_iters: tuple[int, ...]
    succeeded: tuple[bool, ...]
    tokens: tuple[int, ...]


@dataclass(frozen=True)
class MetricsReport:
    tasks: dict[str, TaskMetrics]
    ASR: Fraction
    Top5_ASR: Fraction
    CR_Iter: Fraction
    CR_Iter_success_only: Fraction | None
    Token_mean: Fraction
    distribution: dict

    def to_json(self) -> dict:
        def fr(x):
            return None if x is None else {"num": x.numerator, "den": x.denominator, "value": float(x)}

        return {
            "aggregate": {"ASR": fr(self.ASR), "Top5_ASR": fr(self.Top5_ASR), "CR_Iter": fr(self.CR_Iter),
                          "CR_Iter_success_only": fr(self.CR_Iter_success_only),
                          "Token_mean": fr(self.Token_mean)},
            "display": {"ASR": percent(self.ASR), "Top5-ASR": percent(self.Top5_ASR),
                        "CR-Iter": fixed(self.CR_Iter), "Token": fixed(self.Token_mean, 1)},
            "tasks": {
                k: {"N": t.N, "M": t.M, "R": [fr(r) for r in t.R], "R_task": fr(t.R_task), "top5": fr(t.top5),
                    "top5_partial": t.top5_partial, "cr_iters": list(t.cr_iters), "tokens": list(t.tokens),
                    "s": [list(row) for row in t.s]}
                for k, t in sorted(self.tasks.items())
            },
            "distribution": self.distribution,
        }

    def to_text(self) -> str:
        rows = [("task",) + COLUMNS]
        for k, t in sorted(self.tasks.items()):
            flag = "*" if t.top5_partial else ""
            rows.append((k, percent(t.R_task), percent(t.top5) + flag, fixed(_mean(t.cr_iters)),
                         fixed(_mean(t.tokens), 1)))
        rows.append(("mean", percent(self.ASR), percent(self.Top5_ASR), fixed(self.CR_Iter),
                     fixed(self.Token_mean, 1)))
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) if c == 0 else cell.rjust(w) for c, (cell, w) in
                           enumerate(zip(r, widths))).rstrip() for r in rows]
        if any(t.top5_partial for t in self.tasks.values()):
            lines.append("* fewer than 5 programs; Top5-ASR averages all of them")
        return "\n".join(lines) + "\n"


def _matrix(run: RefinementRun) -> tuple[int, ...]:
    return tuple(int(lg.success) for lg in run.final.trial_logs)


def compute_metrics(runs) -> MetricsReport:
    """Aggregate refinement runs (a flat list, or a mapping task -> runs).

    Each run contributes one program: its final iteration. All programs must
    share the same M.
    """
    if isinstance(runs, dict):
        grouped = {k: list(v) for k, v in runs.items()}
    else:
        grouped = {}
        for r in runs:
            grouped.setdefault(r.task_name, []).append(r)
    if not grouped or any(not v for v in grouped.values()):
        raise ValueError("every task needs at least one program")
    Ms = {len(r.final.trial_logs) for v in grouped.values() for r in v}
    if len(Ms) != 1:
        raise InconsistentM(f"programs disagree on trials per program: {sorted(Ms)}")
    M = Ms.pop()
    tasks = {}
    for name in sorted(grouped):
        rs = grouped[name]
        s = tuple(_matrix(r) for r in rs)
        R = tuple(Fraction(sum(row), M) for row in s)
        best = sorted(R, reverse=True)[:TOP_K]
        tasks[name] = TaskMetrics(name, len(rs), M, s, R, _mean(R), _mean(best), len(R) < TOP_K,
                                  tuple(r.cr_iter_contribution for r in rs),
                                  tuple(r.terminal is Terminal.SUCCEEDED for r in rs),
                                  tuple(r.final.token_count for r in rs))
    all_cr = [c for t in tasks.values() for c in t.cr_iters]
    ok_cr = [c for t in tasks.values() for c, ok in zip(t.cr_iters, t.succeeded) if ok]
    pooled = [float(r) for t in tasks.values() for r in t.R]
    return MetricsReport(
        tasks=tasks,
        ASR=_mean(t.R_task for t in tasks.values()),
        Top5_ASR=_mean(t.top5 for t in tasks.values()),
        CR_Iter=_mean(all_cr),
        CR_Iter_success_only=_mean(ok_cr) if ok_cr else None,
        Token_mean=_mean(tok for t in tasks.values() for tok in t.tokens),
        distribution=distribution_summary(pooled),
    )


def distribution_summary(values) -> dict:
    """Five-number summary (linear quantiles) and a 10-bin histogram over [0, 1]."""
    arr = np.asarray([float(v) for v in values], dtype=float)
    if arr.size == 0:
        raise ValueError("distribution_summary needs at least one value")
    q = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    counts, edges = np.histogram(arr, bins=10, range=(0.0, 1.0))
    return {"min": float(q[0]), "q1": float(q[1]), "median": float(q[2]), "q3": float(q[3]), "max": float(q[4]),
            "bins": [int(c) for c in counts], "edges": [round(float(e), 6) for e in edges]}


def runs_from_rates(task_name: str, successes, M: int, token_count: int = 0) -> list[RefinementRun]:
    """One single-iteration run per entry of ``successes`` (each a success count out of ``M``).

    Handy for feeding published per-task rates through :func:`compute_metrics`.
    """
    cfg = LoopConfig(M=M)
    out = []
    for k, n in enumerate(successes):
        if not 0 <= n <= M:
            raise ValueError("success counts must lie in [0, M]")
        logs = tuple(TrialLog(j, j, (), j < n) for j in range(M))
        rec = IterationRecord(1, "", logs, None, token_count)
        ok = n >= cfg.required_successes
        out.append(RefinementRun(task_name, (rec,), Terminal.SUCCEEDED if ok else Terminal.BUDGET_EXHAUSTED,
                                 1 if ok else 1 + cfg.max_refinements, cfg))
    return out


# --- observer evaluation -------------------------------------------------------------

@dataclass(frozen=True)
class ObserverEvalReport:
    TP: int
    FP: int
    TN: int
    FN: int
    localized: int
    localization_total: int

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.TN + self.FN

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.TP + self.TN, self.total)

    @property
    def precision(self) -> Fraction:
        d = self.TP + self.FP
        return Fraction(self.TP, d) if d else Fraction(0)

    @property
    def recall(self) -> Fraction:
        d = self.TP + self.FN
        return Fraction(self.TP, d) if d else Fraction(0)

    @property
    def f1(self) -> Fraction:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else Fraction(0)

    @property
    def localization_accuracy(self) -> Fraction | None:
        return Fraction(self.localized, self.localization_total) if self.localization_total else None

    def to_json(self) -> dict:
        loc = self.localization_accuracy
        return {"TP": self.TP, "FP": self.FP, "TN": self.TN, "FN": self.FN,
                "accuracy": fixed(self.accuracy, 3), "precision": fixed(self.precision, 3),
                "recall": fixed(self.recall, 3), "f1": fixed(self.f1, 3),
                "localization_accuracy": percent(loc) if loc is not None else None,
                "localized": self.localized, "localization_total": self.localization_total}


def eval_observer(predictions) -> ObserverEvalReport:
    """Score observer verdicts; tuples are (predicted_success, true_success[, predicted_step, true_step]).

    Success is the positive class. Localization is judged on the correctly
    detected failures (true negatives) that carry a true step.
    """
    preds = list(predictions)
    if not preds:
        raise ValueError("eval_observer needs at least one prediction")
    tp = fp = tn = fn = hit = total = 0
    for p in preds:
        pred, true = bool(p[0]), bool(p[1])
        p_step = p[2] if len(p) > 2 else None
        t_step = p[3] if len(p) > 3 else None
        if pred and true:
            tp += 1
        elif pred:
            fp += 1
        elif true:
            fn += 1
        else:
            tn += 1
            if t_step is not None:
                total += 1
                hit += p_step == t_step
    return ObserverEvalReport(tp, fp, tn, fn, hit, total)


def observer_eval_from_counts(TP: int, FP: int, TN: int, FN: int, localized: int = 0) -> ObserverEvalReport:
    """Rebuild a report from published counts; every true negative is assumed step-annotated."""
    if localized > TN:
        raise ValueError("cannot localize more failures than were detected")
    preds = ([(True, True)] * TP + [(True, False)] * FP + [(False, True)] * FN
             + [(False, False, 0, 0)] * localized + [(False, False, 1, 0)] * (TN - localized))
    return eval_observer(preds)
