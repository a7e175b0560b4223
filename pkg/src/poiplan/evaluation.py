"""Intermediate-POI evaluation: predict between a test trajectory's endpoints.

Every test trajectory becomes one case: its first POI is the source, its last
the destination, its elapsed time the budget, and its full POI set the truth.
Scores are computed on POI sets. Note the formula convention: recall divides
the overlap by the *predicted* set size and precision by the *truth* set size
(deliberately as published in this task family; `conventional_prf=True` swaps
the denominators). Endpoints are included in both sets, which inflates all
methods uniformly; the report header records this.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import IO, Callable, Iterable, Mapping, Sequence

from .corpus import SplitCorpus, Trajectory
from .durations import DurationEstimate
from .errors import PoiPlanError
from .model import ModelConfig
from .model import train as train_model
from .predictor import Itinerary, PredictRequest, predict_itinerary
from .sentences import TrainingPair, Vocab


class EvalError(PoiPlanError):
    """Evaluation cannot run (empty test set, empty score sets)."""


@dataclass(frozen=True)
class EvalCase:
    traj_id: str
    source: str
    dest: str
    budget_s: float
    truth: frozenset[str]


@dataclass(frozen=True)
class ScoreRow:
    traj_id: str
    recall: float
    precision: float
    f1: float
    predicted_len: int
    actual_len: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ScoreRow, ...]
    skipped: tuple[tuple[str, str], ...]
    mean_recall: float
    mean_precision: float
    mean_f1: float
    mean_predicted_len: float
    mean_actual_len: float
    n_train: int
    n_test: int
    meta: dict


def score(
    truth: Iterable[str],
    predicted: Iterable[str],
    conventional_prf: bool = False,
) -> tuple[float, float, float]:
    """(recall, precision, f1) on POI sets.

    As-published convention: recall = |truth ∩ predicted| / |predicted| and
    precision = |truth ∩ predicted| / |truth|. Set conventional_prf to swap
    the denominators back to the textbook definition.
    """
    truth_set, predicted_set = set(truth), set(predicted)
    if not truth_set or not predicted_set:
        raise EvalError("score() requires non-empty truth and predicted sets")
    overlap = len(truth_set & predicted_set)
    recall = overlap / len(predicted_set)
    precision = overlap / len(truth_set)
    if conventional_prf:
        recall, precision = precision, recall
    f1 = 0.0 if recall + precision == 0 else 2 * recall * precision / (recall + precision)
    return recall, precision, f1


def make_eval_case(traj: Trajectory) -> EvalCase | tuple[str, str]:
    """Build a case from a test trajectory, or (traj_id, reason) if unusable."""
    source = traj.visits[0].poi_id
    dest = traj.visits[-1].poi_id
    if source == dest:
        return traj.traj_id, "loop trajectory (source equals destination)"
    truth = frozenset(v.poi_id for v in traj.visits)
    if len(truth) < 3:
        return traj.traj_id, f"only {len(truth)} distinct POIs"
    budget = traj.last_checkin - traj.first_checkin
    if budget <= 0:
        return traj.traj_id, "non-positive elapsed time"
    return EvalCase(traj_id=traj.traj_id, source=source, dest=dest, budget_s=budget, truth=truth)


PredictFn = Callable[[PredictRequest], Itinerary]


def run_eval(
    predict_fn: PredictFn,
    split: SplitCorpus,
    conventional_prf: bool = False,
    meta: Mapping[str, object] | None = None,
) -> EvalReport:
    """Score a predictor on every usable test trajectory.

    Aggregates are unweighted arithmetic means over the per-case rows (so the
    aggregate F1 is the mean of per-case F1s, not the harmonic mean of the
    aggregate recall/precision).
    """
    if not split.test:
        raise EvalError("test set is empty")
    train_ids = {t.traj_id for t in split.train}
    test_ids = {t.traj_id for t in split.test}
    overlap = train_ids & test_ids
    if overlap:
        raise EvalError(f"split is corrupt: {len(overlap)} trajectories in both train and test")

    rows: list[ScoreRow] = []
    skipped: list[tuple[str, str]] = []
    for traj in sorted(split.test, key=lambda t: t.traj_id):
        case = make_eval_case(traj)
        if not isinstance(case, EvalCase):
            skipped.append(case)
            continue
        itin = predict_fn(PredictRequest(source=case.source, dest=case.dest, budget_s=case.budget_s))
        recall, precision, f1 = score(case.truth, itin.poi_ids, conventional_prf)
        rows.append(
            ScoreRow(
                traj_id=case.traj_id,
                recall=recall,
                precision=precision,
                f1=f1,
                predicted_len=len(itin.stops),
                actual_len=len(traj.visits),
            )
        )
    if not rows:
        raise EvalError("every test trajectory was skipped; nothing to score")

    n = len(rows)
    return EvalReport(
        rows=tuple(rows),
        skipped=tuple(skipped),
        mean_recall=sum(r.recall for r in rows) / n,
        mean_precision=sum(r.precision for r in rows) / n,
        mean_f1=sum(r.f1 for r in rows) / n,
        mean_predicted_len=sum(r.predicted_len for r in rows) / n,
        mean_actual_len=sum(r.actual_len for r in rows) / n,
        n_train=len(split.train),
        n_test=len(split.test),
        meta=dict(meta or {}),
    )


def epoch_sweep(
    pairs: Sequence[TrainingPair],
    vocab: Vocab,
    durations: Mapping[str, DurationEstimate],
    split: SplitCorpus,
    epoch_grid: Sequence[int],
    base_cfg: ModelConfig,
    min_duration: float = 0.0,
    conventional_prf: bool = False,
    meta: Mapping[str, object] | None = None,
) -> list[tuple[int, EvalReport]]:
    """Train one model per epoch count (shared seed) and evaluate each."""
    out: list[tuple[int, EvalReport]] = []
    for epochs in epoch_grid:
        cfg = replace(base_cfg, epochs=epochs)
        model = train_model(pairs, cfg, vocab)
        report = run_eval(
            lambda req: predict_itinerary(model, durations, req, min_duration),
            split,
            conventional_prf,
            meta={**dict(meta or {}), "epochs": epochs},
        )
        out.append((epochs, report))
    return out


def write_report_dsv(report: EvalReport, out: IO[str]) -> None:
    """Per-case rows plus aggregate lines; `#` lines carry the fingerprint."""
    for key in sorted(report.meta):
        out.write(f"# {key}={report.meta[key]}\n")
    out.write(f"# n_train={report.n_train}\n# n_test={report.n_test}\n")
    out.write(f"# skipped={len(report.skipped)}\n")
    for traj_id, reason in report.skipped:
        out.write(f"# skip {traj_id}: {reason}\n")
    out.write("trajID;recall;precision;f1;predicted_len;actual_len\n")
    for r in report.rows:
        out.write(f"{r.traj_id};{r.recall:.6f};{r.precision:.6f};{r.f1:.6f};{r.predicted_len};{r.actual_len}\n")
    out.write(
        f"MEAN;{report.mean_recall:.6f};{report.mean_precision:.6f};{report.mean_f1:.6f};"
        f"{report.mean_predicted_len:.6f};{report.mean_actual_len:.6f}\n"
    )


def report_as_dict(report: EvalReport) -> dict:
    return {
        "meta": dict(report.meta),
        "n_train": report.n_train,
        "n_test": report.n_test,
        "rows": [
            {
                "traj_id": r.traj_id,
                "recall": r.recall,
                "precision": r.precision,
                "f1": r.f1,
                "predicted_len": r.predicted_len,
                "actual_len": r.actual_len,
            }
            for r in report.rows
        ],
        "skipped": [{"traj_id": t, "reason": reason} for t, reason in report.skipped],
        "aggregates": {
            "mean_recall": report.mean_recall,
            "mean_precision": report.mean_precision,
            "mean_f1": report.mean_f1,
            "mean_predicted_len": report.mean_predicted_len,
            "mean_actual_len": report.mean_actual_len,
        },
    }


def write_report_json(report: EvalReport, out: IO[str]) -> None:
    json.dump(report_as_dict(report), out, indent=2, sort_keys=True)
    out.write("\n")


def write_sweep_dsv(sweep: Sequence[tuple[int, EvalReport]], out: IO[str]) -> None:
    """Epoch-grid table: one row per epoch count with aggregate scores."""
    out.write("epochs;mean_recall;mean_precision;mean_f1;mean_predicted_len;mean_actual_len\n")
    for epochs, report in sweep:
        out.write(
            f"{epochs};{report.mean_recall:.6f};{report.mean_precision:.6f};{report.mean_f1:.6f};"
            f"{report.mean_predicted_len:.6f};{report.mean_actual_len:.6f}\n"
        )
