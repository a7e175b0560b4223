"""Iterative itinerary construction between fixed endpoints under a time budget.

Starting from [source, dest], every iteration probes each interior gap with a
masked query over the current sequence, asks the model to fill the mask from
the POIs not yet used, and inserts the single (gap, POI) pair of globally
maximal probability. The loop stops when the summed visit durations reach the
budget (checked after each insertion, so the final stop may overshoot; the
overshoot is reported, never trimmed), when every POI is used, or when no
insertable candidate remains. A first-order Markov chain with add-one
smoothing serves as the comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import Poi, Trajectory, sort_poi_key
from .durations import DurationEstimate, scheduled_seconds
from .errors import DataError
from .model import TrainedModel, unmask_batch
from .sentences import MASK, Vocab, step_tokens

STOP_BUDGET = "budget_reached"
STOP_ALL_POIS = "all_pois_used"
STOP_NO_CANDIDATES = "no_candidates"


class PredictError(DataError):
    """A prediction request cannot be served (bad endpoints, unknown POI)."""


@dataclass(frozen=True)
class PredictRequest:
    source: str
    dest: str
    budget_s: float

    def __post_init__(self) -> None:
        if self.source == self.dest:
            raise PredictError("source and destination POI must differ")
        if self.budget_s <= 0:
            raise PredictError(f"budget must be positive, got {self.budget_s}")


@dataclass(frozen=True)
class ItineraryStop:
    poi_id: str
    duration_s: float


@dataclass(frozen=True)
class InsertionStep:
    iteration: int
    poi_id: str
    gap: int  # insertion index into the sequence at the time of insertion
    probability: float


@dataclass(frozen=True)
class Itinerary:
    stops: tuple[ItineraryStop, ...]
    total_duration_s: float
    budget_s: float
    budget_exceeded: bool
    stop_reason: str
    steps_log: tuple[InsertionStep, ...]

    @property
    def poi_ids(self) -> tuple[str, ...]:
        return tuple(s.poi_id for s in self.stops)


def _check_known(poi_id: str, vocab: Vocab, durations: Mapping[str, DurationEstimate], role: str) -> None:
    if poi_id not in vocab.poi_category:
        raise PredictError(f"{role} POI {poi_id!r} is not in the vocabulary")
    if poi_id not in durations:
        raise PredictError(f"{role} POI {poi_id!r} has no duration estimate")


def gap_query(seq: Sequence[str], gap: int, vocab: Vocab, max_seq_len: int) -> list[int]:
    """Token query for inserting at `gap`: steps before, bare [MASK], steps after.

    If the query would exceed max_seq_len, whole steps are trimmed from
    whichever end is farther from the mask, keeping the local context.
    """
    before = [step_tokens(vocab, p) for p in seq[:gap]]
    after = [step_tokens(vocab, p) for p in seq[gap:]]
    while 2 * (len(before) + len(after)) + 1 > max_seq_len:
        if len(before) >= len(after):
            before.pop(0)
        else:
            after.pop()
    query: list[int] = []
    for cat_tok, poi_tok in before:
        query.extend((cat_tok, poi_tok))
    query.append(MASK)
    for cat_tok, poi_tok in after:
        query.extend((cat_tok, poi_tok))
    return query


def predict_itinerary(
    model: TrainedModel,
    durations: Mapping[str, DurationEstimate],
    req: PredictRequest,
    min_duration: float = 0.0,
) -> Itinerary:
    vocab = model.vocab
    _check_known(req.source, vocab, durations, "source")
    _check_known(req.dest, vocab, durations, "destination")

    def dur(poi_id: str) -> float:
        return scheduled_seconds(durations[poi_id], min_duration)

    # Only POIs with a duration estimate can be scheduled against the budget.
    insertable = [p for p in vocab.poi_ids if p in durations]
    all_pois = set(vocab.poi_ids)

    seq: list[str] = [req.source, req.dest]
    total = dur(req.source) + dur(req.dest)
    steps: list[InsertionStep] = []

    def build(reason: str, exceeded: bool = False) -> Itinerary:
        return Itinerary(
            stops=tuple(ItineraryStop(p, dur(p)) for p in seq),
            total_duration_s=total,
            budget_s=req.budget_s,
            budget_exceeded=exceeded,
            stop_reason=reason,
            steps_log=tuple(steps),
        )

    if total >= req.budget_s:
        return build(STOP_BUDGET, exceeded=total > req.budget_s)

    iteration = 0
    while True:
        used = set(seq)
        allowed_ids = [p for p in insertable if p not in used]
        if not allowed_ids:
            return build(STOP_ALL_POIS if used >= all_pois else STOP_NO_CANDIDATES)
        allowed_tokens = [vocab.poi_token(p) for p in allowed_ids]

        gaps = range(1, len(seq))
        queries = [gap_query(seq, g, vocab, model.config.max_seq_len) for g in gaps]
        results = unmask_batch(model, queries, allowed_tokens)

        best_gap, best_token, best_prob = None, None, -1.0
        for g, per_query in zip(gaps, results):
            token, prob = per_query[0].restricted_best
            if prob > best_prob:  # ties keep the smaller gap, then smaller token
                best_gap, best_token, best_prob = g, token, prob
        chosen = vocab.poi_id_of(best_token)

        iteration += 1
        seq.insert(best_gap, chosen)
        total += dur(chosen)
        steps.append(InsertionStep(iteration=iteration, poi_id=chosen, gap=best_gap, probability=best_prob))

        if set(seq) >= all_pois:
            return build(STOP_ALL_POIS)
        if total >= req.budget_s:
            return build(STOP_BUDGET)


@dataclass(frozen=True)
class MarkovModel:
    """First-order transition probabilities with add-one smoothing."""

    poi_ids: tuple[str, ...]
    matrix: np.ndarray  # row-stochastic, [n, n]
    index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.index.update({p: i for i, p in enumerate(self.poi_ids)})


def fit_markov(train_trajectories: Sequence[Trajectory], vocab: Vocab) -> MarkovModel:
    """Count consecutive visit pairs over the training set, smoothed by +1."""
    poi_ids = tuple(sorted(vocab.poi_ids, key=sort_poi_key))
    index = {p: i for i, p in enumerate(poi_ids)}
    counts = np.ones((len(poi_ids), len(poi_ids)))
    for traj in train_trajectories:
        visits = traj.visits
        for a, b in zip(visits, visits[1:]):
            counts[index[a.poi_id], index[b.poi_id]] += 1.0
    matrix = counts / counts.sum(axis=1, keepdims=True)
    return MarkovModel(poi_ids=poi_ids, matrix=matrix)


def predict_markov(
    markov: MarkovModel,
    durations: Mapping[str, DurationEstimate],
    req: PredictRequest,
    min_duration: float = 0.0,
) -> Itinerary:
    """Greedy baseline: repeatedly append the most probable unvisited successor.

    The destination is reserved (its duration counts against the budget from
    the start, and it is never chosen mid-route) and appended at the end, so
    the endpoint contract matches the transformer predictor's.
    """
    known = set(markov.poi_ids)
    for role, poi_id in (("source", req.source), ("destination", req.dest)):
        if poi_id not in known:
            raise PredictError(f"{role} POI {poi_id!r} is not in the vocabulary")
        if poi_id not in durations:
            raise PredictError(f"{role} POI {poi_id!r} has no duration estimate")

    def dur(poi_id: str) -> float:
        return scheduled_seconds(durations[poi_id], min_duration)

    candidates_universe = [p for p in markov.poi_ids if p in durations]
    seq: list[str] = [req.source]
    total = dur(req.source) + dur(req.dest)
    steps: list[InsertionStep] = []

    def build(reason: str, exceeded: bool = False) -> Itinerary:
        stops = tuple(ItineraryStop(p, dur(p)) for p in [*seq, req.dest])
        return Itinerary(
            stops=stops,
            total_duration_s=total,
            budget_s=req.budget_s,
            budget_exceeded=exceeded,
            stop_reason=reason,
            steps_log=tuple(steps),
        )

    if total >= req.budget_s:
        return build(STOP_BUDGET, exceeded=total > req.budget_s)

    iteration = 0
    while True:
        used = set(seq) | {req.dest}
        cands = [p for p in candidates_universe if p not in used]
        if not cands:
            return build(STOP_ALL_POIS if used >= set(markov.poi_ids) else STOP_NO_CANDIDATES)
        row = markov.matrix[markov.index[seq[-1]]]
        probs = np.array([row[markov.index[p]] for p in cands])
        best = int(probs.argmax())  # ties keep the smaller poi index
        chosen = cands[best]

        iteration += 1
        seq.append(chosen)
        total += dur(chosen)
        steps.append(
            InsertionStep(
                iteration=iteration,
                poi_id=chosen,
                gap=len(seq) - 1,
                probability=float(probs[best] / probs.sum()),
            )
        )
        if (set(seq) | {req.dest}) >= set(markov.poi_ids):
            return build(STOP_ALL_POIS)
        if total >= req.budget_s:
            return build(STOP_BUDGET)


def itinerary_record(
    itin: Itinerary,
    pois: Mapping[str, Poi],
    durations: Mapping[str, DurationEstimate],
) -> dict:
    """JSON-shaped itinerary for the CLI, HTTP API and evaluation reports."""
    inserted = {s.poi_id: s for s in itin.steps_log}
    stops = []
    cumulative = 0.0
    for stop in itin.stops:
        cumulative += stop.duration_s
        poi = pois.get(stop.poi_id)
        est = durations.get(stop.poi_id)
        step = inserted.get(stop.poi_id)
        stops.append(
            {
                "poi_id": stop.poi_id,
                "name": poi.name if poi else "",
                "category": poi.category if poi else "",
                "duration_s": stop.duration_s,
                "ci_low_s": est.ci_low if est else None,
                "ci_high_s": est.ci_high if est else None,
                "n_samples": est.n_samples if est else None,
                "cumulative_s": cumulative,
                "probability": step.probability if step else None,
            }
        )
    return {
        "stops": stops,
        "total_duration_s": itin.total_duration_s,
        "budget_s": itin.budget_s,
        "budget_exceeded": itin.budget_exceeded,
        "stop_reason": itin.stop_reason,
        "steps_log": [
            {"iteration": s.iteration, "poi_id": s.poi_id, "gap": s.gap, "probability": s.probability}
            for s in itin.steps_log
        ],
    }
