import io
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poiplan.corpus import SplitCorpus, Trajectory, Visit
from poiplan.evaluation import (
    EvalCase,
    EvalError,
    epoch_sweep,
    make_eval_case,
    run_eval,
    score,
    write_report_dsv,
    write_report_json,
)
from poiplan.model import ModelConfig
from poiplan.predictor import Itinerary, ItineraryStop, predict_itinerary


def brute_force_score(truth, predicted):
    """Element-by-element recount, no set algebra."""
    truth, predicted = list(set(truth)), list(set(predicted))
    overlap = sum(1 for p in predicted if p in truth)
    recall = overlap / len(predicted)
    precision = overlap / len(truth)
    f1 = 0.0 if recall + precision == 0 else 2 * recall * precision / (recall + precision)
    return recall, precision, f1


class TestScore:
    def test_identical_sets(self):
        assert score({"a", "b"}, {"a", "b"}) == (1.0, 1.0, 1.0)

    def test_printed_formula_orientation(self):
        recall, precision, f1 = score({"a", "b", "c", "d"}, {"a", "b"})
        assert recall == 1.0          # overlap / |predicted|
        assert precision == 0.5       # overlap / |truth|
        assert f1 == pytest.approx(2 / 3)

    def test_disjoint_sets(self):
        assert score({"a"}, {"b"}) == (0.0, 0.0, 0.0)

    def test_empty_sets_rejected(self):
        with pytest.raises(EvalError):
            score(set(), {"a"})
        with pytest.raises(EvalError):
            score({"a"}, set())

    def test_conventional_flag_swaps_denominators(self):
        recall, precision, _ = score({"a", "b", "c", "d"}, {"a", "b"}, conventional_prf=True)
        assert recall == 0.5 and precision == 1.0

    @given(
        truth=st.sets(st.sampled_from(string.ascii_lowercase), min_size=1, max_size=10),
        predicted=st.sets(st.sampled_from(string.ascii_lowercase), min_size=1, max_size=10),
    )
    @settings(max_examples=100)
    def test_matches_brute_force(self, truth, predicted):
        assert score(truth, predicted) == pytest.approx(brute_force_score(truth, predicted))

    @given(
        truth=st.sets(st.sampled_from(string.ascii_lowercase), min_size=1, max_size=8),
        predicted=st.sets(st.sampled_from(string.ascii_lowercase), min_size=1, max_size=8),
    )
    @settings(max_examples=50)
    def test_relabeling_invariance(self, truth, predicted):
        mapping = {c: c.upper() * 2 for c in string.ascii_lowercase}
        direct = score(truth, predicted)
        relabeled = score({mapping[t] for t in truth}, {mapping[p] for p in predicted})
        assert direct == relabeled


def make_test_traj(pois_in_order, traj_id="t", start=0.0):
    visits = tuple(
        Visit(p, start + 3600.0 * i, start + 3600.0 * (i + 1)) for i, p in enumerate(pois_in_order)
    )
    return Trajectory(traj_id=traj_id, user_id="u", visits=visits)


class TestMakeEvalCase:
    def test_case_fields(self):
        case = make_eval_case(make_test_traj(["a", "m", "b"]))
        assert isinstance(case, EvalCase)
        assert (case.source, case.dest) == ("a", "b")
        assert case.budget_s == pytest.approx(3 * 3600.0)
        assert case.truth == {"a", "m", "b"}

    def test_loop_trajectory_skipped(self):
        result = make_eval_case(make_test_traj(["a", "m", "a"]))
        assert result == ("t", "loop trajectory (source equals destination)")

    def test_small_truth_skipped(self):
        result = make_eval_case(make_test_traj(["a", "b", "a", "b"]))
        assert isinstance(result, tuple) and "distinct" in result[1]


class TestRunEval:
    def test_memorizing_predictor_scores_one(self, mem_model, mem_corpus):
        report = run_eval(
            lambda r: predict_itinerary(mem_model, mem_corpus["durations"], r),
            mem_corpus["split"],
        )
        assert report.mean_f1 == 1.0
        assert report.mean_predicted_len == report.mean_actual_len == 3.0

    def test_two_stop_predictor_formula_consequence(self, mem_corpus):
        def two_stop(req):
            stops = (ItineraryStop(req.source, 0.0), ItineraryStop(req.dest, 0.0))
            return Itinerary(stops=stops, total_duration_s=0.0, budget_s=req.budget_s,
                             budget_exceeded=False, stop_reason="no_candidates", steps_log=())

        report = run_eval(two_stop, mem_corpus["split"])
        assert report.mean_recall == 1.0           # printed formula: overlap / |predicted|
        assert report.mean_precision == pytest.approx(2 / 3)  # truth has 3 POIs

    def test_empty_test_set_rejected(self, mem_corpus):
        split = SplitCorpus(train=mem_corpus["split"].train, test=(), split_fraction=0.8)
        with pytest.raises(EvalError, match="empty"):
            run_eval(lambda r: None, split)

    def test_corrupt_split_rejected(self, mem_corpus):
        t = mem_corpus["split"].test[0]
        split = SplitCorpus(train=(t,), test=(t,), split_fraction=0.8)
        with pytest.raises(EvalError, match="both"):
            run_eval(lambda r: None, split)

    def test_aggregates_are_arithmetic_means(self, mem_model, mem_corpus):
        report = run_eval(
            lambda r: predict_itinerary(mem_model, mem_corpus["durations"], r),
            mem_corpus["split"],
        )
        n = len(report.rows)
        assert abs(report.mean_f1 - sum(r.f1 for r in report.rows) / n) < 1e-9
        assert abs(report.mean_recall - sum(r.recall for r in report.rows) / n) < 1e-9
        assert abs(report.mean_precision - sum(r.precision for r in report.rows) / n) < 1e-9

    def test_loop_trajectories_recorded_as_skipped(self, mem_model, mem_corpus):
        loop = make_test_traj(["a", "m", "a"], traj_id="zz-loop", start=1e10)
        split = SplitCorpus(
            train=mem_corpus["split"].train,
            test=mem_corpus["split"].test + (loop,),
            split_fraction=0.8,
        )
        report = run_eval(
            lambda r: predict_itinerary(mem_model, mem_corpus["durations"], r), split
        )
        assert ("zz-loop", "loop trajectory (source equals destination)") in report.skipped


class TestEpochSweep:
    def test_single_point_grid(self, mem_corpus):
        sweep = epoch_sweep(
            mem_corpus["pairs"], mem_corpus["vocab"], mem_corpus["durations"],
            mem_corpus["split"], [1], ModelConfig(epochs=1, seed=5),
        )
        assert len(sweep) == 1 and sweep[0][0] == 1

    def test_memorization_improves_with_epochs(self, mem_corpus):
        sweep = epoch_sweep(
            mem_corpus["pairs"], mem_corpus["vocab"], mem_corpus["durations"],
            mem_corpus["split"], [1, 50], ModelConfig(seed=11),
        )
        by_epochs = {epochs: report for epochs, report in sweep}
        assert by_epochs[50].mean_f1 >= by_epochs[1].mean_f1 - 0.05

    def test_deterministic_across_runs(self, mem_corpus):
        args = (mem_corpus["pairs"], mem_corpus["vocab"], mem_corpus["durations"],
                mem_corpus["split"], [1], ModelConfig(epochs=1, seed=5))
        first = epoch_sweep(*args)
        second = epoch_sweep(*args)
        assert first[0][1].rows == second[0][1].rows


class TestReportWriters:
    def test_dsv_and_json_deterministic(self, mem_model, mem_corpus):
        report = run_eval(
            lambda r: predict_itinerary(mem_model, mem_corpus["durations"], r),
            mem_corpus["split"],
            meta={"seed": 11, "dataset_hash": "cafe"},
        )
        a, b = io.StringIO(), io.StringIO()
        write_report_dsv(report, a)
        write_report_dsv(report, b)
        assert a.getvalue() == b.getvalue()
        assert "# dataset_hash=cafe" in a.getvalue()
        assert a.getvalue().strip().splitlines()[-1].startswith("MEAN;")
        ja, jb = io.StringIO(), io.StringIO()
        write_report_json(report, ja)
        write_report_json(report, jb)
        assert ja.getvalue() == jb.getvalue()
