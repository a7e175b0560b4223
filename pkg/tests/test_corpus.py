import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poiplan.corpus import (
    CheckIn,
    CorpusError,
    CsvSchema,
    Visit,
    build_trajectories,
    load_checkins,
    load_pois,
    split_corpus,
)

POI_TABLE = """poiID;poiName;lat;lon;theme
1;Museum One;34.65;135.50;Museum
2;Central Park;34.66;135.51;Park
3;Old Shrine;34.67;135.52;Shrine
"""


def _checkin_file(rows):
    header = "photoID;userID;dateTaken;poiID;poiTheme;poiFreq;seqID"
    return io.StringIO("\n".join([header, *rows]) + "\n")


class TestLoadPois:
    def test_loads_table(self):
        pois = load_pois(io.StringIO(POI_TABLE))
        assert set(pois) == {"1", "2", "3"}
        assert pois["2"].category == "Park"
        assert pois["2"].name == "Central Park"
        assert pois["1"].lat == pytest.approx(34.65)

    def test_duplicate_poi_id_rejected(self):
        table = POI_TABLE + "2;Dup;0;0;Park\n"
        with pytest.raises(CorpusError, match="duplicate"):
            load_pois(io.StringIO(table))

    def test_empty_theme_rejected(self):
        table = "poiID;poiName;lat;lon;theme\n9;NoTheme;0;0;\n"
        with pytest.raises(CorpusError, match="theme"):
            load_pois(io.StringIO(table))

    def test_missing_column_rejected(self):
        with pytest.raises(CorpusError, match="missing"):
            load_pois(io.StringIO("poiID;poiName;lat;lon\n1;x;0;0\n"))


class TestLoadCheckins:
    def test_empty_stream_yields_nothing(self):
        checkins, rejects = load_checkins(io.StringIO(""))
        assert checkins == [] and rejects == []

    def test_rows_preserved_in_file_order(self):
        pois = load_pois(io.StringIO(POI_TABLE))
        stream = _checkin_file(
            ["10;u1;100;1;Museum;5;7", "11;u1;200;2;Park;5;7", "12;u2;50;3;Shrine;5;8"]
        )
        checkins, rejects = load_checkins(stream, CsvSchema(), pois)
        assert not rejects
        assert [c.poi_id for c in checkins] == ["1", "2", "3"]
        assert [c.timestamp for c in checkins] == [100.0, 200.0, 50.0]
        assert checkins[0].seq_id == "7" and checkins[2].user_id == "u2"

    def test_one_valid_one_malformed(self):
        pois = load_pois(io.StringIO(POI_TABLE))
        stream = _checkin_file(["10;u1;100;1;Museum;5;7", "11;u1;not_a_time;2;Park;5;7"])
        checkins, rejects = load_checkins(stream, CsvSchema(), pois)
        assert len(checkins) == 1 and len(rejects) == 1
        assert rejects[0].line_no == 3
        assert "not_a_time" in rejects[0].reason

    @pytest.mark.parametrize(
        "row,fragment",
        [
            ("10;u1;100;1;Museum;5", "fields"),  # wrong field count
            ("10;u1;-5;1;Museum;5;7", "positive"),
            ("10;u1;0;1;Museum;5;7", "positive"),
            ("10;u1;100;99;Museum;5;7", "unknown poi"),
        ],
    )
    def test_malformed_rows_are_collected(self, row, fragment):
        pois = load_pois(io.StringIO(POI_TABLE))
        checkins, rejects = load_checkins(_checkin_file([row]), CsvSchema(), pois)
        assert checkins == []
        assert len(rejects) == 1 and fragment in rejects[0].reason

    def test_missing_seq_column_is_fine(self):
        stream = io.StringIO("photoID;userID;dateTaken;poiID\n1;u1;100;1\n")
        checkins, rejects = load_checkins(stream)
        assert len(checkins) == 1 and checkins[0].seq_id is None


class TestBuildTrajectories:
    def test_consolidates_consecutive_same_poi(self):
        checkins = [
            CheckIn("A", "3", 100.0, "s1"),
            CheckIn("A", "3", 200.0, "s1"),
            CheckIn("A", "5", 300.0, "s1"),
        ]
        trajs = build_trajectories(checkins)
        assert len(trajs) == 1
        assert trajs[0].visits == (Visit("3", 100.0, 200.0), Visit("5", 300.0, 300.0))

    def test_two_seq_ids_two_trajectories(self):
        checkins = [
            CheckIn("A", "1", 100.0, "s1"),
            CheckIn("A", "2", 200.0, "s2"),
        ]
        assert len(build_trajectories(checkins)) == 2

    def test_gap_split_without_seq_id(self):
        gap = 3600.0
        checkins = [
            CheckIn("A", "1", 100.0),
            CheckIn("A", "2", 200.0),
            CheckIn("A", "3", 200.0 + gap + 1),
        ]
        trajs = build_trajectories(checkins, gap_seconds=gap)
        assert [len(t.visits) for t in trajs] == [2, 1]

    def test_empty_input(self):
        assert build_trajectories([]) == []

    def test_no_consecutive_visits_share_poi(self, fixture_city):
        for traj in build_trajectories(fixture_city.checkins):
            for a, b in zip(traj.visits, traj.visits[1:]):
                assert a.poi_id != b.poi_id
                assert a.arrival < b.arrival

    @given(
        runs=st.lists(
            st.tuples(st.sampled_from("pqr"), st.integers(1, 4)), min_size=1, max_size=8
        )
    )
    @settings(max_examples=100)
    def test_run_lengths_sum_to_checkin_count(self, runs):
        # collapse duplicate consecutive POIs in the plan so runs are maximal
        merged = []
        for poi, n in runs:
            if merged and merged[-1][0] == poi:
                merged[-1][1] += n
            else:
                merged.append([poi, n])
        checkins = []
        t = 1000.0
        for poi, n in merged:
            for _ in range(n):
                checkins.append(CheckIn("u", poi, t, "s"))
                t += 10.0
        trajs = build_trajectories(checkins)
        assert len(trajs) == 1
        assert len(trajs[0].visits) == len(merged)
        assert sum(n for _, n in merged) == len(checkins)

    def test_idempotent_on_consolidated_data(self, fixture_city):
        trajs = build_trajectories(fixture_city.checkins)
        # replay each visit as its boundary check-ins; rebuilding must give
        # back the same visits
        replay = []
        for traj in trajs[:50]:
            seq_id = traj.traj_id.split(":", 1)[1]
            for v in traj.visits:
                replay.append(CheckIn(traj.user_id, v.poi_id, v.arrival, seq_id))
                if v.departure > v.arrival:
                    replay.append(CheckIn(traj.user_id, v.poi_id, v.departure, seq_id))
        rebuilt = {t.traj_id: t.visits for t in build_trajectories(replay)}
        for traj in trajs[:50]:
            assert rebuilt[traj.traj_id] == traj.visits


def _traj(traj_id, last, n_visits=3):
    visits = tuple(
        Visit(str(i), last - 100.0 * (n_visits - i), last - 100.0 * (n_visits - i) + 50)
        for i in range(n_visits - 1)
    ) + (Visit("z", last, last),)
    return build_trajectories(
        [CheckIn("u" + traj_id, v.poi_id, v.arrival, traj_id) for v in visits]
        + [CheckIn("u" + traj_id, visits[-1].poi_id, last, traj_id)]
    )[0]


class TestSplitCorpus:
    def test_80_20_split_of_ten(self):
        trajs = [_traj(str(i), 1000.0 + i) for i in range(10)]
        split = split_corpus(trajs, 0.8, 3)
        assert len(split.train) == 8 and len(split.test) == 2

    def test_short_trajectories_excluded(self):
        keep = _traj("keep", 1000.0, n_visits=3)
        drop = _traj("drop", 900.0, n_visits=2)
        split = split_corpus([keep, drop], 0.5, 3)
        ids = {t.traj_id for t in split.train} | {t.traj_id for t in split.test}
        assert "drop" not in str(ids)

    def test_latest_trajectories_go_to_test(self):
        trajs = [_traj(str(i), float(i)) for i in range(1, 11)]
        split = split_corpus(trajs, 0.8, 3)
        assert sorted(t.last_checkin for t in split.test) == [9.0, 10.0]

    def test_chronological_boundary(self, fixture_city):
        split = split_corpus(build_trajectories(fixture_city.checkins), 0.8, 3)
        assert max(t.last_checkin for t in split.train) <= min(t.last_checkin for t in split.test)
        train_ids = {t.traj_id for t in split.train}
        assert not train_ids & {t.traj_id for t in split.test}

    def test_all_filtered_out_is_an_error(self):
        with pytest.raises(CorpusError, match="empty"):
            split_corpus([_traj("a", 100.0, n_visits=2)], 0.8, 3)

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2, 1.7])
    def test_fraction_validated(self, fraction):
        with pytest.raises(ValueError):
            split_corpus([_traj("a", 100.0)], fraction, 3)
