"""Check-in ingestion, trajectory reconstruction and the chronological split.

Input is delimiter-separated check-in records (one geo-tagged photo per row,
already resolved to a POI id). Consecutive check-ins of one user at one POI
collapse into a single visit with an arrival/departure span; visits grouped
by the source sequence id (or by time gaps when that id is absent) form a
trajectory. Trajectories are split train/test chronologically by their last
check-in time so no trajectory straddles the boundary.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from .errors import DataError

DEFAULT_GAP_SECONDS = 8 * 3600.0


class CorpusError(DataError):
    """The corpus (or a corpus file) cannot be used."""


def sort_poi_key(poi_id: str):
    """Sort key ordering numeric ids numerically, everything else lexically."""
    return (0, int(poi_id), "") if poi_id.isdigit() else (1, 0, poi_id)


@dataclass(frozen=True)
class Poi:
    poi_id: str
    category: str
    lat: float
    lon: float
    name: str = ""


@dataclass(frozen=True)
class CheckIn:
    user_id: str
    poi_id: str
    timestamp: float
    seq_id: str | None = None


@dataclass(frozen=True)
class Visit:
    poi_id: str
    arrival: float
    departure: float

    @property
    def duration(self) -> float:
        return self.departure - self.arrival


@dataclass(frozen=True)
class Trajectory:
    traj_id: str
    user_id: str
    visits: tuple[Visit, ...]

    @property
    def last_checkin(self) -> float:
        return max(v.departure for v in self.visits)

    @property
    def first_checkin(self) -> float:
        return self.visits[0].arrival


@dataclass(frozen=True)
class SplitCorpus:
    train: tuple[Trajectory, ...]
    test: tuple[Trajectory, ...]
    split_fraction: float


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a check-in file (header names, `;`-separated)."""

    delimiter: str = ";"
    photo_id: str = "photoID"
    user_id: str = "userID"
    timestamp: str = "dateTaken"
    poi_id: str = "poiID"
    theme: str = "poiTheme"
    seq_id: str = "seqID"


@dataclass(frozen=True)
class RejectedRow:
    line_no: int
    reason: str
    raw: str


def _split_line(line: str, delimiter: str) -> list[str]:
    return [cell.strip() for cell in line.rstrip("\r\n").split(delimiter)]


def load_pois(source: IO[str], delimiter: str = ";") -> dict[str, Poi]:
    """Read a POI table (poiID;poiName;lat;lon;theme) into an id-keyed dict.

    Raises CorpusError on duplicate ids, empty categories or a broken header;
    a POI table is curated data, so unlike check-ins it is loaded strictly.
    """
    lines = [ln for ln in source if ln.strip()]
    if not lines:
        raise CorpusError("POI table is empty")
    header = _split_line(lines[0], delimiter)
    required = ["poiID", "poiName", "lat", "lon", "theme"]
    try:
        cols = {name: header.index(name) for name in required}
    except ValueError as exc:
        raise CorpusError(f"POI table header {header!r} is missing a column: {exc}") from exc
    pois: dict[str, Poi] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        cells = _split_line(line, delimiter)
        if len(cells) < len(header):
            raise CorpusError(f"POI table line {line_no}: expected {len(header)} fields, got {len(cells)}")
        poi_id = cells[cols["poiID"]]
        if poi_id in pois:
            raise CorpusError(f"POI table line {line_no}: duplicate poi id {poi_id!r}")
        category = cells[cols["theme"]]
        if not category:
            raise CorpusError(f"POI table line {line_no}: empty theme for poi {poi_id!r}")
        try:
            lat, lon = float(cells[cols["lat"]]), float(cells[cols["lon"]])
        except ValueError as exc:
            raise CorpusError(f"POI table line {line_no}: bad coordinates: {exc}") from exc
        pois[poi_id] = Poi(poi_id=poi_id, category=category, lat=lat, lon=lon, name=cells[cols["poiName"]])
    return pois


def load_checkins(
    source: IO[str],
    schema: CsvSchema = CsvSchema(),
    pois: Mapping[str, Poi] | None = None,
) -> tuple[list[CheckIn], list[RejectedRow]]:
    """Parse check-in rows, preserving file order.

    Malformed rows (wrong field count, non-integer or non-positive timestamp,
    unknown poi id when a POI table is given) are collected into the rejects
    list with their 1-based line numbers instead of being dropped silently.
    An empty stream yields no check-ins and no rejects.
    """
    lines = list(source)
    if not any(ln.strip() for ln in lines):
        return [], []
    header = _split_line(lines[0], schema.delimiter)
    required = [schema.photo_id, schema.user_id, schema.timestamp, schema.poi_id]
    try:
        cols = {name: header.index(name) for name in required}
    except ValueError as exc:
        raise CorpusError(f"check-in header {header!r} is missing a column: {exc}") from exc
    seq_col = header.index(schema.seq_id) if schema.seq_id in header else None

    checkins: list[CheckIn] = []
    rejects: list[RejectedRow] = []

    def reject(line_no: int, reason: str, raw: str) -> None:
        rejects.append(RejectedRow(line_no=line_no, reason=reason, raw=raw.rstrip("\r\n")))

    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = _split_line(line, schema.delimiter)
        if len(cells) != len(header):
            reject(line_no, f"expected {len(header)} fields, got {len(cells)}", line)
            continue
        try:
            ts = int(cells[cols[schema.timestamp]])
        except ValueError:
            reject(line_no, f"timestamp {cells[cols[schema.timestamp]]!r} is not an integer", line)
            continue
        if ts <= 0:
            reject(line_no, f"timestamp {ts} is not positive", line)
            continue
        poi_id = cells[cols[schema.poi_id]]
        if pois is not None and poi_id not in pois:
            reject(line_no, f"unknown poi id {poi_id!r}", line)
            continue
        seq_id: str | None = None
        if seq_col is not None and seq_col < len(cells) and cells[seq_col]:
            seq_id = cells[seq_col]
        checkins.append(
            CheckIn(user_id=cells[cols[schema.user_id]], poi_id=poi_id, timestamp=float(ts), seq_id=seq_id)
        )
    return checkins, rejects


def _consolidate(rows: Sequence[CheckIn]) -> tuple[Visit, ...]:
    """Collapse runs of consecutive same-POI check-ins into visits."""
    visits: list[Visit] = []
    run_poi: str | None = None
    run_start = run_end = 0.0
    for row in rows:
        if row.poi_id == run_poi:
            run_end = row.timestamp
        else:
            if run_poi is not None:
                visits.append(Visit(run_poi, run_start, run_end))
            run_poi, run_start, run_end = row.poi_id, row.timestamp, row.timestamp
    if run_poi is not None:
        visits.append(Visit(run_poi, run_start, run_end))
    return tuple(visits)


def build_trajectories(
    checkins: Iterable[CheckIn],
    gap_seconds: float = DEFAULT_GAP_SECONDS,
) -> list[Trajectory]:
    """Reconstruct per-user trajectories from check-ins.

    Check-ins carrying a seq id are grouped by (user, seq id); the rest are
    sorted per user by timestamp and split whenever the gap between
    consecutive check-ins exceeds `gap_seconds`. Within every group, runs of
    the same POI consolidate into one visit spanning first to last timestamp.
    """
    with_seq: dict[tuple[str, str], list[tuple[float, int, CheckIn]]] = defaultdict(list)
    loose: dict[str, list[tuple[float, int, CheckIn]]] = defaultdict(list)
    for order, ci in enumerate(checkins):
        keyed = (ci.timestamp, order, ci)
        if ci.seq_id is not None:
            with_seq[(ci.user_id, ci.seq_id)].append(keyed)
        else:
            loose[ci.user_id].append(keyed)

    trajectories: list[Trajectory] = []
    for (user_id, seq_id), rows in with_seq.items():
        rows.sort(key=lambda r: (r[0], r[1]))
        visits = _consolidate([r[2] for r in rows])
        trajectories.append(Trajectory(traj_id=f"{user_id}:{seq_id}", user_id=user_id, visits=visits))

    for user_id, rows in loose.items():
        rows.sort(key=lambda r: (r[0], r[1]))
        segment: list[CheckIn] = []
        n_segments = 0

        def flush() -> None:
            nonlocal n_segments
            if segment:
                n_segments += 1
                trajectories.append(
                    Trajectory(
                        traj_id=f"{user_id}:auto{n_segments}",
                        user_id=user_id,
                        visits=_consolidate(segment),
                    )
                )
                segment.clear()

        prev_ts: float | None = None
        for _, _, ci in rows:
            if prev_ts is not None and ci.timestamp - prev_ts > gap_seconds:
                flush()
            segment.append(ci)
            prev_ts = ci.timestamp
        flush()

    trajectories.sort(key=lambda t: (t.user_id, t.first_checkin, t.traj_id))
    return trajectories


def split_corpus(
    trajectories: Sequence[Trajectory],
    fraction: float = 0.8,
    min_pois: int = 3,
) -> SplitCorpus:
    """Chronological train/test split over eligible trajectories.

    Trajectories with fewer than `min_pois` consolidated visits are excluded.
    Survivors are sorted ascending by last check-in time (ties broken by
    traj_id for determinism); the first ceil(fraction * n) become the
    training set.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"split fraction must be in (0,1), got {fraction}")
    if min_pois < 1:
        raise ValueError(f"min_pois must be >= 1, got {min_pois}")
    eligible = [t for t in trajectories if len(t.visits) >= min_pois]
    if not eligible:
        raise CorpusError(f"no trajectory has at least {min_pois} visits; corpus is empty after filtering")
    eligible.sort(key=lambda t: (t.last_checkin, t.traj_id))
    n_train = math.ceil(fraction * len(eligible))
    return SplitCorpus(
        train=tuple(eligible[:n_train]),
        test=tuple(eligible[n_train:]),
        split_fraction=fraction,
    )
