"""Synthetic check-in corpora for demos and tests.

Two generators: a 6-POI city whose training corpus deterministically repeats
an a->m->b pattern (fully memorizable, used to sanity-check the whole
pipeline end to end), and a city-scale fixture in the public check-in file
layout with exact corpus statistics (POI count, trajectory count, check-in
count) and a planted theme-biased transition structure so models have
something to learn.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CheckIn, Poi

DAY = 86_400


@dataclass(frozen=True)
class SynthCity:
    name: str
    pois: tuple[Poi, ...]
    checkins: tuple[CheckIn, ...]


def _traj_checkins(
    user_id: str,
    seq_id: str,
    visits: list[tuple[str, int, int]],
    extra_per_visit: dict[int, int] | None = None,
) -> list[CheckIn]:
    """Emit check-ins for (poi, arrival, departure) visits, in time order."""
    rows: list[CheckIn] = []
    for i, (poi_id, arrival, departure) in enumerate(visits):
        times = [arrival]
        n_extra = (extra_per_visit or {}).get(i, 0)
        if departure > arrival:
            step = (departure - arrival) / (n_extra + 1)
            times.extend(int(arrival + step * (k + 1)) for k in range(n_extra))
            times.append(departure)
        else:
            times.extend([arrival] * n_extra)
        for t in times:
            rows.append(CheckIn(user_id=user_id, poi_id=poi_id, timestamp=float(t), seq_id=seq_id))
    return rows


def memorization_city(
    n_pattern_train: int = 47,
    n_side: int = 5,
    n_pattern_test: int = 13,
    visit_seconds: int = 3600,
) -> SynthCity:
    """6-POI city: the corpus repeats a->m->b; x->y->z appears a few times.

    Visits are back to back, so each trajectory's elapsed time equals the sum
    of its visit durations and every POI's duration estimate is exactly
    `visit_seconds`. Side trajectories come first chronologically, so an 80%
    split trains on them plus most pattern copies and tests only on pattern
    copies.
    """
    themes = {"a": "Museum", "m": "Park", "b": "Shrine", "x": "Market", "y": "Theater", "z": "Museum"}
    pois = tuple(
        Poi(poi_id=p, category=themes[p], lat=34.0 + i * 0.01, lon=135.0 + i * 0.01, name=f"Poi {p.upper()}")
        for i, p in enumerate(["a", "m", "b", "x", "y", "z"])
    )
    checkins: list[CheckIn] = []
    base = 1_400_000_000
    seq = 0

    def add(route: list[str], start: int, user: str) -> None:
        nonlocal seq
        seq += 1
        visits = []
        t = start
        for poi_id in route:
            visits.append((poi_id, t, t + visit_seconds))
            t += visit_seconds
        checkins.extend(_traj_checkins(user, str(seq), visits))

    t0 = base
    for i in range(n_side):
        add(["x", "y", "z"], t0, f"u{i % 3}")
        t0 += DAY
    for i in range(n_pattern_train + n_pattern_test):
        add(["a", "m", "b"], t0, f"u{i % 7}")
        t0 += DAY
    return SynthCity(name="memorization", pois=pois, checkins=tuple(checkins))


def city_fixture(
    n_pois: int = 28,
    n_themes: int = 5,
    n_users: int = 450,
    n_trajectories: int = 1115,
    n_checkins: int = 7747,
    seed: int = 20140101,
) -> SynthCity:
    """City-scale corpus with exact POI/trajectory/check-in counts.

    Trajectory lengths and dwell times are drawn from a seeded generator;
    check-in totals are then adjusted exactly by adding or dropping interior
    check-ins inside visits, which never changes visit or trajectory counts.
    POI transitions are theme-biased so sequence models beat smoothed
    uniform baselines.
    """
    if n_checkins < n_trajectories:
        raise ValueError("need at least one check-in per trajectory")
    rng = np.random.default_rng(seed)
    themes = ["Museum", "Park", "Shrine", "Market", "Theater", "Garden", "Tower", "Bridge"][:n_themes]
    pois = tuple(
        Poi(
            poi_id=str(i + 1),
            category=themes[i % n_themes],
            lat=34.6 + float(rng.uniform(-0.08, 0.08)),
            lon=135.5 + float(rng.uniform(-0.08, 0.08)),
            name=f"{themes[i % n_themes]} {i + 1}",
        )
        for i in range(n_pois)
    )

    # Strongly peaked first-order transitions (a favorite and a secondary
    # successor per POI), the way real visit logs concentrate on a few
    # popular walks. Both sequence models can learn this in a handful of
    # epochs, which keeps the end-to-end fixture run fast.
    poi_ids = [p.poi_id for p in pois]
    favorite = {poi_ids[i]: poi_ids[(i * 7 + 3) % n_pois] for i in range(n_pois)}
    second = {poi_ids[i]: poi_ids[(i * 5 + 11) % n_pois] for i in range(n_pois)}
    weights = {}
    for p in poi_ids:
        w = np.full(n_pois, 0.5)
        for j, q in enumerate(poi_ids):
            if q == p:
                w[j] = 0.0
            elif q == favorite[p]:
                w[j] = 60.0
            elif q == second[p]:
                w[j] = 12.0
        weights[p] = w / w.sum()

    lengths = rng.choice([1, 2, 3, 4, 5, 6, 7, 8], size=n_trajectories,
                         p=[0.18, 0.22, 0.22, 0.15, 0.10, 0.06, 0.04, 0.03])
    users = [str(1000 + i) for i in range(n_users)]
    owner = [users[i % n_users] for i in range(n_trajectories)]

    trajs: list[dict] = []
    t0 = 1_388_534_400  # 2014-01-01
    for k in range(n_trajectories):
        n_visits = int(lengths[k])
        route = [poi_ids[int(rng.integers(0, n_pois))]]
        for _ in range(n_visits - 1):
            route.append(str(rng.choice(poi_ids, p=weights[route[-1]])))
        start = t0 + k * int(rng.integers(3600, 6 * 3600))
        visits = []
        t = start
        extra: dict[int, int] = {}
        for i, poi_id in enumerate(route):
            multi = rng.random() < 0.55  # some visits are single-photo
            dwell = int(rng.integers(600, 7200)) if multi else 0
            visits.append((poi_id, t, t + dwell))
            extra[i] = 0
            t += dwell + int(rng.integers(300, 3600))
        trajs.append(dict(user=owner[k], seq=str(k + 1), visits=visits, extra=extra))

    def checkin_count() -> int:
        total = 0
        for tr in trajs:
            for i, (_, arr, dep) in enumerate(tr["visits"]):
                total += (2 if dep > arr else 1) + tr["extra"][i]
        return total

    current = checkin_count()
    # Pad by inserting interior check-ins into multi-photo visits, or shrink
    # by collapsing multi-photo visits to single-photo ones.
    k = 0
    while current < n_checkins:
        tr = trajs[k % n_trajectories]
        for i, (_, arr, dep) in enumerate(tr["visits"]):
            if dep > arr and current < n_checkins:
                tr["extra"][i] += 1
                current += 1
        k += 1
    k = 0
    while current > n_checkins:
        tr = trajs[k % n_trajectories]
        for i in range(len(tr["visits"])):
            poi_id, arr, dep = tr["visits"][i]
            if current > n_checkins and tr["extra"][i] > 0:
                tr["extra"][i] -= 1
                current -= 1
            elif current > n_checkins and dep > arr:
                tr["visits"][i] = (poi_id, arr, arr)
                current -= 1
        k += 1
        if k > 10 * n_trajectories:
            raise RuntimeError("cannot reach requested check-in count")

    checkins: list[CheckIn] = []
    for tr in trajs:
        checkins.extend(_traj_checkins(tr["user"], tr["seq"], tr["visits"], tr["extra"]))
    return SynthCity(name="fixture", pois=pois, checkins=tuple(checkins))


def write_city_files(city: SynthCity, out_dir: str | Path) -> tuple[Path, Path]:
    """Write the POI table and check-in file in the public dataset layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    poi_path = out / f"POI-{city.name}.csv"
    checkin_path = out / f"checkins-{city.name}.csv"
    with poi_path.open("w", encoding="utf-8") as fh:
        fh.write("poiID;poiName;lat;lon;theme\n")
        for poi in city.pois:
            fh.write(f"{poi.poi_id};{poi.name};{poi.lat:.6f};{poi.lon:.6f};{poi.category}\n")
    theme_of = {p.poi_id: p.category for p in city.pois}
    freq: dict[str, int] = {}
    for ci in city.checkins:
        freq[ci.poi_id] = freq.get(ci.poi_id, 0) + 1
    with checkin_path.open("w", encoding="utf-8") as fh:
        fh.write("photoID;userID;dateTaken;poiID;poiTheme;poiFreq;seqID\n")
        for photo_id, ci in enumerate(city.checkins, start=1):
            fh.write(
                f"{photo_id};{ci.user_id};{int(ci.timestamp)};{ci.poi_id};"
                f"{theme_of[ci.poi_id]};{freq[ci.poi_id]};{ci.seq_id}\n"
            )
    return checkin_path, poi_path
