"""Per-POI visit-duration statistics via bootstrap resampling.

A visit's duration is its departure minus arrival. For each POI the observed
durations are resampled with replacement B times; the point estimate is the
mean of the replicate means and the confidence interval is read off the
replicate-mean percentiles, so no distributional assumption is made.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Trajectory, sort_poi_key
from .errors import DataError

# Generator identity recorded in every artifact so runs replay across machines.
RNG_IDENTITY = "numpy.random.default_rng(PCG64)"

# Cap on the replicate-by-sample index matrix held in memory at once.
_CHUNK_CELLS = 20_000_000


class NoSamplesError(DataError):
    """Bootstrap was asked to estimate from an empty sample list."""


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 10_000
    alpha: float = 10.0
    rng_seed: int = 7

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if not 0.0 < self.alpha < 100.0:
            raise ValueError(f"alpha must be in (0,100), got {self.alpha}")


@dataclass(frozen=True)
class DurationEstimate:
    poi_id: str
    point: float
    ci_low: float
    ci_high: float
    n_samples: int

    def __post_init__(self) -> None:
        if not (self.ci_low <= self.point + 1e-9 and self.point <= self.ci_high + 1e-9):
            raise ValueError(
                f"point estimate {self.point} outside CI [{self.ci_low}, {self.ci_high}] for poi {self.poi_id}"
            )
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def stream_seed(seed: int, key: str | None) -> int | list[int]:
    """Seed material for a POI-keyed RNG stream.

    Deriving the stream from (seed, key) makes per-POI estimation order- and
    parallelism-independent: serial and fanned-out runs agree bit for bit.
    """
    if key is None:
        return seed
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return [seed, int.from_bytes(digest[:8], "little")]


def get_samples(poi_id: str, trajectories: Iterable[Trajectory]) -> list[float]:
    """All visit durations at `poi_id` across trajectories, in encounter order."""
    return [v.duration for t in trajectories for v in t.visits if v.poi_id == poi_id]


def bootstrap_estimate(
    samples: Sequence[float],
    cfg: BootstrapConfig,
    poi_id: str = "",
) -> DurationEstimate:
    """Percentile-bootstrap estimate of the mean duration.

    Draws cfg.replicates resamples of size len(samples) with replacement from
    a seeded stream (derived from (rng_seed, poi_id) when poi_id is given),
    takes each resample's mean, and reports the mean of those replicate means
    with the (alpha/2, 100-alpha/2) percentile interval.
    """
    if len(samples) == 0:
        raise NoSamplesError(f"no duration samples for poi {poi_id!r}")
    data = np.asarray(samples, dtype=np.float64)
    n = data.shape[0]
    rng = np.random.default_rng(stream_seed(cfg.rng_seed, poi_id or None))

    means = np.empty(cfg.replicates, dtype=np.float64)
    # Chunked so replicates * n never materializes one huge index matrix.
    chunk = max(1, min(cfg.replicates, _CHUNK_CELLS // n))
    done = 0
    while done < cfg.replicates:
        take = min(chunk, cfg.replicates - done)
        idx = rng.integers(0, n, size=(take, n))
        means[done : done + take] = data[idx].mean(axis=1)
        done += take

    lo, hi = np.percentile(means, [cfg.alpha / 2.0, 100.0 - cfg.alpha / 2.0])
    return DurationEstimate(
        poi_id=poi_id,
        point=float(means.mean()),
        ci_low=float(lo),
        ci_high=float(hi),
        n_samples=n,
    )


def estimate_all(
    trajectories: Sequence[Trajectory],
    cfg: BootstrapConfig,
) -> dict[str, DurationEstimate]:
    """Bootstrap estimate per POI over the corpus; unvisited POIs are absent."""
    samples: dict[str, list[float]] = {}
    for traj in trajectories:
        for visit in traj.visits:
            samples.setdefault(visit.poi_id, []).append(visit.duration)
    return {
        poi_id: bootstrap_estimate(samples[poi_id], cfg, poi_id=poi_id)
        for poi_id in sorted(samples, key=sort_poi_key)
    }


def scheduled_seconds(estimate: DurationEstimate, min_duration: float = 0.0) -> float:
    """Duration used for budget arithmetic: the point estimate, floored.

    The floor is off by default; single-photo visits legitimately yield
    0-second estimates and the floor exists only for realistic demos.
    """
    return max(estimate.point, min_duration)


def export_duration_table(
    estimates: Mapping[str, DurationEstimate],
    out: IO[str],
    meta: Mapping[str, object] | None = None,
) -> None:
    """Write estimates as `poiID;n;point_s;ci_low_s;ci_high_s` with `#` meta lines."""
    for key, value in (meta or {}).items():
        out.write(f"# {key}={value}\n")
    out.write("poiID;n;point_s;ci_low_s;ci_high_s\n")
    for poi_id in sorted(estimates, key=sort_poi_key):
        e = estimates[poi_id]
        out.write(f"{poi_id};{e.n_samples};{e.point:.6f};{e.ci_low:.6f};{e.ci_high:.6f}\n")


def load_duration_table(source: IO[str]) -> tuple[dict[str, DurationEstimate], dict[str, str]]:
    """Inverse of export_duration_table; returns (estimates, meta)."""
    meta: dict[str, str] = {}
    estimates: dict[str, DurationEstimate] = {}
    header_seen = False
    for line_no, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line != "poiID;n;point_s;ci_low_s;ci_high_s":
                raise DataError(f"durations table line {line_no}: unexpected header {line!r}")
            header_seen = True
            continue
        cells = line.split(";")
        if len(cells) != 5:
            raise DataError(f"durations table line {line_no}: expected 5 fields, got {len(cells)}")
        estimates[cells[0]] = DurationEstimate(
            poi_id=cells[0],
            point=float(cells[2]),
            ci_low=float(cells[3]),
            ci_high=float(cells[4]),
            n_samples=int(cells[1]),
        )
    if not header_seen:
        raise DataError("durations table has no header row")
    return estimates, meta
