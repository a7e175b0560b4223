"""Command-line pipeline: synth, ingest, durations, train, predict, eval, serve.

Every stage reads the same config file (overridable by flags), re-derives the
trajectory corpus and chronological split deterministically from the input
files, and embeds a config/dataset fingerprint in what it writes so later
stages can refuse artifacts built from different inputs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

import click

from .config import ConfigError, PipelineConfig, config_fingerprint, load_config
from .corpus import CsvSchema, build_trajectories, load_checkins, load_pois, split_corpus
from .durations import (
    RNG_IDENTITY,
    estimate_all,
    export_duration_table,
    load_duration_table,
)
from .errors import DataError, PoiPlanError
from .evaluation import epoch_sweep, run_eval, write_report_dsv, write_report_json, write_sweep_dsv
from .model import train as train_model
from .modelio import fingerprint as model_fingerprint
from .modelio import load as load_model
from .modelio import save as save_model
from .predictor import (
    PredictError,
    PredictRequest,
    fit_markov,
    itinerary_record,
    predict_itinerary,
    predict_markov,
)
from .sentences import build_vocab, generate_corpus
from .synth import city_fixture, memorization_city, write_city_files


def dataset_hash(cfg: PipelineConfig) -> str:
    h = hashlib.sha256()
    for path in (cfg.checkins_path, cfg.pois_path):
        h.update(Path(path).read_bytes())
    return h.hexdigest()


def load_corpus(cfg: PipelineConfig):
    """(pois, checkins, rejects, trajectories, split) re-derived from inputs."""
    with open(cfg.pois_path, encoding="utf-8") as fh:
        pois = load_pois(fh)
    with open(cfg.checkins_path, encoding="utf-8") as fh:
        checkins, rejects = load_checkins(fh, CsvSchema(), pois)
    trajectories = build_trajectories(checkins, gap_seconds=cfg.gap_hours * 3600.0)
    split = split_corpus(trajectories, cfg.split_fraction, cfg.min_pois)
    return pois, checkins, rejects, trajectories, split


def _report_path(cfg: PipelineConfig, stem: str, suffix: str) -> Path:
    reports = Path(cfg.reports_dir)
    reports.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    return reports / f"{stem}-{stamp}.{suffix}"


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Pipeline config file (key = value lines).")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config key, e.g. --set model.epochs=5")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, overrides: tuple[str, ...]) -> None:
    """Tour-itinerary pipeline over POI check-in trajectories."""
    kv: dict[str, str] = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise click.UsageError(f"--set expects KEY=VALUE, got {item!r}")
        kv[key.strip()] = value.strip()
    ctx.obj = load_config(config_path, kv)


@cli.command()
@click.option("--city", "kind", type=click.Choice(["fixture", "memorization"]), default="fixture")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=20140101, show_default=True)
@click.pass_obj
def synth(cfg: PipelineConfig, kind: str, out_dir: str, seed: int) -> None:
    """Generate a synthetic check-in corpus in the public file layout."""
    city = city_fixture(seed=seed) if kind == "fixture" else memorization_city()
    checkin_path, poi_path = write_city_files(city, out_dir)
    click.echo(f"wrote {checkin_path}")
    click.echo(f"wrote {poi_path}")


@cli.command()
@click.pass_obj
def ingest(cfg: PipelineConfig) -> None:
    """Reconstruct trajectories and the chronological split; print corpus stats."""
    pois, checkins, rejects, trajectories, split = load_corpus(cfg)
    users = {c.user_id for c in checkins}
    lines = [
        f"City: {cfg.city}",
        f"No. of POIs: {len(pois)}",
        f"No. of Users: {len(users)}",
        f"No. of Trajectories: {len(trajectories)}",
        f"No. of check-ins: {len(checkins)}",
        f"Rejected rows: {len(rejects)}",
        f"Eligible trajectories (>= {cfg.min_pois} visits): {len(split.train) + len(split.test)}",
        f"Training trajectories: {len(split.train)}",
        f"Evaluation trajectories: {len(split.test)}",
        f"Dataset hash: {dataset_hash(cfg)}",
    ]
    for line in lines:
        click.echo(line)
    summary = _report_path(cfg, f"ingest-{cfg.city}", "txt")
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if rejects:
        rejects_path = _report_path(cfg, f"rejects-{cfg.city}", "csv")
        with rejects_path.open("w", encoding="utf-8") as fh:
            fh.write("line;reason;raw\n")
            for r in rejects:
                fh.write(f"{r.line_no};{r.reason};{r.raw}\n")
        click.echo(f"rejects report: {rejects_path}")
    traj_path = _report_path(cfg, f"trajectories-{cfg.city}", "jsonl")
    with traj_path.open("w", encoding="utf-8") as fh:
        for t in trajectories:
            fh.write(json.dumps({
                "traj_id": t.traj_id,
                "user_id": t.user_id,
                "visits": [[v.poi_id, v.arrival, v.departure] for v in t.visits],
            }) + "\n")
    click.echo(f"summary: {summary}")
    click.echo(f"trajectories: {traj_path}")


@cli.command()
@click.pass_obj
def durations(cfg: PipelineConfig) -> None:
    """Bootstrap per-POI visit durations over the training split."""
    _, _, _, _, split = load_corpus(cfg)
    estimates = estimate_all(split.train, cfg.bootstrap)
    out_path = Path(cfg.durations_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "dataset_hash": dataset_hash(cfg),
        "rng_identity": RNG_IDENTITY,
        "bootstrap_replicates": cfg.bootstrap.replicates,
        "bootstrap_alpha": cfg.bootstrap.alpha,
        "bootstrap_seed": cfg.bootstrap.rng_seed,
        "split_fraction": cfg.split_fraction,
        "min_pois": cfg.min_pois,
    }
    with out_path.open("w", encoding="utf-8") as fh:
        export_duration_table(estimates, fh, meta)
    click.echo(f"estimated {len(estimates)} POIs -> {out_path}")


@cli.command()
@click.pass_obj
def train(cfg: PipelineConfig) -> None:
    """Generate training pairs from the training split and fit the model."""
    pois, _, _, _, split = load_corpus(cfg)
    vocab = build_vocab(list(pois.values()))
    pairs = generate_corpus(split.train, vocab, cfg.model.max_seq_len)
    click.echo(f"{len(pairs)} training pairs from {len(split.train)} trajectories")
    model = train_model(pairs, cfg.model, vocab)
    out_path = Path(cfg.model_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    digest = save_model(model, out_path)
    click.echo(f"final epoch loss: {model.train_log[-1]:.6f}")
    click.echo(f"model -> {out_path} (sha256 {digest[:16]})")


def _load_serving_artifacts(cfg: PipelineConfig):
    model = load_model(cfg.model_path)
    with open(cfg.durations_path, encoding="utf-8") as fh:
        estimates, meta = load_duration_table(fh)
    with open(cfg.pois_path, encoding="utf-8") as fh:
        pois = load_pois(fh)
    vocab = build_vocab(list(pois.values()))
    if vocab.fingerprint() != model.vocab.fingerprint():
        raise DataError("model was trained under a different vocabulary than the POI table")
    if "dataset_hash" in meta and meta["dataset_hash"] != dataset_hash(cfg):
        raise DataError("durations table was built from different input files")
    return model, estimates, pois


@cli.command()
@click.option("--source", required=True)
@click.option("--dest", required=True)
@click.option("--budget", "budget_s", type=float, required=True, help="Time budget in seconds.")
@click.option("--method", type=click.Choice(["mlm", "markov"]), default="mlm", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit the itinerary as JSON.")
@click.pass_obj
def predict(cfg: PipelineConfig, source: str, dest: str, budget_s: float, method: str, as_json: bool) -> None:
    """Predict an itinerary between two POIs under a time budget."""
    if source == dest:
        raise click.UsageError("source and destination POI must differ")
    if budget_s <= 0:
        raise click.UsageError("budget must be positive")
    model, estimates, pois = _load_serving_artifacts(cfg)
    req = PredictRequest(source=source, dest=dest, budget_s=budget_s)
    if method == "mlm":
        itin = predict_itinerary(model, estimates, req, cfg.min_duration_s)
    else:
        _, _, _, _, split = load_corpus(cfg)
        itin = predict_markov(fit_markov(split.train, model.vocab), estimates, req, cfg.min_duration_s)
    record = itinerary_record(itin, pois, estimates)
    if as_json:
        click.echo(json.dumps(record, indent=2, sort_keys=True))
        return
    click.echo(f"{'#':>2} {'POI':<6} {'name':<24} {'category':<12} {'dur(s)':>9} {'cum(s)':>9}  prob")
    for i, stop in enumerate(record["stops"]):
        prob = "" if stop["probability"] is None else f"{stop['probability']:.3f}"
        click.echo(
            f"{i + 1:>2} {stop['poi_id']:<6} {stop['name'][:24]:<24} {stop['category'][:12]:<12} "
            f"{stop['duration_s']:>9.0f} {stop['cumulative_s']:>9.0f}  {prob}"
        )
    click.echo(f"total {record['total_duration_s']:.0f}s of budget {record['budget_s']:.0f}s "
               f"(stop: {record['stop_reason']}{', budget exceeded' if record['budget_exceeded'] else ''})")


@cli.command(name="eval")
@click.option("--epoch-sweep", "sweep_grid", default=None, metavar="E1,E2,...",
              help="Train and score one model per epoch count instead of a single eval.")
@click.pass_obj
def eval_cmd(cfg: PipelineConfig, sweep_grid: str | None) -> None:
    """Score the model and the Markov baseline on the held-out test split."""
    pois, _, _, _, split = load_corpus(cfg)
    meta = dict(config_fingerprint(cfg))
    meta["dataset_hash"] = dataset_hash(cfg)
    meta["rng_identity"] = RNG_IDENTITY

    if sweep_grid is not None:
        try:
            grid = [int(x) for x in sweep_grid.split(",") if x.strip()]
        except ValueError:
            raise click.UsageError(f"--epoch-sweep expects integers, got {sweep_grid!r}")
        if not grid:
            raise click.UsageError("--epoch-sweep got an empty grid")
        vocab = build_vocab(list(pois.values()))
        pairs = generate_corpus(split.train, vocab, cfg.model.max_seq_len)
        estimates = estimate_all(split.train, cfg.bootstrap)
        sweep = epoch_sweep(pairs, vocab, estimates, split, grid, cfg.model,
                            cfg.min_duration_s, cfg.conventional_prf, meta)
        path = _report_path(cfg, f"sweep-{cfg.city}", "csv")
        with path.open("w", encoding="utf-8") as fh:
            write_sweep_dsv(sweep, fh)
        for epochs, report in sweep:
            click.echo(f"epochs={epochs}: F1={report.mean_f1:.4f} recall={report.mean_recall:.4f} "
                       f"precision={report.mean_precision:.4f}")
        click.echo(f"sweep report: {path}")
        return

    model, estimates, _ = _load_serving_artifacts(cfg)
    meta["model_fingerprint"] = model_fingerprint(model)
    meta["vocab_hash"] = model.vocab.fingerprint()
    markov = fit_markov(split.train, model.vocab)
    reports = {
        "mlm": run_eval(lambda r: predict_itinerary(model, estimates, r, cfg.min_duration_s),
                        split, cfg.conventional_prf, {**meta, "method": "mlm"}),
        "markov": run_eval(lambda r: predict_markov(markov, estimates, r, cfg.min_duration_s),
                           split, cfg.conventional_prf, {**meta, "method": "markov"}),
    }
    for method, report in reports.items():
        csv_path = _report_path(cfg, f"eval-{method}-{cfg.city}", "csv")
        with csv_path.open("w", encoding="utf-8") as fh:
            write_report_dsv(report, fh)
        json_path = csv_path.with_suffix(".json")
        with json_path.open("w", encoding="utf-8") as fh:
            write_report_json(report, fh)
        click.echo(f"{method}: F1={report.mean_f1:.4f} recall={report.mean_recall:.4f} "
                   f"precision={report.mean_precision:.4f} predicted_len={report.mean_predicted_len:.3f} "
                   f"actual_len={report.mean_actual_len:.3f} ({len(report.rows)} cases, "
                   f"{len(report.skipped)} skipped)")
        click.echo(f"{method} reports: {csv_path} {json_path}")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.pass_obj
def serve(cfg: PipelineConfig, host: str, port: int) -> None:
    """Serve the prediction HTTP API for the web planner."""
    import uvicorn

    from .server import create_app

    model, estimates, pois = _load_serving_artifacts(cfg)
    app = create_app(model, estimates, pois, min_duration=cfg.min_duration_s)
    uvicorn.run(app, host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        return 1
    except ConfigError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 1
    except PredictError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except (DataError, FileNotFoundError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except PoiPlanError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
