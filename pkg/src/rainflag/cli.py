"""``rainflag`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""
from __future__ import annotations

import logging
import os
import socket
import sys
import traceback
from pathlib import Path

import click

from rainflag import dataio, pipeline
from rainflag.config import RunConfig
from rainflag.errors import DataError, RainflagError
from rainflag.graph import build_adjacency, write_edges
from rainflag.model import PRESETS
from rainflag.schemas import dumps

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("rainflag")


class AddressInUse(click.ClickException):
    exit_code = EXIT_USAGE


class StoreUnwritable(click.ClickException):
    exit_code = EXIT_USAGE


def _load_config(config: str | None, overrides: dict) -> RunConfig:
    try:
        base = RunConfig.load(config) if config else RunConfig()
        return base.merged(overrides)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"config: {exc}") from None


def data_options(f):
    """--config plus the input/output path flags shared by data commands."""
    options = [
        click.option("--config", "config", type=click.Path(exists=True, dir_okay=False),
                     help="Flat key = value run config; flags override its values."),
        click.option("--stations", help="Stations CSV (station_id,name,latitude_deg,longitude_deg,altitude_m)."),
        click.option("--records", help="Daily records CSV (station_id,date,precip_mm)."),
        click.option("--output-dir", help="Directory receiving every output file [default: out]."),
        click.option("--max-missing-frac", type=float,
                     help="Drop stations missing more than this fraction of days [default: 0.2]."),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


threshold_option = click.option(
    "--heavy-threshold-mm", type=float, help="Heavy-rain threshold, inclusive [default: 8.0]."
)


def graph_options(f):
    options = [
        click.option("--adjacency", type=click.Choice(["inverse_distance", "knn", "distance"]),
                     help="Edge weighting scheme [default: inverse_distance]."),
        click.option("--epsilon-km", type=float, help="Distance floor in 1/(d + eps) weights [default: 1.0]."),
        click.option("--self-loop-weight", type=float, help="Diagonal adjacency weight [default: 1.0]."),
        click.option("--knn-k", type=int, help="Neighbours kept per node for the knn scheme [default: 3]."),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def cli(verbose: int):
    """Rain-gauge ingestion, station-graph GCN training and heavy-rain alerts."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True, envvar="RAINFLAG_HOST", help="Listen address.")
@click.option("--port", default=8000, show_default=True, type=int, envvar="RAINFLAG_PORT", help="Listen port.")
@click.option("--store", default="readings.log", show_default=True, envvar="RAINFLAG_STORE",
              help="Append-only reading store file.")
@click.option("--fsync/--no-fsync", default=False, show_default=True, help="fsync the store after every append.")
def serve(host: str, port: int, store: str, fsync: bool):
    """Run the HTTP ingest gateway until interrupted."""
    import uvicorn

    from rainflag.service import create_app

    try:
        Path(store).parent.mkdir(parents=True, exist_ok=True)
        with open(store, "a", encoding="ascii"):
            pass
    except OSError as exc:
        raise StoreUnwritable(f"store {store} is not writable: {exc}") from None
    sock = socket.socket(socket.AF_INET6 if ":" in host else socket.AF_INET)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise AddressInUse(f"cannot listen on {host}:{port}: {exc.strerror}") from None
    sock.listen(128)
    server = uvicorn.Server(uvicorn.Config(create_app(store, fsync=fsync), log_level="info"))
    server.run(sockets=[sock])


@cli.command()
@click.argument("frames", type=click.File("r"))
@click.option("--url", default="http://127.0.0.1:8000", show_default=True, envvar="RAINFLAG_URL",
              help="Gateway base URL.")
@click.option("--sender", default="cli", show_default=True, help="Value sent in the From field.")
def send(frames, url: str, sender: str):
    """Post frames (one per line) to a running gateway."""
    import httpx

    accepted = rejected = 0
    with httpx.Client(base_url=url, timeout=10.0) as client:
        for line in frames:
            frame = line.rstrip("\r\n")
            if not frame:
                continue
            resp = client.post("/webhook/sms", data={"From": sender, "Body": frame})
            if resp.status_code == 200:
                accepted += 1
            else:
                rejected += 1
                click.echo(f"rejected ({resp.status_code}): {resp.json().get('reason')}: {frame}", err=True)
    click.echo(f"accepted {accepted}, rejected {rejected}")
    if rejected:
        raise click.exceptions.Exit(EXIT_DATA)


@cli.command()
@click.option("--store", required=True, type=click.Path(dir_okay=False), help="Reading store file.")
@click.option("--station-map", required=True, type=click.Path(exists=True, dir_okay=False),
              help="CSV with header device_id,station_id.")
@click.option("--output-dir", default="out", show_default=True, help="Directory for records.csv.")
def export(store: str, station_map: str, output_dir: str):
    """Aggregate the reading store into a daily records CSV."""
    from rainflag.service.store import export_records, load_station_map

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, warnings = export_records(store, load_station_map(station_map), out / "records.csv")
    unknown = sorted({w.device_id for w in warnings})
    for dev in unknown:
        click.echo(f"warning: UnknownDevice {dev} ({sum(w.device_id == dev for w in warnings)} messages)", err=True)
    click.echo(f"wrote {len(records)} records to {out / 'records.csv'}")


@cli.command()
@data_options
@graph_options
@threshold_option
@click.option("--model", type=click.Choice(sorted(PRESETS), case_sensitive=False),
              help="Layer preset: A 10-10-10-10, B 16-32-64-128, C 128-64-32, D 32-64-128 [default: A].")
@click.option("--gcl-widths", help="Comma-separated GCL widths; overrides --model.")
@click.option("--fc-width", type=int, help="Fully connected head width [default: 32].")
@click.option("--window-length", type=int, help="Days of past rainfall per feature vector [default: 7].")
@click.option("--learning-rate", type=float, help="Adam learning rate [default: 0.01].")
@click.option("--batch-size", type=int, help="Snapshots (days) per batch [default: 64].")
@click.option("--max-epochs", type=int, help="Epoch cap [default: 500].")
@click.option("--patience", type=int, help="Early-stopping patience in epochs [default: 10].")
@click.option("--seed", type=int, help="Initialization seed [default: 0].")
@click.option("--split", help="Train,val,test fractions [default: 0.7,0.2,0.1].")
def train(config, **flags):
    """Clean data, build the graph, train, and write checkpoint + report."""
    cfg = _load_config(config, flags)
    _, report = pipeline.run_train(cfg)
    click.echo(f"checkpoint: {cfg.output_path(pipeline.CHECKPOINT_NAME)}")
    click.echo(f"report: {cfg.output_path(pipeline.TRAIN_REPORT_NAME)}")
    click.echo(f"epochs {report.epochs_run}, best val MSE {report.best_val_mse:.4f} at epoch {report.best_epoch + 1}")


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False), help="Trained checkpoint.")
@data_options
def evaluate(checkpoint, config, **flags):
    """MSE, MAE, Pearson r and heavy-event scores on the test block."""
    cfg = _load_config(config, flags)
    click.echo(dumps(pipeline.run_evaluate(checkpoint, cfg)), nl=False)


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False), help="Trained checkpoint.")
@click.option("--records", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Recent records covering the trailing window for every station.")
@click.option("--output-dir", default="out", show_default=True, help="Directory for forecast.json.")
def predict(checkpoint, records, output_dir):
    """Next-day per-station rainfall with heavy-rain flags."""
    click.echo(dumps(pipeline.run_predict(checkpoint, records, output_dir)), nl=False)


@cli.command()
@data_options
@threshold_option
def climatology(config, **flags):
    """Average heavy-rain days per year per station, as CSV."""
    cfg = _load_config(config, flags)
    rows = pipeline.run_climatology(cfg)
    click.echo(f"wrote {len(rows)} stations to {cfg.output_path(pipeline.CLIMATOLOGY_NAME)}")


@cli.command("graph")
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), help="Run config file.")
@click.option("--stations", help="Stations CSV.")
@click.option("--output-dir", help="Directory for edges.csv [default: out].")
@graph_options
def graph_cmd(config, **flags):
    """Export station graph edges (station_i,station_j,distance_km,weight)."""
    cfg = _load_config(config, flags)
    g = build_adjacency(dataio.load_stations(cfg.stations), cfg.adjacency_scheme())
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    n = write_edges(cfg.output_path("edges.csv"), g)
    click.echo(f"wrote {n} edges to {cfg.output_path('edges.csv')}")


@cli.command()
@click.option("--n-stations", default=5, show_default=True, type=int, help="Number of stations.")
@click.option("--days", default=200, show_default=True, type=int, help="Days of daily records.")
@click.option("--telemetry-days", default=0, show_default=True, type=int,
              help="Also write frames.txt with this many days of 15-minute telemetry.")
@click.option("--seed", default=None, type=int, help="Generator seed [default: fixture seed].")
@click.option("--output-dir", default="out", show_default=True, help="Destination directory.")
def synth(n_stations, days, telemetry_days, seed, output_dir):
    """Write a synthetic stations/records fixture (and optional telemetry)."""
    from rainflag import synthetic
    from rainflag.telemetry import encode_telemetry

    seed = synthetic.FIXTURE_SEED if seed is None else seed
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stations, records = synthetic.make_fixture(n_stations, days, seed)
    dataio.write_stations(out / "stations.csv", stations)
    dataio.write_records(out / "records.csv", records)
    devices = [f"GW-{s.station_id}" for s in stations]
    with (out / "station_map.csv").open("w", encoding="utf-8") as fh:
        fh.write("device_id,station_id\n")
        fh.writelines(f"{d},{s.station_id}\n" for d, s in zip(devices, stations))
    if telemetry_days:
        msgs = synthetic.simulate_telemetry(devices, telemetry_days, seed=seed)
        (out / "frames.txt").write_text("".join(encode_telemetry(m) + "\n" for m in msgs), encoding="ascii")
    click.echo(f"wrote fixture for {n_stations} stations x {days} days to {out}")


def _origin(exc: BaseException) -> str:
    tb = traceback.extract_tb(exc.__traceback__)
    return Path(tb[-1].filename).stem if tb else "rainflag"


def main(argv: list[str] | None = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="rainflag", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        click.echo(f"error: {_origin(exc)}: {type(exc).__name__}: {exc}", err=True)
        return EXIT_DATA
    except RainflagError as exc:
        click.echo(f"error: {_origin(exc)}: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code 3
        if os.environ.get("RAINFLAG_DEBUG"):
            raise
        click.echo(f"internal error: {_origin(exc)}: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INTERNAL
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
