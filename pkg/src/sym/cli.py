"""Operator command line: serve, dictionary import/export, update, export, stats."""

import json
import sys
from contextlib import contextmanager
from pathlib import Path

import click

from sym import config as config_mod
from sym import lexicon
from sym.errors import SymError
from sym.service import SymService, UpdateScheduler


def _common_options(fn):
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="TOML configuration file.",
    )(fn)
    fn = click.option(
        "--data-dir",
        type=click.Path(file_okay=False),
        default=None,
        help="Event log directory (overrides the config).",
    )(fn)
    return fn


def _fail(exc: SymError):
    click.echo(f"error [{exc.code}]: {exc.message}", err=True)
    if exc.detail is not None:
        click.echo(json.dumps(exc.detail, indent=2, default=str), err=True)
    sys.exit(1)


@contextmanager
def _service(config_path, data_dir):
    """Yield (config, service); any SymError becomes a clean failure line."""
    try:
        cfg = config_mod.load_config(config_path)
        service = SymService(
            data_dir=data_dir or cfg.data_dir,
            default_k=cfg.default_k,
            update_params=cfg.update_params,
        )
    except SymError as exc:
        _fail(exc)
    try:
        yield cfg, service
    except SymError as exc:
        _fail(exc)
    finally:
        service.close()


@click.group()
@click.version_option(package_name="sym")
def main():
    """Mood spotting service: collect, suggest, update, analyze."""


@main.command()
@_common_options
def serve(config_path, data_dir):
    """Run the HTTP service with the periodic dictionary update."""
    import uvicorn

    from sym.api import create_app

    try:
        cfg = config_mod.load_config(config_path)
        service = SymService(
            data_dir=data_dir or cfg.data_dir,
            default_k=cfg.default_k,
            update_params=cfg.update_params,
        )
    except SymError as exc:
        _fail(exc)
    scheduler = UpdateScheduler(service, cfg.update_interval)
    scheduler.start()
    app = create_app(service, admin_token=config_mod.admin_token())
    click.echo(f"serving on {cfg.host}:{cfg.port} (data in {data_dir or cfg.data_dir})")
    try:
        uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
    finally:
        scheduler.stop()
        service.snapshot()
        service.close()


@main.group("dict")
def dict_group():
    """Dictionary import and export."""


@dict_group.command("import")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_common_options
def dict_import(file, config_path, data_dir):
    """Publish FILE (interchange JSON) as the next version of its dictionary."""
    with _service(config_path, data_dir) as (_, service):
        with open(file, "r", encoding="utf-8") as handle:
            document = json.load(handle)
        result = service.publish_dictionary(document)
        click.echo(f"published {result['dictionary_id']} version {result['version']}")
        service.snapshot()


@dict_group.command("export")
@click.argument("file", type=click.Path(dir_okay=False, writable=True))
@click.option("--dictionary", "dictionary_id", default=None, help="Dictionary id (defaults to the only one).")
@click.option("--version", type=int, default=None, help="Version to export (defaults to latest).")
@_common_options
def dict_export(file, dictionary_id, version, config_path, data_dir):
    """Write a dictionary version to FILE as interchange JSON."""
    with _service(config_path, data_dir) as (_, service):
        if dictionary_id is None:
            known = sorted(service.state.dictionaries)
            if len(known) != 1:
                raise click.UsageError(
                    f"--dictionary is required (store holds {known or 'none'})"
                )
            dictionary_id = known[0]
        dictionary = service.get_dictionary(dictionary_id, version=version)
        lexicon.dump_dictionary_file(dictionary, file)
        click.echo(
            f"wrote {dictionary.dictionary_id} version {dictionary.version} to {file}"
        )


@main.command()
@click.argument("dictionary_id")
@click.option("--alpha", type=float, default=None, help="Blend weight override.")
@click.option("--min-samples", type=int, default=None, help="Acceptance threshold override.")
@_common_options
def update(dictionary_id, alpha, min_samples, config_path, data_dir):
    """Fold queued feedback into a new version of DICTIONARY_ID."""
    with _service(config_path, data_dir) as (cfg, service):
        params = None
        if alpha is not None or min_samples is not None:
            params = lexicon.UpdateParams(
                alpha=cfg.alpha if alpha is None else alpha,
                min_samples=cfg.min_samples if min_samples is None else min_samples,
            )
        result = service.run_update(dictionary_id, params=params)
        if result["updated"]:
            click.echo(
                f"dictionary {result['dictionary_id']} now at version {result['version']}"
            )
        else:
            click.echo(
                f"dictionary {result['dictionary_id']} unchanged at version "
                f"{result['version']} (no new feedback)"
            )
        service.snapshot()


@main.command()
@click.option("--experiment", "experiment_id", default=None, help="Limit to one experiment.")
@click.option("--session", "session_id", default=None, help="Limit to one session.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, allow_dash=True))
@_common_options
def export(experiment_id, session_id, out_path, config_path, data_dir):
    """Write collected spots as CSV to --out ('-' for stdout)."""
    with _service(config_path, data_dir) as (_, service):
        data = service.export(experiment_id=experiment_id, session_id=session_id)
        if out_path == "-":
            sys.stdout.buffer.write(data)
        else:
            Path(out_path).write_bytes(data)
            click.echo(f"wrote {len(data)} bytes to {out_path}")


@main.command()
@click.option("--experiment", "experiment_id", required=True)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@_common_options
def stats(experiment_id, as_json, config_path, data_dir):
    """Summarize an experiment: mood deltas, stimulus dispersion, spread."""
    with _service(config_path, data_dir) as (_, service):
        summary = service.stats(experiment_id)

    if as_json:
        click.echo(json.dumps(summary, indent=2))
        return

    click.echo(f"experiment {summary['experiment_id']} — {summary['name']}")
    click.echo(f"sessions: {summary['sessions']}   spots: {summary['spots']}")
    if summary["std_valence"] is not None:
        click.echo(
            f"spread: valence ±{summary['std_valence']:.2f}, "
            f"arousal ±{summary['std_arousal']:.2f}"
        )
    if summary["mood_deltas"]:
        click.echo("mood deltas (POST − PRE):")
        for session_id, delta in summary["mood_deltas"].items():
            click.echo(
                f"  {session_id}: valence {delta['valence']:+d}, "
                f"arousal {delta['arousal']:+d}"
            )
    if summary["stimuli"]:
        click.echo("stimuli:")
        for stimulus_id, stat in summary["stimuli"].items():
            centroid = stat["centroid"]
            click.echo(
                f"  {stimulus_id}: centroid ({centroid['valence']:.2f}, "
                f"{centroid['arousal']:.2f}), mean distance "
                f"{stat['mean_distance']:.2f}, n={stat['n']}"
            )


if __name__ == "__main__":
    main()
