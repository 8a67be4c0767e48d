"""Command-line interface: simulate one point, sweep an axis, dump taps."""

import logging
import sys
from pathlib import Path

import click

from .errors import PdmOfdmError
from .harness import (
    SWEEP_AXES,
    TAP_NAMES,
    constellation_to_csv,
    dump_constellation,
    make_run_config,
    read_config_file,
    run_once,
    run_sweep,
    sweep_to_csv,
    wilson_interval,
    write_run_json,
)

log = logging.getLogger("pdmofdm")


def _build_config(config_path, seed, sets):
    overrides = {}
    if config_path:
        overrides.update(read_config_file(config_path))
    for item in sets:
        if "=" not in item:
            raise click.BadParameter(f"--set expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        overrides[key.strip()] = val.strip()
    if seed is not None:
        overrides["seed"] = seed
    return make_run_config(overrides)


def _common_options(fn):
    fn = click.option(
        "--config", "config_path", type=click.Path(exists=True), default=None,
        help="Flat key = value config file.",
    )(fn)
    fn = click.option("--seed", type=int, default=None, help="Master RNG seed.")(fn)
    fn = click.option(
        "--out", "out_dir", type=click.Path(file_okay=False), default="out",
        show_default=True, help="Output directory.",
    )(fn)
    fn = click.option(
        "--set", "sets", multiple=True, metavar="KEY=VALUE",
        help="Override a single config key (repeatable).",
    )(fn)
    fn = click.option("--plot/--no-plot", default=True, show_default=True,
                      help="Render figures next to the CSV outputs.")(fn)
    return fn


@click.group()
def cli():
    """Power-division-multiplexed coherent optical OFDM link simulator."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


@cli.command()
@_common_options
def simulate(config_path, seed, out_dir, sets, plot):
    """Run a single configuration and report per-branch BER."""
    cfg = _build_config(config_path, seed, sets)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    point, _ = run_once(cfg)
    axis = "snr_db" if cfg.channel.snr_db is not None else "osnr_db"
    from .harness import SweepResult, config_hash

    result = SweepResult(
        axis=axis, points=[point], config_hash=config_hash(cfg),
        seed=cfg.seed, method=cfg.method,
    )
    sweep_to_csv(result, out / "sweep.csv")
    write_run_json(cfg, out / "run.json", extra={"warnings": point.warnings})
    for lane in point.lanes:
        lo, hi = wilson_interval(lane.errors, lane.bits)
        click.echo(
            f"branch {lane.branch} pol {lane.pol}: BER {lane.ber:.3e} "
            f"({lane.errors}/{lane.bits}, 95% CI [{lo:.3e}, {hi:.3e}], "
            f"EVM {lane.evm:.3f})"
        )
    if plot:
        points = dump_constellation(cfg, "post_despread")
        constellation_to_csv(points, out / "constellation_post_despread.csv", cfg)
        from .plotting import render_constellation

        render_constellation(points, out / "constellation_post_despread.png")
    click.echo(f"outputs in {out}")


@cli.command()
@click.option("--axis", required=True, type=click.Choice(SWEEP_AXES))
@click.option("--values", required=True, help="Comma-separated axis values.")
@_common_options
def sweep(axis, values, config_path, seed, out_dir, sets, plot):
    """Sweep BER along one axis and write sweep.csv."""
    cfg = _build_config(config_path, seed, sets)
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"cannot parse --values {values!r}") from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(cfg, axis, vals)
    sweep_to_csv(result, out / "sweep.csv")
    write_run_json(
        cfg, out / "run.json",
        extra={"axis": axis, "values": sorted(vals),
               "failed_points": [list(f) for f in result.failed]},
    )
    for point in result.points:
        line = ", ".join(
            f"b{lr.branch}{lr.pol}={lr.ber:.3e}" for lr in point.lanes
        )
        click.echo(f"{axis}={point.axis_value:g}: {line}")
    if plot:
        from .plotting import render_sweep

        render_sweep(result, out / "sweep.png")
    click.echo(f"outputs in {out}")


@cli.command()
@click.option("--tap", required=True, type=click.Choice(TAP_NAMES))
@_common_options
def constellation(tap, config_path, seed, out_dir, sets, plot):
    """Dump receiver constellation samples at a named tap."""
    cfg = _build_config(config_path, seed, sets)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = dump_constellation(cfg, tap)
    constellation_to_csv(points, out / f"constellation_{tap}.csv", cfg)
    write_run_json(cfg, out / "run.json", extra={"tap": tap})
    if plot:
        from .plotting import render_constellation

        render_constellation(points, out / f"constellation_{tap}.png")
    click.echo(f"outputs in {out}")


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(130)
    except PdmOfdmError as exc:
        click.echo(f"error [{exc.stage}]: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
