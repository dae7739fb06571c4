import functools
import json
import logging
import math
from pathlib import Path

import click

from ncbf.array import UserLocation, classify_region, rayleigh_distance
from ncbf.config import load_config
from ncbf.errors import ConfigError, MissingArtifact, NcbfError
from ncbf.lcmv import NcbfScenario

WORKDIR_LAYOUT = {
    "grid": "grid.json",
    "table": "grid.txt",
    "datasets": "datasets",
    "codebook": "codebook",
    "eval": "eval",
}


class NcbfGroup(click.Group):
    """Maps NcbfError to its exit code instead of a traceback."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except NcbfError as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(e.exit_code)


def common_options(f):
    @click.option(
        "-c",
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        help="JSON run configuration",
    )
    @click.option(
        "-w",
        "--workdir",
        type=click.Path(file_okay=False),
        envvar="NCBF_WORKDIR",
        default="ncbf-run",
        show_default=True,
        help="Directory holding the grid, datasets, codebook and reports",
    )
    @click.option(
        "-p",
        "--profile",
        type=click.Choice(["full", "ci-small"]),
        help="Preset sizes (defaults to the config file's or 'full')",
    )
    @click.option("-s", "--seed", type=click.IntRange(0), help="Override all seeds")
    @click.option(
        "-v",
        "--verbose",
        is_flag=True,
        help="Enable verbose logging",
    )
    @functools.wraps(f)
    def wrapper(config_path, workdir, profile, seed, verbose, **kwargs):
        logging.basicConfig(
            level="DEBUG" if verbose else "INFO",
            format="%(asctime)s.%(msecs)03d | %(levelname)s | %(module)s:%(funcName)s:%(lineno)d - %(message)s",  # noqa: E501
            datefmt="%H:%M:%S",
        )
        overrides = {}
        if seed is not None:
            overrides = {"dataset": {"seed": seed}, "training": {"seed": seed}}
        run = load_config(config_path, profile, overrides)
        workdir = Path(workdir)
        run.write(workdir)
        return f(run, workdir, **kwargs)

    return wrapper


def workers_option(f):
    return click.option(
        "-j",
        "--workers",
        type=click.IntRange(1),
        default=1,
        show_default=True,
        help="Sectors processed in parallel",
    )(f)


def sector_option(f):
    return click.option(
        "--sector",
        default="all",
        show_default=True,
        help="Sector id or 'all'",
    )(f)


def _load_grid(workdir):
    from ncbf.partition import SectorGrid

    path = workdir / WORKDIR_LAYOUT["grid"]
    if not path.exists():
        raise MissingArtifact(f"no grid in {workdir}, run 'ncbf partition' first")
    return SectorGrid.from_dict(json.loads(path.read_text()))


def _select_sectors(grid, sector):
    if sector == "all":
        return [s.id for s in grid.sectors]
    try:
        sid = int(sector)
    except ValueError:
        raise ConfigError(f"--sector must be an integer or 'all', got {sector!r}")
    if not 0 <= sid < grid.num_sectors:
        raise ConfigError(f"sector {sid} does not exist (M_C = {grid.num_sectors})")
    return [sid]


def _parse_location(text: str) -> UserLocation:
    try:
        angle, rng = (float(x) for x in text.split(","))
        return UserLocation.from_degrees(angle, rng)
    except ValueError as e:
        raise ConfigError(f"bad location {text!r}, expected ANGLE_DEG,RANGE_M: {e}")


@click.group(cls=NcbfGroup)
def cli():
    """Near-field nulling-control beam focusing codebook."""


@cli.command("partition")
@common_options
@click.option("--sweep", help="Comma-separated correlation targets to compare")
def partition_cmd(run, workdir, sweep):
    """Partition the coverage area and write the sector grid."""
    from dataclasses import replace

    from ncbf.partition import build_grid

    config = run.to_array_config()
    spec = run.to_partition_spec()
    grid = build_grid(spec, config)
    (workdir / WORKDIR_LAYOUT["grid"]).write_text(
        json.dumps(grid.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    (workdir / WORKDIR_LAYOUT["table"]).write_text(grid.to_table())

    regions = {classify_region(config, r).name for r in (spec.r_min, spec.r_max)}
    click.echo(
        f"# Rayleigh distance {rayleigh_distance(config):.2f} m, coverage spans "
        f"{'/'.join(sorted(regions))}"
    )
    click.echo(grid.to_table(), nl=False)

    if sweep:
        try:
            targets = [float(x) for x in sweep.split(",")]
        except ValueError:
            raise ConfigError(f"--sweep must list numbers, got {sweep!r}")
        click.echo("# rho  beta_delta  M_C")
        for rho in targets:
            swept = build_grid(
                replace(spec, correlation_target=rho, beta_delta=None), config
            )
            click.echo(f"{rho:5.2f}  {swept.beta:10.6f}  {swept.num_sectors}")


@cli.command("gen-data")
@common_options
@workers_option
@sector_option
def gen_data_cmd(run, workdir, workers, sector):
    """Generate training and test datasets for the selected sectors."""
    from ncbf.dataset import generate_datasets

    grid = _load_grid(workdir)
    sectors = _select_sectors(grid, sector)
    generate_datasets(
        run.to_array_config(),
        grid,
        sectors,
        run.dataset.size,
        run.dataset.split,
        run.dataset.seed,
        run.num_users,
        workdir / WORKDIR_LAYOUT["datasets"],
        workers=workers,
    )
    click.echo(f"Generated datasets for {len(sectors)} sector(s)")


@cli.command("train")
@common_options
@workers_option
@sector_option
def train_cmd(run, workdir, workers, sector):
    """Train phase and magnitude estimators for the selected sectors."""
    from ncbf.codebook import DatasetSettings, TrainingSettings, train_codebook

    grid = _load_grid(workdir)
    sectors = _select_sectors(grid, sector)
    t = run.training
    manifest, failures = train_codebook(
        run.to_array_config(),
        grid,
        run.num_users,
        DatasetSettings(run.dataset.size, run.dataset.split, run.dataset.seed),
        TrainingSettings(
            dims=tuple(run.model_dims()),
            epochs=t.epochs,
            batch_size=t.batch_size,
            learning_rate=t.learning_rate,
            decay=t.decay,
            seed=t.seed,
        ),
        workdir / WORKDIR_LAYOUT["datasets"],
        workdir / WORKDIR_LAYOUT["codebook"],
        sector_ids=sectors,
        workers=workers,
    )
    click.echo("# sector  phase_train  phase_test  magnitude_train  magnitude_test")
    for sid in sectors:
        entry = manifest["sectors"].get(str(sid))
        if entry is None:
            continue
        p, m = entry["phase"]["report"], entry["magnitude"]["report"]
        click.echo(
            f"{sid:8d}  {p['final_train_loss']:11.5f}  {p['final_test_loss']:10.5f}  "
            f"{m['final_train_loss']:15.5f}  {m['final_test_loss']:14.5f}"
        )
    if failures:
        listing = "\n".join(f"  sector {s}: {e}" for s, e in sorted(failures.items()))
        raise NcbfError(f"{len(failures)} sector(s) failed:\n{listing}")


def _open_codebook(run, workdir, oracle: bool):
    from ncbf.codebook import load_codebook, oracle_codebook

    config = run.to_array_config()
    if oracle:
        return oracle_codebook(config, _load_grid(workdir), run.num_users)
    return load_codebook(workdir / WORKDIR_LAYOUT["codebook"], config)


@cli.command("predict")
@common_options
@click.option("--desired", required=True, help="Desired user as ANGLE_DEG,RANGE_M")
@click.option(
    "--interferer",
    "interferers",
    multiple=True,
    help="Interfering user as ANGLE_DEG,RANGE_M (repeatable)",
)
@click.option("--lcmv", is_flag=True, help="Print the LCMV reference alongside")
@click.option("--oracle", is_flag=True, help="Use label-replay estimators")
def predict_cmd(run, workdir, desired, interferers, lcmv, oracle):
    """Predict beam-focusing weights for one scenario."""
    from ncbf.codebook import predict_weights
    from ncbf.dataset import weights_to_labels
    from ncbf.lcmv import build_constraints, solve_lcmv

    scenario = NcbfScenario(
        _parse_location(desired), tuple(_parse_location(i) for i in interferers)
    )
    codebook = _open_codebook(run, workdir, oracle)
    sector, _ = codebook.select(scenario)
    phases, magnitudes = weights_to_labels(predict_weights(codebook, scenario))
    click.echo(f"# sector {sector}")
    if lcmv:
        reference = solve_lcmv(build_constraints(codebook.config, scenario))
        ref_phases, ref_magnitudes = weights_to_labels(reference)
        click.echo("# n  phase_rad  magnitude_db  lcmv_phase_rad  lcmv_magnitude_db")
        for n in range(codebook.num_elements):
            click.echo(
                f"{n:3d}  {phases[n]: .6f}  {magnitudes[n]: .6f}  "
                f"{ref_phases[n]: .6f}  {ref_magnitudes[n]: .6f}"
            )
    else:
        click.echo("# n  phase_rad  magnitude_db")
        for n in range(codebook.num_elements):
            click.echo(f"{n:3d}  {phases[n]: .6f}  {magnitudes[n]: .6f}")


def read_scenarios(path) -> list[NcbfScenario]:
    """JSON lines of {"desired": [deg, m], "interferers": [[deg, m], ...]}."""
    scenarios = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            scenarios.append(
                NcbfScenario(
                    UserLocation.from_degrees(*record["desired"]),
                    tuple(
                        UserLocation.from_degrees(*loc)
                        for loc in record.get("interferers", [])
                    ),
                )
            )
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigError(f"{path}:{number}: bad scenario ({e})") from e
    return scenarios


def _write_patterns(codebook, scenarios, directory):
    from ncbf.codebook import predict_weights
    from ncbf.evaluation import CutMode, pattern_cut, write_csv
    from ncbf.lcmv import build_constraints, solve_lcmv

    config, spec = codebook.config, codebook.grid.spec
    directory.mkdir(parents=True, exist_ok=True)
    for i, scenario in enumerate(scenarios):
        try:
            predicted = predict_weights(codebook, scenario)
            reference = solve_lcmv(build_constraints(config, scenario))
        except (NcbfError, ValueError):
            continue
        d = scenario.desired
        cuts = (
            (CutMode.ANGULAR, d.range, spec.psi_min, spec.psi_max, 321),
            (CutMode.RADIAL, d.angle, spec.r_min, spec.r_max, 221),
        )
        for mode, fixed, start, stop, count in cuts:
            table = pattern_cut(config, predicted, d, mode, fixed, start, stop, count)
            ref = pattern_cut(config, reference, d, mode, fixed, start, stop, count)
            table["lcmv_gain_db"] = ref["gain_db"]
            write_csv(table, directory / f"scenario_{i:04d}_{mode}.csv")


@cli.command("eval")
@common_options
@click.option(
    "--scenarios",
    "scenario_file",
    type=click.Path(exists=True, dir_okay=False),
    help="JSON-lines scenario file",
)
@click.option(
    "--random", "random_count", type=click.IntRange(1), help="Draw N scenarios"
)
@click.option("--oracle", is_flag=True, help="Use label-replay estimators")
@click.option("--patterns", is_flag=True, help="Write pattern cuts per scenario")
@click.option("--bins", type=click.IntRange(1), default=10, show_default=True)
def eval_cmd(run, workdir, scenario_file, random_count, oracle, patterns, bins):
    """Compare codebook predictions against LCMV on a set of scenarios."""
    from ncbf.codebook import check_grid, sector_reports
    from ncbf.evaluation import (
        loss_histogram,
        loss_statistics,
        random_scenarios,
        summarize_sweep,
        suppression_sweep,
        write_csv,
    )

    if (scenario_file is None) == (random_count is None):
        raise ConfigError("pass exactly one of --scenarios or --random")
    codebook = _open_codebook(run, workdir, oracle)
    check_grid(codebook, _load_grid(workdir))
    if scenario_file is not None:
        scenarios = read_scenarios(scenario_file)
    else:
        scenarios = random_scenarios(
            codebook.config,
            codebook.grid,
            run.num_users,
            random_count,
            run.dataset.seed,
        )

    out = workdir / WORKDIR_LAYOUT["eval"]
    out.mkdir(parents=True, exist_ok=True)
    sweep, skipped = suppression_sweep(codebook, scenarios)
    write_csv(sweep, out / "suppression.csv")
    write_csv(skipped, out / "skipped.csv")
    summary = summarize_sweep(sweep)
    summary["skipped"] = len(skipped)
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    click.echo(f"Evaluated {len(sweep)} scenario(s), skipped {len(skipped)}")
    median = summary.get("median_suppression_db", math.nan)
    click.echo(f"Median interference suppression: {median:.2f} dB")

    reports = {} if oracle else sector_reports(codebook.provenance)
    if reports:
        stats = loss_statistics(reports)
        sd_note = "SD is the population standard deviation (divide by count)"
        write_csv(stats.to_table(), out / "loss_stats.csv", comment=sd_note)
        write_csv(stats.per_sector, out / "loss_per_sector.csv")
        write_csv(loss_histogram(stats, bins), out / "loss_histogram.csv")
    if patterns:
        _write_patterns(codebook, scenarios, out / "patterns")


if __name__ == "__main__":
    cli()
