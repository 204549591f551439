"""Command-line surface: prep, run, bench, project, pareto.

Exit codes: 0 success, 1 domain error, 2 usage error. Flags override config
file values.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from .classifier import BackendConfig, acquire_model
from .config import Config, load_config
from .dataprep import (
    build_training_set,
    class_counts,
    generate_synthetic_dataset,
    stratified_split,
    write_split_manifest,
)
from .errors import LesionFlowError
from .timing import (
    REFERENCE_BATCH,
    REFERENCE_N,
    ExecutionMode,
    LatencyPacer,
    parse_mode,
    simulate_folder_time,
)
from .workflow import WorkflowConfig, run_workflow


def _domain_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LesionFlowError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _load(config_path: str | None) -> Config:
    return load_config(config_path)


def _backend_config(cfg: Config, time_scale: float | None = None) -> BackendConfig:
    pacer = None
    if cfg.backend == "simulated":
        tm, _ = cfg.resolve_timing()
        pacer = LatencyPacer(
            tm=tm,
            time_scale=cfg.time_scale if time_scale is None else time_scale,
            method=cfg.timing_realization,
        )
    return BackendConfig(
        kind=cfg.backend,
        taxonomy=cfg.taxonomy,
        weight_seed=cfg.weight_seed,
        pacer=pacer,
    )


@click.group()
def cli() -> None:
    """Batch-inference workflow engine and timing benchmark harness."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config file.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory (default: <workspace>/data).")
@click.option("--count", default=10, show_default=True, help="Records per subtype.")
@click.option("--counts", "counts_spec", default=None, help="Per-class overrides, e.g. 'healthy_1=5,opmd_2=0'.")
@click.option("--threshold", default=None, type=int, help="Oversample target (default from config).")
@click.option("--seed", default=None, type=int, help="Random seed (default from config).")
@_domain_errors
def prep(config_path, out_dir, count, counts_spec, threshold, seed) -> None:
    """Generate a synthetic dataset, split, oversample, augment and write the
    images plus manifest."""
    cfg = _load(config_path)
    seed = cfg.seed if seed is None else seed
    threshold = cfg.oversample_threshold if threshold is None else threshold
    out = Path(out_dir) if out_dir else cfg.workspace / "data"

    counts = {label: count for label in cfg.taxonomy.subtypes}
    if counts_spec:
        for item in counts_spec.split(","):
            label, _, value = item.partition("=")
            counts[label.strip()] = int(value)

    records = generate_synthetic_dataset(cfg.taxonomy, counts, seed)
    click.echo(f"generated {len(records)} base records")
    for label, n in sorted(class_counts(records).items()):
        click.echo(f"  {label}: {n}")

    if records:
        split = stratified_split(records, seed)
        train = build_training_set(split, seed, threshold=threshold)
        sections = {
            "train": train,
            "validation": list(split.validation),
            "test": list(split.test),
        }
    else:
        sections = {"train": [], "validation": [], "test": []}
    manifest = write_split_manifest(sections, out)
    click.echo(
        f"train {len(sections['train'])} (incl. duplicates and augmentations), "
        f"validation {len(sections['validation'])}, test {len(sections['test'])}"
    )
    click.echo(f"manifest: {manifest}")


@cli.command()
@click.argument("input_dir", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config file.")
@click.option("--mode", default="v2", show_default=True, help="Execution mode (uipath/aa/v1/v2 or full name).")
@click.option("--out", "workspace", type=click.Path(), default=None, help="Workspace for processed/failed/log (default from config).")
@click.option("--allow-failures", is_flag=True, help="Exit 0 even when images fail.")
@_domain_errors
def run(input_dir, config_path, mode, workspace, allow_failures) -> None:
    """Classify every image in INPUT_DIR, logging and relocating each file."""
    cfg = _load(config_path)
    mode = parse_mode(mode)
    root = Path(workspace) if workspace else cfg.workspace
    wf_cfg = WorkflowConfig(
        input_dir=Path(input_dir),
        processed_dir=root / "processed",
        failed_dir=root / "failed",
        mode=mode,
        batch_size=cfg.batch_size,
        retry_limit=cfg.retry_limit,
        anonymization_salt=cfg.anonymization_salt,
        log_path=root / "workflow.log",
        channel_mean=cfg.channel_mean,
        channel_std=cfg.channel_std,
    )
    backend_config = _backend_config(cfg)
    model = backend_config if mode.is_rpa else acquire_model(backend_config)
    report = run_workflow(wf_cfg, model)
    click.echo(
        f"scanned {report.scanned} (ignored {report.ignored} non-image), "
        f"succeeded {report.succeeded}, failed {report.failed}, retries {report.retries}"
    )
    click.echo(f"log: {report.log_path}")
    click.echo(f"wall time: {report.wall_time_s:.3f} s")
    if report.failed and not (allow_failures or cfg.allow_failures):
        sys.exit(1)


def _print_summary(reports, preset_label) -> None:
    click.echo(f"timing calibration: {preset_label}")
    header = f"{'mode':<24} {'folder_time_s':>13} {'avg_per_image_s':>16} {'overhead':>9} {'vs uipath':>10}"
    click.echo(header)
    for r in reports:
        speedup = r.speedups.get(ExecutionMode.RPA_UIPATH.value)
        speedup_str = f"{speedup:.2f}x" if speedup is not None else "-"
        click.echo(
            f"{r.mode.value:<24} {r.folder_time_s:>13.2f} {r.avg_per_image_s:>16.2f} "
            f"{r.overhead_fraction:>9.3f} {speedup_str:>10}"
        )


@cli.command(name="bench")
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config file.")
@click.option("--n", default=REFERENCE_N, show_default=True, help="Number of images.")
@click.option("--mode", "modes", multiple=True, help="Modes to benchmark (default: all four).")
@click.option("--preset", default=None, help="Timing preset: table1-exact or overhead-78.")
@click.option("--time-scale", default=None, type=float, help="Latency scale for measured runs (default from config).")
@click.option("--measure", is_flag=True, help="Also execute measured runs over real files.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Report directory (default: <workspace>/bench).")
@click.option("--seed", default=None, type=int, help="Random seed (default from config).")
@_domain_errors
def bench_cmd(config_path, n, modes, preset, time_scale, measure, out_dir, seed) -> None:
    """Simulate (and optionally measure) folder times for the pipeline
    variants; write machine-readable report and pareto files."""
    cfg = _load(config_path)
    if n < 1:
        raise click.UsageError("--n must be >= 1")
    seed = cfg.seed if seed is None else seed
    time_scale = cfg.time_scale if time_scale is None else time_scale
    mode_list = tuple(parse_mode(m) for m in modes) if modes else bench_mod.ALL_MODES
    tm, preset_label = cfg.resolve_timing(preset)
    out = Path(out_dir) if out_dir else cfg.workspace / "bench"
    out.mkdir(parents=True, exist_ok=True)

    reports = bench_mod.simulate_reports(mode_list, n, tm, cfg.batch_size)
    _print_summary(reports, preset_label)

    # Projections extrapolate the per-image averages of the reference
    # 31-image run (at report precision, 2 decimals) to the requested n.
    click.echo(f"\nprojected cost for {n} images:")
    projections = {}
    for mode in mode_list:
        ref_avg = round(simulate_folder_time(mode, REFERENCE_N, tm, cfg.batch_size) / REFERENCE_N, 2)
        total = bench_mod.project_cost(ref_avg, n)
        projections[mode] = total
        click.echo(f"  {mode.value:<24} {ref_avg:.2f} s/image -> {total:.0f} s ({bench_mod.format_duration(total)})")
    if ExecutionMode.RPA_UIPATH in projections and ExecutionMode.V2 in projections:
        ratio = projections[ExecutionMode.RPA_UIPATH] / projections[ExecutionMode.V2]
        delta = ratio - bench_mod.REFERENCE_EFFICIENCY_RATIO
        click.echo(
            f"  efficiency ratio uipath/v2: {ratio:.1f}x "
            f"(reference figure {bench_mod.REFERENCE_EFFICIENCY_RATIO:.0f}x, delta {delta:+.1f}x)"
        )

    report_path = out / "report.csv"
    report_path.write_text(bench_mod.report_table(reports))
    pareto_path = out / "pareto.csv"
    pareto_path.write_text(bench_mod.pareto_table())
    click.echo(f"\nreport: {report_path}")
    click.echo(f"pareto: {pareto_path}")

    if measure:
        click.echo(f"\nmeasured runs (time scale {time_scale}):")
        staging = out / "inputs"
        images = bench_mod.stage_synthetic_inputs(staging, n, cfg.taxonomy, seed)
        measured = []
        for mode in mode_list:
            m = bench_mod.measure_run(
                mode,
                images,
                out / "runs",
                tm,
                taxonomy=cfg.taxonomy,
                batch_size=cfg.batch_size,
                time_scale=time_scale,
                realization=cfg.timing_realization,
                parallel_prediction=cfg.parallel_prediction,
            )
            measured.append(m)
            closed = simulate_folder_time(mode, n, tm, cfg.batch_size)
            deviation = (m.folder_time_s - closed) / closed
            click.echo(
                f"  {mode.value:<24} measured {m.folder_time_s:.3f} s vs closed form {closed:.3f} s "
                f"({deviation:+.1%})"
            )
        measured_path = out / "measured.csv"
        measured_path.write_text(bench_mod.report_table(measured))
        click.echo(f"measured report: {measured_path}")


@cli.command()
@click.option("--n", default=2500, show_default=True, help="Projected image count.")
@click.option("--avg", "avgs", multiple=True, type=float,
              help="Per-image seconds to extrapolate (default: 2.58 and 0.06).")
@_domain_errors
def project(n, avgs) -> None:
    """Extrapolate per-image averages to a target workload size."""
    if n < 0:
        raise click.UsageError("--n must be >= 0")
    avgs = list(avgs) if avgs else [2.58, 0.06]
    totals = []
    for avg in avgs:
        total = bench_mod.project_cost(avg, n)
        totals.append(total)
        click.echo(f"{avg} s/image x {n} images = {total:.0f} s ({bench_mod.format_duration(total)})")
    if len(totals) >= 2 and min(totals) > 0:
        ratio = max(totals) / min(totals)
        delta = ratio - bench_mod.REFERENCE_EFFICIENCY_RATIO
        click.echo(
            f"efficiency ratio slowest/fastest: {ratio:.1f}x "
            f"(reference figure {bench_mod.REFERENCE_EFFICIENCY_RATIO:.0f}x, delta {delta:+.1f}x)"
        )


@cli.command()
@click.option("--out", "out_path", type=click.Path(), default=None, help="Also write the table to a file.")
@_domain_errors
def pareto(out_path) -> None:
    """Emit the accessibility/performance trade-off points."""
    table = bench_mod.pareto_table()
    click.echo(table, nl=False)
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(table)
        click.echo(f"written: {out_path}")


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
