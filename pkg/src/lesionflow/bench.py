"""Benchmark harness: closed-form simulation, measured runs over the real
workflow with emulated latencies, overhead decomposition, cost projection and
the accessibility/performance trade-off table.

Measured runs realize modeled latencies through a deadline-paced
:class:`~lesionflow.timing.LatencyPacer` at a configurable time scale. The
reported folder time re-expands the scaled waits to full magnitude:

    folder_time = wall - charged * time_scale + charged

At time scale 1.0 this is plain wall time. At small scales it keeps the
comparison honest: real pipeline work (decode, tensor math, file moves)
enters the measurement at full, unmagnified cost instead of being multiplied
by 1/scale, so the deviation from the closed form is exactly the pipeline
overhead the model does not account for.
"""

from __future__ import annotations

import csv
import io
import math
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .classifier import BackendConfig, registry_load_events, reset_registry
from .dataprep import generate_synthetic_dataset
from .errors import LesionFlowError
from .taxonomy import ClassTaxonomy, default_taxonomy
from .timing import (
    ExecutionMode,
    LatencyPacer,
    TimingModel,
    simulate_folder_time,
)
from .workflow import WorkflowConfig, WorkflowHooks, WorkflowReport, run_workflow

ALL_MODES = tuple(ExecutionMode)

REPORT_COLUMNS = (
    "mode",
    "n_images",
    "folder_time_s",
    "avg_per_image_s",
    "overhead_fraction",
    "speedup_vs_uipath",
)

PARETO_COLUMNS = ("mode", "accessibility", "avg_per_image_s")

MODE_DISPLAY = {
    ExecutionMode.RPA_UIPATH: "UiPath (emulated)",
    ExecutionMode.RPA_AA: "Automation Anywhere (emulated)",
    ExecutionMode.V1: "v1 singleton sequential",
    ExecutionMode.V2: "v2 singleton batch",
}

# Published efficiency figure the projection ratio is printed against.
REFERENCE_EFFICIENCY_RATIO = 40.0


@dataclass(frozen=True)
class BenchReport:
    mode: ExecutionMode
    n_images: int
    folder_time_s: float
    avg_per_image_s: float
    overhead_fraction: float
    inference_fraction: float
    speedups: dict[str, float] = field(default_factory=dict)
    source: str = "simulated"  # simulated | measured
    time_scale: float = 1.0
    wall_s: float | None = None
    workflow: WorkflowReport | None = None


def _overhead_fraction(folder_time_s: float, n: int, tm: TimingModel) -> float:
    if folder_time_s <= 0:
        return 0.0
    return (folder_time_s - n * tm.infer_s) / folder_time_s


def _report(
    mode: ExecutionMode,
    n: int,
    folder_time_s: float,
    tm: TimingModel,
    **extra,
) -> BenchReport:
    if n < 1:
        raise LesionFlowError(f"benchmark reports need n >= 1, got {n}")
    overhead = _overhead_fraction(folder_time_s, n, tm)
    return BenchReport(
        mode=mode,
        n_images=n,
        folder_time_s=folder_time_s,
        avg_per_image_s=folder_time_s / n,
        overhead_fraction=overhead,
        inference_fraction=1.0 - overhead,
        **extra,
    )


def simulate_reports(
    modes: tuple[ExecutionMode, ...],
    n: int,
    tm: TimingModel,
    batch_size: int = 32,
) -> list[BenchReport]:
    """Closed-form folder times for a set of modes, with pairwise speedups
    (speedups[b] = folder_time(b) / folder_time(self))."""
    times = {mode: simulate_folder_time(mode, n, tm, batch_size) for mode in modes}
    reports = []
    for mode in modes:
        speedups = {other.value: times[other] / times[mode] for other in modes}
        reports.append(_report(mode, n, times[mode], tm, speedups=speedups))
    return reports


def decompose_overhead(report: BenchReport, tm: TimingModel) -> tuple[float, float]:
    """(overhead_fraction, inference_fraction); the two always sum to 1."""
    overhead = _overhead_fraction(report.folder_time_s, report.n_images, tm)
    return overhead, 1.0 - overhead


def stage_synthetic_inputs(
    out_dir: Path,
    n: int,
    taxonomy: ClassTaxonomy | None = None,
    seed: int = 7,
) -> list[Path]:
    """Write ``n`` synthetic images (classes cycled) as PNGs for bench input."""
    taxonomy = taxonomy or default_taxonomy()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_class = {
        label: n // len(taxonomy.subtypes) + (1 if i < n % len(taxonomy.subtypes) else 0)
        for i, label in enumerate(taxonomy.subtypes)
    }
    records = generate_synthetic_dataset(taxonomy, per_class, seed)[:n]
    paths = []
    for i, rec in enumerate(records):
        path = out_dir / f"img-{i:04d}.png"
        Image.fromarray(rec.pixels).save(path)
        paths.append(path)
    return paths


def measure_run(
    mode: ExecutionMode,
    source_images: list[Path],
    workspace: Path,
    tm: TimingModel,
    taxonomy: ClassTaxonomy | None = None,
    batch_size: int = 32,
    time_scale: float = 1.0,
    realization: str = "sleep",
    retry_limit: int = 1,
    salt: str = "lesionflow-bench",
    parallel_prediction: bool = False,
) -> BenchReport:
    """Run the real workflow in one mode with emulated latencies and compare
    the measured folder time against the closed form.

    Registry load events are asserted: exactly n for rpa modes (reload per
    image), exactly 1 otherwise.
    """
    if parallel_prediction:
        raise LesionFlowError(
            "benchmark runs are strictly single-threaded; disable parallel_prediction"
        )
    taxonomy = taxonomy or default_taxonomy()
    n = len(source_images)
    if n < 1:
        raise LesionFlowError("measured runs need at least one image")

    run_dir = Path(workspace) / mode.value
    if run_dir.exists():
        shutil.rmtree(run_dir)
    input_dir = run_dir / "input"
    input_dir.mkdir(parents=True)
    for src in source_images:
        shutil.copy(src, input_dir / src.name)

    pacer = LatencyPacer(tm=tm, time_scale=time_scale, method=realization)
    backend_config = BackendConfig(kind="simulated", taxonomy=taxonomy, pacer=pacer)
    hooks = WorkflowHooks()
    if mode.is_rpa:
        hooks.before_image = lambda: pacer.charge_rpa(mode)
    elif mode is ExecutionMode.V1:
        hooks.before_call = pacer.charge_call
    else:
        hooks.before_batch = pacer.charge_batch

    cfg = WorkflowConfig(
        input_dir=input_dir,
        processed_dir=run_dir / "processed",
        failed_dir=run_dir / "failed",
        mode=mode,
        batch_size=batch_size,
        retry_limit=retry_limit,
        anonymization_salt=salt,
        log_path=run_dir / "workflow.log",
    )

    reset_registry()
    events_before = registry_load_events()
    start = time.perf_counter()
    pacer.charge(0.0)  # anchor the schedule at the measurement window start
    wf_report = run_workflow(cfg, backend_config, hooks)
    wall = time.perf_counter() - start

    events = registry_load_events() - events_before
    expected_events = n if mode.is_rpa else 1
    if events != expected_events:
        raise LesionFlowError(
            f"{mode.value}: expected {expected_events} registry load events, saw {events}"
        )
    if wf_report.failed:
        raise LesionFlowError(f"{mode.value}: {wf_report.failed} images failed during a measured run")

    folder_time = wall - pacer.charged_s * time_scale + pacer.charged_s
    return _report(
        mode,
        n,
        folder_time,
        tm,
        source="measured",
        time_scale=time_scale,
        wall_s=wall,
        workflow=wf_report,
    )


def project_cost(avg_per_image_s: float, n: int) -> float:
    """Linear extrapolation of a per-image average to ``n`` images."""
    if avg_per_image_s < 0 or n < 0:
        raise LesionFlowError("projection inputs must be >= 0")
    return avg_per_image_s * n


def format_duration(seconds: float) -> str:
    if seconds >= 3600:
        return f"{seconds / 3600:.1f} h"
    if seconds >= 60:
        return f"{seconds / 60:.1f} min"
    return f"{seconds:.1f} s"


@dataclass(frozen=True)
class ParetoPoint:
    mode: ExecutionMode
    accessibility: float  # ease-of-adoption score, 1-5
    avg_per_image_s: float


# Fixed accessibility/performance trade-off points for the four variants.
PARETO_POINTS = (
    ParetoPoint(ExecutionMode.RPA_UIPATH, 5.0, 2.58),
    ParetoPoint(ExecutionMode.RPA_AA, 4.7, 2.42),
    ParetoPoint(ExecutionMode.V1, 3.0, 0.28),
    ParetoPoint(ExecutionMode.V2, 1.5, 0.06),
)


def emit_pareto() -> list[ParetoPoint]:
    return list(PARETO_POINTS)


def pareto_table(points: list[ParetoPoint] | None = None) -> str:
    """Comma-delimited accessibility/performance table for external plotting."""
    points = emit_pareto() if points is None else points
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(PARETO_COLUMNS)
    for p in points:
        writer.writerow([p.mode.value, str(p.accessibility), str(p.avg_per_image_s)])
    return buf.getvalue()


def parse_pareto_table(text: str) -> list[ParetoPoint]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != PARETO_COLUMNS:
        raise LesionFlowError(f"unexpected pareto header {header}")
    return [
        ParetoPoint(ExecutionMode(row[0]), float(row[1]), float(row[2]))
        for row in reader
        if row
    ]


def report_table(reports: list[BenchReport]) -> str:
    """Machine-readable comma-delimited benchmark report."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        speedup = r.speedups.get(ExecutionMode.RPA_UIPATH.value, "")
        writer.writerow(
            [
                r.mode.value,
                r.n_images,
                str(r.folder_time_s),
                str(r.avg_per_image_s),
                str(r.overhead_fraction),
                str(speedup) if speedup != "" else "",
            ]
        )
    return buf.getvalue()


def parse_report_table(text: str) -> list[dict[str, object]]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise LesionFlowError(f"unexpected report header {reader.fieldnames}")
    rows: list[dict[str, object]] = []
    for row in reader:
        rows.append(
            {
                "mode": ExecutionMode(row["mode"]),
                "n_images": int(row["n_images"]),
                "folder_time_s": float(row["folder_time_s"]),
                "avg_per_image_s": float(row["avg_per_image_s"]),
                "overhead_fraction": float(row["overhead_fraction"]),
                "speedup_vs_uipath": float(row["speedup_vs_uipath"]) if row["speedup_vs_uipath"] else None,
            }
        )
    return rows
