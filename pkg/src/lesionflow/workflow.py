"""File-based classification workflow: scan, classify, log, relocate.

Orchestration is strictly sequential at the batch level: batch k+1 starts
only after every file of batch k reached a terminal state. For every file the
terminal log entry is appended (and flushed) before the file moves, and no
raw path or basename ever reaches the log: files are identified by a salted,
truncated digest of their basename.

Log format (one record per line, tab-separated, fixed field order):

    ts_iso8601  image_id  event  predicted_label  confidence  elapsed_ms  attempt

``event`` is one of predicted/retry/dead_letter. For retry and dead_letter
entries the predicted_label column carries the error class name and the
confidence column is '-'.
"""

from __future__ import annotations

import hashlib
import os
import shutil
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from .classifier import (
    BackendConfig,
    ModelHandle,
    PredictionResult,
    acquire_model,
    predict_batch,
    predict_one,
    reset_registry,
)
from .errors import DirUnreadable, DirUnwritable, LesionFlowError, MalformedImage
from .preprocess import DEFAULT_CHANNEL_MEAN, DEFAULT_CHANNEL_STD, preprocess
from .timing import ExecutionMode

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".ppm")
LOG_SEP = "\t"
LOG_PLACEHOLDER = "-"
TOKEN_HEX_LEN = 16


class Disposition(str, Enum):
    RETRIED = "retried"
    DEAD_LETTERED = "dead_lettered"


@dataclass(frozen=True)
class ScanResult:
    paths: tuple[Path, ...]
    ignored: int


def scan_input(input_dir: Path) -> ScanResult:
    """Snapshot the image files in a directory, sorted by filename. Files that
    appear after the scan are not part of the run."""
    input_dir = Path(input_dir)
    if not input_dir.is_dir() or not os.access(input_dir, os.R_OK):
        raise DirUnreadable(f"input directory {input_dir} missing or unreadable")
    paths: list[Path] = []
    ignored = 0
    for entry in input_dir.iterdir():
        if not entry.is_file():
            continue
        if entry.suffix.lower() in IMAGE_EXTENSIONS:
            paths.append(entry)
        else:
            ignored += 1
    paths.sort(key=lambda p: p.name)
    return ScanResult(paths=tuple(paths), ignored=ignored)


def anonymize_path(path: Path | str, salt: str) -> str:
    """Salted, truncated digest of the basename; deterministic per
    (salt, basename) and irreversible, so logs never carry raw names."""
    basename = Path(path).name
    digest = hashlib.sha256((salt + basename).encode()).hexdigest()
    return digest[:TOKEN_HEX_LEN]


@dataclass(frozen=True)
class LogRecord:
    ts: str
    image_id: str
    event: str  # predicted | retry | dead_letter
    predicted_label: str
    confidence: float | None
    elapsed_ms: float | None
    attempt: int

    def line(self) -> str:
        conf = LOG_PLACEHOLDER if self.confidence is None else f"{self.confidence:.4f}"
        elapsed = LOG_PLACEHOLDER if self.elapsed_ms is None else f"{self.elapsed_ms:.3f}"
        return LOG_SEP.join(
            (self.ts, self.image_id, self.event, self.predicted_label, conf, elapsed, str(self.attempt))
        )


def parse_log_line(line: str) -> LogRecord:
    ts, image_id, event, label, conf, elapsed, attempt = line.rstrip("\n").split(LOG_SEP)
    return LogRecord(
        ts=ts,
        image_id=image_id,
        event=event,
        predicted_label=label,
        confidence=None if conf == LOG_PLACEHOLDER else float(conf),
        elapsed_ms=None if elapsed == LOG_PLACEHOLDER else float(elapsed),
        attempt=int(attempt),
    )


class WorkflowLogger:
    """Append-only, one flushed line per record."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")
        self.lines_written = 0

    def emit(self, record: LogRecord) -> None:
        self._fh.write(record.line() + "\n")
        self._fh.flush()
        self.lines_written += 1

    def close(self) -> None:
        self._fh.close()


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class WorkflowConfig:
    input_dir: Path
    processed_dir: Path
    failed_dir: Path
    mode: ExecutionMode = ExecutionMode.V2
    batch_size: int = 32
    retry_limit: int = 1
    anonymization_salt: str = "lesionflow"
    log_path: Path | None = None
    channel_mean: tuple[float, float, float] = DEFAULT_CHANNEL_MEAN
    channel_std: tuple[float, float, float] = DEFAULT_CHANNEL_STD
    parallel_prediction: bool = False  # reserved; the bench refuses it

    def __post_init__(self) -> None:
        self.input_dir = Path(self.input_dir)
        self.processed_dir = Path(self.processed_dir)
        self.failed_dir = Path(self.failed_dir)
        dirs = {self.input_dir.resolve(), self.processed_dir.resolve(), self.failed_dir.resolve()}
        if len(dirs) != 3:
            raise DirUnwritable("input, processed and failed directories must be distinct")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.retry_limit < 0:
            raise ValueError(f"retry_limit must be >= 0, got {self.retry_limit}")
        if self.log_path is None:
            self.log_path = self.processed_dir.parent / "workflow.log"
        self.log_path = Path(self.log_path)


@dataclass(frozen=True)
class WorkflowReport:
    scanned: int
    succeeded: int
    failed: int
    retries: int
    ignored: int
    log_path: Path
    wall_time_s: float


@dataclass
class WorkflowHooks:
    """Per-event callbacks used by the benchmark harness to charge modeled
    overheads at the points where a platform would pay them."""

    before_image: Callable[[], None] | None = None  # rpa modes: per-image activity
    before_call: Callable[[], None] | None = None   # v1: per prediction call
    before_batch: Callable[[], None] | None = None  # v2: per batch

    def fire(self, name: str) -> None:
        fn = getattr(self, name)
        if fn is not None:
            fn()


def _move_file(src: Path, dst_dir: Path) -> Path:
    # shutil.move renames within a filesystem and falls back to copy+delete
    # across filesystems.
    return Path(shutil.move(str(src), str(dst_dir / src.name)))


def load_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (OSError, ValueError, SyntaxError) as exc:
        raise MalformedImage(f"cannot decode image: {type(exc).__name__}: {exc}") from exc


@dataclass
class _ImageState:
    path: Path
    image_id: str
    attempts: int = 0
    tensor: np.ndarray | None = None
    result: PredictionResult | None = None
    error: LesionFlowError | None = None
    dead: bool = False


def handle_failure(
    state: _ImageState,
    error: LesionFlowError,
    retry_limit: int,
    logger: WorkflowLogger,
    retry_fn: Callable[[_ImageState], None],
    failed_dir: Path,
    retry_counter: list[int],
) -> Disposition:
    """Retry a failed image up to ``retry_limit`` times; on continued failure
    write a dead_letter entry (pseudonymous id, error class, attempt count)
    and move the file to the failed directory. A terminal disposition is
    always reached."""
    state.error = error
    while state.attempts <= retry_limit:
        logger.emit(
            LogRecord(
                ts=_now_iso(),
                image_id=state.image_id,
                event="retry",
                predicted_label=type(state.error).__name__,
                confidence=None,
                elapsed_ms=None,
                attempt=state.attempts,
            )
        )
        retry_counter[0] += 1
        state.attempts += 1
        try:
            retry_fn(state)
            return Disposition.RETRIED
        except LesionFlowError as exc:
            state.error = exc
    logger.emit(
        LogRecord(
            ts=_now_iso(),
            image_id=state.image_id,
            event="dead_letter",
            predicted_label=type(state.error).__name__,
            confidence=None,
            elapsed_ms=None,
            attempt=state.attempts,
        )
    )
    try:
        _move_file(state.path, failed_dir)
    except OSError as exc:
        raise DirUnwritable(f"cannot move {state.image_id} to failed: {exc}") from exc
    state.dead = True
    return Disposition.DEAD_LETTERED


def _ensure_writable_dir(path: Path, role: str) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DirUnwritable(f"cannot create {role} directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise DirUnwritable(f"{role} directory {path} is not writable")


def run_workflow(
    cfg: WorkflowConfig,
    model: ModelHandle | BackendConfig,
    hooks: WorkflowHooks | None = None,
) -> WorkflowReport:
    """Process every image in the input directory to a terminal state.

    Files are scanned once, partitioned into consecutive batches and handled
    strictly sequentially. In the rpa-emulated modes the registry is reset
    and the model re-acquired before every image, reproducing the
    reload-per-invocation cost structure; v1 predicts one image per call on a
    shared handle; v2 predicts in batches of ``cfg.batch_size``.

    ``model`` may be a live handle or a backend config; rpa modes accept the
    config directly so a run's registry load events exactly equal the image
    count. Per-image errors never abort the run; unwritable destination
    directories do, with DirUnwritable.
    """
    hooks = hooks or WorkflowHooks()
    backend_config = model.config if isinstance(model, ModelHandle) else model
    handle: ModelHandle | None = model if isinstance(model, ModelHandle) else None

    _ensure_writable_dir(cfg.processed_dir, "processed")
    _ensure_writable_dir(cfg.failed_dir, "failed")
    scan = scan_input(cfg.input_dir)
    logger = WorkflowLogger(cfg.log_path)
    retry_counter = [0]
    succeeded = 0
    failed = 0

    def current_model() -> ModelHandle:
        nonlocal handle
        if handle is None:
            handle = acquire_model(backend_config)
        return handle

    def decode_only(state: _ImageState) -> None:
        raw = load_image(state.path)
        state.tensor = preprocess(raw, cfg.channel_mean, cfg.channel_std)

    def predict_only(state: _ImageState) -> None:
        state.result = predict_one(current_model(), state.tensor, image_id=state.image_id)

    def classify_full(state: _ImageState) -> None:
        decode_only(state)
        predict_only(state)

    def finalize_success(state: _ImageState) -> None:
        nonlocal succeeded
        result = state.result
        logger.emit(
            LogRecord(
                ts=_now_iso(),
                image_id=state.image_id,
                event="predicted",
                predicted_label=result.predicted_label,
                confidence=float(result.probabilities.max()),
                elapsed_ms=result.elapsed_s * 1000.0,
                attempt=state.attempts,
            )
        )
        try:
            _move_file(state.path, cfg.processed_dir)
        except OSError as exc:
            raise DirUnwritable(f"cannot move {state.image_id} to processed: {exc}") from exc
        succeeded += 1

    t0 = time.perf_counter()
    batch_size = cfg.batch_size if cfg.mode is ExecutionMode.V2 else 1
    paths = list(scan.paths)
    for start in range(0, len(paths), batch_size):
        states = [
            _ImageState(path=p, image_id=anonymize_path(p, cfg.anonymization_salt))
            for p in paths[start:start + batch_size]
        ]
        if cfg.mode is ExecutionMode.V2:
            for state in states:
                state.attempts = 1
                try:
                    decode_only(state)
                except LesionFlowError as exc:
                    handle_failure(
                        state, exc, cfg.retry_limit, logger, decode_only,
                        cfg.failed_dir, retry_counter,
                    )
            live = [s for s in states if not s.dead]
            hooks.fire("before_batch")
            if live:
                try:
                    results = predict_batch(
                        current_model(),
                        [s.tensor for s in live],
                        cfg.batch_size,
                        image_ids=[s.image_id for s in live],
                    )
                    for state, result in zip(live, results):
                        state.result = result
                except LesionFlowError:
                    # Batch failed: isolate per image under the retry policy.
                    for state in live:
                        try:
                            predict_only(state)
                        except LesionFlowError as exc:
                            handle_failure(
                                state, exc, cfg.retry_limit, logger, predict_only,
                                cfg.failed_dir, retry_counter,
                            )
            # Terminal log entries and moves, in input order.
            for state in states:
                if state.dead:
                    failed += 1
                else:
                    finalize_success(state)
        else:
            for state in states:
                if cfg.mode.is_rpa:
                    hooks.fire("before_image")
                    reset_registry()
                    handle = None
                else:
                    hooks.fire("before_call")
                state.attempts = 1
                try:
                    classify_full(state)
                except LesionFlowError as exc:
                    handle_failure(
                        state, exc, cfg.retry_limit, logger, classify_full,
                        cfg.failed_dir, retry_counter,
                    )
                if state.dead:
                    failed += 1
                else:
                    finalize_success(state)

    wall = time.perf_counter() - t0
    logger.close()
    report = WorkflowReport(
        scanned=len(scan.paths),
        succeeded=succeeded,
        failed=failed,
        retries=retry_counter[0],
        ignored=scan.ignored,
        log_path=logger.path,
        wall_time_s=wall,
    )
    assert report.succeeded + report.failed == report.scanned
    return report
