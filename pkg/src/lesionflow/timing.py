"""Parametric cost model for the four benchmarked pipeline variants.

Folder-time closed forms over a :class:`TimingModel` ``tm`` with ``n`` images
and batch size ``b``:

    rpa-* : n * (load_s + rpa_overhead_s + infer_s)       (reload per image)
    v1    : load_s + n * (call_overhead_s + infer_s)      (load once, one call per image)
    v2    : load_s + ceil(n / b) * batch_overhead_s + n * infer_s

The four default folder-time targets over-determine nothing: four equations,
six parameters. Two named calibrations pin the slack differently (see
``timing_preset``).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import CalibrationInfeasible, ConfigError


class ExecutionMode(str, Enum):
    """The four benchmarked pipeline variants."""

    RPA_UIPATH = "rpa-uipath-emulated"
    RPA_AA = "rpa-aa-emulated"
    V1 = "v1-singleton-sequential"
    V2 = "v2-singleton-batch"

    @property
    def is_rpa(self) -> bool:
        return self in (ExecutionMode.RPA_UIPATH, ExecutionMode.RPA_AA)


MODE_ALIASES = {
    "uipath": ExecutionMode.RPA_UIPATH,
    "aa": ExecutionMode.RPA_AA,
    "v1": ExecutionMode.V1,
    "v2": ExecutionMode.V2,
}


def parse_mode(name: str) -> ExecutionMode:
    """Accept either the full mode kind or a short alias (uipath/aa/v1/v2)."""
    key = name.strip().lower()
    if key in MODE_ALIASES:
        return MODE_ALIASES[key]
    for mode in ExecutionMode:
        if mode.value == key:
            return mode
    raise ConfigError(f"unknown execution mode {name!r}")


@dataclass(frozen=True)
class FolderTargets:
    """Folder-time targets (seconds) for the four variants at the reference
    test-set size of 31 images."""

    uipath: float = 80.0
    aa: float = 75.0
    v1: float = 8.65
    v2: float = 1.96

    def validate(self) -> None:
        for name in ("uipath", "aa", "v1", "v2"):
            if getattr(self, name) <= 0:
                raise CalibrationInfeasible(
                    f"target {name} must be positive, got {getattr(self, name)}", parameter=name
                )


DEFAULT_TARGETS = FolderTargets()
REFERENCE_N = 31
REFERENCE_BATCH = 32

# Documented default anchors: per-image inference cost and one-off load cost
# at the canonical targets. Both scale proportionally with the v2 per-image
# target so calibration is homogeneous (targets x2 => parameters x2).
ANCHOR_INFER_S = 0.05
ANCHOR_LOAD_S = 0.40

# Share of rpa-platform per-image time attributed to overhead (everything
# except inference) by the overhead-78 calibration.
RPA_OVERHEAD_SHARE = 0.78

PRESET_TABLE1 = "table1-exact"
PRESET_OVERHEAD78 = "overhead-78"
PRESET_NAMES = (PRESET_TABLE1, PRESET_OVERHEAD78)


@dataclass(frozen=True)
class TimingModel:
    """Per-event costs, all in seconds and all non-negative."""

    load_s: float
    infer_s: float
    call_overhead_s: float
    batch_overhead_s: float
    uipath_overhead_s: float
    aa_overhead_s: float

    def __post_init__(self) -> None:
        for name, value in self.as_dict().items():
            if value < 0:
                raise CalibrationInfeasible(f"{name} must be >= 0, got {value}", parameter=name)

    def as_dict(self) -> dict[str, float]:
        return {
            "load_s": self.load_s,
            "infer_s": self.infer_s,
            "call_overhead_s": self.call_overhead_s,
            "batch_overhead_s": self.batch_overhead_s,
            "uipath_overhead_s": self.uipath_overhead_s,
            "aa_overhead_s": self.aa_overhead_s,
        }

    def rpa_overhead_for(self, mode: ExecutionMode) -> float:
        if mode is ExecutionMode.RPA_UIPATH:
            return self.uipath_overhead_s
        if mode is ExecutionMode.RPA_AA:
            return self.aa_overhead_s
        raise ConfigError(f"{mode.value} has no per-image platform overhead")


def simulate_folder_time(
    mode: ExecutionMode, n: int, tm: TimingModel, batch_size: int = REFERENCE_BATCH
) -> float:
    """Closed-form folder time for ``n`` images in the given mode."""
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if mode.is_rpa:
        return n * (tm.load_s + tm.rpa_overhead_for(mode) + tm.infer_s)
    if mode is ExecutionMode.V1:
        return tm.load_s + n * (tm.call_overhead_s + tm.infer_s)
    n_batches = math.ceil(n / batch_size)
    return tm.load_s + n_batches * tm.batch_overhead_s + n * tm.infer_s


def _check_param(name: str, value: float) -> float:
    # Tolerate float dust from exact-solution arithmetic.
    if value < -1e-12:
        raise CalibrationInfeasible(
            f"targets imply negative {name} = {value:.6g}", parameter=name
        )
    return max(value, 0.0)


def _table1_exact(targets: FolderTargets, n: int, batch_size: int) -> TimingModel:
    """Anchor infer/load proportionally to the v2 per-image target, then solve
    the remaining four parameters so every target is matched exactly."""
    scale = (targets.v2 / n) / (DEFAULT_TARGETS.v2 / REFERENCE_N)
    infer = ANCHOR_INFER_S * scale
    load = ANCHOR_LOAD_S * scale
    n_batches = math.ceil(n / batch_size)
    return TimingModel(
        load_s=load,
        infer_s=infer,
        call_overhead_s=_check_param("call_overhead_s", (targets.v1 - load) / n - infer),
        batch_overhead_s=_check_param(
            "batch_overhead_s", (targets.v2 - load - n * infer) / n_batches
        ),
        uipath_overhead_s=_check_param("uipath_overhead_s", targets.uipath / n - load - infer),
        aa_overhead_s=_check_param("aa_overhead_s", targets.aa / n - load - infer),
    )


def _overhead_78(
    targets: FolderTargets, n: int, batch_size: int, clamp: bool
) -> TimingModel:
    """Pin inference time from the overhead share of the uipath per-image
    target; rpa rows are matched exactly, v1/v2 parameters are clamped at
    zero when the share makes their targets unreachable (best fit)."""
    infer = (1.0 - RPA_OVERHEAD_SHARE) * targets.uipath / n
    load = 0.0
    n_batches = math.ceil(n / batch_size)
    call = (targets.v1 - load) / n - infer
    batch = (targets.v2 - load - n * infer) / n_batches
    if clamp:
        call = max(call, 0.0)
        batch = max(batch, 0.0)
    else:
        call = _check_param("call_overhead_s", call)
        batch = _check_param("batch_overhead_s", batch)
    return TimingModel(
        load_s=load,
        infer_s=infer,
        call_overhead_s=call,
        batch_overhead_s=batch,
        uipath_overhead_s=_check_param("uipath_overhead_s", targets.uipath / n - infer),
        aa_overhead_s=_check_param("aa_overhead_s", targets.aa / n - infer),
    )


def calibrate_timing_model(
    targets: FolderTargets = DEFAULT_TARGETS,
    n: int = REFERENCE_N,
    batch_size: int = REFERENCE_BATCH,
) -> TimingModel:
    """Solve a TimingModel from folder-time targets.

    Tries to pin ``infer_s`` from the rpa overhead share first; if that share
    makes any target unreachable (it does for the default targets), falls
    back to the anchored solution that reproduces every target exactly.
    """
    targets.validate()
    try:
        return _overhead_78(targets, n, batch_size, clamp=False)
    except CalibrationInfeasible:
        return _table1_exact(targets, n, batch_size)


def timing_preset(
    name: str,
    targets: FolderTargets = DEFAULT_TARGETS,
    n: int = REFERENCE_N,
    batch_size: int = REFERENCE_BATCH,
) -> TimingModel:
    """Build one of the two named calibrations.

    ``table1-exact`` reproduces all four folder-time targets exactly.
    ``overhead-78`` reproduces the rpa rows and the 78/22 overhead split,
    relaxing v1/v2 to the closest non-negative fit.
    """
    targets.validate()
    if name == PRESET_TABLE1:
        return _table1_exact(targets, n, batch_size)
    if name == PRESET_OVERHEAD78:
        return _overhead_78(targets, n, batch_size, clamp=True)
    raise ConfigError(f"unknown timing preset {name!r}; expected one of {PRESET_NAMES}")


@dataclass
class LatencyPacer:
    """Realizes modeled latencies as real delays against a deadline schedule.

    Every charge extends a cumulative schedule anchored at the first charge;
    the pacer then waits until the scheduled wall-clock deadline. Anchoring to
    absolute deadlines keeps sleep overshoot from accumulating and lets real
    pipeline work overlap into the scheduled waits, so a measured run's wall
    time tracks ``time_scale * total_charged`` plus only the real work that
    does not fit inside the schedule.

    ``method`` is ``"sleep"`` (yield to the OS) or ``"busy-wait"`` (spin on
    the monotonic clock; tightest at sub-millisecond scales).
    """

    tm: TimingModel
    time_scale: float = 1.0
    method: str = "sleep"
    _t0: float | None = field(default=None, init=False, repr=False)
    _charged: float = field(default=0.0, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.time_scale < 0:
            raise ConfigError(f"time_scale must be >= 0, got {self.time_scale}")
        if self.method not in ("sleep", "busy-wait"):
            raise ConfigError(f"timing realization must be 'sleep' or 'busy-wait', got {self.method!r}")

    @property
    def charged_s(self) -> float:
        """Total modeled seconds charged so far (unscaled)."""
        return self._charged

    def reset(self) -> None:
        self._t0 = None
        self._charged = 0.0

    def charge(self, seconds: float) -> None:
        now = time.perf_counter()
        if self._t0 is None:
            self._t0 = now
        self._charged += seconds
        deadline = self._t0 + self._charged * self.time_scale
        if self.method == "sleep":
            while True:
                remaining = deadline - time.perf_counter()
                if remaining <= 0:
                    return
                time.sleep(remaining)
        else:
            while time.perf_counter() < deadline:
                pass

    # Convenience charges for the cost events of a run.
    def charge_load(self) -> None:
        self.charge(self.tm.load_s)

    def charge_infer(self, n_images: int = 1) -> None:
        self.charge(self.tm.infer_s * n_images)

    def charge_call(self) -> None:
        self.charge(self.tm.call_overhead_s)

    def charge_batch(self) -> None:
        self.charge(self.tm.batch_overhead_s)

    def charge_rpa(self, mode: ExecutionMode) -> None:
        self.charge(self.tm.rpa_overhead_for(mode))


def scaled_copy(tm: TimingModel, factor: float) -> TimingModel:
    """TimingModel with every field multiplied by ``factor``."""
    return replace(tm, **{k: v * factor for k, v in tm.as_dict().items()})
