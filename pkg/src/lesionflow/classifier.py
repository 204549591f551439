"""Classification backends behind a process-wide load-once registry.

The ``reference`` backend is a deterministic stand-in for a real CNN: it
mean-pools the input tensor to an 8x8 per-channel grid (192 features) and
projects through a fixed weight matrix followed by softmax. The weight matrix
is generated deterministically from (taxonomy, seed): centered, normalized
canonical class templates plus a small seeded perturbation. A plain random
matrix cannot rank the correct class first across 16 classes, so the rows are
anchored on the class templates; the seed parameterizes the perturbation and
is pinned once the co-design check (canonical image of class k maximizes
class k's score) holds.

The ``simulated`` backend adds modeled latencies (load on initialization,
inference per image) through a :class:`~lesionflow.timing.LatencyPacer`. The
``external`` kind is an adapter seam: register a factory on the
:class:`BackendConfig`; no implementation is bundled.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .errors import BackendFailure, LesionFlowError, LoadFailure, UnknownBackend
from .patterns import BLOCK_GRID, canonical_image
from .preprocess import TARGET_SIZE, preprocess, validate_tensor
from .taxonomy import ClassTaxonomy, default_taxonomy
from .timing import LatencyPacer

FEATURE_DIM = BLOCK_GRID * BLOCK_GRID * 3
DEFAULT_WEIGHT_SEED = 0
WEIGHT_JITTER = 0.02

BACKEND_KINDS = ("reference", "simulated", "external")

# Pooling matrix: block means over 28px strips along each axis.
_POOL = np.zeros((BLOCK_GRID, TARGET_SIZE), dtype=np.float32)
_block = TARGET_SIZE // BLOCK_GRID
for _i in range(BLOCK_GRID):
    _POOL[_i, _i * _block:(_i + 1) * _block] = 1.0 / _block


def pooled_features(t: np.ndarray) -> np.ndarray:
    """8x8 per-channel mean grid of a tensor, flattened to 192 float64s."""
    rows = (_POOL @ t.reshape(TARGET_SIZE, TARGET_SIZE * 3)).reshape(BLOCK_GRID, TARGET_SIZE, 3)
    grid = np.tensordot(rows, _POOL, axes=([1], [1])).transpose(0, 2, 1)
    return grid.reshape(-1).astype(np.float64)


def softmax(scores: np.ndarray) -> np.ndarray:
    e = np.exp(scores - scores.max())
    return e / e.sum()


def class_weight_matrix(taxonomy: ClassTaxonomy, seed: int = DEFAULT_WEIGHT_SEED) -> np.ndarray:
    """(n_classes, 192) projection: centered unit templates + seeded jitter."""
    feats = np.stack(
        [pooled_features(preprocess(canonical_image(taxonomy, label))) for label in taxonomy.subtypes]
    )
    centered = feats - feats.mean(axis=0, keepdims=True)
    centered /= np.linalg.norm(centered, axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    return centered + WEIGHT_JITTER * rng.standard_normal(centered.shape) / np.sqrt(FEATURE_DIM)


def reference_scores(t: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Probability vector for one tensor: pooled features -> linear map ->
    softmax. Pure; a zero tensor yields the uniform vector (no bias term)."""
    validate_tensor(t)
    return softmax(weights @ pooled_features(t))


class Scorer(Protocol):
    def score_one(self, t: np.ndarray) -> np.ndarray: ...


class ReferenceBackend:
    kind = "reference"

    def __init__(self, taxonomy: ClassTaxonomy, weight_seed: int = DEFAULT_WEIGHT_SEED):
        self.class_labels = taxonomy.subtypes
        self.weights = class_weight_matrix(taxonomy, weight_seed)

    def score_one(self, t: np.ndarray) -> np.ndarray:
        return reference_scores(t, self.weights)


class SimulatedBackend(ReferenceBackend):
    """Reference scores plus modeled latencies realized through a pacer."""

    kind = "simulated"

    def __init__(self, taxonomy: ClassTaxonomy, pacer: LatencyPacer, weight_seed: int = DEFAULT_WEIGHT_SEED):
        super().__init__(taxonomy, weight_seed)
        self.pacer = pacer
        pacer.charge_load()

    def score_one(self, t: np.ndarray) -> np.ndarray:
        self.pacer.charge_infer(1)
        return super().score_one(t)


@dataclass
class BackendConfig:
    """Backend selection plus everything needed to construct it."""

    kind: str = "reference"
    taxonomy: ClassTaxonomy = field(default_factory=default_taxonomy)
    weight_seed: int = DEFAULT_WEIGHT_SEED
    pacer: LatencyPacer | None = None
    # Adapter contract for kind="external": called with the taxonomy, must
    # return an object with .class_labels (aligned to taxonomy.subtypes) and
    # .score_one(tensor) -> probability vector.
    external_factory: Callable[[ClassTaxonomy], Scorer] | None = None


@dataclass(frozen=True)
class ModelHandle:
    """Shared, read-only handle to the loaded model."""

    backend_kind: str
    class_labels: tuple[str, ...]
    instance_id: str
    registry_load_count: int
    backend: Scorer = field(compare=False, repr=False)
    config: BackendConfig = field(compare=False, repr=False)


def _build_backend(config: BackendConfig) -> Scorer:
    if config.kind == "reference":
        return ReferenceBackend(config.taxonomy, config.weight_seed)
    if config.kind == "simulated":
        if config.pacer is None:
            raise LoadFailure("simulated backend requires a LatencyPacer on the config")
        return SimulatedBackend(config.taxonomy, config.pacer, config.weight_seed)
    if config.kind == "external":
        if config.external_factory is None:
            raise LoadFailure("external backend requires an adapter factory on the config")
        try:
            return config.external_factory(config.taxonomy)
        except LesionFlowError:
            raise
        except Exception as exc:
            raise LoadFailure(f"external adapter failed to initialize: {exc}") from exc
    raise UnknownBackend(f"unknown backend kind {config.kind!r}; expected one of {BACKEND_KINDS}")


class ModelRegistry:
    """Load-once model cache. Concurrent acquisitions race on a single lock,
    so exactly one caller performs the load and everyone shares the handle."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._handle: ModelHandle | None = None
        self._load_events = 0

    @property
    def load_count(self) -> int:
        """Loads since the last reset: 0 when empty, 1 when populated."""
        return 0 if self._handle is None else self._handle.registry_load_count

    @property
    def load_events(self) -> int:
        """Cumulative loads across resets (observability for the harness)."""
        return self._load_events

    def acquire(self, config: BackendConfig) -> ModelHandle:
        with self._lock:
            if self._handle is None:
                backend = _build_backend(config)
                self._load_events += 1
                self._handle = ModelHandle(
                    backend_kind=config.kind,
                    class_labels=tuple(config.taxonomy.subtypes),
                    instance_id=uuid.uuid4().hex,
                    registry_load_count=1,
                    backend=backend,
                    config=config,
                )
            return self._handle

    def reset(self) -> None:
        with self._lock:
            self._handle = None


_REGISTRY = ModelRegistry()


def acquire_model(config: BackendConfig) -> ModelHandle:
    """Process-wide acquisition: the first call loads, later calls share."""
    return _REGISTRY.acquire(config)


def reset_registry() -> None:
    """Empty the registry so the next acquisition performs a fresh load."""
    _REGISTRY.reset()


def registry_load_events() -> int:
    return _REGISTRY.load_events


def registry_load_count() -> int:
    return _REGISTRY.load_count


@dataclass(frozen=True)
class PredictionResult:
    image_id: str
    probabilities: np.ndarray
    predicted_label: str
    elapsed_s: float


def _score(model: ModelHandle, t: np.ndarray) -> np.ndarray:
    try:
        return model.backend.score_one(t)
    except LesionFlowError:
        raise
    except Exception as exc:
        raise BackendFailure(f"backend raised {type(exc).__name__}: {exc}") from exc


def predict_one(model: ModelHandle, t: np.ndarray, image_id: str = "") -> PredictionResult:
    """Classify one tensor. Ties at the argmax break toward the lowest class
    index (np.argmax returns the first maximum)."""
    validate_tensor(t)
    start = time.perf_counter()
    probs = _score(model, t)
    label = model.class_labels[int(np.argmax(probs))]
    return PredictionResult(
        image_id=image_id,
        probabilities=probs,
        predicted_label=label,
        elapsed_s=time.perf_counter() - start,
    )


def predict_batch(
    model: ModelHandle,
    ts: list[np.ndarray],
    batch_size: int,
    image_ids: list[str] | None = None,
) -> list[PredictionResult]:
    """Classify tensors in consecutive chunks of at most ``batch_size``.

    Results keep input order and are value-identical to ``predict_one`` on
    each tensor: chunking never changes the per-image evaluation order, so
    the reference backend is bit-exact across batch sizes.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if image_ids is not None and len(image_ids) != len(ts):
        raise ValueError("image_ids length must match ts")
    results: list[PredictionResult] = []
    for start in range(0, len(ts), batch_size):
        stop = min(start + batch_size, len(ts))
        try:
            for i in range(start, stop):
                image_id = image_ids[i] if image_ids is not None else ""
                results.append(predict_one(model, ts[i], image_id=image_id))
        except BackendFailure as exc:
            raise BackendFailure(
                f"chunk [{start}:{stop}) failed: {exc}", index_range=(start, stop)
            ) from exc
    return results
