"""Accuracy metrics, sensitivity sweeps, and timing benchmarks.

Balanced accuracy (mean per-class recall over the classes actually
present in the truth raster) is the headline score everywhere, so
class-imbalanced scenes do not reward majority-class collapse.
"""

from __future__ import annotations

import datetime as dt
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ImageStack, LabelRaster, build_transition_model, floor_normalize
from .errors import ConfigError, EvaluationError, ShapeError
from .recursion import (
    RecursionMode,
    StackClassification,
    TransitionModel,
    classify_stack,
    discriminative_update,
    generative_update,
    regularize,
    uniform_pmf,
    validate_likelihood,
)
from .textio import format_float

# ============================================================
# per-raster metrics
# ============================================================


def _as_labels(raster: LabelRaster | np.ndarray) -> np.ndarray:
    if isinstance(raster, LabelRaster):
        return raster.labels
    return np.asarray(raster)


def confusion_matrix(
    pred: LabelRaster | np.ndarray, truth: LabelRaster | np.ndarray, num_classes: int
) -> np.ndarray:
    """Counts with truth on rows, prediction on columns."""
    p = _as_labels(pred).ravel()
    t = _as_labels(truth).ravel()
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != truth shape {t.shape}")
    counts = np.bincount(
        t.astype(np.int64) * num_classes + p.astype(np.int64),
        minlength=num_classes * num_classes,
    )
    return counts.reshape(num_classes, num_classes)


def balanced_accuracy(
    pred: LabelRaster | np.ndarray, truth: LabelRaster | np.ndarray
) -> float:
    """Mean per-class recall over the classes present in the truth."""
    p = _as_labels(pred)
    t = _as_labels(truth)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != truth shape {t.shape}")
    if t.size == 0:
        raise EvaluationError("empty truth raster")
    num_classes = int(max(p.max(), t.max())) + 1
    matrix = confusion_matrix(p, t, num_classes)
    idx = np.flatnonzero(matrix.sum(axis=1) > 0)
    recalls = matrix[idx, idx] / matrix[idx].sum(axis=1)
    return float(recalls.mean())


def error_map(
    pred: LabelRaster | np.ndarray, truth: LabelRaster | np.ndarray
) -> LabelRaster:
    """Binary raster: 1 where prediction and truth disagree."""
    p = _as_labels(pred)
    t = _as_labels(truth)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != truth shape {t.shape}")
    return LabelRaster((p != t).astype(np.uint8), num_classes=2)


# ============================================================
# distribution summaries (boxplot statistics)
# ============================================================


@dataclass(frozen=True)
class BoxplotStats:
    """Five-number summary with 1.5*IQR whiskers and outliers."""

    median: float
    q1: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]


def summarize_distribution(values: Sequence[float] | np.ndarray) -> BoxplotStats:
    """Quartiles by linear interpolation; whiskers at the most extreme
    observations within 1.5*IQR of the quartiles; the rest are outliers."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EvaluationError("cannot summarize an empty sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample has non-finite values")
    q1, median, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    low_fence = q1 - 1.5 * iqr
    high_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= low_fence) & (arr <= high_fence)]
    outliers = np.sort(arr[(arr < low_fence) | (arr > high_fence)])
    return BoxplotStats(
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        iqr=float(iqr),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=tuple(float(v) for v in outliers),
    )


# ============================================================
# per-frame scores and the epsilon sweep
# ============================================================


@dataclass(frozen=True)
class FrameScore:
    date: dt.date
    recursive: float
    instantaneous: float


def frame_accuracies(
    classification: StackClassification, stack: ImageStack
) -> tuple[FrameScore, ...]:
    """Balanced accuracy per ground-truth-carrying frame."""
    if classification.dates != stack.dates:
        raise ShapeError("classification and stack cover different dates")
    scores = []
    for idx, frame in enumerate(stack.frames):
        if frame.truth is None:
            continue
        scores.append(
            FrameScore(
                date=frame.date,
                recursive=balanced_accuracy(
                    classification.recursive_labels[idx], frame.truth
                ),
                instantaneous=balanced_accuracy(
                    classification.instantaneous_labels[idx], frame.truth
                ),
            )
        )
    if not scores:
        raise EvaluationError("no frames carry ground truth")
    return tuple(scores)


@dataclass(frozen=True)
class SweepResult:
    """Mean balanced accuracy across truth frames per (algorithm, epsilon)."""

    grid: tuple[float, ...]
    algorithms: tuple[str, ...]
    recursive_accuracy: np.ndarray  # shape (algorithms, grid)
    instantaneous_accuracy: tuple[float, ...]  # per algorithm, epsilon-free

    def best_epsilon(self, algorithm: str) -> float:
        """Grid value maximizing mean accuracy; ties -> smallest epsilon."""
        row = self.recursive_accuracy[self.algorithms.index(algorithm)]
        return self.grid[int(np.argmax(row))]


def epsilon_sweep(
    stack: ImageStack,
    models: Mapping[str, object],
    modes: Mapping[str, RecursionMode],
    lam: float,
    grid: Sequence[float],
    workers: int = 1,
) -> SweepResult:
    """Re-run the recursion across a grid of transition probabilities.

    Every model in ``models`` is swept over every epsilon in ``grid``
    (strictly increasing, each within (0, 1)); the score is the mean
    balanced accuracy over the stack's ground-truth frames.
    """
    eps = tuple(float(e) for e in grid)
    if not eps:
        raise ConfigError("epsilon grid is empty")
    if any(not (0.0 < e < 1.0) for e in eps):
        raise ConfigError(f"epsilon values must lie in (0, 1): {eps}")
    if any(b <= a for a, b in zip(eps, eps[1:])):
        raise ConfigError(f"epsilon grid must strictly increase: {eps}")
    if not models:
        raise ConfigError("no models to sweep")
    if set(models) != set(modes):
        raise ConfigError("models and modes must list the same algorithms")
    if not any(fr.truth is not None for fr in stack.frames):
        raise EvaluationError("no frames carry ground truth")

    algorithms = tuple(models)
    accuracy = np.zeros((len(algorithms), len(eps)))
    instantaneous = []
    for a, name in enumerate(algorithms):
        inst_score = None
        for e, epsilon in enumerate(eps):
            transition = build_transition_model(
                models[name].num_classes, epsilon
            )
            result = classify_stack(
                stack, models[name], transition, lam, modes[name], workers=workers
            )
            scores = frame_accuracies(result, stack)
            accuracy[a, e] = float(np.mean([s.recursive for s in scores]))
            if inst_score is None:
                inst_score = float(np.mean([s.instantaneous for s in scores]))
        instantaneous.append(inst_score)
    return SweepResult(
        grid=eps,
        algorithms=algorithms,
        recursive_accuracy=accuracy,
        instantaneous_accuracy=tuple(instantaneous),
    )


# ============================================================
# timing bench
# ============================================================


@dataclass(frozen=True)
class TimingRecord:
    """Wall-time medians for one algorithm on one stack.

    ``baseline_seconds`` times one full-frame instantaneous model
    evaluation; ``recursion_seconds`` times one smoothing+update step
    given a precomputed instantaneous output; ``step_seconds[t]`` is the
    per-step median at step index t across repetitions.
    """

    algorithm: str
    baseline_seconds: float
    recursion_seconds: float
    step_seconds: tuple[float, ...]
    pixels: int
    repetitions: int


def timing_bench(
    stack: ImageStack,
    models: Mapping[str, object],
    modes: Mapping[str, RecursionMode],
    transition: TransitionModel,
    lam: float,
    repetitions: int = 5,
) -> tuple[TimingRecord, ...]:
    """Measure recursion overhead against the instantaneous baseline.

    Model outputs are computed once outside the timed region, so the
    recursion numbers isolate the smoothing+update arithmetic. Medians
    over ``repetitions`` (>= 3) keep scheduler noise out.
    """
    if repetitions < 3:
        raise ConfigError(f"repetitions must be >= 3, got {repetitions}")
    if not stack.frames:
        raise EvaluationError("cannot bench an empty stack")
    if set(models) != set(modes):
        raise ConfigError("models and modes must list the same algorithms")
    height, width = stack.shape
    pixels = height * width
    records = []
    for name, model in models.items():
        mode = modes[name]

        def evaluate(frame):
            if mode is RecursionMode.GENERATIVE:
                return model.frame_likelihood(frame)
            return model.frame_posterior(frame)

        outputs = [
            floor_normalize(validate_likelihood(evaluate(frame)))
            for frame in stack.frames
        ]

        evaluate(stack.frames[0])  # warmup
        baseline_samples = []
        for _ in range(repetitions):
            start = time.perf_counter()
            evaluate(stack.frames[0])
            baseline_samples.append(time.perf_counter() - start)

        k = model.num_classes
        step_samples = np.empty((repetitions, len(outputs)))
        for rep in range(repetitions):
            state = np.broadcast_to(uniform_pmf(k), (pixels, k)).copy()
            for t, inst_pmf in enumerate(outputs):
                start = time.perf_counter()
                weights = regularize(inst_pmf, lam)
                if mode is RecursionMode.GENERATIVE:
                    state = generative_update(weights, state, transition)
                else:
                    state = discriminative_update(weights, state, transition)
                step_samples[rep, t] = time.perf_counter() - start

        records.append(
            TimingRecord(
                algorithm=name,
                baseline_seconds=float(np.median(baseline_samples)),
                recursion_seconds=float(np.median(step_samples)),
                step_seconds=tuple(
                    float(v) for v in np.median(step_samples, axis=0)
                ),
                pixels=pixels,
                repetitions=repetitions,
            )
        )
    return tuple(records)


# ============================================================
# table writers
# ============================================================


def write_accuracy_table(scores: Sequence[FrameScore], path: str | Path) -> Path:
    lines = ["date,recursive,instantaneous"]
    lines += [
        f"{s.date.isoformat()},{format_float(s.recursive)},{format_float(s.instantaneous)}"
        for s in scores
    ]
    out = Path(path)
    out.write_text("\n".join(lines) + "\n")
    return out


def write_sweep_table(result: SweepResult, path: str | Path) -> Path:
    lines = ["epsilon,algorithm,balanced_accuracy"]
    for a, name in enumerate(result.algorithms):
        for e, eps in enumerate(result.grid):
            lines.append(
                f"{format_float(eps)},{name},"
                f"{format_float(result.recursive_accuracy[a, e])}"
            )
    out = Path(path)
    out.write_text("\n".join(lines) + "\n")
    return out


def write_bench_table(records: Sequence[TimingRecord], path: str | Path) -> Path:
    """One column per algorithm; recursion row above baseline row."""
    names = [r.algorithm for r in records]
    lines = [
        "metric," + ",".join(names),
        "recursion_seconds,"
        + ",".join(format_float(r.recursion_seconds) for r in records),
        "baseline_seconds,"
        + ",".join(format_float(r.baseline_seconds) for r in records),
    ]
    out = Path(path)
    out.write_text("\n".join(lines) + "\n")
    return out
