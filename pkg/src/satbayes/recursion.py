"""Online Bayesian recursion over image time series.

Turns any instantaneous per-pixel classifier into an online classifier
by propagating a per-pixel class belief through a hidden-Markov chain.
Two update flavors are provided: a generative update that consumes
class-conditional likelihoods, and a discriminative update that
consumes instantaneous posterior probabilities and divides out the
class marginals. Both operate on float64 arrays whose last axis
indexes classes, so one call handles a pixel or a whole frame.

The ``counted_*`` functions are deliberately naive scalar
re-implementations used as an independent reference: they return the
same posterior and an exact floating-point operation count that the
closed-form ``update_operation_count`` formulas must reproduce.
"""

from __future__ import annotations

import datetime as dt
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .core import (
    Frame,
    ImageStack,
    LabelRaster,
    TransitionModel,
    floor_normalize,
    uniform_pmf,
    validate_likelihood,
    validate_pmf,
)
from .errors import (
    ConfigError,
    InvalidHyperparameterError,
    InvalidMarginalError,
    ShapeError,
)


class RecursionMode(enum.Enum):
    """Which instantaneous output the recursion consumes."""

    GENERATIVE = "generative"          # class-conditional likelihoods
    DISCRIMINATIVE = "discriminative"  # instantaneous posteriors


# ============================================================
# single-step updates
# ============================================================


def _check_class_axis(arr: np.ndarray, num_classes: int, name: str) -> None:
    if arr.shape[-1] != num_classes:
        raise ShapeError(
            f"{name} has {arr.shape[-1]} classes, transition model has {num_classes}"
        )


def predict_prior(prev_posterior: np.ndarray, transition: TransitionModel) -> np.ndarray:
    """Propagate the previous posterior one step through the transition model.

    ``prev_posterior`` holds probability vectors on the last axis. The
    result is the predictive prior for the next date and is again a
    probability vector within 1e-12.
    """
    prev = np.asarray(prev_posterior, dtype=np.float64)
    _check_class_axis(prev, transition.num_classes, "prev_posterior")
    return prev @ transition.matrix


def generative_update(
    likelihood: np.ndarray,
    prev_posterior: np.ndarray,
    transition: TransitionModel,
) -> np.ndarray:
    """One recursion step from class-conditional likelihoods.

    Computes posterior_i proportional to likelihood_i * prior_i where the
    prior comes from `predict_prior`, normalized over classes. Inputs
    validate per `validate_likelihood` / `validate_pmf`; an all-zero
    likelihood row raises DegenerateLikelihoodError.
    """
    lik = validate_likelihood(likelihood)
    prev = validate_pmf(prev_posterior)
    _check_class_axis(lik, transition.num_classes, "likelihood")
    prior = predict_prior(prev, transition)
    return floor_normalize(lik * prior)


def discriminative_update(
    inst_posterior: np.ndarray,
    prev_posterior: np.ndarray,
    transition: TransitionModel,
    marginal: np.ndarray | None = None,
) -> np.ndarray:
    """One recursion step from instantaneous posterior probabilities.

    Each instantaneous posterior is divided by the class marginal
    (uniform when ``marginal`` is None) to recover a likelihood-shaped
    weight, then combined with the propagated prior exactly as in the
    generative update. Non-positive marginals raise
    InvalidMarginalError.
    """
    inst = validate_likelihood(inst_posterior)
    prev = validate_pmf(prev_posterior)
    _check_class_axis(inst, transition.num_classes, "inst_posterior")
    if marginal is None:
        marg = uniform_pmf(transition.num_classes)
    else:
        marg = np.asarray(marginal, dtype=np.float64)
        _check_class_axis(marg, transition.num_classes, "marginal")
        if np.any(marg <= 0.0) or not np.all(np.isfinite(marg)):
            raise InvalidMarginalError("marginal entries must be finite and > 0")
    prior = predict_prior(prev, transition)
    return floor_normalize((inst / marg) * prior)


def regularize(pmf: np.ndarray, lam: float) -> np.ndarray:
    """Additive smoothing toward uniform: (p + lam) / sum(p + lam).

    ``lam`` = 0 returns the input unchanged (bit-exact identity); larger
    values pull the vector toward uniform without reordering classes.
    """
    if not np.isfinite(lam) or lam < 0.0:
        raise InvalidHyperparameterError(f"lam must be finite and >= 0, got {lam}")
    arr = validate_pmf(pmf)
    if lam == 0.0:
        return arr
    shifted = arr + lam
    return shifted / shifted.sum(axis=-1, keepdims=True)


def map_decision(posterior: np.ndarray) -> np.ndarray | int:
    """Most probable class index per probability vector; ties -> lowest index."""
    arr = np.asarray(posterior, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise ShapeError(f"posterior needs a class axis, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("posterior has non-finite entries")
    result = np.argmax(arr, axis=-1)
    return int(result) if arr.ndim == 1 else result


# ============================================================
# operation counting (reference scalar implementations)
# ============================================================


def update_operation_count(num_classes: int, mode: RecursionMode) -> int:
    """Closed-form per-pixel floating-point operation count of one update.

    Counts multiply-accumulates, multiplies, and divides of the naive
    scalar step exactly as `counted_generative_update` /
    `counted_discriminative_update` perform them (the per-class
    denominator recomputation is intentional; it is what the closed
    forms describe).
    """
    k = int(num_classes)
    if k < 2:
        raise ConfigError(f"need at least 2 classes, got {num_classes}")
    if mode is RecursionMode.GENERATIVE:
        return k * (k * k + k + 2)
    if mode is RecursionMode.DISCRIMINATIVE:
        return k * (k * (k + 1) + k + 2)
    raise ConfigError(f"unknown recursion mode: {mode!r}")


def counted_generative_update(
    likelihood: np.ndarray,
    prev_posterior: np.ndarray,
    transition: TransitionModel,
) -> tuple[np.ndarray, int]:
    """Scalar-loop generative update returning (posterior, op count).

    Pure-Python loops over one probability vector; no flooring, no
    vectorization. Serves as the independent numerical reference for
    `generative_update` and as the accounting reference for
    `update_operation_count`.
    """
    lik = validate_likelihood(np.atleast_1d(likelihood))
    prev = validate_pmf(np.atleast_1d(prev_posterior))
    if lik.ndim != 1 or prev.ndim != 1:
        raise ShapeError("counted updates take single probability vectors")
    m = transition.matrix
    k = transition.num_classes
    _check_class_axis(lik, k, "likelihood")
    ops = 0
    posterior = np.empty(k)
    for i in range(k):
        prior_i = 0.0
        for j in range(k):
            prior_i += prev[j] * m[j, i]  # fused multiply-add: 1 op
            ops += 1
        denom = 0.0
        for c in range(k):
            inner = 0.0
            for j in range(k):
                inner += prev[j] * m[j, c]
                ops += 1
            denom += lik[c] * inner
        posterior[i] = lik[i] * prior_i / denom
        ops += 2  # one multiply, one divide
    return posterior, ops


def counted_discriminative_update(
    inst_posterior: np.ndarray,
    prev_posterior: np.ndarray,
    transition: TransitionModel,
    marginal: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Scalar-loop discriminative update returning (posterior, op count).

    Identical accounting to `counted_generative_update` plus one
    division per denominator term for the posterior/marginal ratio.
    """
    inst = validate_likelihood(np.atleast_1d(inst_posterior))
    prev = validate_pmf(np.atleast_1d(prev_posterior))
    if inst.ndim != 1 or prev.ndim != 1:
        raise ShapeError("counted updates take single probability vectors")
    m = transition.matrix
    k = transition.num_classes
    _check_class_axis(inst, k, "inst_posterior")
    if marginal is None:
        marg = uniform_pmf(k)
    else:
        marg = np.asarray(marginal, dtype=np.float64)
        _check_class_axis(marg, k, "marginal")
        if np.any(marg <= 0.0) or not np.all(np.isfinite(marg)):
            raise InvalidMarginalError("marginal entries must be finite and > 0")
    ops = 0
    posterior = np.empty(k)
    for i in range(k):
        prior_i = 0.0
        for j in range(k):
            prior_i += prev[j] * m[j, i]
            ops += 1
        denom = 0.0
        ratio_i = 0.0
        for c in range(k):
            inner = 0.0
            for j in range(k):
                inner += prev[j] * m[j, c]
                ops += 1
            ratio = inst[c] / marg[c]
            ops += 1
            if c == i:
                ratio_i = ratio
            denom += ratio * inner
        posterior[i] = ratio_i * prior_i / denom
        ops += 2
    return posterior, ops


# ============================================================
# whole-stack classification
# ============================================================


@runtime_checkable
class FrameModel(Protocol):
    """Instantaneous classifier usable by `classify_stack`.

    ``frame_posterior`` must return per-pixel posterior probabilities of
    shape (H*W, num_classes) in row-major pixel order. Generative models
    additionally provide ``frame_likelihood`` with the same shape
    holding class-conditional densities.
    """

    @property
    def num_classes(self) -> int: ...

    def frame_posterior(self, frame: Frame) -> np.ndarray: ...


@dataclass(frozen=True)
class StackClassification:
    """Output of `classify_stack` for one stack.

    Posterior cubes have shape (dates, classes, H, W) in float64;
    label lists hold one LabelRaster per date.
    """

    dates: tuple[dt.date, ...]
    num_classes: int
    recursive_posteriors: np.ndarray
    instantaneous_posteriors: np.ndarray
    recursive_labels: tuple[LabelRaster, ...]
    instantaneous_labels: tuple[LabelRaster, ...]


def _chunk_slices(total: int, workers: int) -> list[slice]:
    size = -(-total // workers)
    return [slice(lo, min(lo + size, total)) for lo in range(0, total, size)]


def classify_stack(
    stack: ImageStack,
    model: FrameModel,
    transition: TransitionModel,
    lam: float,
    mode: RecursionMode,
    workers: int = 1,
) -> StackClassification:
    """Run the recursion over a whole stack, frame by frame.

    For each date the model's instantaneous output is row-normalized,
    smoothed with `regularize`, and folded into the running per-pixel
    belief (initialized uniform). Both the recursive and the raw
    instantaneous decisions/posteriors are returned so callers can
    compare them.

    ``workers`` > 1 partitions the update arithmetic across pixel-row
    chunks in threads; results are bit-identical to ``workers`` = 1.
    """
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    k = model.num_classes
    if k != transition.num_classes:
        raise ConfigError(
            f"model has {k} classes, transition model {transition.num_classes}"
        )
    if mode is RecursionMode.GENERATIVE and not hasattr(model, "frame_likelihood"):
        raise ConfigError(
            "generative recursion needs a likelihood-producing classifier"
        )
    height, width = stack.shape
    n = height * width
    t_total = len(stack)

    rec_cube = np.empty((t_total, k, height, width))
    inst_cube = np.empty((t_total, k, height, width))
    rec_labels: list[LabelRaster] = []
    inst_labels: list[LabelRaster] = []

    state = np.broadcast_to(uniform_pmf(k), (n, k)).copy()
    slices = _chunk_slices(n, workers) if workers > 1 else [slice(0, n)]

    def _update_rows(rows: slice, inst_pmf: np.ndarray, out: np.ndarray) -> None:
        weights = regularize(inst_pmf[rows], lam)
        if mode is RecursionMode.GENERATIVE:
            out[rows] = generative_update(weights, state[rows], transition)
        else:
            out[rows] = discriminative_update(weights, state[rows], transition)

    for t, frame in enumerate(stack.frames):
        if mode is RecursionMode.GENERATIVE:
            raw = model.frame_likelihood(frame)
        else:
            raw = model.frame_posterior(frame)
        raw = validate_likelihood(raw)
        if raw.shape != (n, k):
            raise ShapeError(
                f"model returned shape {raw.shape}, expected {(n, k)}"
            )
        inst_pmf = floor_normalize(raw)
        posterior = np.empty_like(state)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_update_rows, rows, inst_pmf, posterior)
                    for rows in slices
                ]
                for fut in futures:
                    fut.result()
        else:
            _update_rows(slices[0], inst_pmf, posterior)

        inst_cube[t] = inst_pmf.T.reshape(k, height, width)
        rec_cube[t] = posterior.T.reshape(k, height, width)
        inst_labels.append(
            LabelRaster(map_decision(inst_pmf).reshape(height, width).astype(np.uint8), k)
        )
        rec_labels.append(
            LabelRaster(map_decision(posterior).reshape(height, width).astype(np.uint8), k)
        )
        state = posterior

    return StackClassification(
        dates=stack.dates,
        num_classes=k,
        recursive_posteriors=rec_cube,
        instantaneous_posteriors=inst_cube,
        recursive_labels=tuple(rec_labels),
        instantaneous_labels=tuple(inst_labels),
    )
