"""Shared value types for probabilistic time-series classification.

Probability and likelihood vectors are plain numpy arrays whose last
axis indexes classes; the helpers here validate that convention instead
of wrapping every pixel in an object. Images and stacks are immutable
containers: their arrays are C-contiguous float64 with the write flag
cleared, so downstream code can share them without defensive copies.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundsError,
    ConfigError,
    DegenerateLikelihoodError,
    InvalidClassCountError,
    InvalidHyperparameterError,
    ShapeError,
)

# Tolerance for "sums to one" checks on probability vectors.
PMF_ATOL = 1e-9

# Probabilities are floored here before any division, then renormalized,
# so degenerate-but-valid inputs cannot produce 0/0.
PROB_FLOOR = 1e-300


# ============================================================
# class sets and probability vectors
# ============================================================


@dataclass(frozen=True)
class ClassSet:
    """Ordered set of class labels; index within the tuple is the class id."""

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise InvalidClassCountError(
                f"need at least 2 classes, got {len(self.labels)}"
            )
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError(f"duplicate class labels: {self.labels}")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ConfigError(f"unknown class label {label!r}") from None


def uniform_pmf(num_classes: int) -> np.ndarray:
    """Uniform probability vector of length ``num_classes``."""
    if num_classes < 2:
        raise InvalidClassCountError(f"need at least 2 classes, got {num_classes}")
    return np.full(num_classes, 1.0 / num_classes)


def validate_pmf(values: np.ndarray, *, atol: float = PMF_ATOL) -> np.ndarray:
    """Check that ``values`` holds probability vectors along the last axis.

    Entries must be finite, non-negative, and sum to 1 within ``atol``.
    Returns the input as a float64 array.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise ShapeError(f"probability vector needs a class axis, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("probability vector has non-finite entries")
    if np.any(arr < 0.0):
        raise ValueError("probability vector has negative entries")
    sums = arr.sum(axis=-1)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=atol):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ValueError(f"probability vector sums off by {worst:.3e}")
    return arr


def floor_normalize(values: np.ndarray) -> np.ndarray:
    """Floor at PROB_FLOOR, then normalize the last axis to sum to one."""
    floored = np.maximum(values, PROB_FLOOR)
    return floored / floored.sum(axis=-1, keepdims=True)


def validate_likelihood(values: np.ndarray) -> np.ndarray:
    """Check likelihood vectors: finite, non-negative, not all zero.

    Likelihoods are unnormalized densities, so no sum constraint; an
    all-zero row carries no class information and raises
    DegenerateLikelihoodError.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise ShapeError(f"likelihood vector needs a class axis, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("likelihood vector has non-finite entries")
    if np.any(arr < 0.0):
        raise ValueError("likelihood vector has negative entries")
    if np.any(arr.max(axis=-1) == 0.0):
        raise DegenerateLikelihoodError("all-zero likelihood vector")
    return arr


# ============================================================
# transition model
# ============================================================


@dataclass(frozen=True)
class TransitionModel:
    """Row-stochastic class transition matrix between consecutive dates.

    ``matrix[i, j]`` is the probability that a pixel in class ``i`` at one
    date is in class ``j`` at the next. Rows sum to one.
    """

    matrix: np.ndarray
    change_prob: float

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"transition matrix must be square, got {m.shape}")
        if m.shape[0] < 2:
            raise InvalidClassCountError("transition matrix needs at least 2 classes")
        if np.any(m < 0.0) or not np.all(np.isfinite(m)):
            raise ValueError("transition matrix entries must be finite and >= 0")
        if not np.allclose(m.sum(axis=1), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("transition matrix rows must sum to 1 within 1e-12")
        m = np.ascontiguousarray(m)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]


def build_transition_model(num_classes: int, change_prob: float) -> TransitionModel:
    """Symmetric transition matrix with total change probability ``change_prob``.

    Each off-diagonal entry is ``change_prob / (num_classes - 1)`` and the
    diagonal holds the remaining mass, so every class keeps probability
    ``1 - change_prob`` of persisting regardless of class count.
    """
    if num_classes < 2:
        raise InvalidClassCountError(f"need at least 2 classes, got {num_classes}")
    if not (0.0 < change_prob < 1.0):
        raise InvalidHyperparameterError(
            f"change_prob must lie in (0, 1), got {change_prob}"
        )
    off = change_prob / (num_classes - 1)
    matrix = np.full((num_classes, num_classes), off)
    # Diagonal written as 1 - (K-1)*off so each row sums to exactly 1.0.
    np.fill_diagonal(matrix, 1.0 - (num_classes - 1) * off)
    return TransitionModel(matrix=matrix, change_prob=float(change_prob))


# ============================================================
# rasters, images, stacks
# ============================================================


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LabelRaster:
    """Per-pixel class indices stored as uint8, shape (height, width)."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ShapeError(f"label raster must be 2-D, got shape {arr.shape}")
        if self.num_classes < 2 or self.num_classes > 255:
            raise InvalidClassCountError(
                f"label raster supports 2..255 classes, got {self.num_classes}"
            )
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("label values do not fit in uint8")
            arr = arr.astype(np.uint8)
        if arr.size and int(arr.max()) >= self.num_classes:
            raise ValueError(
                f"label {int(arr.max())} out of range for {self.num_classes} classes"
            )
        object.__setattr__(self, "labels", _freeze(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True)
class MultibandImage:
    """One acquisition: band-major reflectance array of shape (bands, H, W).

    Pixel values are kept in float64 so repeated arithmetic (bias
    correction, recursion) meets its stated tolerances; on-disk storage
    is float32 and widened at load time.
    """

    bands: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        if len(self.bands) == 0:
            raise ShapeError("image needs at least one band")
        if len(set(self.bands)) != len(self.bands):
            raise ConfigError(f"duplicate band names: {self.bands}")
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] != len(self.bands):
            raise ShapeError(
                f"expected data shape ({len(self.bands)}, H, W), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("image has non-finite pixel values")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1:]

    def band(self, name: str) -> np.ndarray:
        try:
            return self.data[self.bands.index(name)]
        except ValueError:
            raise ConfigError(f"image has no band {name!r}") from None

    def pixels(self) -> np.ndarray:
        """Flattened (H*W, bands) row-major view of the pixel values."""
        b, h, w = self.data.shape
        return self.data.reshape(b, h * w).T


@dataclass(frozen=True)
class Frame:
    """One dated entry of an image stack plus optional side data."""

    date: dt.date
    image: MultibandImage
    cloud_fraction: float | None = None
    truth: LabelRaster | None = None
    external_posterior: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.cloud_fraction is not None and not (0.0 <= self.cloud_fraction <= 1.0):
            raise ValueError(f"cloud fraction outside [0, 1]: {self.cloud_fraction}")
        if self.truth is not None and self.truth.shape != self.image.shape:
            raise ShapeError(
                f"truth shape {self.truth.shape} != image shape {self.image.shape}"
            )
        if self.external_posterior is not None:
            post = np.asarray(self.external_posterior, dtype=np.float64)
            if post.ndim != 3 or post.shape[1:] != self.image.shape:
                raise ShapeError(
                    f"external posterior shape {post.shape} does not match "
                    f"image shape {self.image.shape}"
                )
            object.__setattr__(self, "external_posterior", _freeze(post))


@dataclass(frozen=True)
class ImageStack:
    """Date-ordered sequence of co-registered frames.

    A stack may be empty (e.g. after aggressive cloud filtering);
    geometry accessors raise on an empty stack.
    """

    frames: tuple[Frame, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.frames:
            return
        first = self.frames[0].image
        for fr in self.frames[1:]:
            if fr.image.bands != first.bands:
                raise ShapeError(
                    f"frame {fr.date} bands {fr.image.bands} != {first.bands}"
                )
            if fr.image.shape != first.shape:
                raise ShapeError(
                    f"frame {fr.date} shape {fr.image.shape} != {first.shape}"
                )
        dates = [fr.date for fr in self.frames]
        for a, b in zip(dates, dates[1:]):
            if a >= b:
                raise ValueError(f"dates must strictly increase, got {a} before {b}")

    @property
    def dates(self) -> tuple[dt.date, ...]:
        return tuple(fr.date for fr in self.frames)

    @property
    def bands(self) -> tuple[str, ...]:
        if not self.frames:
            raise ShapeError("empty image stack")
        return self.frames[0].image.bands

    @property
    def shape(self) -> tuple[int, int]:
        if not self.frames:
            raise ShapeError("empty image stack")
        return self.frames[0].image.shape

    def __len__(self) -> int:
        return len(self.frames)

    def subset(self, dates: tuple[dt.date, ...] | list[dt.date]) -> ImageStack:
        """New stack restricted to the given dates (original order kept)."""
        wanted = set(dates)
        missing = wanted - set(self.dates)
        if missing:
            raise BoundsError(f"dates not in stack: {sorted(missing)}")
        return ImageStack(tuple(fr for fr in self.frames if fr.date in wanted))
