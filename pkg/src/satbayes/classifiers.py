"""Instantaneous per-pixel classifiers and their training routines.

Three trained forms plus a pass-through:

* `IndexClassifier` turns a spectral-index threshold vector into a bank
  of Gaussians (one per class, centered on each threshold interval) and
  classifies pixels from their index value alone.
* `MixtureClassifier` holds one full-covariance Gaussian mixture per
  class over raw band values; fitting is plain EM with k-means++
  seeding.
* `LogisticClassifier` is a multinomial softmax over standardized band
  values, fitted full-batch with an L2 penalty.
* `ExternalPosteriorSource` replays per-frame posterior rasters that
  some outside model produced.

All classifiers expose ``frame_posterior(frame) -> (H*W, K)``;
generative ones also expose ``frame_likelihood``. Model files use a
small versioned binary container that round-trips parameters bit for
bit.
"""

from __future__ import annotations

import enum
import math
import struct
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import logsumexp

from .core import Frame, LabelRaster, MultibandImage, floor_normalize
from .errors import (
    ConfigError,
    DataError,
    InsufficientDataError,
    InvalidClassCountError,
    InvalidHyperparameterError,
    InvalidThresholdError,
    LoadError,
    ShapeError,
)

# ============================================================
# spectral indices
# ============================================================


class SpectralIndexKind(enum.Enum):
    """Normalized-difference indices: (first - second) / (first + second)."""

    MNDWI = "mndwi"
    NDWI = "ndwi"
    NDVI = "ndvi"

    @property
    def band_pair(self) -> tuple[str, str]:
        return _INDEX_BANDS[self]


_INDEX_BANDS = {
    SpectralIndexKind.MNDWI: ("green", "swir1"),
    SpectralIndexKind.NDWI: ("green", "nir"),
    SpectralIndexKind.NDVI: ("nir", "red"),
}


def spectral_index(
    image: MultibandImage, kind: SpectralIndexKind
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel normalized-difference index value and zero-denominator flags.

    Flagged pixels (band sum exactly zero) get index value 0.0 so they
    fall into whichever class owns that point of the index axis.
    """
    first, second = kind.band_pair
    a = image.band(first)
    b = image.band(second)
    denom = a + b
    flags = denom == 0.0
    safe = np.where(flags, 1.0, denom)
    values = np.where(flags, 0.0, (a - b) / safe)
    return values, flags


def pseudo_labels(
    image: MultibandImage, kind: SpectralIndexKind, thresholds: tuple[float, ...]
) -> LabelRaster:
    """Hard labels from threshold intervals over the index value.

    Value y belongs to class i when thresholds[i] < y <= thresholds[i+1];
    y at the lower endpoint joins class 0, and values outside the
    threshold range (possible after bias correction) clamp into the
    nearest end class.
    """
    tau = _checked_thresholds(thresholds)
    values, _ = spectral_index(image, kind)
    idx = np.searchsorted(tau, values, side="left") - 1
    idx = np.clip(idx, 0, len(tau) - 2)
    return LabelRaster(idx.astype(np.uint8), num_classes=len(tau) - 1)


def _checked_thresholds(thresholds: tuple[float, ...]) -> np.ndarray:
    tau = np.asarray(thresholds, dtype=np.float64)
    if tau.ndim != 1 or tau.size < 3:
        raise InvalidThresholdError(
            f"need K+1 >= 3 thresholds, got shape {tau.shape}"
        )
    if tau[0] != -1.0 or tau[-1] != 1.0:
        raise InvalidThresholdError(
            f"thresholds must start at -1 and end at 1, got {tau[0]}..{tau[-1]}"
        )
    if np.any(np.diff(tau) <= 0.0):
        raise InvalidThresholdError(f"thresholds must strictly increase: {tau}")
    return tau


def _frame_matrix(image: MultibandImage, bands: tuple[str, ...]) -> np.ndarray:
    """Pixels of the named bands as an (H*W, len(bands)) float64 matrix."""
    return np.stack([image.band(b).ravel() for b in bands], axis=1)


# ============================================================
# index classifier
# ============================================================


@dataclass(frozen=True)
class IndexClassifier:
    """Gaussian bank derived from index thresholds.

    Class j gets a Gaussian centered in the j-th threshold interval:
    mean at the interval midpoint, standard deviation half the interval
    length. Posteriors are the normalized Gaussian densities of the
    pixel's index value.
    """

    kind: SpectralIndexKind
    thresholds: tuple[float, ...]
    means: np.ndarray
    sigmas: np.ndarray

    @classmethod
    def from_thresholds(
        cls, thresholds: tuple[float, ...] | list[float], kind: SpectralIndexKind
    ) -> IndexClassifier:
        tau = _checked_thresholds(tuple(thresholds))
        widths = np.diff(tau)
        means = tau[:-1] + widths / 2.0
        sigmas = widths / 2.0
        means.flags.writeable = False
        sigmas.flags.writeable = False
        return cls(
            kind=kind,
            thresholds=tuple(float(t) for t in tau),
            means=means,
            sigmas=sigmas,
        )

    @property
    def num_classes(self) -> int:
        return len(self.thresholds) - 1

    def posterior_from_index(self, values: np.ndarray | float) -> np.ndarray:
        """Posterior probabilities for index values of any shape -> (..., K)."""
        y = np.asarray(values, dtype=np.float64)[..., np.newaxis]
        z = (y - self.means) / self.sigmas
        dens = np.exp(-0.5 * z * z) / (self.sigmas * math.sqrt(2.0 * math.pi))
        return floor_normalize(dens)

    def frame_posterior(self, frame: Frame) -> np.ndarray:
        values, _ = spectral_index(frame.image, self.kind)
        return self.posterior_from_index(values.ravel())


# ============================================================
# Gaussian mixture classifier
# ============================================================

COV_JITTER = 1e-6
EM_TOL = 1e-6
EM_MAX_ITER = 200


@dataclass(frozen=True)
class GaussianMixture:
    """One class's mixture: weights (M,), means (M, B), covariances (M, B, B)."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        cov = np.asarray(self.covariances, dtype=np.float64)
        if w.ndim != 1 or mu.ndim != 2 or cov.ndim != 3:
            raise ShapeError("mixture arrays have wrong rank")
        m, b = mu.shape
        if w.shape != (m,) or cov.shape != (m, b, b):
            raise ShapeError(
                f"inconsistent mixture shapes: {w.shape}, {mu.shape}, {cov.shape}"
            )
        for arr in (w, mu, cov):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @property
    def num_bands(self) -> int:
        return self.means.shape[1]

    def log_density(self, x: np.ndarray) -> np.ndarray:
        """Log mixture density at each row of x, shape (N,)."""
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.num_bands:
            raise ShapeError(
                f"expected points of shape (N, {self.num_bands}), got {arr.shape}"
            )
        log_terms = _log_gaussian_matrix(arr, self.means, self.covariances)
        return logsumexp(log_terms + np.log(self.weights), axis=1)

    def density(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density(x))


def _log_gaussian_matrix(
    x: np.ndarray, means: np.ndarray, covariances: np.ndarray
) -> np.ndarray:
    """Log N(x | mean_m, cov_m) for every sample/component pair -> (N, M)."""
    n, b = x.shape
    m = means.shape[0]
    out = np.empty((n, m))
    const = b * math.log(2.0 * math.pi)
    for j in range(m):
        chol = cholesky(covariances[j], lower=True)
        diff = (x - means[j]).T
        solved = solve_triangular(chol, diff, lower=True)
        maha = np.sum(solved * solved, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, j] = -0.5 * (const + logdet + maha)
    return out


def _kmeans_pp_centers(x: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((m, x.shape[1]))
    centers[0] = x[rng.integers(x.shape[0])]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, m):
        total = d2.sum()
        if total == 0.0:
            centers[j] = x[rng.integers(x.shape[0])]
        else:
            centers[j] = x[rng.choice(x.shape[0], p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _fit_single_mixture(
    x: np.ndarray, components: int, rng: np.random.Generator
) -> tuple[GaussianMixture, list[float]]:
    """EM fit of one class's mixture; returns the model and its mean-LL trace."""
    n, b = x.shape
    eye = np.eye(b)
    means = _kmeans_pp_centers(x, components, rng)
    base_cov = np.atleast_2d(np.cov(x.T, bias=True)) + COV_JITTER * eye
    covs = np.repeat(base_cov[np.newaxis], components, axis=0)
    weights = np.full(components, 1.0 / components)

    trace: list[float] = []
    for _ in range(EM_MAX_ITER):
        log_terms = _log_gaussian_matrix(x, means, covs) + np.log(weights)
        log_norm = logsumexp(log_terms, axis=1)
        trace.append(float(np.mean(log_norm)))
        if len(trace) > 1 and trace[-1] - trace[-2] < EM_TOL:
            break
        resp = np.exp(log_terms - log_norm[:, np.newaxis])
        bulk = resp.sum(axis=0) + 10.0 * np.finfo(np.float64).tiny
        weights = bulk / n
        means = (resp.T @ x) / bulk[:, np.newaxis]
        covs = np.empty_like(covs)
        for j in range(components):
            diff = x - means[j]
            covs[j] = (resp[:, j] * diff.T) @ diff / bulk[j] + COV_JITTER * eye
    return GaussianMixture(weights, means, covs), trace


@dataclass(frozen=True)
class MixtureClassifier:
    """Per-class Gaussian mixtures over raw band values."""

    bands: tuple[str, ...]
    mixtures: tuple[GaussianMixture, ...]
    ll_traces: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        if len(self.mixtures) < 2:
            raise InvalidClassCountError("need mixtures for at least 2 classes")
        b = len(self.bands)
        for mix in self.mixtures:
            if mix.num_bands != b:
                raise ShapeError(
                    f"mixture over {mix.num_bands} bands, classifier has {b}"
                )

    @property
    def num_classes(self) -> int:
        return len(self.mixtures)

    def likelihood(self, pixels: np.ndarray) -> np.ndarray:
        """Class-conditional densities for (N, B) pixel rows -> (N, K)."""
        x = np.asarray(pixels, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != len(self.bands):
            raise ShapeError(
                f"expected pixels of shape (N, {len(self.bands)}), got {x.shape}"
            )
        return np.stack([mix.density(x) for mix in self.mixtures], axis=1)

    def frame_likelihood(self, frame: Frame) -> np.ndarray:
        return self.likelihood(_frame_matrix(frame.image, self.bands))

    def frame_posterior(self, frame: Frame) -> np.ndarray:
        # Posterior under a uniform class prior.
        return floor_normalize(self.frame_likelihood(frame))


def fit_mixture_classifier(
    samples_by_class: list[np.ndarray] | tuple[np.ndarray, ...],
    bands: tuple[str, ...],
    components: int | Sequence[int] = 3,
    seed: int = 0,
) -> MixtureClassifier:
    """Fit one mixture per class with EM.

    ``samples_by_class[k]`` holds class k's training pixels, shape
    (n_k, len(bands)). ``components`` is a single count shared by every
    class or one count per class. Seeding is k-means++ driven by
    ``seed``; EM stops when the mean log-likelihood improves by less
    than 1e-6 or after 200 iterations. Each class must supply at least
    10 * components * len(bands) samples; thinner classes raise
    InsufficientDataError.
    """
    if len(samples_by_class) < 2:
        raise InvalidClassCountError("need samples for at least 2 classes")
    if isinstance(components, int):
        per_class = [components] * len(samples_by_class)
    else:
        per_class = [int(m) for m in components]
        if len(per_class) != len(samples_by_class):
            raise InvalidHyperparameterError(
                f"got {len(per_class)} component counts for "
                f"{len(samples_by_class)} classes"
            )
    if any(m < 1 for m in per_class):
        raise InvalidHyperparameterError(f"components must be >= 1, got {per_class}")
    num_bands = len(bands)
    rng = np.random.default_rng(seed)
    mixtures = []
    traces = []
    for k, samples in enumerate(samples_by_class):
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != num_bands:
            raise ShapeError(
                f"class {k}: expected samples of shape (n, {num_bands}), got {x.shape}"
            )
        needed = 10 * per_class[k] * num_bands
        if x.shape[0] < needed:
            raise InsufficientDataError(
                f"class {k}: {x.shape[0]} samples < {needed} "
                f"(10 * {per_class[k]} components * {num_bands} bands)"
            )
        mix, trace = _fit_single_mixture(x, per_class[k], rng)
        mixtures.append(mix)
        traces.append(tuple(trace))
    return MixtureClassifier(
        bands=tuple(bands), mixtures=tuple(mixtures), ll_traces=tuple(traces)
    )


# ============================================================
# logistic classifier
# ============================================================

LR_L2 = 1e-4
LR_MAX_ITER = 1000
LR_PGTOL = 1e-9


def logistic_loss_grad(
    weights_flat: np.ndarray,
    features_aug: np.ndarray,
    labels_onehot: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus L2 penalty (bias column excluded), with gradient.

    ``features_aug`` is (N, B+1) with a trailing column of ones;
    ``weights_flat`` raveled from (K, B+1). Exposed as a module function
    so the gradient can be checked against finite differences.
    """
    n, b_aug = features_aug.shape
    k = labels_onehot.shape[1]
    w = weights_flat.reshape(k, b_aug)
    scores = features_aug @ w.T
    log_norm = logsumexp(scores, axis=1)
    log_probs = scores - log_norm[:, np.newaxis]
    nll = -float(np.sum(labels_onehot * log_probs)) / n
    loss = nll + l2 * float(np.sum(w[:, :-1] ** 2))
    probs = np.exp(log_probs)
    grad = (probs - labels_onehot).T @ features_aug / n
    grad[:, :-1] += 2.0 * l2 * w[:, :-1]
    return loss, grad.ravel()


@dataclass(frozen=True)
class LogisticClassifier:
    """Multinomial softmax over standardized band values.

    ``weights`` has shape (K, B+1); the last column is the bias on the
    standardized features. Standardization statistics come from the
    training data and travel with the model.
    """

    bands: tuple[str, ...]
    weights: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        mean = np.asarray(self.feature_mean, dtype=np.float64)
        std = np.asarray(self.feature_std, dtype=np.float64)
        b = len(self.bands)
        if w.ndim != 2 or w.shape[1] != b + 1 or w.shape[0] < 2:
            raise ShapeError(f"weights must be (K>=2, {b + 1}), got {w.shape}")
        if mean.shape != (b,) or std.shape != (b,):
            raise ShapeError("standardization stats must match band count")
        if np.any(std <= 0.0):
            raise ValueError("feature_std entries must be > 0")
        for arr in (w, mean, std):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "feature_mean", mean)
        object.__setattr__(self, "feature_std", std)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def posterior(self, pixels: np.ndarray) -> np.ndarray:
        """Softmax class probabilities for (N, B) pixel rows -> (N, K)."""
        x = np.asarray(pixels, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != len(self.bands):
            raise ShapeError(
                f"expected pixels of shape (N, {len(self.bands)}), got {x.shape}"
            )
        std = (x - self.feature_mean) / self.feature_std
        aug = np.hstack([std, np.ones((std.shape[0], 1))])
        scores = aug @ self.weights.T
        scores -= scores.max(axis=1, keepdims=True)
        expd = np.exp(scores)
        return expd / expd.sum(axis=1, keepdims=True)

    def frame_posterior(self, frame: Frame) -> np.ndarray:
        return self.posterior(_frame_matrix(frame.image, self.bands))


def fit_logistic_classifier(
    samples: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    bands: tuple[str, ...],
    seed: int = 0,
    l2: float = LR_L2,
) -> LogisticClassifier:
    """Full-batch multinomial logistic regression on standardized features.

    Weights start at zero and are optimized with L-BFGS (analytic
    gradient) until the projected gradient norm falls below 1e-9 or
    after 1000 iterations, so refits on reordered samples agree to high
    precision. Training is deterministic; ``seed`` is accepted for
    interface symmetry with the mixture fit and not consumed.
    """
    del seed
    x = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels)
    if num_classes < 2:
        raise InvalidClassCountError(f"need at least 2 classes, got {num_classes}")
    if x.ndim != 2 or x.shape[1] != len(bands):
        raise ShapeError(
            f"expected samples of shape (n, {len(bands)}), got {x.shape}"
        )
    if y.shape != (x.shape[0],):
        raise ShapeError(f"labels shape {y.shape} != ({x.shape[0]},)")
    if x.shape[0] == 0:
        raise InsufficientDataError("no training samples")
    if np.any(y < 0) or np.any(y >= num_classes):
        raise DataError(f"labels must lie in [0, {num_classes})")
    if np.unique(y).size < 2:
        raise InsufficientDataError(
            "training labels cover a single class; need at least 2"
        )
    if l2 < 0.0:
        raise InvalidHyperparameterError(f"l2 must be >= 0, got {l2}")

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)  # constant feature: leave centered
    aug = np.hstack([(x - mean) / std, np.ones((x.shape[0], 1))])
    onehot = np.zeros((x.shape[0], num_classes))
    onehot[np.arange(x.shape[0]), y.astype(np.intp)] = 1.0

    result = minimize(
        logistic_loss_grad,
        np.zeros(num_classes * (len(bands) + 1)),
        args=(aug, onehot, l2),
        method="L-BFGS-B",
        jac=True,
        options={"maxiter": LR_MAX_ITER, "gtol": LR_PGTOL, "ftol": 1e-16},
    )
    weights = result.x.reshape(num_classes, len(bands) + 1)
    return LogisticClassifier(
        bands=tuple(bands), weights=weights, feature_mean=mean, feature_std=std
    )


# ============================================================
# external posterior source
# ============================================================


@dataclass(frozen=True)
class ExternalPosteriorSource:
    """Replays posterior rasters attached to the stack's frames."""

    num_classes: int

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise InvalidClassCountError(
                f"need at least 2 classes, got {self.num_classes}"
            )

    def frame_posterior(self, frame: Frame) -> np.ndarray:
        post = frame.external_posterior
        if post is None:
            raise DataError(f"frame {frame.date} has no external posterior")
        if post.shape[0] != self.num_classes:
            raise ShapeError(
                f"frame {frame.date}: posterior has {post.shape[0]} classes, "
                f"expected {self.num_classes}"
            )
        k = post.shape[0]
        return post.reshape(k, -1).T


# ============================================================
# model persistence
# ============================================================

MODEL_MAGIC = b"SBMF"
MODEL_VERSION = 1
_KIND_CODES = {IndexClassifier: 1, MixtureClassifier: 2, LogisticClassifier: 3}
_INDEX_CODES = {
    SpectralIndexKind.MNDWI: 1,
    SpectralIndexKind.NDWI: 2,
    SpectralIndexKind.NDVI: 3,
}

AnyClassifier = IndexClassifier | MixtureClassifier | LogisticClassifier


def _pack_floats(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _pack_bands(bands: tuple[str, ...]) -> bytes:
    blob = struct.pack("<B", len(bands))
    for name in bands:
        raw = name.encode("utf-8")
        blob += struct.pack("<B", len(raw)) + raw
    return blob


class _Reader:
    """Cursor over a model file's bytes; raises LoadError on truncation."""

    def __init__(self, blob: bytes, path: Path) -> None:
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise LoadError(f"{self.path}: truncated model file")
        out = self.blob[self.pos : self.pos + count]
        self.pos += count
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").copy()

    def bands(self) -> tuple[str, ...]:
        count = self.u8()
        return tuple(self.take(self.u8()).decode("utf-8") for _ in range(count))


def save_model(path: str | Path, model: AnyClassifier) -> Path:
    """Write a classifier to the versioned binary model container."""
    kind = _KIND_CODES.get(type(model))
    if kind is None:
        raise ConfigError(f"cannot persist model of type {type(model).__name__}")
    parts = [MODEL_MAGIC, struct.pack("<BB", MODEL_VERSION, kind)]
    if isinstance(model, IndexClassifier):
        parts.append(
            struct.pack("<BB", model.num_classes, _INDEX_CODES[model.kind])
        )
        parts.append(_pack_floats(np.asarray(model.thresholds)))
        parts.append(_pack_floats(model.means))
        parts.append(_pack_floats(model.sigmas))
    elif isinstance(model, MixtureClassifier):
        parts.append(struct.pack("<BB", model.num_classes, len(model.bands)))
        parts.append(_pack_bands(model.bands))
        for mix in model.mixtures:
            parts.append(struct.pack("<B", mix.weights.shape[0]))
            parts.append(_pack_floats(mix.weights))
            parts.append(_pack_floats(mix.means))
            parts.append(_pack_floats(mix.covariances))
    else:
        parts.append(struct.pack("<BB", model.num_classes, len(model.bands)))
        parts.append(_pack_bands(model.bands))
        parts.append(_pack_floats(model.weights))
        parts.append(_pack_floats(model.feature_mean))
        parts.append(_pack_floats(model.feature_std))
    out = Path(path)
    out.write_bytes(b"".join(parts))
    return out


def load_model(path: str | Path) -> AnyClassifier:
    """Read a classifier back from the model container, bit for bit."""
    src = Path(path)
    try:
        blob = src.read_bytes()
    except OSError as exc:
        raise LoadError(f"{src}: {exc}") from exc
    rd = _Reader(blob, src)
    if rd.take(4) != MODEL_MAGIC:
        raise LoadError(f"{src}: not a model file (bad magic)")
    version = rd.u8()
    if version != MODEL_VERSION:
        raise LoadError(f"{src}: unsupported model version {version}")
    kind = rd.u8()
    if kind == 1:
        k = rd.u8()
        index_kind = {v: key for key, v in _INDEX_CODES.items()}.get(rd.u8())
        if index_kind is None:
            raise LoadError(f"{src}: unknown spectral index code")
        thresholds = rd.floats(k + 1)
        means = rd.floats(k)
        sigmas = rd.floats(k)
        means.flags.writeable = False
        sigmas.flags.writeable = False
        return IndexClassifier(
            kind=index_kind,
            thresholds=tuple(float(t) for t in thresholds),
            means=means,
            sigmas=sigmas,
        )
    if kind == 2:
        k = rd.u8()
        b = rd.u8()
        bands = rd.bands()
        if len(bands) != b:
            raise LoadError(f"{src}: band list does not match band count")
        mixtures = []
        for _ in range(k):
            m = rd.u8()
            weights = rd.floats(m)
            means = rd.floats(m * b).reshape(m, b)
            covs = rd.floats(m * b * b).reshape(m, b, b)
            mixtures.append(GaussianMixture(weights, means, covs))
        return MixtureClassifier(bands=bands, mixtures=tuple(mixtures))
    if kind == 3:
        k = rd.u8()
        b = rd.u8()
        bands = rd.bands()
        if len(bands) != b:
            raise LoadError(f"{src}: band list does not match band count")
        weights = rd.floats(k * (b + 1)).reshape(k, b + 1)
        mean = rd.floats(b)
        std = rd.floats(b)
        return LogisticClassifier(
            bands=bands, weights=weights, feature_mean=mean, feature_std=std
        )
    raise LoadError(f"{src}: unknown model kind {kind}")
