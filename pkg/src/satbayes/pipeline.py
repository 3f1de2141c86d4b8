"""Stack ingestion, binary raster containers, and preprocessing.

A stack on disk is a plain-text manifest plus one headerless raw
float32 file per band per date. The manifest pins the target grid, the
per-band native resolutions (coarser bands are stored at their native
grid and upsampled on load), a reflectance scale factor, and optional
per-frame side files: ground-truth label rasters and externally
produced posterior cubes.

Container formats (all little-endian):

* band plane: raw row-major float32 values, no header; dimensions come
  from the manifest.
* label raster: magic ``RBCL``, version u8, u32 width, u32 height,
  u8 class count, then width*height class-index bytes row-major.
* posterior cube: magic ``RBCP``, version u8, u32 width, u32 height,
  u8 class count, u32 date count, then one float32 plane per
  (date, class), date-major, each row-major.
"""

from __future__ import annotations

import datetime as dt
import struct
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import Frame, ImageStack, LabelRaster, MultibandImage
from .errors import (
    BoundsError,
    ConfigError,
    DataError,
    LoadError,
    ShapeError,
    SplitError,
)
from .textio import format_float, iter_kv_lines, parse_float, parse_int

LABEL_MAGIC = b"RBCL"
CUBE_MAGIC = b"RBCP"
CONTAINER_VERSION = 1


# ============================================================
# binary containers
# ============================================================


def write_band_plane(path: str | Path, values: np.ndarray) -> Path:
    """Raw row-major little-endian float32 plane, no header."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ShapeError(f"band plane must be 2-D, got shape {arr.shape}")
    out = Path(path)
    out.write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return out


def read_band_plane(path: str | Path, height: int, width: int) -> np.ndarray:
    src = Path(path)
    try:
        blob = src.read_bytes()
    except OSError as exc:
        raise LoadError(f"{src}: {exc}") from exc
    expected = 4 * height * width
    if len(blob) != expected:
        raise LoadError(
            f"{src}: expected {expected} bytes for {height}x{width} float32, "
            f"got {len(blob)}"
        )
    return np.frombuffer(blob, dtype="<f4").reshape(height, width).copy()


def write_label_raster(path: str | Path, raster: LabelRaster) -> Path:
    height, width = raster.shape
    header = LABEL_MAGIC + struct.pack(
        "<BIIB", CONTAINER_VERSION, width, height, raster.num_classes
    )
    out = Path(path)
    out.write_bytes(header + raster.labels.tobytes())
    return out


def read_label_raster(path: str | Path) -> LabelRaster:
    src = Path(path)
    try:
        blob = src.read_bytes()
    except OSError as exc:
        raise LoadError(f"{src}: {exc}") from exc
    head = struct.calcsize("<4sBIIB")
    if len(blob) < head:
        raise LoadError(f"{src}: truncated label raster header")
    magic, version, width, height, k = struct.unpack("<4sBIIB", blob[:head])
    if magic != LABEL_MAGIC:
        raise LoadError(f"{src}: not a label raster (bad magic)")
    if version != CONTAINER_VERSION:
        raise LoadError(f"{src}: unsupported label raster version {version}")
    if len(blob) != head + width * height:
        raise LoadError(f"{src}: expected {width * height} label bytes")
    labels = np.frombuffer(blob[head:], dtype=np.uint8).reshape(height, width)
    try:
        return LabelRaster(labels.copy(), num_classes=k)
    except (ValueError, ShapeError, ConfigError) as exc:
        raise LoadError(f"{src}: {exc}") from exc


def write_posterior_cube(path: str | Path, cube: np.ndarray) -> Path:
    """Cube of shape (dates, classes, height, width), stored as float32."""
    arr = np.asarray(cube)
    if arr.ndim != 4:
        raise ShapeError(f"posterior cube must be 4-D, got shape {arr.shape}")
    t, k, height, width = arr.shape
    header = CUBE_MAGIC + struct.pack("<BIIBI", CONTAINER_VERSION, width, height, k, t)
    out = Path(path)
    out.write_bytes(header + np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return out


def read_posterior_cube(path: str | Path) -> np.ndarray:
    src = Path(path)
    try:
        blob = src.read_bytes()
    except OSError as exc:
        raise LoadError(f"{src}: {exc}") from exc
    head = struct.calcsize("<4sBIIBI")
    if len(blob) < head:
        raise LoadError(f"{src}: truncated posterior cube header")
    magic, version, width, height, k, t = struct.unpack("<4sBIIBI", blob[:head])
    if magic != CUBE_MAGIC:
        raise LoadError(f"{src}: not a posterior cube (bad magic)")
    if version != CONTAINER_VERSION:
        raise LoadError(f"{src}: unsupported posterior cube version {version}")
    expected = head + 4 * t * k * height * width
    if len(blob) != expected:
        raise LoadError(f"{src}: expected {expected} bytes, got {len(blob)}")
    data = np.frombuffer(blob[head:], dtype="<f4")
    return data.reshape(t, k, height, width).astype(np.float64)


# ============================================================
# manifest
# ============================================================


@dataclass(frozen=True)
class ManifestFrame:
    """One dated entry: per-band file paths plus optional side files."""

    date: dt.date
    band_paths: tuple[tuple[str, str], ...]
    cloud_fraction: float | None = None
    truth_path: str | None = None
    posterior_path: str | None = None


@dataclass(frozen=True)
class StackManifest:
    """Parsed stack manifest; paths are relative to ``base_dir``."""

    width: int
    height: int
    scale: float
    bands: tuple[tuple[str, float], ...]  # (name, resolution in meters)
    frames: tuple[ManifestFrame, ...]
    base_dir: Path

    @property
    def band_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.bands)

    def resample_factors(self) -> dict[str, int]:
        """Integer upsampling factor per band relative to the finest band."""
        finest = min(res for _, res in self.bands)
        factors = {}
        for name, res in self.bands:
            ratio = res / finest
            factor = int(round(ratio))
            if factor < 1 or abs(ratio - factor) > 1e-9:
                raise ConfigError(
                    f"band {name!r}: resolution {res} is not an integer "
                    f"multiple of the finest resolution {finest}"
                )
            factors[name] = factor
        return factors


def parse_manifest(path: str | Path) -> StackManifest:
    src = Path(path)
    try:
        text = src.read_text()
    except OSError as exc:
        raise LoadError(f"{src}: {exc}") from exc
    name = str(src)
    width = height = None
    scale = 1.0
    bands: list[tuple[str, float]] = []
    frames: list[ManifestFrame] = []
    for lineno, key, value in iter_kv_lines(text, name):
        where = f"{name}:{lineno}"
        if key == "width":
            width = parse_int(value, key, where)
        elif key == "height":
            height = parse_int(value, key, where)
        elif key == "scale":
            scale = parse_float(value, key, where)
        elif key == "bands":
            for item in value.split(","):
                item = item.strip()
                if ":" not in item:
                    raise ConfigError(f"{where}: band entry needs name:resolution")
                bname, res = item.split(":", 1)
                bands.append((bname.strip(), parse_float(res.strip(), key, where)))
        elif key == "frame":
            frames.append(_parse_frame_line(value, where))
        else:
            raise ConfigError(f"{where}: unknown manifest key {key!r}")
    if width is None or height is None:
        raise ConfigError(f"{name}: manifest needs width and height")
    if width < 1 or height < 1:
        raise ConfigError(f"{name}: width/height must be >= 1")
    if not np.isfinite(scale) or scale <= 0.0:
        raise ConfigError(f"{name}: scale must be finite and > 0")
    if not bands:
        raise ConfigError(f"{name}: manifest needs at least one band")
    names = [b for b, _ in bands]
    if len(set(names)) != len(names):
        raise ConfigError(f"{name}: duplicate band names: {names}")
    if any(res <= 0 for _, res in bands):
        raise ConfigError(f"{name}: band resolutions must be > 0")
    if not frames:
        raise ConfigError(f"{name}: manifest needs at least one frame")
    dates = [fr.date for fr in frames]
    if len(set(dates)) != len(dates):
        raise DataError(f"{name}: duplicate frame dates")
    frames.sort(key=lambda fr: fr.date)
    for fr in frames:
        have = {b for b, _ in fr.band_paths}
        missing = set(names) - have
        if missing:
            raise DataError(f"{name}: frame {fr.date} missing bands {sorted(missing)}")
        extra = have - set(names)
        if extra:
            raise ConfigError(f"{name}: frame {fr.date} has unknown bands {sorted(extra)}")
    manifest = StackManifest(
        width=width,
        height=height,
        scale=scale,
        bands=tuple(bands),
        frames=tuple(frames),
        base_dir=src.parent,
    )
    manifest.resample_factors()  # validates resolutions early
    return manifest


def _parse_frame_line(value: str, where: str) -> ManifestFrame:
    tokens = value.split()
    if not tokens:
        raise ConfigError(f"{where}: empty frame entry")
    try:
        date = dt.date.fromisoformat(tokens[0])
    except ValueError:
        raise ConfigError(f"{where}: bad frame date {tokens[0]!r}") from None
    cloud = None
    truth = None
    posterior = None
    band_paths: list[tuple[str, str]] = []
    for token in tokens[1:]:
        if "=" not in token:
            raise ConfigError(f"{where}: frame token needs key=value, got {token!r}")
        key, val = token.split("=", 1)
        if key == "cloud":
            cloud = parse_float(val, key, where)
        elif key == "truth":
            truth = val
        elif key == "posterior":
            posterior = val
        else:
            band_paths.append((key, val))
    return ManifestFrame(
        date=date,
        band_paths=tuple(band_paths),
        cloud_fraction=cloud,
        truth_path=truth,
        posterior_path=posterior,
    )


def write_manifest(manifest: StackManifest, path: str | Path) -> Path:
    lines = [
        "# stack manifest",
        f"width = {manifest.width}",
        f"height = {manifest.height}",
        f"scale = {format_float(manifest.scale)}",
        "bands = "
        + ", ".join(f"{name}:{format_float(res)}" for name, res in manifest.bands),
    ]
    for fr in manifest.frames:
        tokens = [fr.date.isoformat()]
        if fr.cloud_fraction is not None:
            tokens.append(f"cloud={format_float(fr.cloud_fraction)}")
        if fr.truth_path is not None:
            tokens.append(f"truth={fr.truth_path}")
        if fr.posterior_path is not None:
            tokens.append(f"posterior={fr.posterior_path}")
        tokens.extend(f"{band}={p}" for band, p in fr.band_paths)
        lines.append("frame = " + " ".join(tokens))
    out = Path(path)
    out.write_text("\n".join(lines) + "\n")
    return out


def load_stack(manifest: StackManifest) -> ImageStack:
    """Read every frame of a manifest into memory.

    Band planes are read at native resolution, nearest-neighbor
    upsampled to the manifest grid, and multiplied by the reflectance
    scale. Missing or mis-sized files raise LoadError naming the path.
    """
    factors = manifest.resample_factors()
    names = manifest.band_names
    height, width = manifest.height, manifest.width
    frames = []
    for mf in manifest.frames:
        paths = dict(mf.band_paths)
        planes = []
        for band in names:
            factor = factors[band]
            if height % factor or width % factor:
                raise DataError(
                    f"band {band!r}: grid {width}x{height} not divisible by "
                    f"resample factor {factor}"
                )
            plane = read_band_plane(
                manifest.base_dir / paths[band], height // factor, width // factor
            )
            planes.append(resample_nearest(plane, factor).astype(np.float64))
        data = np.stack(planes) * manifest.scale
        truth = None
        if mf.truth_path is not None:
            truth = read_label_raster(manifest.base_dir / mf.truth_path)
        posterior = None
        if mf.posterior_path is not None:
            cube = read_posterior_cube(manifest.base_dir / mf.posterior_path)
            if cube.shape[0] != 1:
                raise LoadError(
                    f"{manifest.base_dir / mf.posterior_path}: per-frame posterior "
                    f"must hold exactly one date, got {cube.shape[0]}"
                )
            posterior = cube[0]
        frames.append(
            Frame(
                date=mf.date,
                image=MultibandImage(bands=names, data=data),
                cloud_fraction=mf.cloud_fraction,
                truth=truth,
                external_posterior=posterior,
            )
        )
    return ImageStack(tuple(frames))


# ============================================================
# preprocessing
# ============================================================


@dataclass(frozen=True)
class ReferenceRegion:
    """Pixel-aligned rectangle: origin (x, y), size (width, height)."""

    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0 or self.width < 1 or self.height < 1:
            raise BoundsError(
                f"bad region: origin ({self.x}, {self.y}), "
                f"size {self.width}x{self.height}"
            )

    def slices(self) -> tuple[slice, slice]:
        return (
            slice(self.y, self.y + self.height),
            slice(self.x, self.x + self.width),
        )


def _check_region(region: ReferenceRegion, shape: tuple[int, int]) -> None:
    height, width = shape
    if region.y + region.height > height or region.x + region.width > width:
        raise BoundsError(
            f"region {region} exceeds raster bounds {width}x{height}"
        )


def resample_nearest(grid: np.ndarray, factor: int) -> np.ndarray:
    """Integer-factor nearest-neighbor upsampling (each cell repeated)."""
    if factor < 1 or int(factor) != factor:
        raise ConfigError(f"resample factor must be a positive integer, got {factor}")
    arr = np.asarray(grid)
    if arr.ndim != 2:
        raise ShapeError(f"grid must be 2-D, got shape {arr.shape}")
    if factor == 1:
        return arr.copy()
    return np.repeat(np.repeat(arr, factor, axis=0), factor, axis=1)


def crop(image: MultibandImage, region: ReferenceRegion) -> MultibandImage:
    """Cut a rectangle out of every band."""
    _check_region(region, image.shape)
    rows, cols = region.slices()
    return MultibandImage(bands=image.bands, data=image.data[:, rows, cols])


def crop_stack(stack: ImageStack, region: ReferenceRegion) -> ImageStack:
    """Crop images and any attached truth/posterior rasters alike."""
    rows, cols = region.slices()
    frames = []
    for fr in stack.frames:
        truth = fr.truth
        if truth is not None:
            _check_region(region, truth.shape)
            truth = LabelRaster(truth.labels[rows, cols], truth.num_classes)
        posterior = fr.external_posterior
        if posterior is not None:
            posterior = posterior[:, rows, cols]
        frames.append(
            Frame(
                date=fr.date,
                image=crop(fr.image, region),
                cloud_fraction=fr.cloud_fraction,
                truth=truth,
                external_posterior=posterior,
            )
        )
    return ImageStack(tuple(frames))


def bias_correct(stack: ImageStack, region: ReferenceRegion) -> ImageStack:
    """Additive per-band radiometric alignment against the first frame.

    For every later frame, each band is shifted by (reference region
    mean of frame 0) - (reference region mean of that frame), so all
    frames agree on the region's mean value. The first frame is
    returned unchanged, and reapplying the correction is a no-op up to
    float64 rounding.
    """
    if not stack.frames:
        raise DataError("cannot bias-correct an empty stack")
    _check_region(region, stack.shape)
    rows, cols = region.slices()
    reference = stack.frames[0].image.data[:, rows, cols].mean(axis=(1, 2))
    frames = [stack.frames[0]]
    for fr in stack.frames[1:]:
        current = fr.image.data[:, rows, cols].mean(axis=(1, 2))
        bias = reference - current
        shifted = fr.image.data + bias[:, np.newaxis, np.newaxis]
        frames.append(
            replace(fr, image=MultibandImage(bands=fr.image.bands, data=shifted))
        )
    return ImageStack(tuple(frames))


def filter_frames(
    stack: ImageStack,
    max_cloud_fraction: float | None = None,
    exclude_dates: tuple[dt.date, ...] | list[dt.date] = (),
) -> ImageStack:
    """Drop frames by cloud fraction threshold and/or explicit date list.

    Frames without cloud metadata pass the cloud filter. Emits a
    warning (and returns an empty stack) when nothing survives.
    """
    if max_cloud_fraction is not None and not (0.0 <= max_cloud_fraction <= 1.0):
        raise ConfigError(
            f"max_cloud_fraction must lie in [0, 1], got {max_cloud_fraction}"
        )
    excluded = set(exclude_dates)
    unknown = excluded - set(stack.dates)
    if unknown:
        raise DataError(f"excluded dates not in stack: {sorted(unknown)}")
    kept = []
    for fr in stack.frames:
        if fr.date in excluded:
            continue
        if (
            max_cloud_fraction is not None
            and fr.cloud_fraction is not None
            and fr.cloud_fraction > max_cloud_fraction
        ):
            continue
        kept.append(fr)
    if not kept:
        warnings.warn("all frames filtered out", stacklevel=2)
    return ImageStack(tuple(kept))


def split_dates(
    stack: ImageStack,
    train_dates: tuple[dt.date, ...] | list[dt.date],
    test_dates: tuple[dt.date, ...] | list[dt.date],
) -> tuple[ImageStack, ImageStack]:
    """Partition a stack into train and test sub-stacks by date.

    The two date lists must be disjoint and both subsets of the stack's
    dates; order within the stack is preserved.
    """
    train = set(train_dates)
    test = set(test_dates)
    if not train or not test:
        raise SplitError("train and test date lists must be nonempty")
    overlap = train & test
    if overlap:
        raise SplitError(f"train/test dates overlap: {sorted(overlap)}")
    have = set(stack.dates)
    missing = (train | test) - have
    if missing:
        raise SplitError(f"split dates not in stack: {sorted(missing)}")
    train_stack = ImageStack(tuple(fr for fr in stack.frames if fr.date in train))
    test_stack = ImageStack(tuple(fr for fr in stack.frames if fr.date in test))
    return train_stack, test_stack
