"""Synthetic dataset generation: backgrounds, tile pasting, rejection.

A sample for class j is a random background with one uniformly chosen
tile per feature of image spec j pasted at a uniformly chosen legal
offset.  Pasting alone does not guarantee the label: a later paste can
destroy an earlier feature, the background can accidentally instantiate
another class, and membership demands exactly one matching image spec.
Every candidate is therefore re-checked with the exact membership
predicates and resampled on failure (bounded retries).

Strict mode additionally rejects samples containing ANY feature of
another class, which makes the shallow sum-classifier's separation
assumption hold by construction.

Samples are quantized to float32 before the membership check, because
the dataset file stores float32: the stored label is then sound for the
exact pixel values a reader gets back.

Determinism: sample (class j, index i) is generated from its own
SplitMix64 stream seeded with derive_seed(seed, j, i), so datasets are
bit-identical for a fixed (spec, config, seed, generator version) and
samples could be generated in any order.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FileFormatError, GenerationError
from .model import FramedTile, ImageClassSpec, feature_presence, spec_digest
from .pgm import write_pgm
from .rng import SplitMix64, derive_seed

__all__ = [
    "GENERATOR_VERSION",
    "DATASET_FORMAT_VERSION",
    "GenConfig",
    "Dataset",
    "gen_background",
    "paste_tile",
    "gen_sample",
    "gen_dataset",
    "ingest_tiles",
    "save_dataset",
    "load_dataset",
    "export_pgm",
]

GENERATOR_VERSION = 1
DATASET_FORMAT_VERSION = 1
_MAGIC = b"TILD"
_HEADER = "<4sIIIIIQ32s"  # magic, fmt, genver, m, n, count, seed, digest


@dataclass(frozen=True)
class GenConfig:
    """Generation parameters.

    noise_amplitude perturbs pasted support pixels by at most that much;
    the constructor enforces noise_amplitude * max support size < min
    epsilon so a pasted tile always stays inside its own frame.
    """

    spec: ImageClassSpec
    samples_per_class: int
    seed: int
    paste_mode: str = "rectangle"  # or "support_only"
    noise_amplitude: float = 0.0
    background: str = "uniform_random"  # or "constant"
    background_value: float = 0.0
    strict: bool = False
    pastes_per_feature: int = 1
    max_retries: int = 1000

    def __post_init__(self):
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be at least 1")
        if self.paste_mode not in ("rectangle", "support_only"):
            raise ValueError(f"unknown paste mode '{self.paste_mode}'")
        if self.background not in ("uniform_random", "constant"):
            raise ValueError(f"unknown background mode '{self.background}'")
        if not 0.0 <= self.background_value <= 1.0:
            raise ValueError("background_value must lie in [0, 1]")
        if self.noise_amplitude < 0.0:
            raise ValueError("noise_amplitude must be nonnegative")
        if self.pastes_per_feature < 1:
            raise ValueError("pastes_per_feature must be at least 1")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")
        if self.noise_amplitude > 0.0:
            tiles = [t for img in self.spec.images for f in img.features for t in f.tiles]
            worst = self.noise_amplitude * max(t.support_size for t in tiles)
            eps_min = min(t.epsilon for t in tiles)
            if not worst < eps_min:
                raise ValueError(
                    f"noise_amplitude {self.noise_amplitude} can push a pasted tile "
                    f"out of its frame (amplitude * max support {worst} >= "
                    f"min epsilon {eps_min})"
                )


@dataclass
class Dataset:
    """Labeled float32 samples plus generation provenance.

    `rejected` counts resampled attempts; it is informational and not
    part of the file format.
    """

    samples: list  # of (float32 (m, n) array, 1-based label)
    spec_digest: str
    seed: int
    generator_version: int = GENERATOR_VERSION
    rejected: int = 0

    @property
    def shape(self) -> tuple:
        return self.samples[0][0].shape


def gen_background(m: int, n: int, rng: SplitMix64, mode: str = "uniform_random",
                   value: float = 0.0) -> np.ndarray:
    """Background canvas: i.i.d. uniform [0, 1) entries or a constant fill."""
    if m < 1 or n < 1:
        raise DimensionError(f"background must be at least 1x1, got {m}x{n}")
    if mode == "uniform_random":
        return rng.random_array(m * n).reshape(m, n)
    if mode == "constant":
        return np.full((m, n), float(value))
    raise ValueError(f"unknown background mode '{mode}'")


def paste_tile(x, tile: FramedTile, offset: tuple, mode: str = "rectangle",
               noise_amplitude: float = 0.0, rng: SplitMix64 | None = None) -> np.ndarray:
    """Return a copy of x with the tile pasted at a 0-based offset.

    rectangle mode replaces the whole k x l window with the tile values;
    support_only overwrites just the support pixels, leaving background
    visible through the holes.  Noise perturbs each support pixel by a
    uniform draw in [-a, a] (row-major support order), clamped to [0, 1];
    clamping can only shrink the distance to the tile.
    """
    x = np.array(getattr(x, "values", x), dtype=np.float64)
    i, j = offset
    k, l = tile.shape
    if i < 0 or j < 0 or i + k > x.shape[0] or j + l > x.shape[1]:
        raise DimensionError(
            f"offset {offset} places a {k}x{l} tile outside the {x.shape} canvas"
        )
    if mode == "rectangle":
        x[i : i + k, j : j + l] = tile.values
    elif mode == "support_only":
        x[i + tile.supp_rows, j + tile.supp_cols] = tile.support_values
    else:
        raise ValueError(f"unknown paste mode '{mode}'")
    if noise_amplitude > 0.0:
        if rng is None:
            raise ValueError("noise requires an rng")
        draws = rng.random_array(tile.support_size)
        noisy = tile.support_values + (2.0 * draws - 1.0) * noise_amplitude
        x[i + tile.supp_rows, j + tile.supp_cols] = np.clip(noisy, 0.0, 1.0)
    return x


def _check_sample(x64: np.ndarray, label: int, spec: ImageClassSpec, strict: bool):
    """(accepted, offending class name or None)."""
    presence = feature_presence(x64, spec)
    contained = [all(p) for p in presence]
    if not contained[label - 1]:
        return False, None
    for idx, full in enumerate(contained):
        if full and idx != label - 1:
            return False, spec.images[idx].name
    if strict:
        for idx, flags in enumerate(presence):
            if idx != label - 1 and any(flags):
                return False, spec.images[idx].name
    return True, None


def gen_sample(spec: ImageClassSpec, label: int, config: GenConfig,
               rng: SplitMix64) -> tuple:
    """One verified float32 sample for the 1-based label.

    Returns (sample, retries).  Raises GenerationError when the retry
    budget runs out, naming the class pair that kept colliding.
    """
    m, n = spec.canvas
    image = spec.images[label - 1]
    last_offender = None
    for attempt in range(config.max_retries):
        x = gen_background(m, n, rng, config.background, config.background_value)
        for feature in image.features:
            for _ in range(config.pastes_per_feature):
                tile = feature.tiles[rng.randbelow(len(feature.tiles))]
                k, l = tile.shape
                oi = rng.randbelow(m - k + 1)
                oj = rng.randbelow(n - l + 1)
                x = paste_tile(x, tile, (oi, oj), config.paste_mode,
                               config.noise_amplitude, rng)
        x32 = x.astype(np.float32)
        ok, offender = _check_sample(x32.astype(np.float64), label, spec, config.strict)
        if ok:
            return x32, attempt
        if offender is not None:
            last_offender = offender
    target = image.name
    detail = f" (colliding with class '{last_offender}')" if last_offender else ""
    raise GenerationError(
        f"could not generate a sample for class '{target}' within "
        f"{config.max_retries} attempts{detail}"
    )


def gen_dataset(config: GenConfig) -> Dataset:
    """samples_per_class verified samples for every class, label-sound."""
    spec = config.spec
    samples = []
    rejected = 0
    for j in range(1, spec.num_classes + 1):
        for i in range(config.samples_per_class):
            rng = SplitMix64(derive_seed(config.seed, j, i))
            x32, retries = gen_sample(spec, j, config, rng)
            rejected += retries
            samples.append((x32, j))
    return Dataset(samples, spec_digest(spec), config.seed, GENERATOR_VERSION, rejected)


def ingest_tiles(images: np.ndarray, labels: np.ndarray, label: int, k: int,
                 epsilon: float, rng: SplitMix64) -> list:
    """k framed tiles drawn (without replacement) from samples of one label.

    Pixels map to values v/255; zero pixels fall outside the support.
    An all-black selection is an error because its tile would match
    everything.
    """
    images = np.asarray(images)
    labels = np.asarray(labels).reshape(-1)
    if images.ndim != 3 or images.shape[0] != labels.shape[0]:
        raise DimensionError(
            f"need (N, h, w) images with N labels, got {images.shape} and {labels.shape}"
        )
    pool = np.nonzero(labels == label)[0]
    if pool.size == 0:
        raise ValueError(f"no samples with label {label}")
    if pool.size < k:
        raise ValueError(f"only {pool.size} samples with label {label}, need {k}")
    remaining = pool.tolist()
    tiles = []
    for _ in range(k):
        pick = remaining.pop(rng.randbelow(len(remaining)))
        values = images[pick].astype(np.float64) / 255.0
        if not np.any(values != 0.0):
            raise ValueError(f"sample {pick} (label {label}) is all black: empty support")
        tiles.append(FramedTile(values, epsilon))
    return tiles


def save_dataset(dataset: Dataset, path) -> None:
    """Write the binary dataset file (little-endian, bit-reproducible).

    Header: magic 'TILD', u32 format version, u32 generator version,
    u32 m, u32 n, u32 sample count, u64 seed, 32-byte spec digest.
    Then per sample: m*n float32 values row-major and one label byte
    (1-based).
    """
    m, n = dataset.shape
    digest = bytes.fromhex(dataset.spec_digest)
    if len(digest) != 32:
        raise ValueError("spec digest must be 32 bytes of hex")
    with open(path, "wb") as fh:
        fh.write(struct.pack(_HEADER, _MAGIC, DATASET_FORMAT_VERSION,
                             dataset.generator_version, m, n,
                             len(dataset.samples), dataset.seed, digest))
        for values, label in dataset.samples:
            arr = np.ascontiguousarray(values, dtype="<f4")
            if arr.shape != (m, n):
                raise DimensionError(f"sample shape {arr.shape} != dataset shape {(m, n)}")
            if not 1 <= label <= 255:
                raise ValueError(f"label {label} out of range for one byte (1-based)")
            fh.write(arr.tobytes())
            fh.write(bytes([label]))


def load_dataset(path) -> Dataset:
    header_size = struct.calcsize(_HEADER)
    with open(path, "rb") as fh:
        head = fh.read(header_size)
        if len(head) != header_size:
            raise FileFormatError(f"{path}: truncated dataset header")
        magic, fmt, genver, m, n, count, seed, digest = struct.unpack(_HEADER, head)
        if magic != _MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        if fmt != DATASET_FORMAT_VERSION:
            raise FileFormatError(
                f"{path}: unsupported dataset format version {fmt} "
                f"(expected {DATASET_FORMAT_VERSION})"
            )
        record = 4 * m * n + 1
        samples = []
        for idx in range(count):
            blob = fh.read(record)
            if len(blob) != record:
                raise FileFormatError(f"{path}: truncated at sample {idx}")
            values = np.frombuffer(blob[:-1], dtype="<f4").reshape(m, n)
            label = blob[-1]
            if label < 1:
                raise FileFormatError(f"{path}: sample {idx} has invalid label {label}")
            samples.append((values, int(label)))
        if fh.read(1):
            raise FileFormatError(f"{path}: trailing bytes after {count} samples")
    return Dataset(samples, digest.hex(), seed, genver)


def export_pgm(dataset: Dataset, directory) -> list:
    """Lossy 8-bit PGM dump for eyeballing, plus a manifest.csv.

    Values map to round(255 * x); never re-ingest these for
    verification.
    """
    os.makedirs(directory, exist_ok=True)
    names = []
    with open(os.path.join(directory, "manifest.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "label"])
        for idx, (values, label) in enumerate(dataset.samples):
            name = f"sample_{idx:05d}.pgm"
            pixels = np.rint(np.asarray(values, dtype=np.float64) * 255.0)
            write_pgm(os.path.join(directory, name), pixels)
            writer.writerow([name, label])
            names.append(name)
    return names
