"""Declarative image-class model: framed tiles, features, images, classes.

A framed tile is a template sub-image plus a tolerance; a patch contains
the tile when the L1 distance over the tile's support is strictly below
the tolerance.  A feature is present when any of its tiles is (union),
an image spec when all of its features are (intersection), and a sample
belongs to a class collection only when exactly one image spec matches.

The membership predicates here are exact scans over every placement and
act as the ground truth that scores, compiled networks, and generated
datasets are all verified against.

Membership uses the strict inequality ``distance < epsilon``: with it,
strict positivity of the detector scores is exactly equivalent to
membership, boundary included.

Coordinates in contracts are 1-based; storage is 0-based row-major.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, SpecError
from .jsonutil import sha256_hex
from .pgm import read_pgm
from .tensor import matrix_values

__all__ = [
    "FramedTile",
    "Feature",
    "ImageSpec",
    "ImageClassSpec",
    "NOT_IN_ANY_CLASS",
    "AMBIGUOUS",
    "support",
    "tile_distance",
    "tile_distance_map",
    "contains_tile",
    "contains_feature",
    "contains_image",
    "feature_presence",
    "class_membership",
    "complexity",
    "spec_to_data",
    "spec_from_data",
    "load_spec",
    "save_spec",
    "spec_digest",
    "tile_to_data",
]

# class_membership outcomes that are not labels (labels are 1-based ints)
NOT_IN_ANY_CLASS = 0
AMBIGUOUS = -1


def support(matrix) -> frozenset:
    """Set of 1-based coordinates with nonzero value."""
    arr = matrix_values(matrix)
    rows, cols = np.nonzero(arr)
    return frozenset((int(i) + 1, int(j) + 1) for i, j in zip(rows, cols))


@dataclass(frozen=True, eq=False)
class FramedTile:
    """Template values in [0, 1] plus a strictly positive tolerance.

    Zero entries are outside the support and never constrain a match;
    a tile with empty support would match everything, so it is rejected.
    """

    values: np.ndarray
    epsilon: float

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"tile values must be a nonempty 2-D matrix, got {arr.shape}")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("tile values must lie in [0, 1]")
        eps = float(self.epsilon)
        if not eps > 0.0:
            raise ValueError(f"epsilon must be positive, got {eps}")
        supp_r, supp_c = np.nonzero(arr)  # row-major order
        if supp_r.size == 0:
            raise ValueError("tile has empty support (all entries zero)")
        arr.flags.writeable = False
        supp_r.flags.writeable = False
        supp_c.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "supp_rows", supp_r)
        object.__setattr__(self, "supp_cols", supp_c)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def support_size(self) -> int:
        return int(self.supp_rows.size)

    @property
    def support(self) -> frozenset:
        return support(self.values)

    @property
    def support_values(self) -> np.ndarray:
        return self.values[self.supp_rows, self.supp_cols]


@dataclass(frozen=True, eq=False)
class Feature:
    """A nonempty ordered collection of framed tiles (union semantics).

    Stored as a list rather than a set so compiled-network layout is
    deterministic; duplicates are permitted and do not change membership.
    """

    tiles: tuple

    def __post_init__(self):
        tiles = tuple(self.tiles)
        if not tiles:
            raise ValueError("feature needs at least one tile")
        object.__setattr__(self, "tiles", tiles)

    @property
    def s(self) -> int:
        """Tile count."""
        return len(self.tiles)

    @property
    def c(self) -> int:
        """Total support size over all tiles."""
        return sum(t.support_size for t in self.tiles)


@dataclass(frozen=True, eq=False)
class ImageSpec:
    """A named, nonempty ordered collection of features (intersection)."""

    features: tuple
    name: str

    def __post_init__(self):
        features = tuple(self.features)
        if not features:
            raise ValueError(f"image spec '{self.name}' needs at least one feature")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "name", str(self.name))

    @property
    def r(self) -> int:
        return len(self.features)

    @property
    def s(self) -> int:
        return sum(f.s for f in self.features)

    @property
    def c(self) -> int:
        return sum(f.c for f in self.features)


@dataclass(frozen=True, eq=False)
class ImageClassSpec:
    """A canvas size plus a nonempty list of distinctly named image specs."""

    canvas: tuple
    images: tuple

    def __post_init__(self):
        m, n = (int(v) for v in self.canvas)
        if m < 1 or n < 1:
            raise DimensionError(f"canvas must be at least 1x1, got {m}x{n}")
        images = tuple(self.images)
        if not images:
            raise ValueError("image class spec needs at least one image")
        names = [img.name for img in images]
        if len(set(names)) != len(names):
            raise ValueError(f"image names must be distinct, got {names}")
        for img in images:
            for feat in img.features:
                for tile in feat.tiles:
                    k, l = tile.shape
                    if k > m or l > n:
                        raise DimensionError(
                            f"tile {k}x{l} in image '{img.name}' exceeds canvas {m}x{n}"
                        )
        object.__setattr__(self, "canvas", (m, n))
        object.__setattr__(self, "images", images)

    @property
    def num_classes(self) -> int:
        return len(self.images)

    @property
    def names(self) -> list:
        return [img.name for img in self.images]

    @property
    def r_max(self) -> int:
        return max(img.r for img in self.images)


def complexity(obj) -> tuple:
    """(s, c) for a Feature or an ImageSpec."""
    return (obj.s, obj.c)


def tile_distance(tile: FramedTile, patch) -> float:
    """L1 distance between a patch and the tile, over the support only."""
    patch = matrix_values(patch)
    if patch.shape != tile.shape:
        raise DimensionError(f"patch shape {patch.shape} != tile shape {tile.shape}")
    diffs = patch[tile.supp_rows, tile.supp_cols] - tile.support_values
    return float(np.abs(diffs).sum())


def tile_distance_map(x, tile: FramedTile) -> np.ndarray:
    """Distance at every legal placement; shape (m-k+1, n-l+1)."""
    x = matrix_values(x)
    k, l = tile.shape
    m, n = x.shape
    if k > m or l > n:
        raise DimensionError(f"tile {k}x{l} does not fit canvas {m}x{n}")
    windows = sliding_window_view(x, (k, l))
    diffs = windows[:, :, tile.supp_rows, tile.supp_cols] - tile.support_values
    return np.abs(diffs).sum(axis=-1)


def contains_tile(x, tile: FramedTile) -> bool:
    """True iff some placement has distance strictly below epsilon."""
    return bool((tile_distance_map(x, tile) < tile.epsilon).any())


def contains_feature(x, feature: Feature) -> bool:
    """True iff any constituent tile is contained."""
    return any(contains_tile(x, t) for t in feature.tiles)


def contains_image(x, image: ImageSpec) -> bool:
    """True iff every feature is contained."""
    return all(contains_feature(x, f) for f in image.features)


def feature_presence(x, spec: ImageClassSpec) -> list:
    """Per class, a tuple of booleans: which of its features x contains."""
    x = matrix_values(x)
    return [tuple(contains_feature(x, f) for f in img.features) for img in spec.images]


def class_membership(x, spec: ImageClassSpec) -> int:
    """1-based label if exactly one image spec matches.

    Returns NOT_IN_ANY_CLASS (0) when none matches and AMBIGUOUS (-1)
    when two or more match; ambiguous inputs are outside the modeled
    domain by definition.
    """
    hits = [j + 1 for j, img in enumerate(spec.images) if contains_image(x, img)]
    if not hits:
        return NOT_IN_ANY_CLASS
    if len(hits) > 1:
        return AMBIGUOUS
    return hits[0]


# ---------------------------------------------------------------------------
# Spec document (JSON) handling
#
# {
#   "canvas": {"m": 16, "n": 16},
#   "classes": [
#     {"name": "cross",
#      "features": [
#        {"tiles": [
#          {"epsilon": 0.25, "values": [[0.0, 1.0], [1.0, 0.0]]},
#          {"epsilon": 0.25, "file": "tiles/cross.pgm", "threshold_zero": 0.1}
#        ]}
#      ]}
#   ]
# }
#
# PGM tile pixels map to values v/255; values below threshold_zero are
# forced to 0 (outside the support).
# ---------------------------------------------------------------------------


def tile_to_data(tile: FramedTile) -> dict:
    return {
        "epsilon": tile.epsilon,
        "values": [[float(v) for v in row] for row in tile.values],
    }


def spec_to_data(spec: ImageClassSpec) -> dict:
    """Canonical document form: tile values always inline."""
    return {
        "canvas": {"m": spec.canvas[0], "n": spec.canvas[1]},
        "classes": [
            {
                "name": img.name,
                "features": [
                    {"tiles": [tile_to_data(t) for t in f.tiles]} for f in img.features
                ],
            }
            for img in spec.images
        ],
    }


def spec_digest(spec: ImageClassSpec) -> str:
    """Content hash of the canonical document form."""
    return sha256_hex(spec_to_data(spec))


def _check_tile(data, where: str, canvas, base_dir: str, diags: list):
    if not isinstance(data, dict):
        diags.append(f"{where}: tile must be an object")
        return None
    eps = data.get("epsilon")
    if not isinstance(eps, (int, float)) or isinstance(eps, bool) or not eps > 0:
        diags.append(f"{where}: epsilon must be positive")
        eps = None
    values = None
    if "values" in data and "file" in data:
        diags.append(f"{where}: give either values or file, not both")
    elif "values" in data:
        try:
            values = np.array(data["values"], dtype=np.float64)
        except (TypeError, ValueError):
            diags.append(f"{where}: values must be a rectangular 2-D array of numbers")
        else:
            if values.ndim != 2 or values.size == 0:
                diags.append(f"{where}: values must be a nonempty 2-D array")
                values = None
    elif "file" in data:
        path = os.path.join(base_dir, data["file"])
        try:
            values = read_pgm(path).astype(np.float64) / 255.0
        except (OSError, ValueError) as exc:
            diags.append(f"{where}: cannot load tile file: {exc}")
        else:
            threshold = data.get("threshold_zero")
            if threshold is not None:
                values = values.copy()
                values[values < float(threshold)] = 0.0
    else:
        diags.append(f"{where}: tile needs values or file")
    if values is None or eps is None:
        return None
    if np.any(values < 0.0) or np.any(values > 1.0):
        diags.append(f"{where}: values must lie in [0, 1]")
        return None
    if not np.any(values != 0.0):
        diags.append(f"{where}: tile has empty support (all entries zero)")
        return None
    k, l = values.shape
    m, n = canvas
    if k > m or l > n:
        diags.append(f"{where}: tile {k}x{l} exceeds canvas {m}x{n}")
        return None
    return FramedTile(values, eps)


def spec_from_data(data, base_dir: str = ".") -> ImageClassSpec:
    """Build and validate a spec from its document form.

    Collects every diagnostic before raising, so a single run reports
    all problems with their locations.
    """
    diags: list = []
    if not isinstance(data, dict):
        raise SpecError("spec document must be a JSON object")
    canvas_data = data.get("canvas")
    canvas = (0, 0)
    if not isinstance(canvas_data, dict):
        diags.append("canvas: must be an object with fields m and n")
    else:
        m, n = canvas_data.get("m"), canvas_data.get("n")
        if not isinstance(m, int) or not isinstance(n, int) or m < 1 or n < 1:
            diags.append("canvas: m and n must be positive integers")
        else:
            canvas = (m, n)
    classes = data.get("classes")
    if not isinstance(classes, list) or not classes:
        diags.append("classes: must be a nonempty array")
        raise SpecError(diags)
    images = []
    names = []
    for ci, cls in enumerate(classes):
        where_c = f"classes[{ci}]"
        if not isinstance(cls, dict):
            diags.append(f"{where_c}: must be an object")
            continue
        name = cls.get("name")
        if not isinstance(name, str) or not name:
            diags.append(f"{where_c}: name must be a nonempty string")
            name = f"<class {ci}>"
        if name in names:
            diags.append(f"{where_c}: duplicate class name '{name}'")
        names.append(name)
        feats_data = cls.get("features")
        if not isinstance(feats_data, list) or not feats_data:
            diags.append(f"{where_c}: features must be a nonempty array")
            continue
        features = []
        for fi, feat in enumerate(feats_data):
            where_f = f"{where_c}.features[{fi}]"
            tiles_data = feat.get("tiles") if isinstance(feat, dict) else None
            if not isinstance(tiles_data, list) or not tiles_data:
                diags.append(f"{where_f}: tiles must be a nonempty array")
                continue
            tiles = []
            for ti, tile_data in enumerate(tiles_data):
                tile = _check_tile(
                    tile_data, f"{where_f}.tiles[{ti}]", canvas, base_dir, diags
                )
                if tile is not None:
                    tiles.append(tile)
            if len(tiles) == len(tiles_data):
                features.append(Feature(tuple(tiles)))
        if len(features) == len(feats_data):
            images.append(ImageSpec(tuple(features), name))
    if diags:
        raise SpecError(diags)
    return ImageClassSpec(canvas, tuple(images))


def load_spec(path) -> ImageClassSpec:
    """Load a spec document; tile file paths resolve relative to it."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return spec_from_data(data, base_dir=os.path.dirname(os.path.abspath(path)))


def save_spec(spec: ImageClassSpec, path) -> None:
    from .jsonutil import pretty_json

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(pretty_json(spec_to_data(spec)))
