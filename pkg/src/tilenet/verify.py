"""Verification harness: every constructive claim checked at desk scale.

Checks cover, per spec: sign equivalence between detector scores and
the membership predicates, exactness of the minimum networks, compiled
networks against their score oracles, parameter-count bounds, zero
error of the compiled classifiers on generated datasets, and weight
file round-tripping.  `quick` keeps sample counts small; `full` also
runs the exhaustive binary-grid sign check.

The harness compares networks to scores at 1e-9 absolute: the two paths
compute the same sums in different association orders, which is the only
deviation a correct build can show.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .compiler import (
    compile_classifier,
    compile_feature_network,
    compile_min_network,
    compile_shallow_classifier,
    compile_tile_network,
)
from .datagen import GenConfig, gen_dataset
from .errors import GenerationError
from .model import FramedTile, ImageClassSpec, contains_feature, contains_image, contains_tile
from .rng import SplitMix64, derive_seed
from .scores import feature_score, image_score, image_score_sum, tile_score
from .tensor import classify_batch, forward_batch, network_forward
from .weights import network_to_data

__all__ = ["CheckResult", "run_verification", "NETWORK_SCORE_TOL", "MIN_EXACT_TOL"]

NETWORK_SCORE_TOL = 1e-9
MIN_EXACT_TOL = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float
    skipped: bool = False

    @property
    def status(self) -> str:
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"


def _timed(name, fn) -> CheckResult:
    start = time.perf_counter()
    passed, detail, skipped = fn()
    return CheckResult(name, passed, detail, time.perf_counter() - start, skipped)


def _random_images(rng: SplitMix64, count: int, m: int, n: int) -> np.ndarray:
    return rng.random_array(count * m * n).reshape(count, m, n)


def _all_tiles(spec: ImageClassSpec) -> list:
    return [t for img in spec.images for f in img.features for t in f.tiles]


def _distance_maps(xs: np.ndarray, tile: FramedTile) -> np.ndarray:
    """Placement distance maps for a whole (S, m, n) batch."""
    windows = sliding_window_view(xs, tile.shape, axis=(1, 2))
    diffs = windows[:, :, :, tile.supp_rows, tile.supp_cols] - tile.support_values
    return np.abs(diffs).sum(axis=-1)


def _paste_positives(spec: ImageClassSpec, rng: SplitMix64, count: int) -> np.ndarray:
    """Random backgrounds with every feature of a random class pasted in."""
    from .datagen import paste_tile

    m, n = spec.canvas
    out = np.empty((count, m, n))
    for s in range(count):
        x = rng.random_array(m * n).reshape(m, n)
        image = spec.images[rng.randbelow(spec.num_classes)]
        for feature in image.features:
            tile = feature.tiles[rng.randbelow(len(feature.tiles))]
            k, l = tile.shape
            x = paste_tile(x, tile, (rng.randbelow(m - k + 1), rng.randbelow(n - l + 1)))
        out[s] = x
    return out


def _check_sign_tiles(spec, seed, level):
    def run():
        m, n = spec.canvas
        rng = SplitMix64(derive_seed(seed, 1))
        per_tile = 2000 if level == "full" else 200
        mismatches = 0
        cases = 0
        for tile in _all_tiles(spec):
            xs = _random_images(rng, per_tile, m, n)
            dmaps = _distance_maps(xs, tile)
            scores = np.maximum(0.0, tile.epsilon - dmaps).sum(axis=(1, 2))
            members = (dmaps < tile.epsilon).any(axis=(1, 2))
            mismatches += int(((scores > 0.0) != members).sum())
            cases += per_tile
            # pasted positives exercise the > 0 branch
            for _ in range(8):
                x = rng.random_array(m * n).reshape(m, n)
                k, l = tile.shape
                oi, oj = rng.randbelow(m - k + 1), rng.randbelow(n - l + 1)
                x[oi : oi + k, oj : oj + l] = tile.values
                mismatches += int((tile_score(x, tile) > 0.0) != contains_tile(x, tile))
                cases += 1
        if level == "full":
            exhaustive, total = _exhaustive_binary_check()
            mismatches += exhaustive
            cases += total
        return mismatches == 0, f"{cases} cases, {mismatches} sign mismatches", False

    return _timed("tile score sign equivalence", run)


def _exhaustive_binary_check() -> tuple:
    """Every binary 4x4 image against a fixed 2x2 tile (boundary included).

    The tile values make distance == epsilon reachable, pinning the
    strict-inequality convention.
    """
    tile = FramedTile([[1.0, 0.5], [0.0, 0.25]], 0.75)
    bits = np.arange(1 << 16, dtype=np.uint32)
    grid = ((bits[:, None] >> np.arange(16, dtype=np.uint32)) & 1).astype(np.float64)
    xs = grid.reshape(-1, 4, 4)
    dmaps = _distance_maps(xs, tile)
    scores = np.maximum(0.0, tile.epsilon - dmaps).sum(axis=(1, 2))
    members = (dmaps < tile.epsilon).any(axis=(1, 2))
    return int(((scores > 0.0) != members).sum()), xs.shape[0]


def _check_sign_features(spec, seed, level):
    def run():
        m, n = spec.canvas
        rng = SplitMix64(derive_seed(seed, 2))
        count = 400 if level == "full" else 100
        xs = np.concatenate(
            [_random_images(rng, count, m, n), _paste_positives(spec, rng, count)]
        )
        mismatches = 0
        for x in xs:
            for img in spec.images:
                for feature in img.features:
                    mismatches += int(
                        (feature_score(x, feature) > 0.0) != contains_feature(x, feature)
                    )
                mismatches += int((image_score(x, img) > 0.0) != contains_image(x, img))
        return mismatches == 0, f"{2 * count} inputs, {mismatches} sign mismatches", False

    return _timed("feature/image score sign equivalence", run)


def _check_min_networks(level, seed):
    def run():
        widths = (1, 2, 3, 4, 5, 8, 13, 16) if level == "full" else (1, 2, 3, 5, 8)
        vectors = 1000 if level == "full" else 200
        rng = SplitMix64(derive_seed(seed, 3))
        worst = 0.0
        for l in widths:
            art = compile_min_network(l)
            vs = rng.random_array(vectors * l).reshape(vectors, l) * 10.0
            vs[:: max(1, vectors // 7), : max(1, l // 2)] = 0.0  # exercise zeros
            got = forward_batch(vs.reshape(vectors, 1, l), art.network)[:, 0]
            worst = max(worst, float(np.abs(got - vs.min(axis=1)).max()))
        return worst <= MIN_EXACT_TOL, f"max |min deviation| = {worst:.3g}", False

    return _timed("minimum network exactness", run)


def _check_tile_networks(spec, seed, level):
    def run():
        m, n = spec.canvas
        rng = SplitMix64(derive_seed(seed, 4))
        count = 200 if level == "full" else 50
        worst = 0.0
        for tile in _all_tiles(spec):
            art = compile_tile_network(tile, m, n)
            xs = _random_images(rng, count, m, n)
            got = forward_batch(xs, art.network)[:, 0]
            want = np.array([tile_score(x, tile) for x in xs])
            worst = max(worst, float(np.abs(got - want).max()))
        return worst <= NETWORK_SCORE_TOL, f"max |network - score| = {worst:.3g}", False

    return _timed("tile network matches tile score", run)


def _check_feature_networks(spec, seed, level):
    def run():
        m, n = spec.canvas
        rng = SplitMix64(derive_seed(seed, 5))
        count = 100 if level == "full" else 30
        worst = 0.0
        for img in spec.images:
            for feature in img.features:
                art = compile_feature_network(feature, m, n)
                xs = _random_images(rng, count, m, n)
                got = forward_batch(xs, art.network)[:, 0]
                want = np.array([feature_score(x, feature) for x in xs])
                worst = max(worst, float(np.abs(got - want).max()))
        return worst <= NETWORK_SCORE_TOL, f"max |network - score| = {worst:.3g}", False

    return _timed("feature network matches feature score", run)


def _check_classifier_scores(spec, seed, level, net=None, kind="classifier_deep"):
    label = "loaded network" if net is not None else "compiled classifier"

    def run():
        m, n = spec.canvas
        rng = SplitMix64(derive_seed(seed, 6))
        count = 100 if level == "full" else 30
        network = net if net is not None else compile_classifier(spec).network
        scorer = image_score_sum if kind == "classifier_shallow" else image_score
        xs = np.concatenate(
            [_random_images(rng, count, m, n), _paste_positives(spec, rng, count)]
        )
        got = forward_batch(xs, network)
        want = np.array([[scorer(x, img) for img in spec.images] for x in xs])
        worst = float(np.abs(got - want).max())
        return worst <= NETWORK_SCORE_TOL, f"{label}: max |output - score| = {worst:.3g}", False

    return _timed("classifier outputs match class scores", run)


def _check_shallow_scores(spec, seed, level):
    def run():
        m, n = spec.canvas
        rng = SplitMix64(derive_seed(seed, 7))
        count = 50 if level == "full" else 20
        network = compile_shallow_classifier(spec).network
        xs = np.concatenate(
            [_random_images(rng, count, m, n), _paste_positives(spec, rng, count)]
        )
        got = forward_batch(xs, network)
        want = np.array([[image_score_sum(x, img) for img in spec.images] for x in xs])
        worst = float(np.abs(got - want).max())
        return worst <= NETWORK_SCORE_TOL, f"max |output - score sum| = {worst:.3g}", False

    return _timed("shallow classifier outputs match score sums", run)


def _check_param_bounds(spec):
    def run():
        problems = []
        deep = compile_classifier(spec)
        rep = deep.report
        if rep.conv_filters > rep.bound_filters:
            problems.append(f"filters {rep.conv_filters} > bound {rep.bound_filters}")
        if rep.fc_neurons > rep.bound_neurons:
            problems.append(f"fc neurons {rep.fc_neurons} > bound {rep.bound_neurons}")
        if rep.fc_layers != rep.bound_layers:
            problems.append(f"fc layers {rep.fc_layers} != {rep.bound_layers}")
        m, n = spec.canvas
        for tile in _all_tiles(spec):
            art = compile_tile_network(tile, m, n)
            w = art.network.dense[0].weights
            per_row = np.diff(w.indptr)
            if per_row.max() > 2 * tile.support_size:
                problems.append(
                    f"placement row has {per_row.max()} weights > 2*|support| = "
                    f"{2 * tile.support_size}"
                )
                break
        detail = "; ".join(problems) if problems else (
            f"filters {rep.conv_filters} <= {rep.bound_filters}, "
            f"fc neurons {rep.fc_neurons} <= {rep.bound_neurons}, "
            f"fc layers {rep.fc_layers} == {rep.bound_layers}, "
            f"zero fraction {rep.zero_weight_fraction:.4f}"
        )
        return not problems, detail, False

    return _timed("parameter counts within bounds", run)


def _check_zero_error(spec, seed, level, net=None, strict=False):
    name = "zero error (strict dataset, shallow)" if strict else "zero error (deep)"

    def run():
        per_class = 100 if level == "full" else 10
        try:
            config = GenConfig(spec, per_class, derive_seed(seed, 8 + int(strict)),
                               strict=strict)
            dataset = gen_dataset(config)
        except GenerationError as exc:
            if strict:
                return True, f"not applicable: {exc}", True
            return False, str(exc), False
        if net is not None:
            network = net
        elif strict:
            network = compile_shallow_classifier(spec).network
        else:
            network = compile_classifier(spec).network
        xs = np.stack([s.astype(np.float64) for s, _ in dataset.samples])
        labels = np.array([lab for _, lab in dataset.samples])
        predictions = classify_batch(xs, network)
        wrong = int((predictions != labels).sum())
        return wrong == 0, f"{len(labels)} samples, {wrong} misclassified", False

    return _timed(name, run)


def _check_roundtrip(spec):
    def run():
        from .weights import network_from_data

        art = compile_classifier(spec)
        data = network_to_data(art.network, art.kind, art.spec_digest, 0)
        twice = network_to_data(art.network, art.kind, art.spec_digest, 0)
        if data != twice:
            return False, "serialization is not deterministic", False
        loaded, _ = network_from_data(data)
        rng = SplitMix64(derive_seed(0xC0FFEE, 1))
        m, n = spec.canvas
        x = rng.random_array(m * n).reshape(m, n)
        a = network_forward(x, art.network)
        b = network_forward(x, loaded)
        if not np.array_equal(a, b):
            return False, "round-tripped network changed its outputs", False
        return True, "deterministic serialization, bit-identical forward", False

    return _timed("weight file round-trip", run)


def run_verification(spec: ImageClassSpec, level: str = "quick", seed: int = 2024,
                     net=None, net_kind: str = "classifier_deep") -> list:
    """Run every check; pass a loaded network to audit a weight file."""
    if level not in ("quick", "full"):
        raise ValueError(f"unknown verification level '{level}'")
    results = [
        _check_sign_tiles(spec, seed, level),
        _check_sign_features(spec, seed, level),
        _check_min_networks(level, seed),
        _check_tile_networks(spec, seed, level),
        _check_feature_networks(spec, seed, level),
        _check_classifier_scores(spec, seed, level, net=net, kind=net_kind),
        _check_shallow_scores(spec, seed, level),
        _check_param_bounds(spec),
        _check_zero_error(spec, seed, level,
                          net=net if net_kind == "classifier_deep" else None),
        _check_zero_error(spec, seed, level, strict=True),
        _check_roundtrip(spec),
    ]
    return results
