"""Detector scores: placement sums, min/sum combinators, sign equivalence."""

import numpy as np
import pytest

from tilenet import (
    DimensionError,
    Feature,
    FramedTile,
    ImageSpec,
    contains_feature,
    contains_image,
    contains_tile,
    feature_score,
    image_score,
    image_score_sum,
    region_index,
    tile_score,
)
from helpers import brute_distance_map_batch, naive_tile_score, random_tile


def test_region_index_unit_windows():
    assert region_index(2, 2, 1, 1) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_region_index_single_placement():
    assert region_index(3, 5, 3, 5) == [(0, 0)]


def test_region_index_count():
    assert len(region_index(3, 3, 2, 2)) == 4
    for m, n, k, l in [(6, 7, 2, 3), (4, 4, 1, 4), (5, 2, 5, 1)]:
        assert len(region_index(m, n, k, l)) == (m - k + 1) * (n - l + 1)


def test_region_index_rejects_oversize():
    with pytest.raises(DimensionError):
        region_index(3, 3, 4, 1)


def test_tile_score_hand_enumeration():
    # 2x2 canvas, 1x1 tile value 1, eps 0.5: one placement at distance 0
    # contributes eps, the other three at distance 1 contribute nothing
    tile = FramedTile([[1.0]], 0.5)
    x = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert tile_score(x, tile) == pytest.approx(0.5, abs=1e-12)


def test_tile_score_zero_when_nothing_close():
    tile = FramedTile([[1.0, 1.0]], 0.4)
    assert tile_score(np.zeros((3, 3)), tile) == 0.0


def test_tile_score_two_disjoint_matches():
    tile = FramedTile([[1.0]], 0.3)
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    # two exact placements contribute eps each; the others sit at distance 1
    assert tile_score(x, tile) == pytest.approx(0.6, abs=1e-12)


def test_tile_score_matches_naive():
    rng = np.random.default_rng(0)
    for _ in range(25):
        tile = random_tile(rng, k_range=(1, 3))
        x = rng.random((6, 6))
        assert tile_score(x, tile) == pytest.approx(
            naive_tile_score(x, tile.values, tile.epsilon), abs=1e-12
        )


def test_tile_score_bounds():
    rng = np.random.default_rng(1)
    for _ in range(25):
        tile = random_tile(rng, k_range=(1, 3))
        x = rng.random((6, 6))
        score = tile_score(x, tile)
        placements = len(region_index(6, 6, *tile.shape))
        assert 0.0 <= score <= tile.epsilon * placements + 1e-12


def test_tile_score_pixel_bump_lipschitz():
    # a single-pixel change moves the score by at most |delta| per
    # placement whose support covers that pixel
    rng = np.random.default_rng(2)
    tile = FramedTile(rng.uniform(0.1, 1.0, (2, 2)), 0.6)
    x = rng.random((5, 5))
    for _ in range(30):
        i, j = rng.integers(0, 5, size=2)
        delta = float(rng.uniform(-0.2, 0.2))
        bumped = x.copy()
        bumped[i, j] = np.clip(bumped[i, j] + delta, 0.0, 1.0)
        applied = bumped[i, j] - x[i, j]
        covering = sum(
            1
            for (a, b) in region_index(5, 5, 2, 2)
            if a <= i < a + 2 and b <= j < b + 2
        )
        change = abs(tile_score(bumped, tile) - tile_score(x, tile))
        assert change <= abs(applied) * covering + 1e-12


def test_feature_score_is_sum_of_tile_scores():
    rng = np.random.default_rng(3)
    for _ in range(100):
        q = int(rng.integers(1, 4))
        feature = Feature(tuple(random_tile(rng, k_range=(1, 3)) for _ in range(q)))
        x = rng.random((6, 6))
        expected = sum(tile_score(x, t) for t in feature.tiles)
        assert feature_score(x, feature) == pytest.approx(expected, abs=1e-12)
    single = Feature((random_tile(rng, k_range=(1, 3)),))
    x = rng.random((6, 6))
    assert feature_score(x, single) == tile_score(x, single.tiles[0])


def test_feature_score_zero_when_all_absent():
    feature = Feature((FramedTile([[1.0]], 0.2), FramedTile([[0.9, 0.9]], 0.2)))
    assert feature_score(np.zeros((4, 4)), feature) == 0.0


def test_image_score_min_semantics():
    rng = np.random.default_rng(4)
    f_present = Feature((FramedTile([[0.9]], 0.5),))
    f_absent = Feature((FramedTile(np.ones((2, 2)), 0.05),))
    x = np.zeros((4, 4))
    x[1, 1] = 0.9
    img = ImageSpec((f_present, f_absent), "x")
    assert image_score(x, img) == 0.0  # one absent feature forces min to 0
    single = ImageSpec((f_present,), "y")
    assert image_score(x, single) == feature_score(x, f_present)
    # all present: equals the smallest feature score (brute-force min)
    tiles = [FramedTile(rng.uniform(0.2, 1.0, (1, 2)), 0.4) for _ in range(3)]
    img3 = ImageSpec(tuple(Feature((t,)) for t in tiles), "z")
    y = rng.random((5, 5))
    for t in tiles:
        oi = int(rng.integers(0, 5))
        oj = int(rng.integers(0, 4))
        y[oi : oi + 1, oj : oj + 2] = t.values
    if contains_image(y, img3):
        scores = [feature_score(y, f) for f in img3.features]
        assert image_score(y, img3) == pytest.approx(min(scores), abs=1e-12)
        assert image_score(y, img3) > 0.0


def test_image_score_sum_variant():
    f1 = Feature((FramedTile([[0.9]], 0.5),))
    f2 = Feature((FramedTile([[0.0, 0.8], [0.8, 0.0]], 0.3),))
    img = ImageSpec((f1, f2), "x")
    assert image_score_sum(np.zeros((4, 4)), ImageSpec((f1,), "y")) == image_score(
        np.zeros((4, 4)), ImageSpec((f1,), "y")
    )
    # one of two features present: min is 0 but the sum is positive
    x = np.zeros((4, 4))
    x[2, 2] = 0.9
    assert image_score(x, img) == 0.0
    assert image_score_sum(x, img) > 0.0
    # sum dominates min when everything is nonnegative
    rng = np.random.default_rng(5)
    for _ in range(20):
        y = rng.random((4, 4))
        assert image_score_sum(y, img) >= image_score(y, img) - 1e-12


def test_sign_equivalence_random_cases():
    rng = np.random.default_rng(6)
    for _ in range(50):
        tile = random_tile(rng, k_range=(1, 3))
        x = rng.random((6, 6))
        if rng.random() < 0.5:  # force some positives
            k, l = tile.shape
            oi = int(rng.integers(0, 7 - k))
            oj = int(rng.integers(0, 7 - l))
            x[oi : oi + k, oj : oj + l] = tile.values
        assert (tile_score(x, tile) > 0.0) == contains_tile(x, tile)
        feature = Feature((tile,))
        assert (feature_score(x, feature) > 0.0) == contains_feature(x, feature)
        img = ImageSpec((feature,), "t")
        assert (image_score(x, img) > 0.0) == contains_image(x, img)


def test_sign_equivalence_on_exact_boundary():
    # distances hit epsilon exactly: strictly-below membership and a zero
    # hinge agree on the boundary
    tile = FramedTile([[1.0, 0.5], [0.0, 0.25]], 0.75)
    x = np.zeros((4, 4))
    x[0, 0] = 1.0
    x[0, 1] = 0.5
    x[1, 1] = 1.0  # distance |1 - 0.25| = 0.75 == eps at placement (0, 0)
    dmap = brute_distance_map_batch(x[None], tile.values)[0]
    assert dmap[0, 0] == 0.75
    if (dmap < tile.epsilon).any():
        assert tile_score(x, tile) > 0.0
    else:
        assert tile_score(x, tile) == 0.0
        assert not contains_tile(x, tile)
