"""Shared test utilities.

The naive_* / brute_* functions are deliberately plain loops over the
definitions, independent of the library's vectorized paths; tests pin
the fast implementations against them.
"""

from __future__ import annotations

import numpy as np

from tilenet import Feature, FramedTile, ImageClassSpec, ImageSpec


def naive_conv2d(x, w):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    kh, kw = w.shape
    m, n = x.shape
    out = np.zeros((m - kh + 1, n - kw + 1))
    for a in range(m - kh + 1):
        for b in range(n - kw + 1):
            s = 0.0
            for u in range(kh):
                for v in range(kw):
                    s += w[u, v] * x[a + u, b + v]
            out[a, b] = s
    return out


def naive_support(values):
    values = np.asarray(values, dtype=float)
    out = set()
    for i in range(values.shape[0]):
        for j in range(values.shape[1]):
            if values[i, j] != 0.0:
                out.add((i + 1, j + 1))
    return out


def naive_distance(tile_values, patch):
    tile_values = np.asarray(tile_values, dtype=float)
    patch = np.asarray(patch, dtype=float)
    total = 0.0
    for i in range(tile_values.shape[0]):
        for j in range(tile_values.shape[1]):
            if tile_values[i, j] != 0.0:
                total += abs(patch[i, j] - tile_values[i, j])
    return total


def naive_contains(x, tile_values, eps):
    x = np.asarray(x, dtype=float)
    k, l = np.asarray(tile_values).shape
    m, n = x.shape
    for i in range(m - k + 1):
        for j in range(n - l + 1):
            if naive_distance(tile_values, x[i : i + k, j : j + l]) < eps:
                return True
    return False


def naive_tile_score(x, tile_values, eps):
    x = np.asarray(x, dtype=float)
    k, l = np.asarray(tile_values).shape
    m, n = x.shape
    total = 0.0
    for i in range(m - k + 1):
        for j in range(n - l + 1):
            total += max(0.0, eps - naive_distance(tile_values, x[i : i + k, j : j + l]))
    return total


def brute_distance_map_batch(xs, tile_values):
    """Distance at every placement for a (S, m, n) batch.

    Placements and support cells iterate in plain Python; only the batch
    axis is vectorized, keeping the path independent of the library's
    sliding-window implementation.
    """
    xs = np.asarray(xs, dtype=float)
    tile_values = np.asarray(tile_values, dtype=float)
    S, m, n = xs.shape
    k, l = tile_values.shape
    out = np.zeros((S, m - k + 1, n - l + 1))
    for i in range(m - k + 1):
        for j in range(n - l + 1):
            d = np.zeros(S)
            for u in range(k):
                for v in range(l):
                    t = tile_values[u, v]
                    if t != 0.0:
                        d += np.abs(xs[:, i + u, j + v] - t)
            out[:, i, j] = d
    return out


# ---------------------------------------------------------------------------
# Random spec builders
# ---------------------------------------------------------------------------


def random_tile(rng, k_range=(1, 6), density=(0.3, 1.0), eps_range=(0.1, 1.0),
                min_support=1, scale_eps=False):
    """A framed tile with all-distinct support values.

    scale_eps caps the tolerance at 0.05 * support size, which keeps
    accidental matches against random backgrounds rare enough for
    rejection sampling to stay cheap.
    """
    while True:
        k = int(rng.integers(k_range[0], k_range[1] + 1))
        l = int(rng.integers(k_range[0], k_range[1] + 1))
        dens = rng.uniform(*density)
        mask = rng.random((k, l)) < dens
        if mask.sum() >= max(min_support, 1):
            break
    values = np.zeros((k, l))
    while True:
        draws = rng.uniform(0.05, 1.0, int(mask.sum()))
        if np.unique(draws).size == draws.size:
            break
    values[mask] = draws
    eps_hi = eps_range[1]
    if scale_eps:
        eps_hi = max(eps_range[0], min(eps_hi, 0.05 * mask.sum()))
    eps = rng.uniform(eps_range[0], eps_hi)
    return FramedTile(values, eps)


def random_feature(rng, q, **tile_kwargs):
    return Feature(tuple(random_tile(rng, **tile_kwargs) for _ in range(q)))


def random_spec(rng, canvas=(16, 16), num_classes=(2, 4), r_range=(1, 3),
                q_range=(1, 3), k_range=(2, 5), min_support=4):
    """A randomized class spec sized for cheap rejection sampling."""
    classes = int(rng.integers(num_classes[0], num_classes[1] + 1))
    images = []
    for c in range(classes):
        r = int(rng.integers(r_range[0], r_range[1] + 1))
        features = tuple(
            random_feature(
                rng,
                int(rng.integers(q_range[0], q_range[1] + 1)),
                k_range=k_range,
                density=(0.4, 1.0),
                eps_range=(0.1, 0.5),
                min_support=min_support,
                scale_eps=True,
            )
            for _ in range(r)
        )
        images.append(ImageSpec(features, f"class{c}"))
    return ImageClassSpec(canvas, tuple(images))


def two_class_spec(canvas=(8, 8)):
    """Small deterministic spec reused across CLI and format tests."""
    cross = FramedTile([[0.0, 1.0, 0.0], [1.0, 0.7, 1.0], [0.0, 0.9, 0.0]], 0.3)
    bar = FramedTile([[0.8, 0.85, 0.95, 0.9]], 0.25)
    corner = FramedTile([[0.6, 0.0], [0.0, 0.75]], 0.2)
    return ImageClassSpec(
        canvas,
        (
            ImageSpec((Feature((cross,)),), "cross"),
            ImageSpec((Feature((bar, corner)),), "bar"),
        ),
    )


def spec_document(spec):
    """Spec as a plain JSON-ready document (for writing CLI fixtures)."""
    from tilenet import spec_to_data

    return spec_to_data(spec)
