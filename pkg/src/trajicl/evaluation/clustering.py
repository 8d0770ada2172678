"""Lloyd's k-means over (accuracy, return) points, with quadrant naming.

Clusters the per-task failure-mode scatter into four regimes: copying
works and pays (in-context learning), competence without copying
(in-weights learning), copying without reward (unforgiving environment),
and neither (distributional drift).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

QUADRANT_NAMES = {
    (True, True): "in_context_learning",
    (False, True): "in_weights_learning",
    (True, False): "unforgiving_environment",
    (False, False): "distributional_drift",
}


def quadrant_name(acc: float, ret: float, threshold: float = 0.5) -> str:
    return QUADRANT_NAMES[(acc >= threshold, ret >= threshold)]


@dataclass
class QuadrantClustering:
    labels: np.ndarray        # cluster index per input point
    centroids: np.ndarray     # (k, 2) in normalized coordinates
    names: list[str]          # quadrant name per cluster
    k: int                    # effective cluster count


def _minmax_normalize(points: np.ndarray) -> np.ndarray:
    out = np.empty_like(points, dtype=np.float64)
    for axis in range(points.shape[1]):
        lo, hi = points[:, axis].min(), points[:, axis].max()
        out[:, axis] = 0.5 if hi == lo else (points[:, axis] - lo) / (hi - lo)
    return out


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = [x[int(rng.integers(n))]]
    for _ in range(k - 1):
        d2 = np.min([((x - c) ** 2).sum(axis=1) for c in centroids], axis=0)
        total = d2.sum()
        if total == 0:
            centroids.append(x[int(rng.integers(n))])
            continue
        probs = d2 / total
        centroids.append(x[int(rng.choice(n, p=probs))])
    return np.array(centroids)


def kmeans_quadrants(
    points,
    k: int = 4,
    rng: np.random.Generator | None = None,
    max_iter: int = 1000,
    tol: float = 1e-6,
) -> QuadrantClustering:
    """Cluster (accuracy, return) pairs and name each cluster by its quadrant.

    Features are min-max normalized to the unit square first; quadrant
    names compare centroids against 0.5 on each normalized axis. If the
    points have fewer than k distinct values, k is reduced with a warning.
    """
    x_raw = np.asarray(points, dtype=np.float64)
    if x_raw.ndim != 2 or x_raw.shape[1] != 2:
        raise ValueError(f"points must be (n, 2) accuracy/return pairs, got {x_raw.shape}")
    n = x_raw.shape[0]
    if n == 0:
        raise ValueError("no points to cluster")
    rng = rng or np.random.default_rng(0)

    x = _minmax_normalize(x_raw)
    n_distinct = len({tuple(p) for p in x})
    k_eff = min(k, n_distinct)
    if k_eff < k:
        log.warning("reducing k from %d to %d (only %d distinct points)", k, k_eff, n_distinct)
    if n < k_eff:
        raise ValueError(f"need at least k={k_eff} points, got {n}")

    centroids = _kmeans_pp_init(x, k_eff, rng)
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new_centroids = centroids.copy()
        for c in range(k_eff):
            members = x[labels == c]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
            else:  # re-seed an empty cluster at the point farthest from its centroid
                far = int(d2.min(axis=1).argmax())
                new_centroids[c] = x[far]
        shift = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        if shift < tol:
            break

    names = [quadrant_name(cx, cy) for cx, cy in centroids]
    return QuadrantClustering(labels=labels, centroids=centroids, names=names, k=k_eff)
