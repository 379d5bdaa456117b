"""Pure NumPy scoring kernel: per-point neighbor-quality terms.

This is the fallback backend; ``fewshot_icnn._score_cy`` is the compiled
equivalent.  Both must produce the same numbers for the same input (up to
floating-point reassociation), so any semantic change here has to be mirrored
in the Cython source.
"""

from __future__ import annotations

import numpy as np

from .core import euclidean_distances

DEGENERATE_SPREAD_EPS = 1e-12


def per_point_terms(vectors: np.ndarray, class_ids: np.ndarray, k: int,
                    degenerate_spread_value: float = 0.5):
    """Distance-quality, spread-penalty and same-class-ratio terms per point.

    For every point: take its k nearest neighbors (ties by smaller index),
    normalize their distances to [0, 1] over the neighbor set's [min, max]
    range, and return three length-n arrays:

    * ``lam`` - mean of normalized distance for different-class neighbors and
      of one-minus-normalized distance for same-class neighbors,
    * ``om``  - one minus the summed population variances of those two term
      collections,
    * ``gam`` - fraction of the k neighbors sharing the point's class.

    A neighbor set whose min and max distance coincide (spread below 1e-12)
    carries no ordering information; every normalized distance is then set to
    ``degenerate_spread_value``.
    """
    x = np.ascontiguousarray(vectors, dtype=np.float64)
    ids = np.asarray(class_ids, dtype=np.int64)
    n = x.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")

    dist = euclidean_distances(x, x)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    ndist = np.take_along_axis(dist, order, axis=1)          # ascending per row
    theta = ndist[:, 0]
    alpha = ndist[:, -1]
    spread = alpha - theta
    degenerate = spread < DEGENERATE_SPREAD_EPS
    safe = np.where(degenerate, 1.0, spread)
    t = (ndist - theta[:, None]) / safe[:, None]
    t[degenerate] = degenerate_spread_value

    same = ids[order] == ids[:, None]
    terms = np.where(same, 1.0 - t, t)
    lam = _row_sum(terms) / k
    gam = same.mean(axis=1)
    om = 1.0 - (_masked_pvar(t, ~same) + _masked_pvar(1.0 - t, same))
    return lam, om, gam


def _row_sum(values: np.ndarray) -> np.ndarray:
    """Row sums accumulated strictly left to right.

    numpy's axis reductions switch to pairwise summation above 8 elements;
    the compiled kernel accumulates sequentially, so matching its order here
    is what keeps the two backends bit-identical at every k.
    """
    acc = values[:, 0].copy()
    for m in range(1, values.shape[1]):
        acc += values[:, m]
    return acc


def _masked_pvar(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise population variance of the masked entries (0 for counts < 2).

    Masked-out entries contribute an exact 0.0 to the left-to-right sums,
    which leaves the accumulator bits unchanged.
    """
    cnt = mask.sum(axis=1)
    denom = np.maximum(cnt, 1)
    mean = _row_sum(values * mask) / denom
    dev = (values - mean[:, None]) ** 2
    var = _row_sum(dev * mask) / denom
    return np.where(cnt >= 2, np.maximum(var, 0.0), 0.0)
