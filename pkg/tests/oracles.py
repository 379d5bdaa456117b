"""Independent reference implementations used only by the tests.

Everything here is deliberately written with different machinery than the
package (pure-Python loops, statistics.pvariance, power iteration,
Floyd-Warshall) so that agreement is evidence, not tautology.
"""

from __future__ import annotations

import math
import statistics

import numpy as np

DEG_EPS = 1e-12


def brute_icnn_terms(points, labels, k, degenerate_spread_value=0.5):
    """Per-point (lambda, omega, gamma) via plain lists and sorting."""
    pts = [tuple(float(v) for v in row) for row in points]
    labs = list(labels)
    n = len(pts)
    lam, om, gam = [], [], []
    for i in range(n):
        cand = []
        for j in range(n):
            if j == i:
                continue
            cand.append((math.dist(pts[i], pts[j]), j))
        cand.sort(key=lambda pair: (pair[0], pair[1]))
        nbrs = cand[:k]
        dists = [d for d, _ in nbrs]
        theta, alpha = min(dists), max(dists)

        def norm(d):
            if alpha - theta < DEG_EPS:
                return degenerate_spread_value
            return (d - theta) / (alpha - theta)

        same = [norm(d) for d, j in nbrs if labs[j] == labs[i]]
        diff = [norm(d) for d, j in nbrs if labs[j] != labs[i]]
        lam.append((sum(diff) + sum(1.0 - t for t in same)) / k)
        var_d = statistics.pvariance(diff) if len(diff) >= 2 else 0.0
        var_s = statistics.pvariance([1.0 - t for t in same]) if len(same) >= 2 else 0.0
        om.append(1.0 - (var_d + var_s))
        gam.append(len(same) / k)
    return lam, om, gam


def brute_icnn_score(points, labels, k, p=2.0, q=2.0, r=2.0,
                     one_shot_rule="drop_gamma", degenerate_spread_value=0.5):
    labs = list(labels)
    lam, om, gam = brute_icnn_terms(points, labs, k, degenerate_spread_value)
    counts = {}
    for lab in labs:
        counts[lab] = counts.get(lab, 0) + 1
    if all(c == 1 for c in counts.values()):
        if one_shot_rule == "zero_score":
            return 0.0
        gam = [1.0] * len(lam)
    total = 0.0
    for l, o, g in zip(lam, om, gam):
        total += l ** (1.0 / p) * o ** (1.0 / q) * g ** (1.0 / r)
    return total / len(lam)


def power_eigh(sym, count, tol=1e-13, max_iter=50000, seed=1234):
    """Leading eigenpairs of a symmetric matrix by shifted power iteration
    with deflation.  The Frobenius-norm shift makes the iteration track the
    algebraically largest eigenvalue even for indefinite matrices."""
    a = np.array(sym, dtype=np.float64)
    n = a.shape[0]
    shift = float(np.linalg.norm(a)) + 1.0
    work = a + shift * np.eye(n)
    rng = np.random.default_rng(seed)
    vals, vecs = [], []
    for _ in range(count):
        v = rng.normal(size=n)
        v /= math.sqrt(float(v @ v))
        for _ in range(max_iter):
            w = work @ v
            norm = math.sqrt(float(w @ w))
            if norm < 1e-300:
                break
            w /= norm
            if float(np.abs(w - v).max()) < tol or float(np.abs(w + v).max()) < tol:
                v = w
                break
            v = w
        lam = float(v @ work @ v) - shift
        vals.append(lam)
        vecs.append(v.copy())
        work -= (lam + shift) * np.outer(v, v)
    return np.array(vals), np.column_stack(vecs)


def principal_angle(basis_a, basis_b) -> float:
    """Largest principal angle (radians) between two column-span subspaces."""
    qa, _ = np.linalg.qr(np.asarray(basis_a, dtype=np.float64))
    qb, _ = np.linalg.qr(np.asarray(basis_b, dtype=np.float64))
    sv = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.arccos(np.clip(sv.min(), -1.0, 1.0)))


def floyd_warshall(adjacency) -> np.ndarray:
    """All-pairs shortest paths; np.inf marks absent edges."""
    d = np.array(adjacency, dtype=np.float64)
    np.fill_diagonal(d, 0.0)
    n = d.shape[0]
    for mid in range(n):
        d = np.minimum(d, d[:, mid][:, None] + d[mid, :][None, :])
    return d


def average_linkage_clusters(column_points, target):
    """Exhaustive average-linkage agglomeration of rows of column_points.

    Returns the final clusters as tuples of member indices, ordered by their
    smallest member; ties broken toward the earliest pair in list order.
    """
    pts = [tuple(float(v) for v in row) for row in column_points]
    dist = [[math.dist(a, b) for b in pts] for a in pts]
    clusters = [(j,) for j in range(len(pts))]
    while len(clusters) > target:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                total = 0.0
                for i in clusters[a]:
                    for j in clusters[b]:
                        total += dist[i][j]
                link = total / (len(clusters[a]) * len(clusters[b]))
                if best is None or link < best[0]:
                    best = (link, a, b)
        _, a, b = best
        merged = tuple(sorted(clusters[a] + clusters[b]))
        clusters = clusters[:a] + [merged] + clusters[a + 1:b] + clusters[b + 1:]
    return clusters


def nearest_centroid_predictions(support, support_ids, queries, way):
    """Brute-force nearest-centroid labels, ties toward the smaller class id."""
    centroids = []
    for c in range(way):
        rows = [row for row, cid in zip(support, support_ids) if cid == c]
        centroids.append([sum(col) / len(rows) for col in zip(*rows)])
    out = []
    for qrow in queries:
        best, best_d = 0, None
        for c, cen in enumerate(centroids):
            d = math.dist(qrow, cen)
            if best_d is None or d < best_d:
                best, best_d = c, d
        out.append(best)
    return out
