"""Dimensionality-reduction candidates applied to one task's embeddings.

Every reducer is a deterministic fit-transform over a single point matrix.
The model is estimated from the first ``fit_row_count`` rows; any remaining
rows are mapped through the fitted model (linear projection for pca/svd,
column grouping for feature agglomeration, kernel/geodesic extension for
kernel_pca/isomap).  With ``fit_row_count == n`` the transform is purely
transductive and the extension paths are never taken.

Out-of-process reducers attach through a line-oriented stdin/stdout protocol
(see run_external); their failures are reported as ReducerFailure so a caller
can drop the candidate without aborting the task.
"""

from __future__ import annotations

import shlex
import subprocess
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse.csgraph import connected_components, csgraph_from_dense, shortest_path

from .core import euclidean_distances

RANK_EPS = 1e-10

KINDS = ("identity", "pca", "truncated_svd", "kernel_pca", "isomap",
         "feature_agglomeration", "external")


class ReducerFailure(RuntimeError):
    """A reducer could not produce output for this input (named in message)."""


@dataclass(frozen=True)
class ReducerSpec:
    """One candidate reduction: a kind, a target dimension and kind-specific
    options (rbf_gamma for kernel_pca, n_neighbors for isomap, command for
    external reducers).  "auto" options are resolved at fit time."""

    kind: str
    target_dim: int = 6
    rbf_gamma: float | str = "auto"
    n_neighbors: int | str = "auto"
    command: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reducer kind {self.kind!r}")
        if self.target_dim < 1:
            raise ValueError(f"target_dim must be >= 1, got {self.target_dim}")
        if self.rbf_gamma != "auto" and not float(self.rbf_gamma) > 0:
            raise ValueError("rbf_gamma must be positive or 'auto'")
        if self.n_neighbors != "auto" and int(self.n_neighbors) < 1:
            raise ValueError("n_neighbors must be >= 1 or 'auto'")
        if self.kind == "external" and not self.command:
            raise ValueError("external reducer needs a command")

    @property
    def name(self) -> str:
        if self.kind == "identity":
            return "identity"
        return f"{self.kind}-{self.target_dim}"

    def with_dim(self, target_dim: int) -> "ReducerSpec":
        return replace(self, target_dim=target_dim)


@dataclass(frozen=True)
class ReducedSet:
    """Reduced row matrix plus its provenance; row i corresponds to input
    row i, and the first ``fit_row_count`` rows were used for fitting."""

    vectors: np.ndarray
    origin: ReducerSpec
    fit_row_count: int


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.flags.writeable = False
    return out


def _fail(spec: ReducerSpec, message: str) -> ReducerFailure:
    return ReducerFailure(f"{spec.name}: {message}")


def _fix_component_signs(components: np.ndarray) -> np.ndarray:
    """Flip each component so its largest-magnitude entry is positive."""
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def _projection_basis(fit: np.ndarray, target_dim: int) -> np.ndarray:
    """Top right-singular vectors of ``fit`` as rows, zeroing directions whose
    singular value falls below the rank cutoff."""
    _, s, vt = np.linalg.svd(fit, full_matrices=True)
    comps = vt[:target_dim].copy()
    cut = RANK_EPS * max(1.0, float(s[0]) if s.size else 0.0)
    for j in range(target_dim):
        if j >= s.size or s[j] <= cut:
            comps[j] = 0.0
    return _fix_component_signs(comps)


def pca(x: np.ndarray, target_dim: int, n_fit: int | None = None) -> np.ndarray:
    """Project onto the leading principal axes of the (column-centered) fit
    rows, components ordered by descending variance."""
    x = np.asarray(x, dtype=np.float64)
    n_fit = x.shape[0] if n_fit is None else n_fit
    mean = x[:n_fit].mean(axis=0)
    comps = _projection_basis(x[:n_fit] - mean, target_dim)
    return (x - mean) @ comps.T


def truncated_svd(x: np.ndarray, target_dim: int, n_fit: int | None = None) -> np.ndarray:
    """As pca but without centering: leading right-singular vectors of the raw
    fit rows."""
    x = np.asarray(x, dtype=np.float64)
    n_fit = x.shape[0] if n_fit is None else n_fit
    comps = _projection_basis(x[:n_fit], target_dim)
    return x @ comps.T


def _top_eigh(sym: np.ndarray, target_dim: int):
    """Leading eigenpairs of a symmetric matrix, eigenvalues descending,
    eigenvector signs fixed, sub-cutoff eigenvalues clamped to zero."""
    evals, evecs = np.linalg.eigh(sym)
    order = np.argsort(evals, kind="stable")[::-1][:target_dim]
    lam = evals[order].copy()
    vec = _fix_component_signs(evecs[:, order].T).T
    lam[lam <= RANK_EPS] = 0.0
    return lam, vec


def _spectral_coords(lam: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Coordinates v_j * sqrt(lam_j); zero columns where lam was clamped."""
    return vec * np.sqrt(lam)[None, :]


def kernel_pca(x: np.ndarray, target_dim: int, rbf_gamma: float | str = "auto",
               n_fit: int | None = None) -> np.ndarray:
    """RBF kernel principal components of the fit rows, with the standard
    centered-kernel extension for the remaining rows."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    n_fit = n if n_fit is None else n_fit
    gamma = 1.0 / x.shape[1] if rbf_gamma == "auto" else float(rbf_gamma)
    fit = x[:n_fit]
    gram = np.exp(-gamma * euclidean_distances(fit, fit) ** 2)
    col_mean = gram.mean(axis=0)
    grand = gram.mean()
    centered = gram - col_mean[None, :] - col_mean[:, None] + grand
    lam, vec = _top_eigh(centered, target_dim)
    if (lam == 0.0).all():
        warnings.warn("kernel_pca: centered kernel is degenerate (identical rows); "
                      "output is all zeros")
    coords = np.zeros((n, target_dim))
    coords[:n_fit] = _spectral_coords(lam, vec)
    if n_fit < n:
        keep = lam > 0.0
        k_ext = np.exp(-gamma * euclidean_distances(x[n_fit:], fit) ** 2)
        k_cent = k_ext - k_ext.mean(axis=1, keepdims=True) - col_mean[None, :] + grand
        proj = np.zeros((n_fit, target_dim))
        proj[:, keep] = vec[:, keep] / np.sqrt(lam[keep])[None, :]
        coords[n_fit:] = k_cent @ proj
    return coords


def resolve_isomap_neighbors(spec_value: int | str, n_fit: int,
                             shot: int | None = None) -> int:
    """Concrete neighbor count for the isomap graph.

    "auto" means max(shot + 1, 5) when the task's shot count is known, else 5;
    either way the result is clamped to n_fit - 1.
    """
    if spec_value == "auto":
        value = max(shot + 1, 5) if shot is not None else 5
        return max(1, min(value, n_fit - 1))
    return int(spec_value)


def _knn_graph(dist: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Symmetric k-nearest-neighbor adjacency; np.inf marks absent edges."""
    n = dist.shape[0]
    adj = np.full((n, n), np.inf)
    masked = dist.copy()
    np.fill_diagonal(masked, np.inf)
    for i in range(n):
        nbrs = np.argsort(masked[i], kind="stable")[:n_neighbors]
        adj[i, nbrs] = dist[i, nbrs]
    return np.minimum(adj, adj.T)  # union of directed edges


def _n_components(adj: np.ndarray) -> int:
    count, _ = connected_components(np.isfinite(adj).astype(np.float64),
                                    directed=False)
    return count


def geodesic_distances(fit: np.ndarray, n_neighbors: int):
    """All-pairs shortest-path distances over the symmetric kNN graph.

    A disconnected graph is repaired by raising the neighbor count one step at
    a time (at n-1 neighbors the graph is complete).  Returns the geodesic
    matrix and the neighbor count actually used.
    """
    n = fit.shape[0]
    dist = euclidean_distances(fit, fit)
    nn = n_neighbors
    while True:
        adj = _knn_graph(dist, nn)
        if _n_components(adj) == 1 or nn >= n - 1:
            break
        nn += 1
    # csgraph treats 0 as "no edge"; flag genuine zero-weight edges
    # (duplicate points) with a sentinel and restore them after conversion
    zero_edges = np.isfinite(adj) & (adj == 0.0)
    np.fill_diagonal(zero_edges, False)
    dense = np.where(np.isinf(adj), 0.0, adj)
    dense[zero_edges] = -1.0
    graph = csgraph_from_dense(dense, null_value=0.0)
    graph.data[graph.data == -1.0] = 0.0
    geo = shortest_path(graph, method="D", directed=False)
    if not np.isfinite(geo).all():
        raise AssertionError("geodesic matrix not finite after connectivity repair")
    return geo, nn


def isomap(x: np.ndarray, target_dim: int, n_neighbors: int | str = "auto",
           n_fit: int | None = None, shot: int | None = None) -> np.ndarray:
    """Classical multidimensional scaling of kNN-graph geodesics.

    Remaining (non-fit) rows are placed by the standard out-of-sample rule:
    their geodesics are estimated through their nearest fit neighbors, then
    projected onto the fitted eigenbasis.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    n_fit = n if n_fit is None else n_fit
    fit = x[:n_fit]
    nn = resolve_isomap_neighbors(n_neighbors, n_fit, shot)
    if not 1 <= nn <= n_fit - 1:
        raise ValueError(f"n_neighbors must be in [1, {n_fit - 1}], got {nn}")
    geo, nn = geodesic_distances(fit, nn)
    g2 = geo ** 2
    col_mean = g2.mean(axis=0)
    centered = -0.5 * (g2 - col_mean[None, :] - col_mean[:, None] + g2.mean())
    lam, vec = _top_eigh(centered, target_dim)
    coords = np.zeros((n, target_dim))
    coords[:n_fit] = _spectral_coords(lam, vec)
    if n_fit < n:
        keep = lam > 0.0
        ext_dist = euclidean_distances(x[n_fit:], fit)
        proj = np.zeros((n_fit, target_dim))
        proj[:, keep] = vec[:, keep] / np.sqrt(lam[keep])[None, :]
        for row, dist_row in enumerate(ext_dist):
            nbrs = np.argsort(dist_row, kind="stable")[:nn]
            ghat = (dist_row[nbrs, None] + geo[nbrs, :]).min(axis=0)
            b = -0.5 * (ghat ** 2 - col_mean)
            coords[n_fit + row] = b @ proj
    return coords


def feature_agglomeration(x: np.ndarray, target_dim: int,
                          n_fit: int | None = None) -> np.ndarray:
    """Merge feature columns by average-linkage Euclidean clustering until
    ``target_dim`` groups remain; each output feature is its group's mean.

    Linkage ties are broken toward the smallest column indices, and output
    groups are ordered by their smallest member index.
    """
    x = np.asarray(x, dtype=np.float64)
    n_fit = x.shape[0] if n_fit is None else n_fit
    col_dist = euclidean_distances(x[:n_fit].T, x[:n_fit].T)
    clusters = [[j] for j in range(x.shape[1])]
    while len(clusters) > target_dim:
        best, best_pair = np.inf, None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                link = col_dist[np.ix_(clusters[i], clusters[j])].mean()
                if link < best:
                    best, best_pair = link, (i, j)
        i, j = best_pair
        clusters[i] = sorted(clusters[i] + clusters[j])
        del clusters[j]
    # clusters stay ordered by smallest member: merges keep the earlier slot
    return np.column_stack([x[:, members].mean(axis=1) for members in clusters])


def run_external(command: str, x: np.ndarray, target_dim: int, seed: int) -> np.ndarray:
    """Launch the plug-in protocol: header ``n d target_dim seed`` plus one
    line of 17-significant-digit floats per row on stdin; ``n`` lines of
    ``target_dim`` floats expected on stdout.

    Nonzero exit status or malformed output raises ReducerFailure.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    lines = [f"{n} {d} {target_dim} {seed}"]
    lines += [" ".join(format(v, ".17g") for v in row) for row in x]
    payload = "\n".join(lines) + "\n"
    try:
        proc = subprocess.run(shlex.split(command), input=payload,
                              capture_output=True, text=True)
    except OSError as exc:
        raise ReducerFailure(f"external: failed to launch {command!r}: {exc}")
    if proc.returncode != 0:
        raise ReducerFailure(f"external: {command!r} exited with "
                             f"status {proc.returncode}")
    rows = [line for line in proc.stdout.splitlines() if line.strip()]
    if len(rows) != n:
        raise ReducerFailure(f"external: expected {n} output rows, got {len(rows)}")
    out = np.empty((n, target_dim))
    for i, line in enumerate(rows):
        fields = line.split()
        if len(fields) != target_dim:
            raise ReducerFailure(f"external: row {i} has {len(fields)} fields, "
                                 f"expected {target_dim}")
        try:
            out[i] = [float(f) for f in fields]
        except ValueError as exc:
            raise ReducerFailure(f"external: row {i} unparseable: {exc}")
    if not np.isfinite(out).all():
        raise ReducerFailure("external: non-finite value in output")
    return out


def fit_transform(spec: ReducerSpec, x: np.ndarray, seed: int,
                  n_fit: int | None = None, shot: int | None = None) -> ReducedSet:
    """Apply one reducer spec to a point matrix.

    The model is fitted on ``x[:n_fit]`` (default: all rows) and applied to
    every row.  Deterministic given (spec, x, seed).  Contract violations and
    kind-specific failures raise ReducerFailure carrying the reducer name.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={x.ndim}")
    n, d = x.shape
    n_fit = n if n_fit is None else int(n_fit)
    if not 1 <= n_fit <= n:
        raise ValueError(f"n_fit must be in [1, {n}], got {n_fit}")

    if spec.kind == "identity":
        return ReducedSet(_freeze(x), spec, n_fit)

    if n_fit < 2:
        raise _fail(spec, f"needs at least 2 fit rows, got {n_fit}")
    if spec.target_dim > d:
        raise _fail(spec, f"target_dim {spec.target_dim} exceeds input dimension {d}")

    try:
        if spec.kind == "pca":
            out = pca(x, spec.target_dim, n_fit)
        elif spec.kind == "truncated_svd":
            out = truncated_svd(x, spec.target_dim, n_fit)
        elif spec.kind == "kernel_pca":
            out = kernel_pca(x, spec.target_dim, spec.rbf_gamma, n_fit)
        elif spec.kind == "isomap":
            if n_fit < spec.target_dim + 1:
                raise ValueError(f"needs at least target_dim+1={spec.target_dim + 1} "
                                 f"fit rows, got {n_fit}")
            out = isomap(x, spec.target_dim, spec.n_neighbors, n_fit, shot)
        elif spec.kind == "feature_agglomeration":
            out = feature_agglomeration(x, spec.target_dim, n_fit)
        elif spec.kind == "external":
            out = run_external(spec.command, x, spec.target_dim, seed)
            return ReducedSet(_freeze(out), spec, n)  # protocol fits on all rows
        else:  # pragma: no cover
            raise ValueError(f"unhandled kind {spec.kind}")
    except ReducerFailure:
        raise
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise _fail(spec, str(exc))
    return ReducedSet(_freeze(out), spec, n_fit)
