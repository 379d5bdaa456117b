"""Domain types and shared primitives: labeled embedding sets, the class-keyed
embedding store, episodic task sampling, and Euclidean distance / k-nearest-
neighbor helpers.

Everything here is immutable after construction and safe to share across
threads; all operations are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Invalid embedding data or an unsatisfiable sampling request."""


def _as_float_matrix(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"expected a 2-D matrix of vectors, got ndim={arr.ndim}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class EmbeddingSet:
    """A labeled n x d matrix of embedding vectors.

    ``labels`` keeps the original class identifiers; ``class_ids`` maps them to
    dense integers in first-occurrence order (``classes[id]`` recovers the
    original identifier).
    """

    vectors: np.ndarray
    labels: tuple[str, ...]
    class_ids: np.ndarray
    classes: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def make_embedding_set(vectors, labels) -> EmbeddingSet:
    """Validate raw vectors + labels and intern labels to dense integer ids.

    Raises DataError on ragged input, non-finite values (named by row/column)
    or a label/row count mismatch.
    """
    if isinstance(vectors, (list, tuple)):
        lengths = {len(row) for row in vectors}
        if len(lengths) > 1:
            raise DataError(f"rows have differing lengths: {sorted(lengths)}")
    arr = _as_float_matrix(vectors)
    n, d = arr.shape
    if n < 1 or d < 1:
        raise DataError(f"need at least one row and one column, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise DataError(f"{len(labels)} labels for {n} rows")
    if any(not lab for lab in labels):
        raise DataError("empty class label")
    classes: list[str] = []
    index: dict[str, int] = {}
    ids = np.empty(n, dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab not in index:
            index[lab] = len(classes)
            classes.append(lab)
        ids[i] = index[lab]
    return EmbeddingSet(_freeze(arr), labels, _freeze(ids), tuple(classes))


@dataclass(frozen=True)
class EmbeddingStore:
    """Class-keyed collection of embedding vectors with a common dimension."""

    classes: dict[str, np.ndarray]
    metadata: dict | str = ""

    def __post_init__(self):
        if not self.classes:
            raise DataError("store must contain at least one class")
        dim = None
        frozen = {}
        for label, vecs in self.classes.items():
            arr = _as_float_matrix(vecs)
            if arr.shape[0] < 1:
                raise DataError(f"class {label!r} has no vectors")
            if not np.isfinite(arr).all():
                raise DataError(f"class {label!r} contains non-finite values")
            if dim is None:
                dim = arr.shape[1]
            elif arr.shape[1] != dim:
                raise DataError(
                    f"class {label!r} has dimension {arr.shape[1]}, expected {dim}")
            frozen[str(label)] = _freeze(arr)
        object.__setattr__(self, "classes", frozen)

    @property
    def dim(self) -> int:
        return next(iter(self.classes.values())).shape[1]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.classes)

    def counts(self) -> dict[str, int]:
        return {label: arr.shape[0] for label, arr in self.classes.items()}

    def to_embedding_set(self) -> EmbeddingSet:
        """Flatten the store into one labeled set (class-grouped row order)."""
        vecs = np.concatenate(list(self.classes.values()), axis=0)
        labels = [lab for lab, arr in self.classes.items() for _ in range(arr.shape[0])]
        return make_embedding_set(vecs, labels)


@dataclass(frozen=True)
class EpisodeSpec:
    """An N-way K-shot task shape: ``way`` classes, ``shot`` support vectors and
    ``queries_per_class`` query vectors per class."""

    way: int
    shot: int
    queries_per_class: int

    def __post_init__(self):
        if self.way < 2:
            raise DataError(f"way must be >= 2, got {self.way}")
        if self.shot < 1:
            raise DataError(f"shot must be >= 1, got {self.shot}")
        if self.queries_per_class < 1:
            raise DataError(
                f"queries_per_class must be >= 1, got {self.queries_per_class}")


@dataclass(frozen=True)
class Episode:
    """One sampled task: disjoint support and query sets over the same classes."""

    support: EmbeddingSet
    query: EmbeddingSet
    spec: EpisodeSpec

    def __post_init__(self):
        spec = self.spec
        if self.support.classes != self.query.classes:
            raise DataError("support and query must share one class interning")
        if self.support.n != spec.way * spec.shot:
            raise DataError(f"support has {self.support.n} rows, "
                            f"expected {spec.way * spec.shot}")
        if self.query.n != spec.way * spec.queries_per_class:
            raise DataError(f"query has {self.query.n} rows, "
                            f"expected {spec.way * spec.queries_per_class}")
        sup_counts = np.bincount(self.support.class_ids, minlength=spec.way)
        qry_counts = np.bincount(self.query.class_ids, minlength=spec.way)
        if not (sup_counts == spec.shot).all():
            raise DataError("support must hold exactly `shot` rows per class")
        if not (qry_counts == spec.queries_per_class).all():
            raise DataError("query must hold exactly `queries_per_class` rows per class")


def sample_episode(store: EmbeddingStore, spec: EpisodeSpec, seed: int) -> Episode:
    """Draw one episode: ``way`` classes uniformly without replacement, then
    ``shot + queries_per_class`` vectors per class without replacement.

    Deterministic given (store, spec, seed); the first ``shot`` vectors of each
    class form the support set, the rest the query set.
    """
    labels = store.labels
    if len(labels) < spec.way:
        raise DataError(
            f"store has {len(labels)} classes, episode needs {spec.way}")
    rng = np.random.default_rng(seed)
    picked = [labels[i] for i in rng.choice(len(labels), size=spec.way, replace=False)]
    per_class = spec.shot + spec.queries_per_class
    sup_rows, sup_labels, qry_rows, qry_labels = [], [], [], []
    for label in picked:
        vecs = store.classes[label]
        if vecs.shape[0] < per_class:
            raise DataError(
                f"class {label!r} has {vecs.shape[0]} vectors, "
                f"episode needs {per_class}")
        idx = rng.choice(vecs.shape[0], size=per_class, replace=False)
        sup_rows.append(vecs[idx[:spec.shot]])
        qry_rows.append(vecs[idx[spec.shot:]])
        sup_labels += [label] * spec.shot
        qry_labels += [label] * spec.queries_per_class
    support = make_embedding_set(np.concatenate(sup_rows), sup_labels)
    query = make_embedding_set(np.concatenate(qry_rows), qry_labels)
    return Episode(support, query, spec)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric matrix of pairwise Euclidean distances with a zero diagonal."""

    values: np.ndarray


def euclidean_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """All-pairs Euclidean distances between rows of x and rows of y.

    Uses the explicit difference form rather than the Gram expansion so that
    translated inputs do not lose precision to cancellation.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.empty((x.shape[0], y.shape[0]))
    # chunk rows to keep the (chunk, m, d) intermediate small
    chunk = max(1, int(4e6) // max(1, y.shape[0] * y.shape[1]))
    for start in range(0, x.shape[0], chunk):
        stop = min(start + chunk, x.shape[0])
        diff = x[start:stop, None, :] - y[None, :, :]
        out[start:stop] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def pairwise_distances(x: EmbeddingSet | np.ndarray) -> DistanceMatrix:
    """Pairwise Euclidean distance matrix of a set's rows."""
    vecs = x.vectors if isinstance(x, EmbeddingSet) else _as_float_matrix(x)
    d = euclidean_distances(vecs, vecs)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(_freeze(np.maximum(d, d.T)))


@dataclass(frozen=True)
class NeighborSplit:
    """The k nearest neighbors of one point, partitioned by class agreement.

    ``same`` and ``diff`` hold (point index, distance) pairs; ``theta`` and
    ``alpha`` are the minimum and maximum distance over all k neighbors.
    """

    same: tuple[tuple[int, float], ...]
    diff: tuple[tuple[int, float], ...]
    theta: float
    alpha: float

    def __post_init__(self):
        if self.theta > self.alpha:
            raise ValueError("theta must not exceed alpha")
        for _, dist in self.same + self.diff:
            if not (self.theta <= dist <= self.alpha):
                raise ValueError("neighbor distance outside [theta, alpha]")

    @property
    def size(self) -> int:
        return len(self.same) + len(self.diff)


def knn_split(d: DistanceMatrix | np.ndarray, labels, i: int, k: int) -> NeighborSplit:
    """Split the k nearest neighbors of point ``i`` into same-class and
    different-class groups.

    Ties in distance are broken by the smaller point index, so the result is
    deterministic and independent of storage order.
    """
    values = d.values if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=np.float64)
    n = values.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    ids = np.asarray(labels)
    row = values[i].copy()
    row[i] = np.inf
    order = np.argsort(row, kind="stable")[:k]
    same, diff = [], []
    for j in order:
        pair = (int(j), float(row[j]))
        (same if ids[j] == ids[i] else diff).append(pair)
    dists = row[order]
    return NeighborSplit(tuple(same), tuple(diff),
                         float(dists.min()), float(dists.max()))
