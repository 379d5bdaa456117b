"""Synthetic embeddings with controlled class geometry.

Two generators: a full store with Gaussian classes whose centers sit at a
chosen mutual distance (for end-to-end evaluation), and small fixed 2-D
scenarios at three separation levels (for studying how the separability score
responds to cluster overlap).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EmbeddingSet, EmbeddingStore, make_embedding_set

SEPARATION_LEVELS = {"low": 1.0, "mid": 3.0, "high": 8.0}


@dataclass(frozen=True)
class SynthSpec:
    """Gaussian class clusters in informative dims plus isotropic noise dims.

    class_separation is the pairwise center distance in units of the
    within-class per-dimension RMS standard deviation, so separation keeps
    its meaning as noise_dims or noise_scale grow.
    """

    classes: int
    vectors_per_class: int
    informative_dims: int
    noise_dims: int = 0
    class_separation: float = 3.0
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.classes < 1 or self.vectors_per_class < 1:
            raise ValueError("classes and vectors_per_class must be >= 1")
        if self.informative_dims < 0 or self.noise_dims < 0:
            raise ValueError("dimension counts must be >= 0")
        if self.informative_dims + self.noise_dims < 1:
            raise ValueError("need at least one dimension")
        if self.class_separation < 0 or self.noise_scale < 0:
            raise ValueError("class_separation and noise_scale must be >= 0")
        if self.classes > 1 and self.class_separation > 0 \
                and self.informative_dims < self.classes - 1:
            raise ValueError(
                f"{self.classes} equidistant centers need at least "
                f"{self.classes - 1} informative dims, got {self.informative_dims}")

    @property
    def dim(self) -> int:
        return self.informative_dims + self.noise_dims

    @property
    def sigma_unit(self) -> float:
        """Within-class per-dimension RMS std (1 in informative dims,
        noise_scale in noise dims)."""
        di, dn = self.informative_dims, self.noise_dims
        return float(np.sqrt((di + dn * self.noise_scale ** 2) / (di + dn)))


def _equidistant_centers(count: int, dim: int, spacing: float) -> np.ndarray:
    """count points in R^dim with all pairwise distances equal to spacing.

    Mutually orthogonal axes when they fit (count <= dim), else the regular
    simplex (count == dim + 1).
    """
    if count == 1 or spacing == 0.0:
        return np.zeros((count, dim))
    centers = np.zeros((count, dim))
    if count <= dim:
        for c in range(count):
            centers[c, c] = spacing / np.sqrt(2.0)
        return centers
    # regular simplex: centered identity has pairwise row distance sqrt(2);
    # an SVD embeds its rows isometrically into count-1 coordinates
    m = np.eye(count) - 1.0 / count
    u, s, _ = np.linalg.svd(m)
    coords = u[:, :count - 1] * s[:count - 1]
    centers[:, :count - 1] = coords * (spacing / np.sqrt(2.0))
    return centers


def generate_store(spec: SynthSpec) -> EmbeddingStore:
    """Sample the store described by spec; deterministic in spec.seed.

    Every class contributes vectors_per_class rows: its center plus unit
    Gaussian noise in the informative dims and noise_scale times Gaussian
    noise in the noise dims.
    """
    rng = np.random.default_rng(spec.seed)
    di, dn = spec.informative_dims, spec.noise_dims
    spacing = spec.class_separation * spec.sigma_unit
    centers = np.zeros((spec.classes, spec.dim))
    centers[:, :di] = _equidistant_centers(spec.classes, di, spacing) if di else 0.0
    width = max(2, len(str(spec.classes - 1)))
    classes = {}
    for c in range(spec.classes):
        block = rng.normal(size=(spec.vectors_per_class, spec.dim))
        block[:, di:] *= spec.noise_scale
        classes[f"class{c:0{width}d}"] = centers[c] + block
    metadata = {"generator": "synth", "classes": spec.classes,
                "vectors_per_class": spec.vectors_per_class,
                "informative_dims": di, "noise_dims": dn,
                "class_separation": spec.class_separation,
                "noise_scale": spec.noise_scale, "seed": spec.seed}
    return EmbeddingStore(classes, metadata)


def separability_scenarios(level: str, way: int, shot: int, seed: int) -> EmbeddingSet:
    """Fixed 2-D scenario: way unit-Gaussian clusters on a regular polygon
    whose side is {1, 3, 8} standard deviations for {low, mid, high}.

    Each class holds shot + 15 points.  The noise draw depends only on
    (way, shot, seed), not on the level, so comparing levels at one seed
    varies separation alone.
    """
    if level not in SEPARATION_LEVELS:
        raise ValueError(f"level must be one of {tuple(SEPARATION_LEVELS)}, "
                         f"got {level!r}")
    if way < 2 or shot < 1:
        raise ValueError("need way >= 2 and shot >= 1")
    side = SEPARATION_LEVELS[level]
    radius = side / (2.0 * np.sin(np.pi / way))
    angles = 2.0 * np.pi * np.arange(way) / way
    centers = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    per_class = shot + 15
    rng = np.random.default_rng([way, shot, seed])
    offsets = rng.normal(size=(way, per_class, 2))
    vectors = (centers[:, None, :] + offsets).reshape(-1, 2)
    labels = [f"class{c:02d}" for c in range(way) for _ in range(per_class)]
    return make_embedding_set(vectors, labels)
