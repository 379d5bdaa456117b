"""Inter/intra-class nearest-neighbor (ICNN) separability score.

A labeled set scores high when, for each point, different-class neighbors are
far, same-class neighbors are near, neighbor distances have low variance, and
most neighbors share the point's class.  The per-point terms are combined as

    score = mean_i  lam_i^(1/p) * om_i^(1/q) * gam_i^(1/r)

with the three factors produced by the scoring kernel (see per_point_terms).

Two interchangeable kernels exist: a compiled Cython extension and a NumPy
fallback.  Selection happens at import; set FEWSHOT_ICNN_BACKEND=python or
=compiled to force one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _score_py
from .core import EmbeddingSet, NeighborSplit

try:
    from . import _score_cy
except ImportError:
    _score_cy = None

DEGENERATE_SPREAD_EPS = _score_py.DEGENERATE_SPREAD_EPS

_FORCED = os.environ.get("FEWSHOT_ICNN_BACKEND", "auto").lower()
if _FORCED not in ("auto", "python", "compiled"):
    raise RuntimeError(f"FEWSHOT_ICNN_BACKEND must be auto, python or compiled, "
                       f"got {_FORCED!r}")
if _FORCED == "compiled" and _score_cy is None:
    raise RuntimeError("FEWSHOT_ICNN_BACKEND=compiled but the extension is not built")

_KERNEL = _score_py if (_FORCED == "python" or _score_cy is None) else _score_cy


def backend_name() -> str:
    """Name of the kernel in use: 'compiled' or 'python'."""
    return "python" if _KERNEL is _score_py else "compiled"


ONE_SHOT_RULES = ("drop_gamma", "zero_score")


@dataclass(frozen=True)
class IcnnParams:
    """Scoring knobs: neighbor count k and the control exponents p, q, r.

    ``one_shot_rule`` decides what happens when no point in the set has a
    same-class peer (every class a singleton): ``drop_gamma`` treats the
    class-ratio factor as 1, ``zero_score`` returns 0.
    ``degenerate_spread_value`` replaces normalized distances when a neighbor
    set has zero spread.
    """

    k: int
    p: float = 2.0
    q: float = 2.0
    r: float = 2.0
    one_shot_rule: str = "drop_gamma"
    degenerate_spread_value: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        for name in ("p", "q", "r"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.one_shot_rule not in ONE_SHOT_RULES:
            raise ValueError(f"one_shot_rule must be one of {ONE_SHOT_RULES}, "
                             f"got {self.one_shot_rule!r}")
        if not 0.0 <= self.degenerate_spread_value <= 1.0:
            raise ValueError("degenerate_spread_value must be in [0, 1]")


def _normalized(split: NeighborSplit, degenerate_spread_value: float):
    """Normalized distances for the same/diff groups of one neighbor split."""
    spread = split.alpha - split.theta
    if spread < DEGENERATE_SPREAD_EPS:
        same = [degenerate_spread_value] * len(split.same)
        diff = [degenerate_spread_value] * len(split.diff)
    else:
        same = [(d - split.theta) / spread for _, d in split.same]
        diff = [(d - split.theta) / spread for _, d in split.diff]
    return same, diff


def _pvar(values) -> float:
    """Population variance; 0 for fewer than two values."""
    if len(values) < 2:
        return 0.0
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values) / len(values)


def lambda_score(split: NeighborSplit, degenerate_spread_value: float = 0.5) -> float:
    """Mean reward over the k neighbors: far different-class neighbors and
    near same-class neighbors both count toward 1."""
    if split.size == 0:
        raise ValueError("empty neighbor split")
    same, diff = _normalized(split, degenerate_spread_value)
    total = sum(diff) + sum(1.0 - t for t in same)
    return total / split.size


def omega_score(split: NeighborSplit, degenerate_spread_value: float = 0.5) -> float:
    """One minus the summed variances of the two term collections; spread-out
    neighbor distances are penalized."""
    if split.size == 0:
        raise ValueError("empty neighbor split")
    same, diff = _normalized(split, degenerate_spread_value)
    return 1.0 - (_pvar(diff) + _pvar([1.0 - t for t in same]))


def gamma_score(split: NeighborSplit) -> float:
    """Fraction of the k neighbors that share the point's class."""
    if split.size == 0:
        raise ValueError("empty neighbor split")
    return len(split.same) / split.size


def per_point_terms(vectors: np.ndarray, class_ids: np.ndarray, k: int,
                    degenerate_spread_value: float = 0.5):
    """(lam, om, gam) arrays for every point, via the selected kernel."""
    return _KERNEL.per_point_terms(np.asarray(vectors, dtype=np.float64),
                                   np.asarray(class_ids, dtype=np.int64),
                                   int(k), float(degenerate_spread_value))


def icnn_score_arrays(vectors: np.ndarray, class_ids: np.ndarray,
                      params: IcnnParams) -> float:
    """ICNN score of raw (vectors, dense class ids) without re-interning."""
    ids = np.asarray(class_ids, dtype=np.int64)
    n = ids.shape[0]
    n_classes = len(np.unique(ids))
    if n_classes < 2:
        raise ValueError("scoring needs at least two distinct classes")
    if params.k > n - 1:
        raise ValueError(f"k={params.k} out of range for {n} points")
    all_singletons = n_classes == n
    if all_singletons and params.one_shot_rule == "zero_score":
        return 0.0
    lam, om, gam = per_point_terms(vectors, ids, params.k,
                                   params.degenerate_spread_value)
    if all_singletons:
        # no same-class peers exist anywhere: class-ratio carries no signal
        gam = np.ones_like(gam)
    terms = (lam ** (1.0 / params.p)) * (om ** (1.0 / params.q)) \
        * (gam ** (1.0 / params.r))
    return float(terms.mean())


def icnn_score(x: EmbeddingSet, params: IcnnParams) -> float:
    """ICNN separability score of a labeled embedding set, in [0, 1]."""
    return icnn_score_arrays(x.vectors, x.class_ids, params)
