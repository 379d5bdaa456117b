"""Per-task reducer selection and episodic evaluation.

For each episode the pipeline builds one candidate per (reducer kind, target
dim) pair plus the untouched features, scores every candidate's reduced
embedding by nearest-neighbor class separability, keeps the best scoring one,
and classifies queries by nearest class prototype in that space.  Evaluation
repeats this over independently seeded episodes and aggregates accuracy with a
95% confidence interval.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DataError, EmbeddingStore, Episode, EpisodeSpec, euclidean_distances, sample_episode
from .icnn import ONE_SHOT_RULES, IcnnParams, icnn_score_arrays
from .reducers import ReducedSet, ReducerFailure, ReducerSpec, fit_transform

FIT_SETS = ("support_only", "support_and_query")
SCORE_SETS = ("support_only", "support_and_query_labels")

WORKER_ENV_VAR = "FEWSHOT_ICNN_MAX_WORKERS"


@dataclass(frozen=True)
class IcnnConfig:
    """Scoring parameters with a deferred neighbor count.

    k = "auto" resolves per episode: the shot count when shot >= 2, else 3,
    clamped to one less than the scoring-set size.
    """

    k: int | str = "auto"
    p: float = 2.0
    q: float = 2.0
    r: float = 2.0
    one_shot_rule: str = "drop_gamma"
    degenerate_spread_value: float = 0.5

    def __post_init__(self):
        if self.k != "auto" and int(self.k) < 1:
            raise ValueError(f"k must be >= 1 or 'auto', got {self.k}")
        if self.one_shot_rule not in ONE_SHOT_RULES:
            raise ValueError(f"one_shot_rule must be one of {ONE_SHOT_RULES}")

    def resolve(self, shot: int, scoring_rows: int) -> IcnnParams:
        k = int(self.k) if self.k != "auto" else (shot if shot >= 2 else 3)
        k = min(k, scoring_rows - 1)
        return IcnnParams(k=k, p=self.p, q=self.q, r=self.r,
                          one_shot_rule=self.one_shot_rule,
                          degenerate_spread_value=self.degenerate_spread_value)


def default_pool() -> tuple[ReducerSpec, ...]:
    return (ReducerSpec("pca"), ReducerSpec("isomap"))


@dataclass(frozen=True)
class PipelineConfig:
    """Everything that determines an evaluation run besides the data.

    The pool lists candidate reducer kinds; the untouched features are always
    candidate number one and need not be listed.  dims is crossed with the
    pool, so pool {pca, isomap} with dims {4, 8} yields five candidates.
    """

    pool: tuple[ReducerSpec, ...] = field(default_factory=default_pool)
    dims: tuple[int, ...] = (6,)
    fit_set: str = "support_and_query"
    score_set: str = "support_only"
    icnn: IcnnConfig = field(default_factory=IcnnConfig)
    episodes: int = 1000
    seed: int = 0
    workers: int | str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "pool",
                           tuple(s for s in self.pool if s.kind != "identity"))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims:
            raise ValueError("dims must be nonempty")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be positive, got {self.dims}")
        if self.fit_set not in FIT_SETS:
            raise ValueError(f"fit_set must be one of {FIT_SETS}, got {self.fit_set!r}")
        if self.score_set not in SCORE_SETS:
            raise ValueError(f"score_set must be one of {SCORE_SETS}, "
                             f"got {self.score_set!r}")
        if self.episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {self.episodes}")
        if self.workers != "auto" and int(self.workers) < 1:
            raise ValueError(f"workers must be >= 1 or 'auto', got {self.workers}")

    @property
    def diagnostic(self) -> bool:
        """True when scoring peeks at query labels (not honest inference)."""
        return self.score_set == "support_and_query_labels"


@dataclass(frozen=True)
class ReducedCandidate:
    spec: ReducerSpec
    support_reduced: np.ndarray | None
    query_reduced: np.ndarray | None
    score: float | None
    failed: bool = False
    reason: str = ""

    @property
    def name(self) -> str:
        return self.spec.name


def candidate_specs(config: PipelineConfig) -> list[ReducerSpec]:
    """Identity first, then each pool kind at each target dim (kind-major)."""
    specs = [ReducerSpec("identity")]
    for spec in config.pool:
        specs += [spec.with_dim(dim) for dim in config.dims]
    return specs


def build_candidates(episode: Episode, config: PipelineConfig,
                     seed: int) -> list[ReducedCandidate]:
    """Fit-transform and score every candidate for one episode.

    Rows are stacked support first, then query; the fit set is either the
    support prefix or all rows.  Scoring uses support labels only unless the
    diagnostic score set also reveals query ground truth.  A failing reducer
    becomes a failed candidate (with a warning), never an abort.
    """
    n_sup = episode.support.n
    rows = np.vstack([episode.support.vectors, episode.query.vectors])
    n_fit = n_sup if config.fit_set == "support_only" else rows.shape[0]
    if config.score_set == "support_only":
        score_rows, score_ids = slice(0, n_sup), episode.support.class_ids
    else:
        score_rows = slice(0, rows.shape[0])
        score_ids = np.concatenate([episode.support.class_ids,
                                    episode.query.class_ids])
    params = config.icnn.resolve(episode.spec.shot, score_ids.size)

    out = []
    for spec in candidate_specs(config):
        try:
            reduced: ReducedSet = fit_transform(spec, rows, seed, n_fit=n_fit,
                                                shot=episode.spec.shot)
            if not np.isfinite(reduced.vectors).all():
                raise ReducerFailure(f"{spec.name}: non-finite reduced output")
            score = icnn_score_arrays(reduced.vectors[score_rows], score_ids, params)
        except ReducerFailure as exc:
            warnings.warn(f"candidate dropped: {exc}")
            out.append(ReducedCandidate(spec, None, None, None,
                                        failed=True, reason=str(exc)))
            continue
        out.append(ReducedCandidate(spec, reduced.vectors[:n_sup],
                                    reduced.vectors[n_sup:], float(score)))
    return out


def select_best(candidates: Sequence[ReducedCandidate]) -> ReducedCandidate:
    """Highest score wins; ties keep the earliest candidate, so the untouched
    features are never displaced by an equally scoring reduction."""
    best = None
    for cand in candidates:
        if cand.failed:
            continue
        if best is None or cand.score > best.score:
            best = cand
    if best is None:
        raise AssertionError("all candidates failed; identity cannot fail")
    return best


def prototypes(support_reduced: np.ndarray, class_ids: np.ndarray,
               way: int) -> np.ndarray:
    """Per-class mean of the support rows, one row per class id 0..way-1."""
    protos = np.empty((way, support_reduced.shape[1]))
    for c in range(way):
        mask = class_ids == c
        if not mask.any():
            raise DataError(f"class {c} has no support rows")
        protos[c] = support_reduced[mask].mean(axis=0)
    return protos


def classify(query_reduced: np.ndarray, protos: np.ndarray) -> np.ndarray:
    """Nearest-prototype label for each query; distance ties go to the
    smaller class id."""
    dist = euclidean_distances(query_reduced, protos)
    return np.argmin(dist, axis=1)


@dataclass(frozen=True)
class EpisodeResult:
    accuracy: float
    chosen: str
    score: float


def run_episode(episode: Episode, config: PipelineConfig, seed: int) -> EpisodeResult:
    candidates = build_candidates(episode, config, seed)
    best = select_best(candidates)
    protos = prototypes(best.support_reduced, episode.support.class_ids,
                        episode.spec.way)
    predicted = classify(best.query_reduced, protos)
    accuracy = float(np.mean(predicted == episode.query.class_ids))
    return EpisodeResult(accuracy, best.name, best.score)


@dataclass(frozen=True)
class EpisodeRecord:
    index: int
    seed: int
    accuracy: float
    chosen: str
    score: float


@dataclass(frozen=True)
class EvalReport:
    per_episode_accuracy: tuple[float, ...]
    mean_pct: float
    ci95_pct: float
    selection_histogram: dict[str, int]
    quartiles: tuple[float, float, float, float, float]
    records: tuple[EpisodeRecord, ...]
    diagnostic: bool = False

    def summary(self) -> str:
        return format_interval(self.mean_pct, self.ci95_pct)


def confidence_interval(accuracies: Sequence[float]) -> tuple[float, float]:
    """Mean and 95% half-width, both in percent.

    Half-width = 1.96 * s / sqrt(E) with the Bessel-corrected sample standard
    deviation; a single value has half-width 0.
    """
    values = np.asarray(accuracies, dtype=np.float64)
    if values.size == 0:
        raise ValueError("need at least one accuracy value")
    mean_pct = 100.0 * float(values.mean())
    if values.size < 2:
        return mean_pct, 0.0
    s = float(values.std(ddof=1))
    return mean_pct, float(100.0 * 1.96 * s / np.sqrt(values.size))


def format_interval(mean_pct: float, halfwidth_pct: float) -> str:
    return f"{mean_pct:.2f} ± {halfwidth_pct:.2f}"


def episode_seed(run_seed: int, index: int) -> int:
    """Stable per-episode seed; depends only on the run seed and the index."""
    ss = np.random.SeedSequence([int(run_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def resolve_workers(workers: int | str) -> int:
    count = os.cpu_count() or 1 if workers == "auto" else int(workers)
    cap = os.environ.get(WORKER_ENV_VAR)
    if cap is not None:
        count = min(count, max(1, int(cap)))
    return max(1, count)


def evaluate(store: EmbeddingStore, spec: EpisodeSpec,
             config: PipelineConfig) -> EvalReport:
    """Run config.episodes independently seeded episodes over the store.

    Episodes may execute on multiple threads; results are aggregated in
    episode-index order, so the report is bit-identical for any worker count.
    A failed episode aborts the run and names its seed for reproduction.
    """

    def run_one(index: int) -> EpisodeRecord:
        seed = episode_seed(config.seed, index)
        try:
            episode = sample_episode(store, spec, seed)
            result = run_episode(episode, config, seed)
        except Exception as exc:
            raise RuntimeError(f"episode {index} (seed {seed}) failed: {exc}") from exc
        return EpisodeRecord(index, seed, result.accuracy, result.chosen,
                             result.score)

    workers = resolve_workers(config.workers)
    if workers == 1:
        records = [run_one(i) for i in range(config.episodes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, range(config.episodes)))

    accuracies = tuple(r.accuracy for r in records)
    mean_pct, ci95_pct = confidence_interval(accuracies)
    histogram: dict[str, int] = {}
    for r in records:
        histogram[r.chosen] = histogram.get(r.chosen, 0) + 1
    qs = np.percentile(accuracies, [0, 25, 50, 75, 100])
    return EvalReport(accuracies, mean_pct, ci95_pct, histogram,
                      tuple(float(v) for v in qs), tuple(records),
                      diagnostic=config.diagnostic)
