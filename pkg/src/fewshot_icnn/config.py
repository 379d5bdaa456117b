"""Run configuration: JSON file loading, flag merging, typo-safe keys.

A run is described by the episode shape (way/shot/queries), the store path,
the candidate pool and scoring parameters, and output paths.  Values resolve
with precedence: command-line flags, then the config file, then defaults.
Unknown keys anywhere in the file are rejected rather than ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .core import EpisodeSpec
from .pipeline import FIT_SETS, SCORE_SETS, IcnnConfig, PipelineConfig, default_pool
from .reducers import KINDS, ReducerSpec


class ConfigError(ValueError):
    """Unusable run configuration (unknown key, bad value, missing path)."""


ICNN_KEYS = ("k", "p", "q", "r", "one_shot_rule", "degenerate_spread_value")
TOP_KEYS = ("store", "way", "shot", "queries_per_class", "pool", "dims",
            "fit_set", "score_set", "icnn", "episodes", "seed", "workers",
            "episodes_csv", "episodes_jsonl")
POOL_ENTRY_KEYS = ("kind", "rbf_gamma", "n_neighbors", "command")


@dataclass(frozen=True)
class RunConfig:
    """Everything an evaluation run needs besides the data itself."""

    store: str | None = None
    way: int = 5
    shot: int = 5
    queries_per_class: int = 15
    pool: tuple[ReducerSpec, ...] = field(default_factory=default_pool)
    dims: tuple[int, ...] = (6,)
    fit_set: str = "support_and_query"
    score_set: str = "support_only"
    icnn: IcnnConfig = field(default_factory=IcnnConfig)
    episodes: int = 1000
    seed: int = 0
    workers: int | str = "auto"
    episodes_csv: str | None = None
    episodes_jsonl: str | None = None

    def episode_spec(self) -> EpisodeSpec:
        return EpisodeSpec(self.way, self.shot, self.queries_per_class)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(pool=self.pool, dims=self.dims,
                              fit_set=self.fit_set, score_set=self.score_set,
                              icnn=self.icnn, episodes=self.episodes,
                              seed=self.seed, workers=self.workers)


def parse_pool(value) -> tuple[ReducerSpec, ...]:
    """Pool entries are reducer kind names or {kind: ..., option: ...} maps;
    a comma-separated string of kinds is accepted for flag use."""
    if isinstance(value, str):
        value = [v for v in value.split(",") if v]
    specs = []
    for entry in value:
        if isinstance(entry, str):
            entry = {"kind": entry}
        if not isinstance(entry, dict):
            raise ConfigError(f"pool entry must be a kind name or a map, "
                              f"got {entry!r}")
        unknown = set(entry) - set(POOL_ENTRY_KEYS)
        if unknown:
            raise ConfigError(f"unknown pool entry keys: {sorted(unknown)}")
        if "kind" not in entry:
            raise ConfigError(f"pool entry missing 'kind': {entry!r}")
        if entry["kind"] not in KINDS:
            raise ConfigError(f"unknown reducer kind {entry['kind']!r} "
                              f"(known: {', '.join(KINDS)})")
        try:
            specs.append(ReducerSpec(**entry))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad pool entry {entry!r}: {exc}")
    return tuple(specs)


def parse_dims(value) -> tuple[int, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v]
    try:
        dims = tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"dims must be a list of integers, got {value!r}")
    if not dims:
        raise ConfigError("dims must be nonempty")
    return dims


def load_config_file(path) -> dict:
    """Parse and key-check a JSON config file (values checked at merge)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - set(TOP_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {sorted(unknown)}")
    if "icnn" in raw:
        if not isinstance(raw["icnn"], dict):
            raise ConfigError(f"{path}: 'icnn' must be an object")
        unknown = set(raw["icnn"]) - set(ICNN_KEYS)
        if unknown:
            raise ConfigError(f"{path}: unknown icnn keys: {sorted(unknown)}")
    return raw


def build_run_config(file_values: dict | None = None,
                     flag_values: dict | None = None,
                     icnn_flags: dict | None = None) -> RunConfig:
    """Merge file and flag values over defaults (flags win) into a RunConfig.

    flag_values uses RunConfig field names and icnn_flags uses IcnnConfig
    field names; None entries mean "not given".  Raises ConfigError for bad
    values or unresolvable paths.
    """
    file_values = dict(file_values or {})
    flag_values = {k: v for k, v in (flag_values or {}).items() if v is not None}
    icnn_flags = {k: v for k, v in (icnn_flags or {}).items() if v is not None}
    unknown = set(flag_values) - set(TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    unknown = set(icnn_flags) - set(ICNN_KEYS)
    if unknown:
        raise ConfigError(f"unknown icnn fields: {sorted(unknown)}")

    merged = {}
    for key in TOP_KEYS:
        if key in flag_values:
            merged[key] = flag_values[key]
        elif key in file_values:
            merged[key] = file_values[key]

    if "pool" in merged:
        merged["pool"] = parse_pool(merged["pool"])
    if "dims" in merged:
        merged["dims"] = parse_dims(merged["dims"])
    icnn_values = dict(merged.pop("icnn", {}) or {})
    icnn_values.update(icnn_flags)
    if icnn_values:
        if icnn_values.get("k", "auto") != "auto":
            try:
                icnn_values["k"] = int(icnn_values["k"])
            except (TypeError, ValueError):
                raise ConfigError(f"icnn.k must be an integer or 'auto', "
                                  f"got {icnn_values['k']!r}")
        try:
            merged["icnn"] = IcnnConfig(**icnn_values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad icnn config: {exc}")
    if "workers" in merged and merged["workers"] != "auto":
        try:
            merged["workers"] = int(merged["workers"])
        except (TypeError, ValueError):
            raise ConfigError(f"workers must be an integer or 'auto', "
                              f"got {merged['workers']!r}")

    known_fields = {f.name for f in fields(RunConfig)}
    try:
        config = RunConfig(**{k: v for k, v in merged.items() if k in known_fields})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))

    for name in ("fit_set", "score_set"):
        allowed = FIT_SETS if name == "fit_set" else SCORE_SETS
        if getattr(config, name) not in allowed:
            raise ConfigError(f"{name} must be one of {allowed}, "
                              f"got {getattr(config, name)!r}")
    if config.store is not None and not Path(config.store).is_file():
        raise ConfigError(f"store path {config.store!r} does not exist")
    for out in (config.episodes_csv, config.episodes_jsonl):
        if out is not None and not Path(out).parent.is_dir():
            raise ConfigError(f"output directory for {out!r} does not exist")
    return config
