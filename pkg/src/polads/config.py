"""Run configuration: a flat key/value JSON document plus CLI overrides.

Schema (config_version 1), every key optional:

    seed                  int,   default 0
    test_fraction         float, default 0.2
    feature_mode          "text" | "text+targets", default "text+targets"
    ngram_max             int,   default 2
    min_df                int,   default 2
    stop_words            path to a substitute stop list, default bundled list
    nb_alpha              float, default 1.0
    nb_balanced_priors    bool,  default false
    gbdt_n_trees          int,   default 100
    gbdt_learning_rate    float, default 0.1
    gbdt_max_leaves       int,   default 31
    gbdt_max_depth        int,   default 0 (unlimited)
    gbdt_min_samples_leaf int,   default 20
    gbdt_min_gain         float, default 0.0
    gbdt_lambda_l2        float, default 1.0
    gbdt_feature_subsample float, default 1.0
    grid_<param>          comma-separated values; the tuning grid is the
                          cross product over all grid_ keys, with the other
                          parameters taken from the gbdt_ settings
    cv_folds              int,   default 5
    bootstrap_b           int,   default 1000
    bootstrap_alpha       float, default 0.05
    resample_unit         "advertisers" | "ads", default "advertisers"
    top_k_keywords        int,   default 10
    top_k_targets         int,   default 15
    explain_sample        int,   default 2000 (0 means all records)
    figures               bool,  default true
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .gbdt import DEFAULT_GRID, GbdtParams

CONFIG_VERSION = 1

_GBDT_FIELDS = ("n_trees", "learning_rate", "max_leaves", "max_depth",
                "min_samples_leaf", "min_gain", "lambda_l2", "feature_subsample")


@dataclass
class RunConfig:
    seed: int = 0
    test_fraction: float = 0.2
    feature_mode: str = "text+targets"
    ngram_max: int = 2
    min_df: int = 2
    stop_words: str | None = None
    nb_alpha: float = 1.0
    nb_balanced_priors: bool = False
    gbdt: GbdtParams = field(default_factory=GbdtParams)
    grid: tuple[GbdtParams, ...] | None = None
    cv_folds: int = 5
    bootstrap_b: int = 1000
    bootstrap_alpha: float = 0.05
    resample_unit: str = "advertisers"
    top_k_keywords: int = 10
    top_k_targets: int = 15
    explain_sample: int = 2000
    figures: bool = True

    def tuning_grid(self) -> tuple[GbdtParams, ...]:
        return self.grid if self.grid else DEFAULT_GRID

    def to_json(self) -> dict:
        doc = {
            "config_version": CONFIG_VERSION,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "feature_mode": self.feature_mode,
            "ngram_max": self.ngram_max,
            "min_df": self.min_df,
            "stop_words": self.stop_words,
            "nb_alpha": self.nb_alpha,
            "nb_balanced_priors": self.nb_balanced_priors,
            "cv_folds": self.cv_folds,
            "bootstrap_b": self.bootstrap_b,
            "bootstrap_alpha": self.bootstrap_alpha,
            "resample_unit": self.resample_unit,
            "top_k_keywords": self.top_k_keywords,
            "top_k_targets": self.top_k_targets,
            "explain_sample": self.explain_sample,
            "figures": self.figures,
        }
        for name in _GBDT_FIELDS:
            doc[f"gbdt_{name}"] = getattr(self.gbdt, name)
        return doc


def _parse_grid(doc: dict, base: GbdtParams) -> tuple[GbdtParams, ...] | None:
    axes: dict[str, list] = {}
    for key, raw in doc.items():
        if not key.startswith("grid_"):
            continue
        name = key[len("grid_"):]
        if name not in _GBDT_FIELDS:
            raise ValueError(f"unknown grid axis {key!r}")
        caster = float if isinstance(getattr(base, name), float) else int
        values = [caster(v.strip()) for v in str(raw).split(",") if v.strip()]
        if not values:
            raise ValueError(f"empty grid axis {key!r}")
        axes[name] = values
    if not axes:
        return None
    names = sorted(axes)
    grid = []
    for combo in itertools.product(*(axes[n] for n in names)):
        grid.append(replace(base, **dict(zip(names, combo))))
    return tuple(grid)


def load_config(path: str | Path | None = None,
                overrides: dict | None = None) -> RunConfig:
    """Read the flat JSON document (if any) and apply CLI overrides."""
    doc: dict = {}
    if path is not None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a JSON object")
        version = doc.get("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config_version {version!r}")
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})

    cfg = RunConfig()
    gbdt_kwargs = {}
    for name in _GBDT_FIELDS:
        key = f"gbdt_{name}"
        if key in doc:
            gbdt_kwargs[name] = doc[key]
    if "gbdt_seed" in doc:
        gbdt_kwargs["seed"] = doc["gbdt_seed"]
    simple = {f.name for f in fields(RunConfig)} - {"gbdt", "grid"}
    kwargs = {k: doc[k] for k in simple if k in doc}
    cfg = replace(cfg, **kwargs)
    if "seed" in doc or "gbdt_seed" in doc:
        gbdt_kwargs.setdefault("seed", cfg.seed)
    gbdt = replace(cfg.gbdt, **gbdt_kwargs) if gbdt_kwargs else cfg.gbdt
    cfg = replace(cfg, gbdt=gbdt)
    grid = _parse_grid(doc, cfg.gbdt)
    if grid:
        cfg = replace(cfg, grid=grid)

    if cfg.feature_mode not in ("text", "text+targets"):
        raise ValueError(f"feature_mode must be text or text+targets, "
                         f"got {cfg.feature_mode!r}")
    if cfg.resample_unit not in ("advertisers", "ads"):
        raise ValueError(f"resample_unit must be advertisers or ads, "
                         f"got {cfg.resample_unit!r}")
    if not 0.0 < cfg.test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    return cfg
