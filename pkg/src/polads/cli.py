"""Command line: ingest, stats, train, evaluate, explain.

Reports are machine-first (JSON/CSV); the tables printed to stdout are
rendered from the same data. Figures are PNG bar charts written next to
the delimited files (disable with --no-figures). Exit codes: 0 success,
1 internal error, 2 user or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import PoladsError, UnsupportedModel
from .evaluate import (compute_metrics, paired_bootstrap, plan_split,
                       split_records)
from .explain import ShapMatrix, ensemble_shap, global_importance
from .ingest import corpus_stats, load_corpus, save_dataset
from .pipeline import (Bundle, GbdtSystem, SYSTEMS, check_bundles_comparable,
                       check_corpus_matches, corpus_digest, FeatureConfig,
                       fresh_system_like, load_bundle, make_system, save_bundle)
from .report import save_bar_chart, write_csv, write_json, write_run_metadata

log = logging.getLogger(__name__)


def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # the same flags are valid before and after the subcommand; the
    # subparser copies use SUPPRESS so they never clobber main-level values
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", type=Path,
                        help="flat key/value JSON config file",
                        **({"default": None} if not suppress else kw))
    parser.add_argument("--seed", type=int,
                        help="override the config seed",
                        **({"default": None} if not suppress else kw))
    parser.add_argument("--strict", action="store_true",
                        help="fail on the first malformed input line", **kw)
    parser.add_argument("--force", action="store_true",
                        help="overwrite existing outputs", **kw)
    parser.add_argument("-v", "--verbose", action="store_true", **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polads",
        description="Classify social-media ads as political vs. non-political.")
    parser.add_argument("--version", action="version", version=__version__)
    _add_global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and label an archive dump",
                       parents=[common])
    p.add_argument("corpus", type=Path)
    p.add_argument("--out", type=Path, default=Path("reports/ingest"))
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="dataset aggregates", parents=[common])
    p.add_argument("corpus", type=Path)
    p.add_argument("--out", type=Path, default=Path("reports/stats"))
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common],
                   help="train a system on the advertiser-disjoint train split")
    p.add_argument("corpus", type=Path)
    p.add_argument("--system", choices=SYSTEMS, required=True)
    p.add_argument("--out", type=Path, required=True, help="bundle directory")
    p.add_argument("--grid", action="store_true",
                   help="grid-search hyper-parameters first (gbm systems)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                   help="score bundles on the held-out test split")
    p.add_argument("bundles", nargs="*", type=Path,
                   help="one bundle, or two to add the paired bootstrap")
    p.add_argument("--compare-all", nargs="+", type=Path, default=None,
                   help="several bundles for a side-by-side table")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("reports/evaluate"))
    p.add_argument("--bootstrap", type=int, default=None,
                   help="bootstrap sample count (default from config)")
    p.add_argument("--resample-unit", choices=("advertisers", "ads"),
                   default=None, help="bootstrap resampling unit")
    p.add_argument("--on", choices=("test", "train"), default="test")
    p.add_argument("--allow-train-eval", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", parents=[common],
                   help="SHAP importance reports for a gbm bundle")
    p.add_argument("bundle", type=Path)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("reports/explain"))
    p.add_argument("--top-k-keywords", type=int, default=None)
    p.add_argument("--top-k-targets", type=int, default=None)
    p.add_argument("--sample", type=int, default=None,
                   help="explain at most this many training ads (0 = all)")
    p.add_argument("--dump-matrix", action="store_true",
                   help="also write the full samples x features SHAP matrix CSV")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_explain)
    return parser


def _config_from(args) -> RunConfig:
    overrides = {"seed": args.seed}
    return load_config(args.config, overrides)


# ---------------------------------------------------------------------------
# commands

def cmd_ingest(args, cfg: RunConfig) -> int:
    ds, summary = load_corpus(args.corpus, strict=args.strict)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out / "dataset.ndjson")
    write_json(out / "ingest_summary.json", summary.to_json())
    write_run_metadata(out, "ingest")
    print(f"ingested {summary.kept} ads from {summary.lines} lines "
          f"({summary.skipped_tied_votes} tied votes skipped, "
          f"{summary.duplicates_dropped} duplicates dropped, "
          f"{summary.malformed} malformed)")
    print(f"dataset written to {out / 'dataset.ndjson'}")
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    ds, _ = load_corpus(args.corpus, strict=args.strict)
    report = corpus_stats(ds, top_k=args.top_k)
    out = args.out
    write_json(out / "stats.json", report.to_json())
    write_csv(out / "attribute_counts.csv", ["attribute", "political_ads"],
              list(report.attribute_counts.items()))
    write_csv(out / "region_counts.csv", ["region", "political_ads"],
              list(report.region_counts.items()))
    write_csv(out / "top_interests.csv", ["interest", "political_ads"],
              report.top_interests)
    if cfg.figures and not args.no_figures:
        if report.attribute_counts:
            save_bar_chart(out / "attribute_counts.png",
                           list(report.attribute_counts.keys()),
                           list(report.attribute_counts.values()),
                           "Political ads per targeting attribute", "ads")
        if report.region_counts:
            save_bar_chart(out / "region_counts.png",
                           list(report.region_counts.keys()),
                           list(report.region_counts.values()),
                           "Political ads per region", "ads")
        if report.top_interests:
            save_bar_chart(out / "top_interests.png",
                           [k for k, _ in report.top_interests],
                           [c for _, c in report.top_interests],
                           f"Top {args.top_k} interest topics", "ads")
    write_run_metadata(out, "stats")
    print(f"{report.n_ads} ads from {report.n_advertisers} advertisers; "
          f"{report.n_political} political vs {report.n_non_political} "
          f"non-political (ratio {report.class_ratio:.2f}:1)")
    print(f"reports written to {out}")
    return 0


def _load_split(corpus: Path, cfg: RunConfig, seed: int, fraction: float,
                strict: bool):
    ds, _ = load_corpus(corpus, strict=strict)
    plan = plan_split([r.advertiser for r, _ in ds.records], fraction, seed)
    train, test = split_records(ds.records, plan)
    return ds, train, test


def cmd_train(args, cfg: RunConfig) -> int:
    sha = corpus_digest(args.corpus)
    ds, train, test = _load_split(args.corpus, cfg, cfg.seed,
                                  cfg.test_fraction, args.strict)
    feature_config = FeatureConfig(
        use_targets=cfg.feature_mode == "text+targets",
        ngram_max=cfg.ngram_max, min_df=cfg.min_df,
        stop_words_path=cfg.stop_words)
    system = make_system(args.system, feature_config, cfg.gbdt,
                         nb_alpha=cfg.nb_alpha,
                         nb_balanced_priors=cfg.nb_balanced_priors)
    extra = {"n_train_ads": len(train), "n_test_ads": len(test)}
    if args.grid:
        if not isinstance(system, GbdtSystem):
            raise UnsupportedModel("--grid only applies to the gbm systems")
        best = system.tune(train, cfg.tuning_grid(), k=cfg.cv_folds,
                           seed=cfg.seed)
        extra["grid_best"] = best.to_json()
        print(f"grid search picked: {best.to_json()}")
    system.fit(train)
    bundle = save_bundle(args.out, system, cfg.seed, cfg.test_fraction, sha,
                         force=args.force, extra=extra)
    print(f"trained {args.system} on {len(train)} ads "
          f"({len(test)} held out); bundle at {bundle.path}")
    return 0


def _named_bundles(paths: list[Path]) -> list[tuple[str, Bundle]]:
    named = []
    seen: dict[str, int] = {}
    for path in paths:
        bundle = load_bundle(path)
        name = path.name or str(path)
        seen[name] = seen.get(name, 0) + 1
        if seen[name] > 1:
            name = f"{name}#{seen[name]}"
        named.append((name, bundle))
    return named


def _metrics_table(rows: list[tuple[str, str, dict]]) -> str:
    lines = [f"{'bundle':<24} {'system':<18} {'precision':>9} {'recall':>9} {'f1':>9}"]
    for name, kind, m in rows:
        lines.append(f"{name:<24} {kind:<18} {m['precision']:>9.2f} "
                     f"{m['recall']:>9.2f} {m['f1']:>9.2f}")
    return "\n".join(lines)


def cmd_evaluate(args, cfg: RunConfig) -> int:
    paths = list(args.compare_all) if args.compare_all else list(args.bundles)
    if not paths:
        raise ValueError("no bundle given; pass one, two, or --compare-all")
    if args.bundles and args.compare_all:
        raise ValueError("use either positional bundles or --compare-all")
    if args.on == "train" and not args.allow_train_eval:
        raise ValueError("refusing to evaluate on the train split "
                         "(pass --allow-train-eval to override)")
    named = _named_bundles(paths)
    sha = corpus_digest(args.corpus)
    for _, bundle in named:
        check_corpus_matches(bundle, sha)
    first = named[0][1]
    for _, other in named[1:]:
        check_bundles_comparable(first, other)

    seed = first.config["seed"]
    fraction = first.config["test_fraction"]
    ds, train, test = _load_split(args.corpus, cfg, seed, fraction, args.strict)
    part = test if args.on == "test" else train
    records = [rec for rec, _ in part]
    truth = [label for _, label in part]

    out = args.out
    rows = []
    doc: dict = {"split": args.on, "n_ads": len(part), "seed": seed,
                 "test_fraction": fraction, "bundles": {}}
    for name, bundle in named:
        metrics = compute_metrics(bundle.system.predict(records), truth)
        rows.append((name, bundle.kind, metrics.to_json()))
        doc["bundles"][name] = {"system": bundle.kind,
                                "metrics": metrics.to_json()}

    if len(named) == 2 and not args.compare_all:
        b = args.bootstrap if args.bootstrap is not None else cfg.bootstrap_b
        unit = args.resample_unit or cfg.resample_unit
        verdict = paired_bootstrap(
            ds, fresh_system_like(named[0][1]), fresh_system_like(named[1][1]),
            b=b, alpha=cfg.bootstrap_alpha, seed=cfg.seed,
            test_fraction=fraction, resample_unit=unit)
        doc["bootstrap"] = {
            "better_system": named[1][0], "baseline": named[0][0],
            **{k: v for k, v in verdict.to_json().items() if k != "deltas"},
        }
        write_json(out / "bootstrap.json", verdict.to_json())
        write_csv(out / "bootstrap_deltas.csv", ["iteration", "delta_f1"],
                  [(i, d) for i, d in enumerate(verdict.deltas)])
        print(f"paired bootstrap ({b} samples): p = {verdict.p_value:.4f} "
              f"({'significant' if verdict.significant else 'not significant'} "
              f"at alpha = {cfg.bootstrap_alpha})")

    write_json(out / "evaluation.json", doc)
    write_run_metadata(out, "evaluate")
    print(_metrics_table(rows))
    print(f"reports written to {out}")
    return 0


def cmd_explain(args, cfg: RunConfig) -> int:
    bundle = load_bundle(args.bundle)
    if not isinstance(bundle.system, GbdtSystem):
        raise UnsupportedModel(
            "explain needs a gradient-boosted bundle; the naive-bayes "
            "baseline has no tree attributions")
    sha = corpus_digest(args.corpus)
    check_corpus_matches(bundle, sha)
    seed = bundle.config["seed"]
    _, train, _ = _load_split(args.corpus, cfg, seed,
                              bundle.config["test_fraction"], args.strict)
    sample_cap = cfg.explain_sample if args.sample is None else args.sample
    records = [rec for rec, _ in train]
    if sample_cap and len(records) > sample_cap:
        rng = np.random.default_rng(seed)
        keep = sorted(rng.choice(len(records), size=sample_cap, replace=False))
        records = [records[int(i)] for i in keep]

    features = bundle.system.features
    X = features.encode_many(records)
    matrix = ensemble_shap(bundle.system.model, X)
    text_dim = features.text_dim
    names = features.feature_names()

    keyword_matrix = ShapMatrix(values=matrix.values[:, :text_dim],
                                base_value=matrix.base_value,
                                feature_names=names[:text_dim])
    keyword_rank = global_importance(keyword_matrix)

    out = args.out
    top_kw = cfg.top_k_keywords if args.top_k_keywords is None else args.top_k_keywords
    top_tg = cfg.top_k_targets if args.top_k_targets is None else args.top_k_targets
    kw_rows = keyword_rank.top(top_kw)
    if len(kw_rows) < top_kw:
        log.warning("only %d keywords carry attribution (asked for %d)",
                    len(kw_rows), top_kw)
    write_json(out / "importance_keywords.json",
               [{"feature": n, "mean_abs_shap": s} for n, s in kw_rows])
    write_csv(out / "importance_keywords.csv", ["feature", "mean_abs_shap"],
              kw_rows)

    tg_rows: list[tuple[str, float]] = []
    if features.encoder is not None:
        target_matrix = ShapMatrix(values=matrix.values[:, text_dim:],
                                   base_value=matrix.base_value,
                                   feature_names=names[text_dim:])
        tg_rows = global_importance(target_matrix).top(top_tg)
    else:
        print("notice: text-only bundle, the targeting report is empty")
    write_json(out / "importance_targeting.json",
               [{"feature": n, "mean_abs_shap": s} for n, s in tg_rows])
    write_csv(out / "importance_targeting.csv", ["feature", "mean_abs_shap"],
              tg_rows)

    # per-sample (feature value, shap value) pairs for the reported features,
    # the data behind a beeswarm-style rendering
    name_to_col = {n: i for i, n in enumerate(names)}
    pair_rows = []
    for feature_name, _ in list(kw_rows) + list(tg_rows):
        col = name_to_col[feature_name]
        for i, vec in enumerate(X):
            pair_rows.append((feature_name, i, vec.get(col),
                              float(matrix.values[i, col])))
    write_csv(out / "shap_pairs.csv",
              ["feature", "sample", "feature_value", "shap_value"], pair_rows)

    if args.dump_matrix:
        write_csv(out / "shap_matrix.csv", names,
                  [row.tolist() for row in matrix.values])

    if cfg.figures and not args.no_figures:
        if kw_rows:
            save_bar_chart(out / "top_keywords.png",
                           [n for n, _ in kw_rows], [s for _, s in kw_rows],
                           f"Top {len(kw_rows)} keywords by mean |SHAP|",
                           "mean |SHAP| (margin units)")
        if tg_rows:
            save_bar_chart(out / "top_targeting.png",
                           [n for n, _ in tg_rows], [s for _, s in tg_rows],
                           f"Top {len(tg_rows)} targeting attributes by mean |SHAP|",
                           "mean |SHAP| (margin units)")
    write_json(out / "explain.json", {
        "base_value": matrix.base_value,
        "n_samples": len(records),
        "n_keyword_rows": len(kw_rows),
        "n_targeting_rows": len(tg_rows),
    })
    write_run_metadata(out, "explain")
    print(f"top keywords: {', '.join(n for n, _ in kw_rows[:10]) or '(none)'}")
    if tg_rows:
        print(f"top targeting: {', '.join(n for n, _ in tg_rows[:10])}")
    print(f"reports written to {out}")
    return 0


# ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from(args)
        return args.func(args, cfg)
    except (PoladsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
