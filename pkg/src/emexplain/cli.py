"""Command-line front end: train the baseline matcher, explain pairs, run evaluations.

Exit codes: 0 ok, 2 usage/data error, 3 matcher transport error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import (
    Dataset,
    DatasetLoadError,
    DatasetValidationError,
    RecordPair,
    load_benchmark_dataset,
)
from .evaluation import (
    CounterfactualMetrics,
    PerturbationErrorReport,
    StabilityReport,
    counterfactual_metrics,
    partition_by_prediction,
    perturbation_error,
    stability,
)
from .explain import DualExplanation, ExplainError, ExplainerConfig, explain
from .matchers import (
    BaselineMatcher,
    BaselineMatcherModel,
    ConfigurationError,
    HttpMatcherClient,
    MatcherConfig,
    MatcherTransportError,
    StdioMatcherClient,
    train_baseline_matcher,
)
from .render import render
from .synth import available_profiles, write_benchmark

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TRANSPORT = 3


class UsageError(Exception):
    pass


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


# ---------------------------------------------------------------------------
# argument plumbing


def _add_matcher_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--matcher", help="path to a built-in baseline model file")
    p.add_argument("--matcher-cmd", help="external matcher command (stdio em-matcher/1)")
    p.add_argument("--matcher-url", help="external matcher base URL (HTTP em-matcher/1)")


def _add_explainer_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--K", type=int, default=5, help="max features per explanation side")
    p.add_argument("--epsilon", type=float, default=0.1, help="counterfactual strength target")
    p.add_argument("--samples-min", type=int, default=500, dest="s_min")
    p.add_argument("--samples-max", type=int, default=3000, dest="s_max")
    p.add_argument(
        "--baseline",
        choices=["lime"],
        help="use the token-level exclusion-only baseline configuration",
    )
    p.add_argument(
        "--ablate",
        action="append",
        default=[],
        metavar="no-dual|no-potential|granularity=N",
        help="disable a component (repeatable)",
    )
    p.add_argument("--include-names", action="store_true", help="add attribute-name features")
    p.add_argument("--literal-cfs", action="store_true", help="uncorrected actual-CFS algebra")


def _matcher_spec(args) -> dict:
    spec = {
        k: v
        for k, v in [
            ("model", args.matcher),
            ("cmd", args.matcher_cmd),
            ("url", args.matcher_url),
        ]
        if v
    }
    if len(spec) != 1:
        raise UsageError("exactly one of --matcher, --matcher-cmd, --matcher-url is required")
    return spec


def _build_matcher(spec: dict):
    if "model" in spec:
        path = Path(spec["model"])
        if not path.exists():
            raise UsageError(f"matcher model file not found: {path}")
        return BaselineMatcher(BaselineMatcherModel.load(path))
    if "cmd" in spec:
        return StdioMatcherClient(shlex.split(spec["cmd"]))
    return HttpMatcherClient(spec["url"])


def _explainer_config(args) -> ExplainerConfig:
    if args.baseline == "lime":
        config = ExplainerConfig.lime_baseline(K=args.K, epsilon=args.epsilon)
    else:
        config = ExplainerConfig(
            K=args.K,
            epsilon=args.epsilon,
            s_min=args.s_min,
            s_max=args.s_max,
            include_names=args.include_names,
            literal_cfs=args.literal_cfs,
        )
    for item in args.ablate:
        if item == "no-dual":
            config.disable_dual = True
        elif item == "no-potential":
            config.disable_potential = True
        elif item.startswith("granularity="):
            config.fixed_granularity = int(item.split("=", 1)[1])
        else:
            raise UsageError(f"unknown --ablate value {item!r}")
    return config


def _resolve_seed(args, required: bool) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("EM_EXPLAIN_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as e:
            raise UsageError(f"EM_EXPLAIN_SEED must be an integer, got {env!r}") from e
    if required:
        raise UsageError("a seed is required (--seed or EM_EXPLAIN_SEED)")
    return 0


def _load_dataset(path: str) -> Dataset:
    try:
        return load_benchmark_dataset(path)
    except (DatasetLoadError, DatasetValidationError) as e:
        raise UsageError(str(e)) from e


# ---------------------------------------------------------------------------
# worker pool: per-pair tasks merged deterministically regardless of worker count

_WORKER: dict = {}


def _worker_init(matcher_spec: dict, config_kwargs: dict) -> None:
    _WORKER["matcher"] = _build_matcher(matcher_spec)
    _WORKER["config"] = ExplainerConfig(**config_kwargs)


def _run_task(task: tuple) -> dict:
    kind, pair_json, seed, extra = task
    matcher = _WORKER["matcher"]
    config = _WORKER["config"]
    pair = RecordPair.from_json(pair_json)
    if kind == "explain":
        dual = explain(matcher, pair, config, seed)
        return {"dual": dual.to_json(), "pair_json": pair_json}
    if kind == "cf1":
        m = counterfactual_metrics(
            lambda p: explain(matcher, p, config, seed),
            matcher,
            [pair],
            epsilon=config.epsilon,
            literal_cfs=config.literal_cfs,
        )
        return {"recalled": m.recalled, "successful": m.successful}
    if kind == "pe":
        r = perturbation_error(lambda p: explain(matcher, p, config, seed), matcher, [pair])
        return {
            "abs_errors": [abs(rec["realized"] - rec["predicted"]) for rec in r.records],
            "magnitudes": [rec["magnitude"] for rec in r.records],
            "skipped": r.skipped,
        }
    if kind == "stability":
        r = stability(
            lambda p, s: explain(matcher, p, config, s), matcher, [pair], seeds=extra
        )
        return {"similarity": r.per_pair[0][1]}
    raise ValueError(f"unknown task kind {kind!r}")


def _map_tasks(tasks: list[tuple], args, config: ExplainerConfig) -> list[dict]:
    """Run per-pair tasks in input order; worker count never changes the results."""
    spec = _matcher_spec(args)
    if args.workers <= 1:
        _worker_init(spec, asdict(config))
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(
        max_workers=args.workers, initializer=_worker_init, initargs=(spec, asdict(config))
    ) as pool:
        return list(pool.map(_run_task, tasks))


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    dataset = _load_dataset(args.dataset)
    seed = _resolve_seed(args, required=False)
    config = MatcherConfig(threshold=args.threshold)
    model = train_baseline_matcher(dataset, config, seed=seed, epochs=args.epochs)
    model.save(args.out)
    print(_json_dumps({"model": args.out, "validation_f1": model.validation_f1}))
    return EXIT_OK


def _select_pairs(dataset: Dataset, args) -> list[RecordPair]:
    labeled = dataset.pairs(args.split)
    by_id = {p.pair_id: p for p, _ in labeled}
    if args.pair_id:
        out = []
        for pid in args.pair_id:
            if pid in by_id:
                out.append(by_id[pid])
            elif pid.isdigit() and int(pid) < len(labeled):
                out.append(labeled[int(pid)][0])
            else:
                raise UsageError(f"pair id {pid!r} not found in split {args.split!r}")
        return out
    pairs = [p for p, _ in labeled]
    if args.limit is not None:
        pairs = pairs[: args.limit]
    return pairs


def cmd_explain(args) -> int:
    dataset = _load_dataset(args.dataset)
    seed = _resolve_seed(args, required=False)
    config = _explainer_config(args)
    pairs = _select_pairs(dataset, args)
    if not pairs:
        raise UsageError("no pairs selected")
    tasks = [("explain", p.to_json(), seed, None) for p in pairs]
    results = _map_tasks(tasks, args, config)
    duals = [r["dual"] for r in results]
    payload = duals[0] if len(duals) == 1 else duals
    text = _json_dumps(payload)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    if args.html:
        _write_html(args.html, pairs, duals, args, config, seed)
    return EXIT_OK


def _write_html(target: str, pairs, duals, args, config: ExplainerConfig, seed: int) -> None:
    # re-derive full explanation objects (JSON results drop the spaces needed for highlighting)
    matcher = _build_matcher(_matcher_spec(args))
    path = Path(target)
    if len(pairs) > 1:
        path.mkdir(parents=True, exist_ok=True)
    for pair in pairs:
        dual = explain(matcher, pair, config, seed)
        doc = render(dual, pair)
        out = path / f"{pair.pair_id}.html" if len(pairs) > 1 else path
        out.write_text(doc.html, encoding="utf-8")


def _merged_cf1(results: list[dict], total: int) -> CounterfactualMetrics:
    recalled = sum(r["recalled"] for r in results)
    successful = sum(r["successful"] for r in results)
    if total == 0:
        return CounterfactualMetrics(None, None, None, 0, 0, 0)
    cr = recalled / total
    cp = successful / recalled if recalled else None
    if cr == 0 or cp is None or cp == 0:
        cf1 = 0.0
    else:
        cf1 = 2 * cr * cp / (cr + cp)
    return CounterfactualMetrics(cr, cp, cf1, recalled, successful, total)


def _merged_pe(results: list[dict]) -> PerturbationErrorReport:
    abs_errors = [e for r in results for e in r["abs_errors"]]
    magnitudes = [m for r in results for m in r["magnitudes"]]
    skipped = sum(r["skipped"] for r in results)
    mae = float(np.mean(abs_errors)) if abs_errors else float("nan")
    mean_mag = float(np.mean(magnitudes)) if magnitudes else float("nan")
    pe = mae / mean_mag if mean_mag and mean_mag > 0 else float("nan")
    return PerturbationErrorReport(mae, pe, len(abs_errors), skipped)


def cmd_evaluate(args) -> int:
    dataset = _load_dataset(args.dataset)
    seed = _resolve_seed(args, required=True)
    config = _explainer_config(args)
    matcher = _build_matcher(_matcher_spec(args))
    all_pairs = [p for p, _ in dataset.pairs(args.split)]
    groups = partition_by_prediction(matcher, all_pairs, limit=args.n, seed=seed)
    if args.pred_class == "both":
        selected = {k: v for k, v in groups.items()}
    else:
        selected = {args.pred_class: groups[args.pred_class]}

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {"metric": args.metric, "split": args.split, "seed": seed, "classes": {}}
    rows: list[list] = []
    for cls, pairs in selected.items():
        if args.metric == "cf1":
            tasks = [("cf1", p.to_json(), seed, None) for p in pairs]
            m = _merged_cf1(_map_tasks(tasks, args, config), len(pairs))
            report["classes"][cls] = m.to_json()
            rows.append([cls, "CR", m.cr])
            rows.append([cls, "CP", m.cp])
            rows.append([cls, "CF1", m.cf1])
        elif args.metric == "pe":
            tasks = [("pe", p.to_json(), seed, None) for p in pairs]
            r = _merged_pe(_map_tasks(tasks, args, config))
            report["classes"][cls] = r.to_json()
            rows.append([cls, "MAE", r.mae])
            rows.append([cls, "PE", r.pe])
        elif args.metric == "stability":
            seeds = tuple(int(s) for s in args.seeds.split(","))
            if len(seeds) < 2:
                raise UsageError("--seeds needs two comma-separated integers")
            tasks = [("stability", p.to_json(), seed, seeds) for p in pairs]
            results = _map_tasks(tasks, args, config)
            sims = [r["similarity"] for r in results]
            st = StabilityReport(
                float(np.mean(sims)) if sims else float("nan"),
                [(p.pair_id, s) for p, s in zip(pairs, sims)],
            )
            report["classes"][cls] = st.to_json()
            rows.append([cls, "stability", st.mean_similarity])
        else:
            raise UsageError(f"unknown metric {args.metric!r}")

    text = _json_dumps(report)
    (out_dir / f"{args.metric}.json").write_text(text + "\n", encoding="utf-8")
    with open(out_dir / f"{args.metric}.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["class", "metric", "value"])
        w.writerows(rows)
    print(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    dataset = write_benchmark(args.profile, args.out, seed=_resolve_seed(args, required=False) or 7)
    print(
        _json_dumps(
            {
                "profile": args.profile,
                "out": args.out,
                "candidates": dataset.candidate_count(),
                "matches": dataset.match_count(),
            }
        )
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emexplain", description="Explain black-box entity-matching decisions."
    )
    parser.add_argument("--config", help="JSON file whose keys mirror command flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the built-in baseline matcher")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="explain one or more candidate pairs")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--pair-id", action="append", help="pair id or index within the split (repeatable)")
    p.add_argument("--limit", type=int, default=None, help="explain at most N pairs of the split")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="write the explanation JSON here as well as stdout")
    p.add_argument("--html", help="render HTML to this file (or directory for many pairs)")
    _add_matcher_args(p)
    _add_explainer_args(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="run quantitative evaluation metrics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--metric", required=True, choices=["cf1", "pe", "stability"])
    p.add_argument(
        "--class", dest="pred_class", default="both", choices=["match", "nonmatch", "both"]
    )
    p.add_argument("--n", type=int, default=500, help="max pairs per predicted class")
    p.add_argument("--seeds", default="0,1", help="comma-separated seeds for stability")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="evaluation", help="output directory for JSON+CSV")
    _add_matcher_args(p)
    _add_explainer_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    p.add_argument("--profile", required=True, choices=available_profiles())
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    return parser


def _apply_config_file(argv: list[str], parser: argparse.ArgumentParser) -> list[str]:
    """Pre-scan for --config and fold the JSON file in as parser defaults."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config requires a path")
    path = Path(argv[i + 1])
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"config file is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in cfg.items()}
    for sub in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
        sub.set_defaults(**defaults)
        for action in sub._actions:
            if action.dest in defaults:
                action.required = False
    return argv


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv, parser)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:  # argparse usage errors
        return int(e.code) if e.code else EXIT_OK
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, DatasetLoadError, DatasetValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except MatcherTransportError as e:
        print(f"matcher transport error: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    except ExplainError as e:
        print(f"explanation failed: {e}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
