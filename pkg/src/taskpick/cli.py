"""Command-line interface: score a pool, select a subset, report a manifest.

Scoring is split out from selection so one scores cache can serve a
whole sweep of strategies and budgets over the same pool. Every output
is written atomically (temp file + rename) and reruns with identical
inputs produce byte-identical files.
"""

import argparse
import json
import os
import sys
import tempfile

from .errors import ParseError, TaskpickError
from .pool import load_pool
from .scoring import read_scores, render_scores, score_pool
from .selectors import (
    STRATEGIES,
    KernelSpec,
    StrategyConfig,
    manifest_payload,
    run_strategy,
)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".taskpick-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_score(args) -> int:
    pool = load_pool(args.pool, args.embeddings)
    scores = score_pool(pool)
    _atomic_write(args.output, render_scores(pool, scores))
    print(f"wrote scores for {len(pool)} records to {args.output}")
    return 0


def _resolve_kernel(args) -> KernelSpec | None:
    if args.kernel is None:
        return None
    gamma = args.gamma if args.kernel == "rbf" else None
    return KernelSpec(args.kernel, gamma)


def cmd_select(args) -> int:
    pool = load_pool(args.pool, args.embeddings)

    scores = None
    if args.scores_cache:
        if os.path.exists(args.scores_cache):
            scores = read_scores(args.scores_cache, pool)
        else:
            scores = score_pool(pool)
            _atomic_write(args.scores_cache, render_scores(pool, scores))

    config = StrategyConfig(
        strategy=args.strategy,
        budget=args.budget,
        seed=args.seed,
        base=args.base_allocation,
        kernel=_resolve_kernel(args),
        jitter=args.jitter,
    )
    result = run_strategy(pool, config, scores=scores)

    manifest = manifest_payload(result, pool)
    manifest["inputs"] = {
        "pool": args.pool,
        "embeddings": args.embeddings,
        "scores_cache": args.scores_cache,
    }
    _atomic_write(args.output, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(
        f"{result.strategy}: selected {len(result.selected)} of {len(pool)}"
        f" -> {args.output}"
    )
    for note in result.warnings:
        print(f"warning: {note}", file=sys.stderr)
    return 0


def _require(manifest: dict, key: str, path: str):
    if key not in manifest:
        raise ParseError(f"{path}: manifest is missing {key!r}")
    return manifest[key]


def cmd_report(args) -> int:
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.manifest}: invalid JSON ({exc.msg})") from exc
    if not isinstance(manifest, dict):
        raise ParseError(f"{args.manifest}: manifest is not an object")

    strategy = _require(manifest, "strategy", args.manifest)
    per_task = _require(manifest, "per_task", args.manifest)
    selected = _require(manifest, "selected_ids", args.manifest)
    params = manifest.get("params", {})

    print(f"strategy: {strategy}")
    print(f"seed: {manifest.get('seed')}")
    print("params: " + ", ".join(f"{k}={v}" for k, v in sorted(params.items())))
    print(f"selected: {len(selected)}")

    allocation = manifest.get("allocation")
    if allocation:
        rows = sorted(allocation, key=lambda r: (-r.get("selected", 0), r.get("task", "")))
        has_conf = any("confidence" in r for r in rows)
        header = f"{'task':<28}{'selected':>9}{'available':>11}{'alpha':>10}{'ceil':>6}"
        if has_conf:
            header += f"{'confidence':>12}"
        print(header)
        for r in rows:
            line = (
                f"{r['task']:<28}{r['selected']:>9}{r['available']:>11}"
                f"{r['alpha']:>10.2f}{r['alpha_ceil']:>6}"
            )
            if has_conf:
                line += f"{r.get('confidence', float('nan')):>12.4g}"
            print(line)
    else:
        print(f"{'task':<28}{'selected':>9}")
        for task, count in sorted(per_task.items(), key=lambda kv: (-kv[1], kv[0])):
            print(f"{task:<28}{count:>9}")

    trace = manifest.get("objective_trace")
    if trace:
        print(f"objective trace: {len(trace)} steps, first={trace[0]:.6g}, last={trace[-1]:.6g}")
    for note in manifest.get("warnings", []):
        print(f"warning: {note}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskpick",
        description="Select which prompts to send for annotation under a fixed budget.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    score = sub.add_parser("score", help="compute per-example scores and cache them")
    score.add_argument("--pool", required=True, help="pool file (JSON lines)")
    score.add_argument("--embeddings", default=None, help="binary embedding sidecar")
    score.add_argument("--output", required=True, help="scores cache to write (JSON lines)")
    score.set_defaults(func=cmd_score)

    select = sub.add_parser("select", help="run a selection strategy and write a manifest")
    select.add_argument("--pool", required=True, help="pool file (JSON lines)")
    select.add_argument("--embeddings", default=None, help="binary embedding sidecar")
    select.add_argument("--strategy", required=True, choices=STRATEGIES)
    select.add_argument("--budget", required=True, type=int, help="number of prompts to select")
    select.add_argument("--seed", type=int, default=0, help="sampling seed (default: 0)")
    select.add_argument(
        "--base-allocation",
        type=int,
        default=5,
        help="per-task floor for weighted_task_diversity (default: 5)",
    )
    select.add_argument(
        "--kernel",
        choices=("euclidean", "rbf", "cosine"),
        default=None,
        help="similarity for geometric strategies; default depends on the strategy"
        " (k_center/dpp: euclidean, facility_location: rbf)",
    )
    select.add_argument("--gamma", type=float, default=0.1, help="rbf bandwidth (default: 0.1)")
    select.add_argument(
        "--jitter", type=float, default=1e-6, help="dpp diagonal jitter (default: 1e-6)"
    )
    select.add_argument(
        "--scores-cache",
        default=None,
        help="scores cache path: loaded when present, computed and written when absent",
    )
    select.add_argument("--output", required=True, help="selection manifest to write (JSON)")
    select.set_defaults(func=cmd_select)

    report = sub.add_parser("report", help="print a per-task summary of a manifest")
    report.add_argument("manifest", help="selection manifest written by 'select'")
    report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TaskpickError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
