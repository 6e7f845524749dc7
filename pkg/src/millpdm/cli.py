"""Command-line interface: one subcommand per workflow stage plus ``run``.

Exit codes: 0 ok, 2 usage, 3 data/schema error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .errors import MissingArtifact, NotATreeModel, PdmError, StageError
from .models import FAMILIES, ModelConfig, load_model
from .pipeline import (
    OUT_ENV,
    RunConfig,
    ShapSettings,
    TuneSettings,
    Workspace,
    emit_figures,
    load_prepared,
    load_source,
    resolve_out_dir,
    run_pipeline,
    stage_evaluate,
    stage_explain,
    stage_faults,
    stage_preprocess,
    stage_select,
    stage_train,
    stage_tune,
)

logger = logging.getLogger("millpdm")

EXIT_OK = 0
EXIT_USAGE = 2


def _set_threads(n: int) -> None:
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _json_arg(text: str) -> dict:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from None
    if not isinstance(value, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return value


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./out)")
    p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it (default: 1)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target", choices=("severity", "binary"), default="severity", help="regression target (default: severity)")
    p.add_argument("--test-fraction", type=float, default=0.2, help="held-out fraction (default: 0.2)")
    p.add_argument("--seed", type=int, default=42, help="split and model seed (default: 42)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="millpdm", description="Predictive-maintenance workflow on AI4I 2020-style data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="validate a CSV, fix the train/test split and fit the standardizer")
    p.add_argument("csv", nargs="?", help="AI4I CSV; omit with --simulate to use generated data")
    p.add_argument("--simulate", type=int, metavar="ROWS", help="use ROWS generated records instead of a CSV")
    p.add_argument("--simulate-seed", type=int, default=2020, help="generator seed (default: 2020)")
    _data_args(p)
    _common(p)

    p = sub.add_parser("corr", help="Pearson correlation matrix as corr.csv + corr.svg")
    p.add_argument("csv", help="AI4I CSV")
    _common(p)

    p = sub.add_parser("train", help="fit one or all model families on the training split")
    p.add_argument("--model", default="all", choices=("all",) + FAMILIES, help="family to fit (default: all)")
    p.add_argument("--params", type=_json_arg, default={}, help='hyperparameter overrides as JSON, e.g. \'{"max_depth": 4}\'')
    p.add_argument("--seed", type=int, default=None, help="model seed (default: the ingest seed)")
    _common(p)

    p = sub.add_parser("tune", help="k-fold CV grid or random search")
    p.add_argument("--model", default="regularized_boosting", choices=FAMILIES, help="family to tune (default: regularized_boosting)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--grid", dest="method", action="store_const", const="grid", help="full Cartesian grid (default)")
    mode.add_argument("--random", dest="method", action="store_const", const="random", help="seeded random draws")
    p.add_argument("--space", type=_json_arg, default=None, help="candidate lists as JSON (default: n_estimators x max_depth)")
    p.add_argument("--fixed", type=_json_arg, default=None, help="overrides applied to every candidate, JSON")
    p.add_argument("--budget", type=int, default=20, help="random-search draws (default: 20)")
    p.add_argument("--k", type=int, default=5, help="folds (default: 5)")
    p.add_argument("--seed", type=int, default=42, help="fold and sampling seed (default: 42)")
    p.set_defaults(method="grid")
    _common(p)

    p = sub.add_parser("evaluate", help="score trained models on the test split and rank them")
    _common(p)

    p = sub.add_parser("explain", help="SHAP values for a trained model")
    p.add_argument("--model", default="best", help="family or 'best' (default: best)")
    p.add_argument("--method", choices=("auto", "tree", "kernel", "exact"), default="auto", help="SHAP route (default: auto)")
    p.add_argument("--background", type=int, default=100, help="background rows (default: 100)")
    p.add_argument("--queries", type=int, default=500, help="test rows to explain (default: 500)")
    p.add_argument("--budget", type=int, default=None, help="kernel coalition budget (default: all coalitions)")
    p.add_argument("--seed", type=int, default=42, help="background and query seed (default: 42)")
    _common(p)

    p = sub.add_parser("faults", help="multi-label fault classification with one regressor per flag")
    p.add_argument("--model", default="best-ensemble", help="family or 'best-ensemble' (default)")
    p.add_argument("--threshold", type=float, default=0.5, help="score threshold for a raised flag (default: 0.5)")
    _common(p)

    p = sub.add_parser("report", help="emit figures and report.md from existing artifacts")
    p.add_argument("--bins", type=int, default=30, help="residual histogram bins (default: 30)")
    _common(p)

    p = sub.add_parser("run", help="full pipeline from a JSON config")
    p.add_argument("--config", default=None, help="RunConfig JSON (default: built-in defaults)")
    p.add_argument("--data", default=None, help="override the config's data path")
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    _common(p)

    p = sub.add_parser("simulate", help="write an AI4I-style CSV from the built-in generator")
    p.add_argument("output", help="CSV path")
    p.add_argument("--rows", type=int, default=10000, help="records (default: 10000)")
    p.add_argument("--seed", type=int, default=2020, help="generator seed (default: 2020)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    return parser


# -------------------------------------------------------------- commands


def _cmd_ingest(args, ws: Workspace) -> None:
    if (args.csv is None) == (args.simulate is None):
        raise _Usage("give exactly one of CSV or --simulate ROWS")
    cfg = RunConfig(
        data=args.csv,
        simulate_rows=args.simulate or 10000,
        simulate_seed=args.simulate_seed,
        target=args.target,
        test_fraction=args.test_fraction,
        seed=args.seed,
    )
    prep = stage_preprocess(ws, cfg)
    print(f"{prep.dataset.rows} rows, {len(prep.train)} train / {len(prep.test)} test -> {ws.root}")


def _cmd_corr(args, ws: Workspace) -> None:
    from . import plots
    from .stats import pearson_matrix

    d, _ = load_source(args.csv)
    fig = plots.correlation_heatmap(pearson_matrix(d), ws.root)
    print(f"wrote {fig.csv} and {fig.svg}")


def _cmd_train(args, ws: Workspace) -> None:
    prep = load_prepared(ws)
    seed = args.seed if args.seed is not None else ws.read_json("ingest.json")["seed"]
    families = FAMILIES if args.model == "all" else (args.model,)
    if args.params and args.model == "all":
        raise _Usage("--params needs a single --model")
    configs = {fam: ModelConfig.create(fam, seed=seed, **(args.params if fam == args.model else {})) for fam in families}
    stage_train(ws, prep, configs, args.threads)
    for fam in families:
        print(f"{fam} -> {ws.path(ws.model_path(fam))}")


def _cmd_tune(args, ws: Workspace) -> None:
    prep = load_prepared(ws)
    defaults = TuneSettings()
    grid = args.space if args.space is not None else defaults.grid
    fixed = args.fixed if args.fixed is not None else (defaults.fixed if args.model == "regularized_boosting" else {})
    settings = TuneSettings(family=args.model, method=args.method, k=args.k, budget=args.budget, seed=args.seed, grid=grid, fixed=fixed)
    result = stage_tune(ws, prep, settings, args.seed, args.threads)
    print(f"best {result.best_params} mean CV RMSE {result.best_mean_rmse:.6g} over {len(result.params)} configs")


def _trained(ws: Workspace) -> dict:
    models = {}
    for fam in FAMILIES:
        p = ws.path(ws.model_path(fam))
        if p.exists():
            models[fam] = load_model(p)
    if not models:
        raise MissingArtifact(f"no trained models under {ws.path('models')}; run `millpdm train` first")
    return models


def _cmd_evaluate(args, ws: Workspace) -> None:
    prep = load_prepared(ws)
    reports = stage_evaluate(ws, prep, _trained(ws))
    stage_select(ws, reports)
    width = max(len(r.model) for r in reports)
    print(f"{'model':<{width}}  {'RMSE':>9}  {'MAE':>9}  {'R2':>8}")
    for r in reports:
        print(f"{r.model:<{width}}  {r.rmse:9.5f}  {r.mae:9.5f}  {r.r2:8.4f}")


def _cmd_explain(args, ws: Workspace) -> None:
    prep = load_prepared(ws)
    family = ws.read_json("selection.json")["best"] if args.model == "best" else args.model
    model = load_model(ws.require(ws.model_path(family)))
    settings = ShapSettings(method=args.method, background=args.background, queries=args.queries, seed=args.seed, kernel_budget=args.budget)
    try:
        matrix, _ = stage_explain(ws, prep, model, settings)
    except NotATreeModel as exc:
        raise NotATreeModel(f"{exc}; rerun with --method kernel (model-agnostic)") from None
    ranking = ws.read_json("shap_summary.json")["ranking"]
    print(f"{matrix.method} SHAP for {family} on {len(matrix)} rows; ranking by mean |phi|:")
    for item in ranking:
        print(f"  {item['feature']:<26} {item['mean_abs_shap']:.6g}")


def _cmd_faults(args, ws: Workspace) -> None:
    prep = load_prepared(ws)
    family = args.model
    if family == "best-ensemble":
        family = ws.read_json("selection.json")["best_ensemble"]
    config = ModelConfig.create(family, seed=ws.read_json("ingest.json")["seed"])
    labels = stage_faults(ws, prep, config, args.threshold, args.threads)
    for name, m in labels.items():
        print(f"{name}: precision {m.precision:.3f} recall {m.recall:.3f} F1 {m.f1:.3f} (support {m.support})")


def _cmd_report(args, ws: Workspace) -> None:
    figures = emit_figures(ws, bins=args.bins)
    lines = ["# Run report", ""]
    sel = ws.read_json("selection.json")
    lines += [f"Best model: **{sel['best_display']}** (`{sel['best']}`)", "", "## Test-set metrics", ""]
    header, *rows = _csv_rows(ws.require("metrics.csv"))
    lines += ["| " + " | ".join(header) + " |", "|" + " --- |" * len(header)]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    if ws.path("tuning.json").exists():
        t = ws.read_json("tuning.json")
        lines += ["", "## Tuning", "", f"{t['method']} search on `{t['family']}`, {t['k']}-fold CV: best {t['best_params']} (mean RMSE {t['best_mean_rmse']:.6g})"]
    if ws.path("shap_summary.json").exists():
        s = ws.read_json("shap_summary.json")
        lines += ["", "## SHAP ranking", ""]
        lines += [f"{i + 1}. {r['feature']}: {r['mean_abs_shap']:.6g}" for i, r in enumerate(s["ranking"])]
    if ws.path("faults.json").exists():
        f = ws.read_json("faults.json")
        lines += ["", f"## Fault flags (`{f['family']}`)", ""]
        lines += [f"- {k}: F1 {v['f1']:.3f}" for k, v in f["labels"].items()]
    lines += ["", "## Figures", ""] + [f"- {fig.name}: `{fig.svg.name}`, `{fig.csv.name}`" for fig in figures]
    path = ws.write_text("report.md", "\n".join(lines) + "\n")
    print(f"wrote {path} and {len(figures)} figures")


def _csv_rows(path: Path) -> list[list[str]]:
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [rows[0]] + [[r[0]] + [f"{float(v):.5g}" for v in r[1:]] for r in rows[1:]]


def _cmd_run(args, ws: Workspace | None) -> None:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.data:
        cfg.data = args.data
    cfg.threads = args.threads
    if args.out or os.environ.get(OUT_ENV):
        cfg.out_dir = str(resolve_out_dir(args.out))
    if args.print_config:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return
    manifest = run_pipeline(cfg)
    print(f"config {manifest.config_hash[:12]}: {len(manifest.artifacts())} artifacts in {cfg.out_dir}")
    for name, stage in manifest.stages.items():
        print(f"  {name:<10} {stage['seconds']:7.2f}s")


def _cmd_simulate(args, ws) -> None:
    from .dataset import write_ai4i
    from .simulate import simulate_ai4i

    path = write_ai4i(simulate_ai4i(args.rows, args.seed), args.output)
    print(f"wrote {args.rows} rows to {path}")


COMMANDS = {
    "ingest": _cmd_ingest,
    "corr": _cmd_corr,
    "train": _cmd_train,
    "tune": _cmd_tune,
    "evaluate": _cmd_evaluate,
    "explain": _cmd_explain,
    "faults": _cmd_faults,
    "report": _cmd_report,
    "run": _cmd_run,
    "simulate": _cmd_simulate,
}


class _Usage(Exception):
    pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", category=UserWarning)
    threads = getattr(args, "threads", 1)
    if threads < 1:
        parser.error("--threads must be >= 1")
    _set_threads(threads)
    ws = None
    if args.command not in ("run", "simulate"):
        ws = Workspace(resolve_out_dir(args.out))
    try:
        COMMANDS[args.command](args, ws)
    except _Usage as exc:
        parser.error(str(exc))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except PdmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
