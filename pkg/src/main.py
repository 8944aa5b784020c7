"""Command-line entry point for the HOG-FDA pipeline.

Every sub-command reads the artifacts of the previous stage from ``--out`` and
writes its own there, so stages can be run and inspected one at a time::

    hogfda simulate --out run/
    hogfda ingest --input run/synthetic.csv --out run/
    hogfda features --out run/
    ...
    hogfda pipeline --synthetic --seed 7 --out run/
"""

import argparse
import sys
from io import BytesIO
from pathlib import Path
from typing import Callable, Optional

import structlog
from dotenv import load_dotenv

from src.clustering.calendar import calendar_table
from src.config.pipeline import PipelineConfig, load_config
from src.config.settings import settings
from src.errors import ArgumentError, DataError, HogFdaError
from src.fda.curves import FourierBasis
from src.features.hog import build_feature_matrix
from src.ingest.csv_reader import parse_long_csv, write_long_csv
from src.ingest.missing import handle_missing
from src.logging import Stage, StageTimer, configure_logging
from src.pipeline import stages
from src.pipeline.runner import run_pipeline
from src.state.models import DayCollection
from src.state.store import ArtifactStore
from src.synth.generator import generate

logger = structlog.get_logger()

SYNTHETIC_CSV = "synthetic.csv"
GROUND_TRUTH_JSON = "ground_truth.json"
INGEST_REPORT_JSON = "ingest_report.json"


# ============================================================================
# Stage commands
# ============================================================================


def _long_csv_bytes(collection: DayCollection) -> bytes:
    data = BytesIO()
    write_long_csv(collection, data)
    return data.getvalue()


def _read_input(args: argparse.Namespace, cfg: PipelineConfig, workers: int) -> DayCollection:
    if args.synthetic:
        with StageTimer(Stage.SIMULATE):
            collection, _ = generate(cfg.synth_config(), workers)
        return collection
    if args.input is None:
        raise ArgumentError("--input is required unless --synthetic is given")
    if not args.input.is_file():
        raise DataError(f"input file {args.input} does not exist", stage=Stage.INGEST.value)
    with StageTimer(Stage.INGEST):
        with open(args.input, "rb") as f:
            return parse_long_csv(f, cfg.grid, provenance=str(args.input))


def cmd_simulate(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    with StageTimer(Stage.SIMULATE):
        collection, truth = generate(cfg.synth_config(), workers)
    store.put_bytes(SYNTHETIC_CSV, _long_csv_bytes(collection))
    store.put_json(GROUND_TRUTH_JSON, truth)
    logger.info("synthetic city generated", days=len(collection), path=str(store.path(SYNTHETIC_CSV)))


def cmd_ingest(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    raw = _read_input(args, cfg, workers)
    with StageTimer(Stage.MISSING):
        days, report = handle_missing(raw, cfg.policy, workers)
    store.put_bytes(stages.DAYS_CSV, _long_csv_bytes(days))
    store.put_json(INGEST_REPORT_JSON, report)


def cmd_features(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    days = stages.load_days(store, cfg)
    with StageTimer(Stage.FEATURES, days=len(days)):
        features = build_feature_matrix(days, cfg.hog, workers)
    store.put_csv(stages.FEATURES_CSV, stages.features_frame(features))


def cmd_cluster_days(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    features = stages.load_features(store)
    with StageTimer(Stage.CLUSTER_DAYS):
        clusters = stages.cluster_days(features, cfg, workers)
    store.put_json(stages.DAY_CLUSTERS_JSON, clusters)
    if store.path(stages.DAYS_CSV).is_file():
        days = stages.load_days(store, cfg)
        store.put_csv("calendar.csv", calendar_table(days, clusters.labels()).to_frame())


def cmd_ddp(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    days = stages.load_days(store, cfg)
    with StageTimer(Stage.DDP):
        curves = stages.ddp_curves(days, cfg.roi)
    store.put_csv(stages.DDP_CSV, stages.curves_frame(curves))


def cmd_outliers(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    curves = stages.load_curves(store)
    clusters = stages.load_day_clusters(store)
    with StageTimer(Stage.OUTLIERS):
        found = stages.trim_outliers(curves, clusters, cfg.outliers, cfg.seed, workers)
    store.put_json(stages.OUTLIERS_JSON, found)


def cmd_smooth(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    curves = stages.load_curves(store)
    outliers = stages.load_outliers(store)
    with StageTimer(Stage.SMOOTH):
        basis = FourierBasis.build(cfg.fda.n_basis, cfg.grid.quarters_per_day)
        smoothed = stages.smooth_kept(curves, outliers, basis)
    store.put_csv(stages.SMOOTHED_CSV, stages.smoothed_frame(smoothed))


def cmd_fda_cluster(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    smoothed = stages.load_smoothed(store, cfg)
    outliers = stages.load_outliers(store)
    with StageTimer(Stage.FDA_CLUSTER):
        fda = stages.fda_subclusters(smoothed, outliers, cfg.fda, cfg.seed, workers)
    store.put_json(stages.FDA_CLUSTERS_JSON, fda)


def cmd_fboxplot(args: argparse.Namespace, cfg: PipelineConfig, store: ArtifactStore, workers: int):
    curves = stages.load_curves(store)
    fda = stages.load_fda(store)
    with StageTimer(Stage.FBOXPLOT):
        boxes = stages.boxplots(curves, fda, cfg.boxplot)
    store.put_json(stages.FBOXPLOT_JSON, boxes)


COMMANDS: dict[str, Callable] = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "features": cmd_features,
    "cluster-days": cmd_cluster_days,
    "ddp": cmd_ddp,
    "outliers": cmd_outliers,
    "smooth": cmd_smooth,
    "fda-cluster": cmd_fda_cluster,
    "fboxplot": cmd_fboxplot,
}


# ============================================================================
# Argument parsing
# ============================================================================


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config document")
    common.add_argument("--seed", type=int, help="Master seed (overrides the config)")
    common.add_argument("--out", type=Path, required=True, help="Output directory")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    common.add_argument(
        "--workers", type=int, help=f"Worker threads (default {settings.workers})"
    )
    common.add_argument("--synthetic", action="store_true", help="Use the synthetic city as input")
    common.add_argument("--input", type=Path, help="Long CSV of grid counts")
    common.add_argument("--k", type=int, dest="force_k", help="Force k, skipping the elbow")
    common.add_argument(
        "--policy.max-gap", type=int, dest="max_gap", help="Longest interpolated gap, quarters"
    )
    common.add_argument(
        "--policy.drop-fraction",
        type=float,
        dest="drop_fraction",
        help="Drop days missing more than this fraction after interpolation",
    )

    parser = argparse.ArgumentParser(
        prog="hogfda",
        description="Profile daily presence dynamics from grid-aggregated counts",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "pipeline"]:
        sub.add_parser(name, parents=[common])
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "seed": args.seed,
        "kmeans.force_k": args.force_k,
        "policy.max_gap_quarters": args.max_gap,
        "policy.drop_fraction": args.drop_fraction,
    }


def run(args: argparse.Namespace) -> int:
    synthetic = args.synthetic or args.command == "simulate"
    cfg = load_config(args.config, _overrides(args), synthetic=synthetic)
    workers = args.workers or settings.workers
    if workers < 1:
        raise ArgumentError(f"--workers must be at least 1, got {workers}")

    if args.command == "pipeline":
        report = run_pipeline(cfg, args.out, args.input, args.synthetic, workers)
        summary = ", ".join(f"cluster {c.label}: K={c.K}" for c in report.clusters)
        print(f"k={report.elbow.k}; {summary}")
        return 0

    store = ArtifactStore(args.out)
    COMMANDS[args.command](args, cfg, store, workers)
    store.commit()
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(quiet=args.quiet)
    try:
        return run(args)
    except HogFdaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
