"""``hsigeo`` command line.

Exit codes: 0 success, 1 data or processing error, 2 usage error.
Diagnostics go to stderr; results go to files (plus short summaries on stdout).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import geometry, hsi_io, margins, neural_collapse, report
from .errors import HsigeoError
from .fst3d import FstConfig, scatter_cube
from .synth import KINDS, make_synthetic

log = logging.getLogger("hsigeo")


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage = stage
        self.exc = exc
        super().__init__(f"{stage} failed: {exc}")


def _common_flags(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument(
        "--threads",
        type=int,
        default=default(os.cpu_count() or 1),
        help="worker threads (default: available CPUs)",
    )
    parser.add_argument(
        "--seed", type=int, default=default(0), help="random seed for synthetic data"
    )
    parser.add_argument(
        "--out-dir", type=Path, default=default(Path(".")), help="output directory"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsigeo",
        description="Scattering features and class geometry of labeled feature sets.",
    )
    _common_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _common_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="normalize a cube or feature matrix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--cube", type=Path, help="H x W x B cube (.npy)")
    src.add_argument("--features", type=Path, help="n x p feature matrix (.npy)")
    p.add_argument("--labels", type=Path, required=True, help="H x W ground truth or n labels")

    p = sub.add_parser("fst3d", parents=[common], help="3-D Fourier scattering features")
    p.add_argument("--cube", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--config", type=Path, help="JSON scattering config")
    p.add_argument("--out", type=Path, required=True, help="features .npy")
    p.add_argument("--labels-out", type=Path, required=True, help="labels .npy")

    p = sub.add_parser("analyze", parents=[common], help="write a geometry report bundle")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--skip-margins", action="store_true")
    p.add_argument(
        "--weighted-average",
        action="store_true",
        help="weight the average compression curve by class size",
    )
    p.add_argument("--tol", type=float, default=margins.MarginConfig.tol)
    p.add_argument("--max-iter", type=int, default=margins.MarginConfig.max_iter)

    p = sub.add_parser("compare", parents=[common], help="delta matrices of two bundles")
    p.add_argument("base", type=Path)
    p.add_argument("other", type=Path)

    p = sub.add_parser("synth", parents=[common], help="synthetic clustered feature sets")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--m", type=int, required=True, help="class count")
    p.add_argument("--p", type=int, required=True, help="feature dimension")
    p.add_argument("--count", type=int, required=True, help="points per class")
    p.add_argument("--noise", type=float, default=0.0)

    p = sub.add_parser("etf-angle", help="simplex ETF angle for m classes")
    p.add_argument("--classes", type=int, required=True)
    return parser


def _load_feature_set(features, labels) -> hsi_io.FeatureSet:
    return hsi_io.assemble_feature_set(hsi_io.load_array(features), hsi_io.load_array(labels))


def _write_feature_set(fs: hsi_io.FeatureSet, features_path, labels_path) -> None:
    hsi_io.save_array(fs.features, features_path)
    hsi_io.save_array(fs.original_labels().astype(np.int32), labels_path)


def cmd_ingest(args) -> int:
    labels = hsi_io.load_array(args.labels)
    if args.cube is not None:
        cube = hsi_io.LabeledCube(hsi_io.load_array(args.cube), labels)
        fs = hsi_io.flatten_labeled_pixels(cube)
    else:
        fs = hsi_io.assemble_feature_set(hsi_io.load_array(args.features), labels)
    fs = hsi_io.normalize_max_norm(fs)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    _write_feature_set(fs, args.out_dir / "features.npy", args.out_dir / "labels.npy")
    print(f"n={fs.n} p={fs.p} m={fs.m}")
    return 0


def cmd_fst3d(args) -> int:
    cfg = FstConfig.from_json(args.config) if args.config else FstConfig()
    cube = hsi_io.LabeledCube(hsi_io.load_array(args.cube), hsi_io.load_array(args.labels))
    fs = scatter_cube(cube, cfg, threads=args.threads)
    for path in (args.out, args.labels_out):
        path.parent.mkdir(parents=True, exist_ok=True)
    _write_feature_set(fs, args.out, args.labels_out)
    print(f"n={fs.n} p={fs.p} m={fs.m}")
    return 0


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except HsigeoError as exc:
        raise StageError(name, exc) from exc


def analyze_feature_set(fs: hsi_io.FeatureSet, out_dir: Path, *, skip_margins=False,
                        weighted=False, margin_cfg=None, threads=1) -> None:
    """Run every analysis stage on ``fs`` and write the report bundle."""
    if not hsi_io.is_normalized(fs):
        log.warning(
            "features not max-norm normalized (max norm %.12g); normalizing",
            hsi_io.max_row_norm(fs.features),
        )
        fs = _stage("normalize", hsi_io.normalize_max_norm, fs)
    out_dir.mkdir(parents=True, exist_ok=True)

    cm = _stage("class means", geometry.class_means, fs)
    dist = _stage("distances", geometry.mean_distance_matrix, cm)
    ang = _stage("angles", geometry.mean_angle_matrix, cm)
    var = _stage("variability", geometry.class_variability, fs, cm)
    curves = _stage("compression", geometry.compression_curve, fs, weighted=weighted,
                    threads=threads)
    nc = _stage("neural collapse", neural_collapse.nc_report, cm)
    results = None
    if not skip_margins:
        results = _stage("margins", margins.pairwise_margin_results, fs, margin_cfg,
                         threads=threads)

    report.write_means_csv(cm.means, cm.class_ids, out_dir / "means.csv")
    report.write_matrix(dist, out_dir, "dist")
    report.write_matrix(ang, out_dir, "angles")
    report.write_variability_csv(var, cm.counts, cm.class_ids, out_dir / "variability.csv")
    report.write_compression_csv(curves, out_dir / "compression.csv")
    report.render_compression(curves, out_dir / "compression.svg")
    if results is not None:
        report.write_matrix(margins.margin_report(results, fs.class_ids), out_dir, "margins")
        report.write_margins_meta_csv(results, fs.class_ids, out_dir / "margins_meta.csv")
    report.write_nc_csv(nc, out_dir / "nc.csv")


def cmd_analyze(args) -> int:
    fs = _stage("load", _load_feature_set, args.features, args.labels)
    cfg = _stage("margin config", margins.MarginConfig, tol=args.tol, max_iter=args.max_iter)
    analyze_feature_set(
        fs,
        args.out_dir,
        skip_margins=args.skip_margins,
        weighted=args.weighted_average,
        margin_cfg=cfg,
        threads=args.threads,
    )
    print(f"wrote report bundle to {args.out_dir}", file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for stem, kind in (("dist", "distance"), ("angles", "angle_degrees")):
        base = report.read_matrix_csv(args.base / f"{stem}.csv", kind)
        other = report.read_matrix_csv(args.other / f"{stem}.csv", kind)
        report.check_same_classes(base, other, stem)
        delta = geometry.delta_matrix(other, base)
        report.write_matrix(delta, args.out_dir, f"{stem}_delta",
                            title=f"{report.TITLES[kind]}: other minus base")
    return 0


def cmd_synth(args) -> int:
    try:
        X, y = make_synthetic(args.kind, args.m, args.p, args.count, args.noise, args.seed)
    except ValueError as exc:
        print(f"hsigeo synth: {exc}", file=sys.stderr)
        return 2
    args.out_dir.mkdir(parents=True, exist_ok=True)
    hsi_io.save_array(X, args.out_dir / "features.npy")
    hsi_io.save_array(y, args.out_dir / "labels.npy")
    print(f"n={X.shape[0]} p={X.shape[1]} m={args.m}")
    return 0


def cmd_etf_angle(args) -> int:
    print(f"{neural_collapse.etf_angle_degrees(args.classes):.4f}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "fst3d": cmd_fst3d,
    "analyze": cmd_analyze,
    "compare": cmd_compare,
    "synth": cmd_synth,
    "etf-angle": cmd_etf_angle,
}


def main(argv=None) -> int:
    logging.basicConfig(format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        parser.print_usage(sys.stderr)
        print("hsigeo: error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        print(f"hsigeo {args.command}: {exc}", file=sys.stderr)
        return 1
    except (HsigeoError, OSError) as exc:
        print(f"hsigeo {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
