"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 dataset error,
4 predictor/protocol error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dataset import DatasetManifest, generate_synthetic, load_sample
from .errors import ConfigError, MmmsError
from .protocol import EvalConfig, evaluate_dataset
from .report import emit


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmms",
        description="Benchmark and annotation service for multi-surface interactive segmentation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_eval_common(p):
        p.add_argument("--dataset", required=True, help="dataset directory with manifest.json")
        p.add_argument("--predictor", required=True,
                       help="oracle:FILE | classical | neural[:SEED] | remote:CMD")
        p.add_argument("--max-clicks", type=int, default=20, dest="n_max")
        p.add_argument("--disk-radius", type=float, default=5.0)
        p.add_argument("--mask-threshold", type=float, default=0.5)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--resolution", type=int, default=None,
                       help="working resolution for the neural predictor")
        p.add_argument("--features", default=None,
                       help="feature archive directory for the neural predictor")
        p.add_argument("--timeout", type=float, default=None,
                       help="per-call timeout for remote predictors (seconds)")
        p.add_argument("--out", required=True, help="report path (.json; a .csv twin is written)")

    single = sub.add_parser("eval-single", help="per-surface NoC benchmark")
    add_eval_common(single)
    single.add_argument("--theta-iou", type=float, default=90.0)

    multi = sub.add_parser("eval-multi", help="multi-surface NoCMS/FRMS benchmark")
    add_eval_common(multi)
    multi.add_argument("--theta-iou", type=float, default=80.0)
    multi.add_argument("--theta-avg", type=float, default=70.0)
    multi.add_argument("--seed", type=int, default=None,
                       help="seed for seeded predictors given without one")

    extract = sub.add_parser("extract-features", help="bulk backbone feature extraction")
    extract.add_argument("--dataset", required=True)
    extract.add_argument("--backbone", default="stub:0", help="stub:SEED")
    extract.add_argument("--resolution", type=int, default=None,
                         help="resize images before extraction")
    extract.add_argument("--out", required=True, help="output directory for .mmft files")

    synth = sub.add_parser("gen-synth", help="generate a synthetic shapes dataset")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--count", type=int, required=True)
    synth.add_argument("--surfaces", type=int, default=3)
    synth.add_argument("--overlap", choices=["disjoint", "adjacent"], default="adjacent")
    synth.add_argument("--size", type=int, default=64, help="square canvas side in pixels")
    synth.add_argument("--out", required=True)

    serve = sub.add_parser("serve", help="run the annotation HTTP service")
    serve.add_argument("--dataset", required=True)
    serve.add_argument("--predictor", default="classical")
    serve.add_argument("--theta-iou", type=float, default=80.0)
    serve.add_argument("--theta-avg", type=float, default=70.0)
    serve.add_argument("--max-clicks", type=int, default=20, dest="n_max")
    serve.add_argument("--disk-radius", type=float, default=5.0)
    serve.add_argument("--resolution", type=int, default=None)
    serve.add_argument("--features", default=None)
    serve.add_argument("--static", default=None,
                       help="directory with the UI build (defaults to frontend/dist if present)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _predictor_setup(args, seed=None):
    from .predictors import predictor_factory

    spec = args.predictor
    if seed is not None and spec == "neural":
        spec = f"neural:{seed}"
    factory = predictor_factory(
        spec,
        resolution=args.resolution,
        features_dir=args.features,
        timeout=args.timeout,
        disk_radius=args.disk_radius,
    )
    return factory, spec


def cmd_eval(args, mode: str) -> int:
    manifest = DatasetManifest.load(args.dataset)
    cfg = EvalConfig(
        theta_iou=args.theta_iou,
        theta_avg=getattr(args, "theta_avg", 0.0),
        n_max=args.n_max,
        disk_radius=args.disk_radius,
        mask_threshold=args.mask_threshold,
    )
    factory, label = _predictor_setup(args, getattr(args, "seed", None))
    report = evaluate_dataset(manifest, factory, cfg, mode=mode,
                              workers=args.workers, predictor_label=label)
    out = Path(args.out)
    emit(report, out, "json")
    emit(report, out.with_suffix(".csv"), "csv")
    for name in sorted(report.metrics):
        print(f"{name} = {report.metrics[name]:.4f}")
    if report.errors:
        print(f"{len(report.errors)} image(s) failed with predictor errors", file=sys.stderr)
    print(f"wrote {out} and {out.with_suffix('.csv')}")
    return 0


def cmd_extract_features(args) -> int:
    from .nn import StubBackboneProvider, write_features
    from .nn.config import BackboneConfig

    kind, _, argument = args.backbone.partition(":")
    if kind != "stub":
        raise ConfigError(f"unknown backbone spec {args.backbone!r}; expected stub:SEED")
    seed = int(argument) if argument else 0
    provider = StubBackboneProvider(seed=seed, cfg=BackboneConfig())

    manifest = DatasetManifest.load(args.dataset)
    out_dir = Path(args.out)
    for image_id in manifest.images:
        sample = load_sample(manifest, image_id)
        rgb = sample.rgb
        if args.resolution is not None:
            from .predictors.neural import _resize_raster

            rgb = _resize_raster(rgb, (args.resolution, args.resolution), "bilinear")
        try:
            features = provider.features(rgb, image_id)
        except ValueError as exc:
            raise ConfigError(f"image {image_id!r}: {exc}") from exc
        write_features(out_dir / f"{image_id}.mmft", features)
        print(f"extracted {image_id}")
    print(f"wrote {len(manifest.images)} feature files to {out_dir}")
    return 0


def cmd_gen_synth(args) -> int:
    manifest = generate_synthetic(
        args.out,
        seed=args.seed,
        count=args.count,
        surfaces_per_image=args.surfaces,
        overlap_mode=args.overlap,
        size=(args.size, args.size),
    )
    print(f"wrote {len(manifest.images)} images to {manifest.root}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    manifest = DatasetManifest.load(args.dataset)
    cfg = EvalConfig(theta_iou=args.theta_iou, theta_avg=args.theta_avg,
                     n_max=args.n_max, disk_radius=args.disk_radius)
    static = args.static
    if static is None:
        default_static = Path("frontend/dist")
        static = default_static if default_static.is_dir() else None
    app = create_app(
        manifest,
        predictor_spec=args.predictor,
        default_cfg=cfg,
        static_dir=static,
        resolution=args.resolution,
        features_dir=args.features,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # argparse argument errors already exit with code 2
    try:
        if args.command == "eval-single":
            return cmd_eval(args, "single")
        if args.command == "eval-multi":
            return cmd_eval(args, "multi")
        if args.command == "extract-features":
            return cmd_extract_features(args)
        if args.command == "gen-synth":
            return cmd_gen_synth(args)
        if args.command == "serve":
            return cmd_serve(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except MmmsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
