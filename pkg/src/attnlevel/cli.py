"""Command-line entry points for the whole toolkit."""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys


class CliError(ValueError):
    pass


def _cmd_extract(args) -> int:
    from .depth_sampler import CoordinateMapping
    from .feature_store import persist_features
    from .pipeline import ExtractOptions, extract_features
    from .pose_ingest import load_index_map, to_nose_origin, write_keypoints_csv

    if not os.path.isdir(args.poses):
        raise CliError(f"--poses {args.poses!r} is not a directory")
    if args.depth is not None and not os.path.isdir(args.depth):
        raise CliError(f"--depth {args.depth!r} is not a directory")

    mapping = None
    if args.scale is not None:
        sx, sy = (float(v) for v in args.scale.split(","))
        mapping = CoordinateMapping(scale_x=sx, scale_y=sy)
    rgb_w, rgb_h = (int(v) for v in args.rgb_size.split("x"))

    opts = ExtractOptions(
        tau=args.tau,
        theta_overlap=args.theta_overlap,
        delta_px=args.delta_px,
        rgb_size=(rgb_w, rgb_h),
        mapping=mapping,
        index_map=load_index_map(args.mapping) if args.mapping else None,
        on_degenerate="carry" if args.carry_degenerate else "raise",
    )
    records, keypoint_rows = extract_features(args.poses, args.depth, opts)
    persist_features(records, args.out)
    print(f"wrote {len(records)} feature rows to {args.out}")

    if args.kp_out:
        write_keypoints_csv(keypoint_rows, args.kp_out)
        print(f"wrote canonical keypoints to {args.kp_out}")
    if args.overlay_dir:
        from .plotting import feature_overlay

        os.makedirs(args.overlay_dir, exist_ok=True)
        for set_id, frame in keypoint_rows:
            out = os.path.join(args.overlay_dir, f"{set_id}_{frame.frame_index}_overlay.png")
            feature_overlay(to_nose_origin(frame), out, title=f"{set_id} frame {frame.frame_index}")
        print(f"wrote {len(keypoint_rows)} overlays to {args.overlay_dir}")
    return 0


def _cmd_aggregate(args) -> int:
    from .annotation import aggregate_dataset, render_agreement_table, write_final_labels_csv

    if not os.path.isdir(args.labels):
        raise CliError(f"--labels {args.labels!r} is not a directory")
    checker_abs = os.path.abspath(args.checker) if args.checker else None
    label_files = sorted(
        p
        for p in glob.glob(os.path.join(args.labels, "*.csv"))
        if os.path.abspath(p) != checker_abs
    )
    if len(label_files) != 4:
        raise CliError(f"expected exactly 4 annotator CSVs under {args.labels}, found {len(label_files)}")

    finals, report = aggregate_dataset(label_files, args.checker, window=args.window)
    write_final_labels_csv(finals, args.out)
    report.save_json(args.report)
    print(render_agreement_table(report))
    print(f"wrote {len(finals)} final labels to {args.out}; report to {args.report}")
    return 0


def _load_labeled_features(features_path: str, labels_path: str | None):
    from .annotation import read_final_labels_csv
    from .feature_store import load_features
    from .pipeline import attach_labels

    records = load_features(features_path)
    if labels_path:
        records = attach_labels(records, read_final_labels_csv(labels_path))
    if any(r.label is None for r in records):
        raise CliError("records are unlabeled; pass --labels with a final labels CSV")
    return records


def _cmd_train(args) -> int:
    from .models import TrainConfig, get_spec, save_model, train

    records = _load_labeled_features(args.features, args.labels)
    spec = get_spec(args.spec)
    cfg = TrainConfig(
        seed=args.seed,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
    )
    model = train(spec, records, cfg)
    save_model(model, args.out)
    print(f"trained {spec.name} on {len(records)} records; checkpoint at {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    from .evaluation import cross_validate, make_folds
    from .models import TrainConfig, get_spec

    records = _load_labeled_features(args.features, args.labels)
    spec = get_spec(args.spec)
    cfg = TrainConfig(
        seed=args.seed,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
    )
    plan = make_folds(records, k=args.folds, strategy=args.strategy, seed=args.seed)
    report = cross_validate(spec, records, cfg, plan, with_streams=args.streams)
    report.save_json(args.report)
    print(
        f"{spec.name}: mean accuracy {report.mean_accuracy:.4f} "
        f"(std {report.std_accuracy:.4f}) over {args.folds} folds; report at {args.report}"
    )
    return 0


def _cmd_report(args) -> int:
    from .evaluation import (
        EvalReport,
        render_confusion_text,
        render_per_stream_table,
        render_results_table,
    )

    report = EvalReport.load_json(args.eval)
    if args.render == "table":
        print(render_results_table([report]))
        print()
        print(render_confusion_text(report))
        if report.per_stream:
            print()
            print(render_per_stream_table(report.per_stream))
        return 0
    if not args.render.endswith(".png"):
        raise CliError("--render takes 'table' or a .png output path")
    from .plotting import confusion_figure

    confusion_figure(report.confusion, args.render, title=report.spec_name)
    csv_path = args.render[:-4] + ".csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("truth,pred_low,pred_mid,pred_high\n")
        for name, row in zip(("low", "mid", "high"), report.confusion):
            fh.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")
    print(f"wrote {args.render} and {csv_path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import LabelStore, create_app

    store_path = os.environ.get("ATTN_STORE", args.store)
    port = int(os.environ.get("ATTN_PORT", args.port))
    app = create_app(
        frames_dir=args.frames,
        store=LabelStore(store_path),
        annotators=tuple(args.annotators.split(",")),
        checker_id=args.checker_id,
        checker_mode=args.checker_mode,
        ui_dir=args.ui,
    )
    print(f"serving frames from {args.frames} on port {port} (store: {store_path})")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def _cmd_compact(args) -> int:
    from .service import LabelStore

    if not os.path.exists(args.store):
        raise CliError(f"store {args.store!r} does not exist")
    written = LabelStore(args.store).compact(args.out)
    print(f"wrote {len(written)} annotator CSVs to {args.out}")
    return 0


def _cmd_zoo(args) -> int:
    from .models import zoo_manifest

    manifest = json.dumps(zoo_manifest(), indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(manifest + "\n")
        print(f"wrote model manifest to {args.out}")
    else:
        print(manifest)
    return 0


def _cmd_demo_data(args) -> int:
    from .synthetic import write_depth_fixture, write_pose_fixture, write_vote_fixture

    sets = args.sets.split(",")
    poses = os.path.join(args.out, "poses")
    depth = os.path.join(args.out, "depth")
    votes = os.path.join(args.out, "votes")
    for i, set_id in enumerate(sets):
        write_pose_fixture(poses, set_id=set_id, n_frames=args.frames, seed=args.seed + i)
        write_depth_fixture(depth, set_id=set_id, n_frames=args.frames, seed=args.seed + i)
    write_vote_fixture(votes, sets=sets, frames_per_set=args.frames, seed=args.seed)
    print(f"wrote demo poses/depth/votes for sets {sets} under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnlevel",
        description="Attention-level estimation pipeline and labeling service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="pose JSON + depth maps -> feature CSV")
    p.add_argument("--poses", required=True, help="directory of <set_id>_<frame>.json files")
    p.add_argument("--depth", default=None, help="directory of <set_id>_<frame>_depth.png|raw files")
    p.add_argument("--out", required=True, help="output feature CSV")
    p.add_argument("--mapping", default=None, help="keypoint index map JSON/TOML")
    p.add_argument("--tau", type=float, default=0.1, help="confidence threshold for missing keypoints")
    p.add_argument("--theta-overlap", type=float, default=0.0, help="max Jaccard overlap for merging")
    p.add_argument("--delta-px", type=float, default=10.0, help="max mean shared-keypoint distance for merging")
    p.add_argument("--rgb-size", default="1920x1080", help="RGB image size WxH")
    p.add_argument("--scale", default=None, help="explicit RGB->depth scales 'sx,sy'")
    p.add_argument("--kp-out", default=None, help="also write the canonical keypoint CSV here")
    p.add_argument("--overlay-dir", default=None, help="render keypoint/feature overlays into this directory")
    p.add_argument("--carry-degenerate", action="store_true",
                   help="reuse the previous frame's angles when geometry degenerates")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("aggregate", help="annotator votes -> final labels + agreement report")
    p.add_argument("--labels", required=True, help="directory holding the 4 annotator CSVs")
    p.add_argument("--checker", default=None, help="checker CSV")
    p.add_argument("--out", required=True, help="final labels CSV")
    p.add_argument("--report", required=True, help="agreement report JSON")
    p.add_argument("--window", type=int, default=5, help="median filter window")
    p.set_defaults(func=_cmd_aggregate)

    for name, fn in (("train", _cmd_train), ("evaluate", _cmd_evaluate)):
        p = sub.add_parser(name, help=f"{name} a model configuration")
        p.add_argument("--spec", required=True, help="zoo configuration name (see `attnlevel zoo`)")
        p.add_argument("--features", required=True, help="feature CSV from extract")
        p.add_argument("--labels", default=None, help="final labels CSV from aggregate")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--learning-rate", type=float, default=1e-4)
        p.add_argument("--batch-size", type=int, default=128)
        p.add_argument("--max-epochs", type=int, default=50)
        p.add_argument("--patience", type=int, default=5)
        if name == "train":
            p.add_argument("--out", required=True, help="checkpoint output path")
        else:
            p.add_argument("--folds", type=int, default=4)
            p.add_argument("--strategy", choices=("stratified", "subject"), default="stratified")
            p.add_argument("--report", required=True, help="evaluation report JSON")
            p.add_argument("--streams", action="store_true",
                           help="also compute the per-stream per-class accuracy table")
        p.set_defaults(func=fn)

    p = sub.add_parser("report", help="render an evaluation report")
    p.add_argument("--eval", required=True, help="evaluation report JSON")
    p.add_argument("--render", default="table", help="'table' or a .png path for the confusion matrix")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve", help="run the labeling HTTP service")
    p.add_argument("--frames", required=True, help="directory of <set_id>_<frame>.png|jpg stills")
    p.add_argument("--store", required=True, help="JSONL event log path (env ATTN_STORE overrides)")
    p.add_argument("--port", type=int, default=8000, help="port (env ATTN_PORT overrides)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--annotators", default=",".join(("a1", "a2", "a3", "a4")))
    p.add_argument("--checker-id", default="checker")
    p.add_argument("--checker-mode", action="store_true", help="serve only stage-1-unresolved frames to the checker")
    p.add_argument("--ui", default=None, help="static UI directory to mount at /")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("compact", help="event log -> per-annotator CSVs")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_compact)

    p = sub.add_parser("zoo", help="print the model zoo manifest")
    p.add_argument("--out", default=None, help="write the manifest JSON here instead of stdout")
    p.set_defaults(func=_cmd_zoo)

    p = sub.add_parser("demo-data", help="generate synthetic poses, depth maps and votes")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=50, help="frames per set")
    p.add_argument("--sets", default="s01", help="comma-separated set ids")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_demo_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except Exception as exc:  # every command exits nonzero with one line
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
