"""Command-line entry points: generate, train, track, eval, plot.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .datagen import generate_corpus
from .evaluation import evaluate_tracking, make_init_pose, run_tracking, gt_surface_samples
from .metrics import FrameMetrics, SequenceReport, chamfer, d_corr, d_nocs, evaluate_frames
from .pipeline import CheckpointError, load_checkpoint
from .predictions import read_predictions, write_predictions
from .synth.dataset_io import DatasetFormatError, list_sequences, read_dataset
from .tracker import AlignmentError, read_init_pose
from .train import DivergenceError, train
from . import plots

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _data_root(path: str) -> Path:
    """Resolve a data path, honoring the GT_DATA_ROOT override."""
    root = os.environ.get("GT_DATA_ROOT")
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def cmd_generate(args) -> int:
    config = _load_config(args)
    if args.instances < 1:
        raise DatasetFormatError("zero sequences requested (need at least one instance)")
    out = _data_root(args.out)
    generate_corpus(config, out, args.instances)
    (out / "config.json").write_text(config.to_json())
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args)
    data = _data_root(args.data)
    seq_dirs = list_sequences(data)
    if not seq_dirs:
        raise DatasetFormatError(f"no sequences under {data}")
    sequences = [read_dataset(d) for d in seq_dirs]

    models, start_epoch = None, 0
    if args.resume:
        models, ckpt_config, start_epoch = load_checkpoint(args.resume)
        config = ckpt_config
        if args.epochs:
            config.epochs = args.epochs
    elif args.epochs:
        config.epochs = args.epochs
    ckpt = train(config, sequences, args.out, models=models, start_epoch=start_epoch)
    print(f"checkpoint written to {ckpt}")
    return EXIT_OK


def cmd_track(args) -> int:
    models, config, _ = load_checkpoint(args.checkpoint)
    if args.noise_level:
        config.noise_level = args.noise_level
    sequence = read_dataset(_data_root(args.sequence))

    if args.init_mode == "external_file":
        if not args.init_pose:
            raise AlignmentError("--init-pose is required with init mode external_file")
        pose = read_init_pose(args.init_pose)
    else:
        pose = make_init_pose(sequence, args.init_mode)

    outputs = run_tracking(models, config, sequence, init_pose=pose, seed=config.seed)
    out = write_predictions(
        outputs,
        args.out,
        extra_manifest={"sequence": str(args.sequence), "init_mode": args.init_mode, "seed": config.seed},
    )
    mean_times = {
        k: float(np.mean([o.timings[k] for o in outputs])) for k in outputs[0].timings
    }
    print(f"tracked {len(outputs)} frames -> {out}")
    for stage, t in mean_times.items():
        print(f"  {stage}: {t * 1000:.1f} ms/frame")
    return EXIT_OK


def _evaluate_prediction_dir(pred_dir: Path, gt_dir: Path, thresholds) -> SequenceReport:
    pred = read_predictions(pred_dir)
    gt = read_dataset(gt_dir)
    if len(pred["frames"]) != len(gt.frames) - 1:
        raise DatasetFormatError(
            f"prediction has {len(pred['frames'])} frames, ground truth expects {len(gt.frames) - 1}"
        )
    gt_nocs_pts, gt_task_per_frame = gt_surface_samples(gt, n=len(pred["frames"][0]["surface_nocs"]))
    frame_metrics = []
    for pf, frame, gt_task in zip(pred["frames"], gt.frames[1:], gt_task_per_frame[1:]):
        frame_metrics.append(
            FrameMetrics(
                d_nocs=d_nocs(pf["pred_nocs"], frame.gt_nocs[pf["indices"]]),
                d_chamf=chamfer(pf["surface_task"], gt_task),
                d_corr=d_corr(pf["surface_task"], pf["surface_nocs"], gt_task, gt_nocs_pts),
            )
        )
    return evaluate_frames(frame_metrics, thresholds)


def cmd_eval(args) -> int:
    thresholds = tuple(args.thresholds)
    report = _evaluate_prediction_dir(Path(args.pred), _data_root(args.gt), thresholds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / "report.json")

    with open(out / "frames.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "d_nocs", "d_chamf_cm", "d_corr_cm"])
        for i, f in enumerate(report.frames, start=1):
            writer.writerow([i, f"{f.d_nocs:.6f}", f"{f.d_chamf:.4f}", f"{f.d_corr:.4f}"])

    plots.metric_vs_frame(report, out / "metrics_vs_frame.png")
    print(f"report -> {out / 'report.json'}")
    print(
        f"mean d_nocs {report.mean_d_nocs:.4f}  d_chamf {report.mean_d_chamf:.2f} cm  "
        f"d_corr {report.mean_d_corr:.2f} cm  " + "  ".join(f"{k}={v:.1%}" for k, v in report.accuracy.items())
    )
    return EXIT_OK


def cmd_plot(args) -> int:
    sweep = {}
    for item in args.reports:
        if "=" not in item:
            raise ConfigError(f"expected label=path, got {item!r}")
        label, path = item.split("=", 1)
        sweep[label] = SequenceReport.load(path)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plots.sweep_curves(sweep, out / f"{args.label}_means.png", xlabel=args.label)
    plots.accuracy_curves(sweep, out / f"{args.label}_accuracy.png", xlabel=args.label)
    print(f"curves -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clothtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train all stages jointly")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="run the tracker over one sequence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sequence", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init-mode", choices=("ground_truth", "perturbed", "external_file"), default="ground_truth")
    p.add_argument("--init-pose", help="pose exchange dir for external_file mode")
    p.add_argument("--noise-level", choices=("1x", "2x", "3x"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--thresholds", type=float, nargs="+", default=[3.0, 5.0, 10.0])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="sweep curves from saved reports")
    p.add_argument("--reports", nargs="+", required=True, metavar="LABEL=PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--label", default="condition")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetFormatError, AlignmentError, CheckpointError, FileNotFoundError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as e:
        print(f"divergence: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
