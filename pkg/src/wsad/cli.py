"""Command-line driver: gen-synth, train, eval, score, ablate.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import feature_store as fs
from .ablation import run_ablation, summarize, write_ablation_csv
from .checkpoint import load_checkpoint
from .errors import DataError, NumericError
from .evaluator import evaluate_model, export_timeline, score_bag, write_metrics
from .labels import dump_labels
from .loss import LossConfig
from .trainer import TrainConfig, train

log = logging.getLogger("wsad")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class _Formatter(argparse.HelpFormatter):
    """Show the default of every flag that has one."""

    def _get_help_string(self, action):
        text = action.help or ""
        if action.default not in (None, argparse.SUPPRESS, False) and "%(default)" not in text:
            text += " (default: %(default)s)"
        return text


def _checked(kind, name, test, requirement):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a {kind.__name__}, got {text!r}") from None
        if not test(value):
            raise argparse.ArgumentTypeError(f"{name} must be {requirement}")
        return value

    return parse


def positive_float(name):
    return _checked(float, name, lambda v: v > 0, "positive")


def nonneg_float(name):
    return _checked(float, name, lambda v: v >= 0, ">= 0")


def positive_int(name):
    return _checked(int, name, lambda v: v > 0, "positive")


def nonneg_int(name):
    return _checked(int, name, lambda v: v >= 0, ">= 0")


def unit_interval(name):
    return _checked(float, name, lambda v: 0 <= v < 1, "in [0, 1)")


def seed_list(text):
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None
    if not seeds or min(seeds) < 0:
        raise argparse.ArgumentTypeError("seeds must be a non-empty list of non-negative integers")
    return seeds


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--lr", type=positive_float("lr"), default=d.lr, help="Adam learning rate")
    p.add_argument("--lambda", dest="lam", type=nonneg_float("lambda"), default=d.loss.lam, help="weight of the cluster distance loss")
    p.add_argument("--alpha", type=positive_float("alpha"), default=d.loss.alpha, help="cap on the normal-video distance loss")
    p.add_argument("--epochs", type=positive_int("epochs"), default=d.epochs, help="passes over the training set")
    p.add_argument("--seed", type=nonneg_int("seed"), default=d.seed, help="seed for init, shuffling and dropout")
    p.add_argument("--hidden", type=positive_int("hidden"), default=d.hidden, help="hidden layer width")
    p.add_argument("--dropout", type=unit_interval("dropout"), default=d.dropout, help="dropout rate after the hidden layer")
    p.add_argument("--recluster-every", type=positive_int("recluster-every"), default=d.recluster_every, help="epochs between re-clustering")
    p.add_argument("--pseudo-warmup", type=nonneg_int("pseudo-warmup"), default=d.pseudo_warmup,
                   help="epochs of all-ones targets for anomalous videos before pseudo-labels take over")
    p.add_argument("--no-pseudo", action="store_true", help="label every segment of an anomalous video 1")
    p.add_argument("--no-lc", action="store_true", help="drop the cluster distance loss")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        recluster_every=args.recluster_every,
        use_pseudo=not args.no_pseudo,
        use_lc=not args.no_lc,
        pseudo_warmup=args.pseudo_warmup,
        loss=LossConfig(lam=args.lam, alpha=args.alpha),
        hidden=args.hidden,
        dropout=args.dropout,
    )


def build_parser() -> argparse.ArgumentParser:
    fmt = _Formatter
    parser = _Parser(prog="wsad", description="Weakly supervised anomaly scoring with clustered pseudo-labels.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-synth", help="write a synthetic train/test corpus", formatter_class=fmt)
    d = fs.SynthConfig()
    g.add_argument("--out", required=True, type=Path, help="output directory (train/ and test/ are created inside)")
    g.add_argument("--seed", type=nonneg_int("seed"), default=d.seed, help="corpus seed")
    g.add_argument("--videos-normal", type=positive_int("videos-normal"), default=d.num_normal_videos, help="normal training videos")
    g.add_argument("--videos-anomalous", type=positive_int("videos-anomalous"), default=d.num_anomalous_videos, help="anomalous training videos")
    g.add_argument("--test-normal", type=positive_int("test-normal"), default=10, help="normal test videos")
    g.add_argument("--test-anomalous", type=positive_int("test-anomalous"), default=10, help="anomalous test videos")
    g.add_argument("--dim", type=positive_int("dim"), default=d.feature_dim, help="feature dimension")
    g.add_argument("--sep", type=nonneg_float("sep"), default=d.class_separation, help="distance between class means")
    g.add_argument("--sigma", type=positive_float("sigma"), default=d.noise_sigma, help="per-coordinate noise")
    g.add_argument("--seg-min", type=positive_int("seg-min"), default=d.segment_count_range[0], help="fewest segments per video")
    g.add_argument("--seg-max", type=positive_int("seg-max"), default=d.segment_count_range[1], help="most segments per video")
    g.add_argument("--burst-min", type=positive_int("burst-min"), default=d.anomaly_burst_range[0], help="shortest anomalous burst, in segments")
    g.add_argument("--burst-max", type=positive_int("burst-max"), default=d.anomaly_burst_range[1], help="longest anomalous burst, in segments")
    g.add_argument("--frames-per-seg", type=positive_int("frames-per-seg"), default=d.frames_per_segment, help="frames per segment")

    t = sub.add_parser("train", help="train a model", formatter_class=fmt)
    t.add_argument("--data", required=True, type=Path, help="dataset directory with manifest.tsv")
    t.add_argument("--out", required=True, type=Path, help="checkpoint path")
    t.add_argument("--report", type=Path, help="per-epoch loss log (JSON lines)")
    t.add_argument("--debug-labels", type=Path, help="directory for per-video label CSVs from the last epoch")
    _add_training_flags(t)

    e = sub.add_parser("eval", help="frame-level AUC on a test set", formatter_class=fmt)
    e.add_argument("--data", required=True, type=Path, help="test dataset directory")
    e.add_argument("--truth", required=True, type=Path, help="directory of per-video truth files")
    e.add_argument("--ckpt", required=True, type=Path, help="checkpoint to evaluate")
    e.add_argument("--out", required=True, type=Path, help="metrics JSON")
    e.add_argument("--timelines", type=Path, help="directory for per-video frame score CSVs")

    s = sub.add_parser("score", help="segment scores for one feature file", formatter_class=fmt)
    s.add_argument("--ckpt", required=True, type=Path, help="checkpoint to score with")
    s.add_argument("--features", required=True, type=Path, help="video feature file")
    s.add_argument("--out", required=True, type=Path, help="CSV with segment_index,score")

    a = sub.add_parser("ablate", help="train and evaluate every loss/label variant", formatter_class=fmt)
    a.add_argument("--data", required=True, type=Path, help="training dataset directory")
    a.add_argument("--truth", required=True, type=Path, help="truth directory of the test set")
    a.add_argument("--test", type=Path, help="test dataset directory (default: the parent of --truth)")
    a.add_argument("--seeds", required=True, type=seed_list, help="comma-separated training seeds")
    a.add_argument("--out", required=True, type=Path, help="CSV with variant,seed,auc")
    _add_training_flags(a)
    return parser


def cmd_gen_synth(args) -> None:
    base = fs.SynthConfig(
        num_normal_videos=args.videos_normal,
        num_anomalous_videos=args.videos_anomalous,
        feature_dim=args.dim,
        segment_count_range=(args.seg_min, args.seg_max),
        anomaly_burst_range=(args.burst_min, args.burst_max),
        class_separation=args.sep,
        noise_sigma=args.sigma,
        frames_per_segment=args.frames_per_seg,
        seed=args.seed,
    )
    base.validate()
    test = fs.SynthConfig(**{**base.__dict__, "num_normal_videos": args.test_normal, "num_anomalous_videos": args.test_anomalous})
    fs.generate_synthetic(base, args.out / "train", "train")
    fs.generate_synthetic(test, args.out / "test", "test")
    print(f"wrote {args.out / 'train'} and {args.out / 'test'}")


def cmd_train(args) -> None:
    cfg = _train_config(args)
    print(json.dumps(cfg.to_dict(), sort_keys=True))
    hook = None
    if args.debug_labels is not None:
        args.debug_labels.mkdir(parents=True, exist_ok=True)
        last = cfg.epochs - 1

        def hook(epoch, vid, scores, clusters, pseudo, y):
            if epoch == last:
                dump_labels(args.debug_labels / f"{vid}.csv", scores, clusters, pseudo, y)

    report = train(fs.load_manifest(args.data), cfg, checkpoint_path=args.out, on_labels=hook)
    if args.report is not None:
        report.write(args.report)
    final = report.epochs[-1]
    print(f"epoch {final.epoch}: L={final.mean_L:.6f} Lr={final.mean_Lr:.6f} Lc={final.mean_Lc:.6f}")


def cmd_eval(args) -> None:
    ckpt = load_checkpoint(args.ckpt)
    auc, series = evaluate_model(ckpt.params, fs.load_manifest(args.data), args.truth)
    write_metrics(args.out, auc, sum(len(s.scores) for s in series))
    if args.timelines is not None:
        args.timelines.mkdir(parents=True, exist_ok=True)
        for s in series:
            export_timeline(s, args.timelines / f"{s.video_id}.csv")
    print(f"frame AUC {auc:.6f}")


def cmd_score(args) -> None:
    ckpt = load_checkpoint(args.ckpt)
    bag = fs.read_video_features(args.features)
    scores = score_bag(ckpt.params, bag)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment_index", "score"])
        for j, v in enumerate(scores):
            w.writerow([j, repr(float(v))])


def cmd_ablate(args) -> None:
    test_dir = args.test if args.test is not None else args.truth.parent
    rows = run_ablation(fs.load_manifest(args.data), _train_config(args), args.seeds, fs.load_manifest(test_dir), args.truth)
    write_ablation_csv(rows, args.out)
    for variant, auc in summarize(rows).items():
        print(f"{variant}: mean AUC {auc:.4f}")


COMMANDS = {
    "gen-synth": cmd_gen_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "score": cmd_score,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
