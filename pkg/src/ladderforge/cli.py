"""Command-line entry point: ``ladderforge <command> ...``.

Exit status is 0 on success, 2 for bad input (unreadable or malformed files,
incomplete grids, undefined results) and 1 for anything else. Diagnostics go
to stderr; results go to the named output files or stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys
from pathlib import Path

import numpy as np

from . import rcn
from .analysis import classification_metrics, siti
from .core import HullMatrix, Ladder, rq_grid_from_csv, rq_grid_to_csv
from .curves import bd_rate
from .errors import FormatError, LadderError
from .estimators import ihull_estimate, plan_from_prediction
from .fixtures import BROAD, NARROW, make_corpus
from .geometry import ground_truth_hull
from .simencoder import EncoderModel, ShotComplexity, default_encoder_model, simulate_grid, simulated_encoder, synth_shot_frames

YLUM_MAGIC = b"YLUM"
RANGES = {"broad": BROAD, "narrow": NARROW}


class UsageError(LadderError):
    pass


def write_ylum(path, frames) -> None:
    """Write ``(n, h, w)`` uint8 luma as a YLUM container."""
    f = np.asarray(frames)
    if f.dtype != np.uint8 or f.ndim != 3:
        raise FormatError("YLUM frames must be uint8 shaped (frames, height, width)")
    n, h, w = f.shape
    with open(path, "wb") as fh:
        fh.write(YLUM_MAGIC + struct.pack("<III", w, h, n))
        fh.write(np.ascontiguousarray(f).tobytes())


def read_ylum(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != YLUM_MAGIC:
        raise FormatError(f"{path}: not a YLUM file")
    w, h, n = struct.unpack("<III", data[4:16])
    if len(data) != 16 + w * h * n:
        raise FormatError(f"{path}: expected {16 + w * h * n} bytes for {n} frames of {w}x{h}, found {len(data)}")
    if n < 1 or w < 1 or h < 1:
        raise FormatError(f"{path}: empty video")
    return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(n, h, w)


def _workers() -> int:
    raw = os.environ.get("LADDERFORGE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _complexity(text: str) -> ShotComplexity:
    try:
        s, t = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--complexity expects 'spatial,temporal', got {text!r}") from None
    return ShotComplexity(s, t)


def _size(text: str):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size expects WIDTHxHEIGHT, got {text!r}") from None
    return w, h


def _encoder(path):
    if path is None:
        return default_encoder_model()
    return EncoderModel.from_json(Path(path).read_text())


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _train_config(args) -> rcn.TrainConfig:
    d = rcn.TrainConfig()
    return rcn.TrainConfig(
        stride=args.stride or d.stride,
        chunk=args.chunk or d.chunk,
        batch=args.batch or d.batch,
        epochs=args.epochs or d.epochs,
        seed=d.seed if args.seed is None else args.seed,
    )


def _load_corpus(directory):
    shots = []
    for video in sorted(Path(directory).glob("*.ylum")):
        label = video.with_suffix(".json")
        if not label.exists():
            raise UsageError(f"{video}: no matching hull file {label.name}")
        shots.append(rcn.TrainingShot(read_ylum(video), HullMatrix.from_json(label.read_text()), video.stem))
    if not shots:
        raise UsageError(f"{directory}: no .ylum shots found")
    sizes = {s.frames.shape[1:] for s in shots}
    if len(sizes) != 1:
        raise UsageError(f"{directory}: shots have different frame sizes {sorted(sizes)}")
    return shots


def _progress(epoch, loss):
    print(f"epoch {epoch + 1}: loss {loss:.5f}", file=sys.stderr)


# commands

def cmd_hull(args):
    grid = rq_grid_from_csv(Path(args.rq).read_text())
    matrix, ladder = ground_truth_hull(grid)
    Path(args.out).write_text(matrix.to_json() + "\n")
    ladder_path = Path(args.ladder) if args.ladder else Path(args.out).with_suffix(".ladder.json")
    ladder_path.write_text(ladder.to_json() + "\n")
    return 0


def cmd_bdrate(args):
    ref = Ladder.from_json(Path(args.ref).read_text())
    test = Ladder.from_json(Path(args.test).read_text())
    print(f"{bd_rate(ref, test):.2f}")
    return 0


def cmd_ihull(args):
    model = _encoder(args.encoder)
    c = _complexity(args.complexity)
    grid, cost = simulate_grid(model, c, shot_id=args.shot_id)
    _, truth = ground_truth_hull(grid)
    matrix, ladder, report = ihull_estimate(
        simulated_encoder(model, c), reference=truth, exhaustive_time=cost.seconds, workers=_workers()
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "hull.json").write_text(HullMatrix(args.shot_id, matrix.space, matrix.bits).to_json() + "\n")
    (out / "ladder.json").write_text(ladder.to_json() + "\n")
    (out / "report.json").write_text(report.to_json() + "\n")
    return 0


def cmd_simulate(args):
    model = _encoder(args.encoder)
    if args.what == "grid":
        grid, _ = simulate_grid(model, _complexity(args.complexity), shot_id=args.shot_id)
        _emit(rq_grid_to_csv(grid).rstrip("\n"), args.out)
    elif args.what == "shot":
        if not args.out:
            raise UsageError("simulate shot needs --out")
        c = _complexity(args.complexity)
        w, h = _size(args.size)
        write_ylum(args.out, synth_shot_frames(model, c, w, h, args.frames, args.seed or 0))
        if args.hull:
            grid, _ = simulate_grid(model, c, shot_id=args.shot_id)
            Path(args.hull).write_text(ground_truth_hull(grid)[0].to_json() + "\n")
    else:  # corpus
        if not args.out:
            raise UsageError("simulate corpus needs --out")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        shots = make_corpus(args.count, args.seed or 0, RANGES[args.ranges], model, _size(args.size), args.frames)
        for s in shots:
            write_ylum(out / f"{s.shot_id}.ylum", s.frames)
            (out / f"{s.shot_id}.json").write_text(s.target.to_json() + "\n")
    return 0


def cmd_train(args):
    corpus = _load_corpus(args.corpus)
    n, h, w = corpus[0].frames.shape
    cfg = _train_config(args)
    model = rcn.RCNModel(rcn.ModelConfig(input_size=(w, h)), seed=cfg.seed)
    rcn.fit(model, corpus, cfg, lr=args.lr, callback=_progress)
    Path(args.out).write_bytes(rcn.weights_save(model))
    return 0


def cmd_finetune(args):
    corpus = _load_corpus(args.corpus)
    _, h, w = corpus[0].frames.shape
    cfg = _train_config(args)
    with open(args.model, "rb") as fh:
        model = rcn.model_from_weights(fh, input_size=(w, h))
    rcn.fine_tune(model, corpus, cfg, lr=args.lr, trainable_blocks=args.trainable_blocks, callback=_progress)
    Path(args.out).write_bytes(rcn.weights_save(model))
    return 0


def cmd_predict(args):
    video = read_ylum(args.video)
    _, h, w = video.shape
    threshold = 0.5 if args.threshold is None else args.threshold
    with open(args.model, "rb") as fh:
        model = rcn.model_from_weights(fh, input_size=(w, h), threshold=threshold)
    d = rcn.TrainConfig()
    pred = rcn.predict_shot(model, video, args.stride or d.stride, args.chunk or d.chunk,
                            shot_id=args.shot_id or Path(args.video).stem)
    _emit(pred.to_json(), args.out)
    return 0


def cmd_metrics(args):
    pred_dir, truth_dir = Path(args.pred), Path(args.truth)
    names = sorted(p.name for p in truth_dir.glob("*.json"))
    missing = [n for n in names if not (pred_dir / n).exists()]
    if not names or missing:
        raise UsageError(f"no predictions for {missing[:3]}" if missing else f"{truth_dir}: no hull files")
    truths = [HullMatrix.from_json((truth_dir / n).read_text()) for n in names]
    preds = [HullMatrix.from_json((pred_dir / n).read_text()) for n in names]
    report = classification_metrics(preds, truths, n_bootstrap=args.bootstrap, seed=args.seed or 0)
    _emit(report.to_json(), args.out)
    return 0


def cmd_siti(args):
    _emit(json.dumps(siti(read_ylum(args.video)).to_dict()), None)
    return 0


def cmd_plan(args):
    _emit(plan_from_prediction(HullMatrix.from_json(Path(args.hull).read_text())).to_json(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    ap = argparse.ArgumentParser(prog="ladderforge", description="Per-shot bitrate ladder tools.", formatter_class=fmt)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hull", help="ground truth hull of a complete RQ grid", formatter_class=fmt)
    p.add_argument("action", choices=["compute"])
    p.add_argument("--rq", required=True, help="RQ grid CSV")
    p.add_argument("--out", required=True, help="hull matrix JSON")
    p.add_argument("--ladder", help="ladder JSON (default: <out>.ladder.json)")
    p.set_defaults(func=cmd_hull)

    p = sub.add_parser("bdrate", help="BD-rate of a test ladder against a reference", formatter_class=fmt)
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("ihull", help="interpolation hull estimate on the simulated encoder", formatter_class=fmt)
    p.add_argument("--encoder", help="encoder model JSON (default: bundled model)")
    p.add_argument("--complexity", default="1,1", help="spatial,temporal multipliers")
    p.add_argument("--shot-id", default="sim")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ihull)

    p = sub.add_parser("simulate", help="simulated RQ grids, clips and corpora", formatter_class=fmt)
    p.add_argument("what", choices=["grid", "shot", "corpus"])
    p.add_argument("--encoder", help="encoder model JSON (default: bundled model)")
    p.add_argument("--complexity", default="1,1", help="spatial,temporal multipliers")
    p.add_argument("--shot-id", default="sim")
    p.add_argument("--size", default="96x54", help="frame size WIDTHxHEIGHT")
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--count", type=int, default=10, help="corpus size")
    p.add_argument("--ranges", choices=sorted(RANGES), default="broad", help="corpus complexity ranges")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hull", help="also write the shot's ground truth hull here (shot)")
    p.add_argument("--out", help="output file or directory (grid: stdout when omitted)")
    p.set_defaults(func=cmd_simulate)

    for name, func, text in (("train", cmd_train, "train a model from scratch"),
                             ("finetune", cmd_finetune, "fine-tune the last blocks of a model")):
        p = sub.add_parser(name, help=text, formatter_class=fmt)
        p.add_argument("--corpus", required=True, help="directory of <id>.ylum + <id>.json pairs")
        p.add_argument("--out", required=True, help="weights file to write")
        p.add_argument("--epochs", type=int, default=None, help="default 30")
        p.add_argument("--batch", type=int, default=None, help="default 8")
        p.add_argument("--lr", type=float, default=None, help="default 1e-4 (train) or 1e-5 (finetune)")
        p.add_argument("--seed", type=int, default=None, help="default 7")
        p.add_argument("--stride", type=int, default=None, help="default 5")
        p.add_argument("--chunk", type=int, default=None, help="default 3")
        if name == "finetune":
            p.add_argument("--model", required=True, help="pretrained weights")
            p.add_argument("--trainable-blocks", type=int, default=2)
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="predict a shot's hull matrix", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--threshold", type=float, default=None, help="default 0.5")
    p.add_argument("--stride", type=int, default=None, help="default 5")
    p.add_argument("--chunk", type=int, default=None, help="default 3")
    p.add_argument("--seed", type=int, default=None, help="accepted for symmetry; prediction is deterministic")
    p.add_argument("--shot-id", default=None)
    p.add_argument("--out", help="hull JSON (stdout when omitted)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("metrics", help="precision/recall/F1 of predicted hulls", formatter_class=fmt)
    p.add_argument("--pred", required=True, help="directory of predicted hull JSON files")
    p.add_argument("--truth", required=True, help="directory of ground truth hull JSON files")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("siti", help="spatial and temporal information of a clip", formatter_class=fmt)
    p.add_argument("--video", required=True)
    p.set_defaults(func=cmd_siti)

    p = sub.add_parser("plan", help="encode jobs for a predicted hull", formatter_class=fmt)
    p.add_argument("--hull", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LadderError, OSError) as exc:
        print(f"ladderforge {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"ladderforge {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
