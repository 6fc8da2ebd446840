"""Command-line entry points: synth, train, eval, predict, serve.

Exit codes: 0 ok, 2 usage/input, 3 config/geometry, 4 IO.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import jsonio
from .config import ABLATION_MODES, PROFILES, TrainConfig, get_profile
from .errors import GeometryError, SchemaError, TrainingError
from .metrics import evaluate_model
from .motion import load_dataset, load_motion, save_manifest, save_motion
from .network import load_checkpoint
from .numkit import Rng
from .server import ApiSession, make_server, prediction_payload
from .synth import synth_generate
from .training import split_dataset, train


def _cmd_synth(args) -> int:
    if args.sequences < 1:
        raise ValueError(f"--sequences must be >= 1, got {args.sequences}")
    profile = get_profile(args.profile)
    os.makedirs(args.out, exist_ok=True)
    seqs = synth_generate(
        Rng(args.seed), profile.skeleton, args.sequences, args.fps,
        min_frames=profile.total_length,
    )
    names = []
    for i, seq in enumerate(seqs):
        name = f"motion_{i:03d}.json"
        save_motion(seq, os.path.join(args.out, name))
        names.append(name)
    manifest = os.path.join(args.out, "manifest.json")
    save_manifest(manifest, names, profile.t_past, profile.t_future, args.stride)
    print(jsonio.dumps({"manifest": manifest, "sequences": len(names)}))
    return 0


def _load_config(args) -> TrainConfig:
    cfg = TrainConfig.load(args.config) if args.config else TrainConfig()
    cfg = cfg.override(
        profile=args.profile,
        epochs=args.epochs,
        batch_size=args.batch_size,
        k_samples=args.k,
        seed=args.seed,
        ablation_mode=args.ablation,
        lr0=args.lr0,
    )
    return cfg


def _cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    if args.resume:
        _, meta = load_checkpoint(args.resume)
        cfg = meta["config"] if meta["config"] is not None else _load_config(args)
        cfg = cfg.override(epochs=args.epochs)
    else:
        cfg = _load_config(args)
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    result = train(
        cfg, dataset, out_path=args.out, resume_from=args.resume,
        log_fn=lambda line: print(jsonio.dumps(line), flush=True),
    )
    if result.heldout_report is not None:
        print(result.heldout_report.to_json())
    return 0


def _cmd_eval(args) -> int:
    model, meta = load_checkpoint(args.ckpt)
    dataset = load_dataset(args.data)
    if args.split == "all":
        windows = dataset.windows
    else:
        train_ws, held_ws = split_dataset(dataset)
        windows = held_ws if args.split == "heldout" else train_ws
        if not windows:
            windows = dataset.windows
    report = evaluate_model(model, windows, mm_threshold=args.mm_threshold, k=args.k)
    print(report.to_json())
    return 0


def _cmd_predict(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    past = load_motion(args.input)
    payload = prediction_payload(model, past, args.k)
    jsonio.dump(payload, args.out)
    print(jsonio.dumps({"out": args.out, "k": int(payload["coefficients"].shape[0])}))
    return 0


def _cmd_serve(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    samples = None
    if args.samples:
        dataset = load_dataset(args.samples)
        samples = [
            (w.source_id, w.past) for w in dataset.windows[: args.sample_count]
        ]
    session = ApiSession(model, samples)
    server = make_server(session, args.port, ui_dir=args.ui)
    print(jsonio.dumps({"serving": f"http://127.0.0.1:{server.server_address[1]}"}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sldmotion",
        description="Diverse, editable human motion prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic motion corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--sequences", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", default="standard", choices=sorted(PROFILES))
    p.add_argument("--fps", type=int, default=25)
    p.add_argument("--stride", type=int, default=5)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model on a dataset manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--ablation", default=None, choices=ABLATION_MODES)
    p.add_argument("--profile", default=None, choices=sorted(PROFILES))
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lr0", type=float, default=None)
    p.add_argument("--resume", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="heldout", choices=("heldout", "train", "all"))
    p.add_argument("--mm-threshold", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="predict K futures for one past motion")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("serve", help="serve prediction and editing over HTTP")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--port", type=int, default=8330)
    p.add_argument("--samples", default=None)
    p.add_argument("--sample-count", type=int, default=8)
    p.add_argument("--ui", default=None)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (GeometryError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SchemaError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
