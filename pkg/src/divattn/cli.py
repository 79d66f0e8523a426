"""Command-line entry point: ``divattn <subcommand> ...``.

Failures print a single line ``error code=<CODE> <message>`` to stderr.
Exit status: 0 success, 2 usage, 3 data/format, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import Hyperparams, load_config, parse_pairs, apply_pairs
from .core import make_rng
from .errors import DivattnError, DivergenceError, FormatError, ShapeError
from .evaluation import Gallery, evaluate
from .gradcheck import grad_check, random_instance
from .io import (
    load_checkpoint, read_feature_grid, save_checkpoint, write_heatmap_csv,
    write_temporal_csv, write_video_dir, pgm_text,
)
from .model import describe
from .sampling import first_frame_sample, restricted_random_sample
from .synthetic import SyntheticSpec, make_synthetic
from .train import embed_videos, load_split_dir, load_splits, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
GRADCHECK_TOL = 1e-4


class UsageError(DivattnError):
    code = "USAGE"
    exit_status = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(code: str, message: str, status: int) -> int:
    print(f"error code={code} {' '.join(str(message).split())}", file=sys.stderr)
    return status


def cmd_train(args) -> int:
    hyper, run = load_config(args.config)
    out = Path(args.out or run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    splits = load_splits(run, hyper)
    try:
        result = train(hyper, splits, run, metrics_path=out / run.metrics)
    except DivergenceError as exc:
        if exc.last_good is not None:
            save_checkpoint(out / run.checkpoint, *exc.last_good)
        raise
    save_checkpoint(out / run.checkpoint, result.params, result.state)
    last = result.rows[-1] if result.rows else None
    if last:
        print(f"epochs={hyper.epochs} loss={last['loss']:.6f} rank1={last['rank1']:.4f} mAP={last['mAP']:.4f}")
    print(f"checkpoint={out / run.checkpoint} metrics={out / run.metrics}")
    return EXIT_OK


def _parse_dims(text: str | None) -> dict:
    if not text:
        return {}
    dims = {}
    for item in text.split(","):
        key, _, value = item.partition("=")
        if key not in ("N", "K", "L", "D", "d", "E", "C") or not value.isdigit():
            raise UsageError(f"bad --dims entry {item!r}; expected e.g. N=4,K=2,L=6")
        dims[key] = int(value)
    return dims


def cmd_gradcheck(args) -> int:
    rng = make_rng(args.seed)
    dims = _parse_dims(args.dims)
    worst = 0.0
    print("instance,group,max_rel_error")
    for i in range(args.instances):
        inst = random_instance(rng, penalty=args.penalty, **dims)
        report = grad_check(inst.params, inst, args.eps, seed=args.seed + i)
        for name, err in report.items():
            print(f"{i},{name},{err:.3e}")
            worst = max(worst, err)
    ok = worst < GRADCHECK_TOL
    print(f"worst={worst:.3e} tol={GRADCHECK_TOL:.0e} {'PASS' if ok else 'FAIL'}")
    if not ok:
        return _fail("GRADCHECK", f"max relative error {worst:.3e} exceeds {GRADCHECK_TOL:.0e}", EXIT_NUMERIC)
    return EXIT_OK


def _embed_dir(directory, ckpt):
    videos, grid = load_split_dir(directory)
    h = ckpt.hyper
    if grid is not None and grid != (h.grid_h, h.grid_w):
        raise FormatError(f"{directory}: grid {grid} does not match checkpoint {h.grid_h}x{h.grid_w}",
                          code="GRID_MISMATCH")
    embs, _ = embed_videos(videos, ckpt.params)
    return Gallery(embs, [v.label for v in videos], [v.camera for v in videos])


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    gallery = _embed_dir(args.gallery, ckpt)
    probes = _embed_dir(args.probes, ckpt)
    curve, mAP = evaluate(probes, gallery, args.k_max)
    lines = ["k,accuracy"] + [f"{k},{acc!r}" for k, acc in enumerate(curve.tolist(), 1)] + [f"mAP,{mAP!r}"]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_attend(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    h = ckpt.hyper
    frames, grid = read_feature_grid(args.video)
    if grid != (h.grid_h, h.grid_w) or frames.shape[2] != h.D:
        raise FormatError(f"video grid {grid}x{frames.shape[2]} does not match checkpoint "
                          f"{h.grid_h}x{h.grid_w}x{h.D}", code="GRID_MISMATCH")
    idx = first_frame_sample(frames.shape[0], h.N)
    desc, S, _ = describe(frames[idx], ckpt.params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_heatmap_csv(out / "heatmaps.csv", S)
    for n in range(S.shape[0]):
        for k in range(S.shape[1]):
            (out / f"field_n{n}_k{k}.pgm").write_text(pgm_text(S[n, k], grid))
    write_temporal_csv(out / "temporal_weights.csv", desc.temporal_weights)
    print(f"frames={' '.join(map(str, idx))} heatmaps={out / 'heatmaps.csv'} temporal={out / 'temporal_weights.csv'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec()
    try:
        text = Path(args.spec).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {args.spec}: {exc.strerror}", code="IO") from None
    apply_pairs([spec], parse_pairs(text))
    ds = make_synthetic(spec)
    out = Path(args.out)
    probes, gallery = ds.probes_and_gallery()
    for name, videos in (("train", ds.split("train")), ("probes", probes), ("gallery", gallery)):
        write_video_dir(out / name, videos, ds.grid_shape)
    print(f"train={len(ds.split('train'))} probes={len(probes)} gallery={len(gallery)} out={out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.first:
        idx = first_frame_sample(args.frames, args.chunks)
    else:
        idx = restricted_random_sample(args.frames, args.chunks, make_rng(args.seed))
    print(" ".join(map(str, idx)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="divattn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train from a key = value config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="output directory (overrides out_dir)")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("gradcheck", help="finite-difference check on random tiny instances")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dims", help="fix dimensions, e.g. N=4,K=2,L=6,D=5,d=3,E=4,C=3")
    g.add_argument("--eps", type=float, default=1e-5)
    g.add_argument("--instances", type=int, default=1)
    g.add_argument("--penalty", choices=("Q", "Qprime", "none"), default="Q")
    g.set_defaults(func=cmd_gradcheck)

    e = sub.add_parser("eval", help="CMC and mAP of a checkpoint on probe/gallery directories")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--gallery", required=True)
    e.add_argument("--probes", required=True)
    e.add_argument("--k-max", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("attend", help="export receptive fields and temporal weights for one video")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--video", required=True)
    a.add_argument("--out", default="attention")
    a.set_defaults(func=cmd_attend)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("sample", help="restricted random frame sampling")
    r.add_argument("--frames", type=int, required=True)
    r.add_argument("--chunks", type=int, default=Hyperparams.N)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--first", action="store_true", help="first frame of each chunk (test-time)")
    r.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except DivattnError as exc:
        status = exc.exit_status
        if isinstance(exc, (FormatError, ShapeError)):
            status = EXIT_DATA
        return _fail(exc.code, exc, status)
    except FloatingPointError as exc:
        return _fail("NUMERIC", exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
