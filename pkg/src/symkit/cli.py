"""Command line entry point: ``symkit <command> [options]``.

Exit codes: 0 success, 1 file-system trouble (missing input, existing
output without ``--force``), 2 malformed input or configuration.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import BACKEND, __version__
from .config import ConfigError, ToolkitConfig, load_config
from .convert import EmptyTrajectory, align_to_gt, convert, load_predictions, parse_vts
from .curation import CurationConfig, curate, load_samples
from .metrics import (
    MODES,
    EvalPair,
    EvalReport,
    LengthMismatch,
    curve_csv,
    evaluate,
    read_report_csv,
    report_csv,
    summary_text,
)
from .boxes import parse_box
from .records import SchemaError
from .simulator import MOTIONS, DEFAULT_GRID, diagnostics_csv, simulate_track, sweep_aie, sweep_csv

DEFAULTS = ToolkitConfig()


def _opt(p, flag, default, help, **kw):
    """Add an option whose effective default comes from the config file."""
    shown = default if not isinstance(default, tuple) else ",".join(str(v) for v in default)
    p.add_argument(flag, default=None, help=f"{help} (default: {shown})", **kw)


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def cmd_curate(args, cfg: ToolkitConfig) -> int:
    if not Path(args.input).is_file():
        print(f"error: input file not found: {args.input}", file=sys.stderr)
        return 1
    base = cfg.curation
    ccfg = CurationConfig(
        output_root=Path(args.out),
        min_length=args.min_length if args.min_length is not None else base.min_length,
        link_mode=args.link_mode or base.link_mode,
        frames_root=Path(args.frames_root) if args.frames_root else base.frames_root,
        frame_template=base.frame_template,
        force=args.force or base.force,
    )
    summary = curate(args.input, ccfg)
    for rej in summary.rejects:
        print(f"rejected {rej}", file=sys.stderr)
    for w in summary.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print("\n".join(summary.lines()))
    return 0


def cmd_convert(args, cfg: ToolkitConfig) -> int:
    src = Path(args.vts)
    if src.is_dir():
        files = sorted(p for p in src.iterdir() if p.suffix in (".jsonl", ".txt", ".json"))
    elif src.is_file():
        files = [src]
    else:
        print(f"error: VTS input not found: {args.vts}", file=sys.stderr)
        return 1
    results = []
    for f in files:
        try:
            results.extend(parse_vts(f))
        except SchemaError as exc:
            raise SchemaError(f"{f}: {exc}") from None
    seen = set()
    for r in results:
        if r.video_id in seen:
            raise SchemaError(f"video {r.video_id} appears in more than one input file")
        seen.add(r.video_id)
    written = convert(results, args.out)
    print(f"videos={len(written)}")
    print(f"files={sum(len(v) for v in written.values())}")
    return 0


def _read_boxes(path: Path):
    return [parse_box(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def build_pairs(pred_root, gt_root) -> list[EvalPair]:
    """Pair every curated sample under ``gt_root`` with its predictions.

    ``<pred_root>/<sample>.txt`` is taken as the sample's own trajectory.
    Otherwise ``<pred_root>/<video_id>/`` is read as converted whole-video
    output and aligned to the sample by mean IoU.
    """
    pred_root, gt_root = Path(pred_root), Path(gt_root)
    if not gt_root.is_dir():
        raise FileNotFoundError(f"ground-truth directory not found: {gt_root}")
    if not pred_root.is_dir():
        raise FileNotFoundError(f"prediction directory not found: {pred_root}")
    pairs = []
    for sample in load_samples(gt_root):
        direct = pred_root / f"{sample.name}.txt"
        if direct.is_file():
            pred = _read_boxes(direct)
            pairs.append(EvalPair(sample.name, sample.boxes, pred, [[b] for b in pred]))
            continue
        video_dir = pred_root / sample.video_id
        preds = load_predictions(video_dir) if video_dir.is_dir() else {}
        try:
            al = align_to_gt(preds, sample.frame_ids, sample.boxes)
        except ValueError as exc:
            raise LengthMismatch(f"{sample.name}: {exc}") from None
        pairs.append(EvalPair(sample.name, sample.boxes, al.boxes, al.pool))
    return pairs


def cmd_evaluate(args, cfg: ToolkitConfig) -> int:
    mode = args.mode or "strict-id"
    report = evaluate(build_pairs(args.pred, args.gt), cfg.metrics, mode)
    text = summary_text(report)
    if args.report:
        out = Path(args.report)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report_csv(report), encoding="utf-8")
        (out / "summary.txt").write_text(text, encoding="utf-8")
        (out / "success_curve.csv").write_text(curve_csv(report), encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_report(args, cfg: ToolkitConfig) -> int:
    path = Path(args.report)
    if path.is_dir():
        path = path / "report.csv"
    rows = read_report_csv(path.read_text(encoding="utf-8"))
    sys.stdout.write(summary_text(EvalReport(args.mode or "report", rows, cfg.metrics)))
    return 0


def _sequence(args, cfg: ToolkitConfig):
    spec = cfg.sequence
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.motion is not None:
        spec = replace(spec, motion=args.motion)
    if args.length is not None:
        spec = replace(spec, length=args.length)
    return spec


def cmd_simulate(args, cfg: ToolkitConfig) -> int:
    spec = _sequence(args, cfg)
    use_aie = (args.aie or "on") == "on"
    result = simulate_track(spec, cfg.aie, use_aie)
    _emit(diagnostics_csv(result), args.csv)
    if args.csv is not None:
        print(f"seed={spec.seed}")
        print(f"aie={'on' if use_aie else 'off'}")
        for k, v in result.summary.items():
            print(f"{k}={v}" if isinstance(v, int) else f"{k}={v:.6f}")
    return 0


def _scale_sets(text: str):
    return tuple(_floats(group) for group in text.split(";") if group.strip())


def cmd_sweep(args, cfg: ToolkitConfig) -> int:
    spec = _sequence(args, cfg)
    taus = _floats(args.taus) if args.taus else DEFAULT_GRID[0]
    scales = _scale_sets(args.scales) if args.scales else DEFAULT_GRID[1]
    alphas = _floats(args.alphas) if args.alphas else DEFAULT_GRID[2]
    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else (spec.seed,)
    rows = sweep_aie(spec, cfg.aie, taus, scales, alphas, seeds)
    _emit(sweep_csv(rows), args.csv)
    if args.csv is not None:
        print(f"cells={len(rows)}")
        print(f"seeds={len(seeds)}")
    return 0


def _grid_text(groups) -> str:
    return ";".join(",".join(str(v) for v in g) for g in groups)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="toolkit config file; falls back to $SYMKIT_CONFIG, then built-in defaults")

    parser = argparse.ArgumentParser(prog="symkit", description="Scene-text tracking toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    cur = DEFAULTS.curation
    p = sub.add_parser("curate", parents=[common], help="turn VTS annotations into SOT samples")
    p.add_argument("--input", required=True, help="annotation lines file")
    p.add_argument("--out", required=True, help="output root for sample directories")
    _opt(p, "--min-length", cur.min_length, "shortest tracklet kept", type=int)
    _opt(p, "--link-mode", cur.link_mode, "how frames are referenced", choices=("relative-manifest", "copy"))
    _opt(p, "--frames-root", cur.frames_root, "image root for copy mode")
    p.add_argument("--force", action="store_true", help="overwrite existing samples (default: False)")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("convert", parents=[common], help="turn VTS output into per-object prediction files")
    p.add_argument("--vts", required=True, help="VTS result lines file, or a directory of them")
    p.add_argument("--out", required=True, help="output root; one directory per video")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against curated samples")
    p.add_argument("--pred", required=True, help="prediction root")
    p.add_argument("--gt", required=True, help="curated sample root")
    _opt(p, "--mode", "strict-id", "matching protocol", choices=MODES)
    p.add_argument("--report", default=None,
                   help="directory for report.csv, summary.txt and success_curve.csv (default: None)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="re-aggregate a saved report.csv")
    p.add_argument("--report", required=True, help="report.csv or the directory holding it")
    _opt(p, "--mode", "report", "label for the mode line")
    p.set_defaults(func=cmd_report)

    seq = DEFAULTS.sequence
    for name, func, helptext in (("simulate", cmd_simulate, "track one synthetic sequence"),
                                 ("sweep", cmd_sweep, "grid over the adaptive-inference knobs")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        _opt(p, "--seed", seq.seed, "sequence seed", type=int)
        _opt(p, "--motion", seq.motion, "motion law", choices=MOTIONS)
        _opt(p, "--length", seq.length, "frames", type=int)
        p.add_argument("--csv", default=None, help="output CSV path; stdout when omitted (default: None)")
        p.set_defaults(func=func)
        if name == "simulate":
            _opt(p, "--aie", "on", "adaptive inference", choices=("on", "off"))
        else:
            _opt(p, "--taus", DEFAULT_GRID[0], "confidence thresholds, comma separated")
            _opt(p, "--scales", _grid_text(DEFAULT_GRID[1]), "scale-factor sets, ';' between sets")
            _opt(p, "--alphas", DEFAULT_GRID[2], "fusion weights, comma separated")
            _opt(p, "--seeds", (seq.seed,), "seeds averaged per cell, comma separated")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (ConfigError, SchemaError, LengthMismatch, EmptyTrajectory) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
