"""Command-line interface: compare, stylize, bench, tile.

Every command resolves a seed (fixed default; `--seed random` opts into
entropy) and prints it to stderr, so runs are reproducible by default.
Numeric output uses 9 significant digits. Exit codes: 0 success, 1 domain
error (dimensions, labels, views), 2 usage or file-format error.
"""

from __future__ import annotations

import argparse
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import ebsw
from .engine import (
    DEFAULT_SEED,
    StylizeJob,
    benchmark_iw_vs_vanilla,
    stylize,
    trace_to_csv,
)
from .errors import FormatError, SwdstyleError
from .features import ExtractorSpec
from .swdloss import LossConfig
from .tensors import (
    FMAP_MAGIC,
    image_to_features,
    load_image,
    load_mask,
    read_fmap,
    save_image,
)
from .tiling import STYLIZERS, load_view_dir, run_multiview_edit, write_view_outputs


def fmt9(v: float) -> str:
    return f"{v:.9g}"


def _resolve_seed(raw: str) -> int:
    if raw == "random":
        return secrets.randbits(63)
    try:
        return int(raw)
    except ValueError as exc:
        raise FormatError(f"--seed must be an integer or 'random', got {raw!r}") from exc


def _resolve_threads(args) -> int:
    raw = args.threads if args.threads is not None else os.environ.get(
        "SWDSTYLE_THREADS", "1"
    )
    threads = int(raw)
    if threads < 1:
        raise SwdstyleError("--threads must be >= 1")
    return threads


def _load_points(path: str, kind: str) -> np.ndarray:
    """Rows of a feature file or of an image's layer-0 features."""
    if kind == "auto":
        with open(path, "rb") as fh:
            head = fh.read(8)
        kind = "fmap" if head == FMAP_MAGIC else "image"
    if kind == "fmap":
        return read_fmap(path).data
    return image_to_features(load_image(path)).data


def cmd_compare(args) -> int:
    seed = _resolve_seed(args.seed)
    print(f"seed {seed}", file=sys.stderr)
    kind = "fmap" if args.fmap else ("image" if args.image else "auto")
    mu = ebsw.DiscreteMeasure(_load_points(args.a, kind))
    nu = ebsw.DiscreteMeasure(_load_points(args.b, kind))
    if args.mode == "importance":
        value, weights = ebsw.is_ebsw(
            mu, nu, args.p, args.projections, ebsw.EnergyFunction("exponential"), seed
        )
        print(f"value,{fmt9(value)}")
        for i, w in enumerate(weights):
            print(f"weight,{i},{fmt9(w)}")
    else:
        value = ebsw.sw_hat(mu, nu, args.p, args.projections, seed)
        print(f"value,{fmt9(value)}")
    return 0


def cmd_stylize(args) -> int:
    seed = _resolve_seed(args.seed)
    print(f"seed {seed}", file=sys.stderr)
    content = load_image(args.content)
    styles = tuple(load_image(p) for p in args.style)
    config = LossConfig(
        mode=args.mode,
        projection_fraction=args.proj_frac,
        content_weight=args.content_weight,
        exclude_label=args.exclude_label,
    )
    job = StylizeJob(
        content=content,
        styles=styles,
        config=config,
        content_mask=load_mask(args.mask) if args.mask else None,
        style_mask=load_mask(args.style_mask) if args.style_mask else None,
        iterations=args.iters,
        step_size=args.lr,
        seed=seed,
    )
    final, trace = stylize(job)
    save_image(final, args.out)
    if args.trace:
        trace_to_csv(trace, args.trace)
    print(f"final,{fmt9(trace.rows[-1].total)}")
    print(f"out,{args.out}")
    return 0


def cmd_bench(args) -> int:
    seed = _resolve_seed(args.seed)
    print(f"seed {seed}", file=sys.stderr)
    content = load_image(args.content)
    style = load_image(args.style)
    result = benchmark_iw_vs_vanilla(
        content, style, iterations=args.iters, seed=seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace_to_csv(result.uniform_trace, out / "uniform.csv")
    trace_to_csv(result.importance_trace, out / "importance.csv")
    summary = result.summary_lines()
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    for line in summary:
        print(line)
    return 0


def cmd_tile(args) -> int:
    seed = _resolve_seed(args.seed)
    print(f"seed {seed}", file=sys.stderr)
    views, sources = load_view_dir(args.views)
    stylizer = STYLIZERS[args.stylizer]()
    styled = run_multiview_edit(views, args.prompt, stylizer, seed)
    manifest = write_view_outputs(styled, sources, args.out, args.prompt, seed)
    print(f"views,{len(styled)}")
    print(f"manifest,{manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swdstyle",
        description="Sliced-Wasserstein distribution-matching stylization toolkit",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap worker threads (default: SWDSTYLE_THREADS env or 1)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="sliced distance between two inputs")
    p.add_argument("a")
    p.add_argument("b")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--fmap", action="store_true", help="inputs are FMAP files")
    grp.add_argument("--image", action="store_true", help="inputs are images")
    p.add_argument("--projections", type=int, default=128)
    p.add_argument("--mode", choices=("uniform", "importance"), default="uniform")
    p.add_argument("--seed", default=str(DEFAULT_SEED))
    p.add_argument("--p", type=float, default=2.0, help="transport order")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser(
        "stylize",
        help="optimize an image toward style targets",
        epilog="trace CSV header: iteration,total,layer_<id>...,ms "
        "(ms = loss-kernel wall time per iteration)",
    )
    p.add_argument("--content", required=True)
    p.add_argument("--style", action="append", required=True,
                   help="style image; repeat for one style per mask label")
    p.add_argument("--mask", default=None, help="content region mask (8-bit PNG/PGM)")
    p.add_argument("--style-mask", default=None)
    p.add_argument("--exclude-label", type=int, default=None)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--mode", choices=("uniform", "importance"), default="importance")
    p.add_argument("--proj-frac", type=float, default=0.05)
    p.add_argument("--content-weight", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None, help="per-iteration CSV trace path")
    p.add_argument("--seed", default=str(DEFAULT_SEED))
    p.set_defaults(func=cmd_stylize)

    p = sub.add_parser(
        "bench",
        help="uniform full budget vs importance at 5%",
        epilog="writes uniform.csv and importance.csv (header: "
        "iteration,total,layer_<id>...,ms) plus summary.txt "
        "(mean_loss_ms_*, speedup, final_swd_*, parity)",
    )
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--iters", type=int, default=1500)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", default=str(DEFAULT_SEED))
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tile", help="tiled-reference multi-view stylization")
    p.add_argument("--views", required=True, help="dir of <id>.png + <id>.depth.png")
    p.add_argument("--prompt", required=True)
    p.add_argument("--stylizer", choices=sorted(STYLIZERS), default="identity")
    p.add_argument("--seed", default=str(DEFAULT_SEED))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = _resolve_threads(args)
        print(f"threads {threads}", file=sys.stderr)
        return args.func(args)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SwdstyleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
