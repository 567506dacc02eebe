"""Command-line front end.

Usage: ``saabkit <gen|extract|fit|analyze|curve|viz|roundtrip|convergence> [flags]``.
Exit status is 0 on success, 2 on usage errors and 1 on data/runtime errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, io, residuals, training, transforms, viz
from .errors import SaabkitError

ORDERINGS = ("native", "energy", "zigzag")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _add_training_flags(p):
    p.add_argument("--epsilon", type=float, default=training.DEFAULT_EPSILON)
    p.add_argument("--delta-m", type=_positive_int, default=training.DEFAULT_DELTA_M)
    p.add_argument("--max-samples", type=_positive_int, default=training.DEFAULT_MAX_SAMPLES)
    p.add_argument("--scale", type=float, default=training.DEFAULT_SCALE,
                   help="divide samples by this before accumulation (use 1 for extracted residuals)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saabkit", description="Block transform energy-compaction toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize AR(1) residual blocks")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("extract", help="intra-prediction residuals of an image plane")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("pgm", "y4m"))
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--channel", choices=residuals.CHANNELS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=("planar", "dc", "horizontal", "vertical"), required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit a kernel and write it with its trace")
    p.add_argument("--kind", choices=("dct", "klt", "saab"), required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--plan")
    p.add_argument("--in", dest="input")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="trace CSV path (default: <out>.trace.csv)")
    p.add_argument("--seed", type=int, help="recorded in the kernel metadata")
    _add_training_flags(p)

    for name, helptext in (("analyze", "DC/AC/total energy table"), ("curve", "cumulative AC energy curves")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--in", dest="input", required=True, help="block file")
        p.add_argument("--kernel", action="append", required=True, help="kernel file (repeatable)")
        p.add_argument("--out", required=True)
        if name == "curve":
            p.add_argument("--ordering", choices=ORDERINGS, default="energy")

    p = sub.add_parser("viz", help="render basis functions as a PGM grid")
    p.add_argument("--in", dest="input", required=True, help="kernel file")
    p.add_argument("--columns", type=_positive_int, default=8)
    p.add_argument("--top", type=_positive_int)
    p.add_argument("--ordering", choices=ORDERINGS, default="native")
    p.add_argument("--out", required=True)

    p = sub.add_parser("roundtrip", help="max reconstruction error of forward then inverse")
    p.add_argument("--kernel", required=True)
    p.add_argument("--in", dest="input", required=True, help="block file")
    p.add_argument("--out")

    p = sub.add_parser("convergence", help="covariance convergence trace of a block file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_training_flags(p)
    return parser


def _cmd_gen(args, parser):
    if args.n not in transforms.BLOCK_SIZES:
        parser.error(f"--n must be one of {transforms.BLOCK_SIZES}")
    bs = residuals.synth_ar1(args.rho, args.sigma, args.n, args.count, args.seed)
    io.save_blocks(bs, args.out)


def _cmd_extract(args, parser):
    plane = residuals.load_plane(args.input, args.format, args.frame, args.channel)
    bs = residuals.extract_residuals(plane, args.n, args.mode)
    io.save_blocks(bs, args.out)


def _cmd_fit(args, parser):
    if args.kind != "dct" and not args.input:
        parser.error(f"--in is required for --kind {args.kind}")
    if args.kind == "dct" and args.n is None and not args.input:
        parser.error("--n is required for --kind dct without --in")
    blocks = io.load_blocks(args.input) if args.input else None
    n = args.n if args.n is not None else blocks.n
    if blocks is not None and blocks.n != n:
        raise SaabkitError(f"--n {n} does not match the block file (n={blocks.n})")
    plan = transforms.parse_plan(args.plan, n) if args.plan else None
    params = training.ConvergenceParams(args.epsilon, args.delta_m, args.max_samples, args.scale)
    label = Path(args.input).name if args.input else "analytic"
    report = training.fit_pipeline(blocks, args.kind, plan, params, n=n, label=label)
    meta = {
        "sample_count": report.sample_count,
        "epsilon": params.epsilon,
        "delta_m": params.delta_m,
        "source": report.source,
        "seed": args.seed,
    }
    io.save_kernel(report.kernel, args.out, meta)
    trace_path = args.trace or str(Path(args.out).with_suffix("")) + ".trace.csv"
    io.atomic_write(trace_path, training.traces_to_csv(report.stage_traces))


def _load_kernels(paths, n):
    kernels = [io.load_kernel(p) for p in paths]
    for p, k in zip(paths, kernels):
        if k.n != n:
            raise SaabkitError(f"kernel {p} is {k.n}x{k.n} but the blocks are {n}x{n}")
    return kernels


def _cmd_analyze(args, parser):
    blocks = io.load_blocks(args.input)
    tables = [analysis.energy_table(k, blocks) for k in _load_kernels(args.kernel, blocks.n)]
    doc = analysis.compare_report([], tables)
    io.atomic_write(args.out, doc.table_csv())


def _cmd_curve(args, parser):
    blocks = io.load_blocks(args.input)
    curves = [
        analysis.cumulative_ac_curve(k, blocks, args.ordering)
        for k in _load_kernels(args.kernel, blocks.n)
    ]
    doc = analysis.compare_report(curves)
    io.atomic_write(args.out, doc.curve_csv())


def _cmd_viz(args, parser):
    k = io.load_kernel(args.input)
    if isinstance(k, transforms.KltKernel):
        raise SaabkitError("viz renders DCT and Saab kernels only")
    if args.ordering == "energy":
        order = analysis.order_from_energies(k.energies)
    else:
        order = analysis.order_coeffs(k, strategy=args.ordering)
    img = viz.basis_grid(k, args.columns, order, args.top)
    io.save_pgm(img, args.out)


def _cmd_roundtrip(args, parser):
    k = io.load_kernel(args.kernel)
    if isinstance(k, transforms.KltKernel):
        raise SaabkitError("roundtrip needs an affine (DCT or Saab) kernel")
    blocks = io.load_blocks(args.input)
    if blocks.n != k.n:
        raise SaabkitError(f"kernel is {k.n}x{k.n} but the blocks are {blocks.n}x{blocks.n}")
    x = blocks.blocks
    err = float(np.max(np.abs(transforms.inverse(k, transforms.forward(k, x)) - x))) if len(x) else 0.0
    text = f"kernel {k.label}\nblocks {len(x)}\nmax_abs_error {err:.12g}\n"
    if args.out:
        io.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _cmd_convergence(args, parser):
    blocks = io.load_blocks(args.input)
    _, trace = training.convergence_monitor(
        blocks, args.delta_m, args.epsilon, args.max_samples, args.scale
    )
    io.atomic_write(args.out, training.traces_to_csv([trace]))


COMMANDS = {
    "gen": _cmd_gen,
    "extract": _cmd_extract,
    "fit": _cmd_fit,
    "analyze": _cmd_analyze,
    "curve": _cmd_curve,
    "viz": _cmd_viz,
    "roundtrip": _cmd_roundtrip,
    "convergence": _cmd_convergence,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (SaabkitError, OSError, ValueError) as exc:
        print(f"saabkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
