# app/cli/commands/blocks.py
import argparse

from app.cli.dependencies import positive_int_arg
from app.services.nnblocks import HeadConfig, HeadVariant, head_shapes, run_block_checks


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("blocks", help="Reference network blocks")
    actions = parser.add_subparsers(dest="action", required=True)

    check = actions.add_parser(
        "check",
        help="Gradient-check every block against central differences",
        description="Exits 1 when any block exceeds its relative-error tolerance.",
    )
    check.add_argument("--seed", type=int, default=0, help="first seed")
    check.add_argument("--trials", type=positive_int_arg, default=1, help="seeds per block")
    check.add_argument("--tokens", type=positive_int_arg, default=3, help="sequence length n")
    check.add_argument("--width", type=positive_int_arg, default=8, help="model width d")
    check.add_argument("--heads", type=positive_int_arg, default=2, help="attention heads h")
    check.add_argument("--channels", type=positive_int_arg, default=8, help="SE channels C")
    check.set_defaults(handler=check_blocks)

    heads = actions.add_parser("heads", help="Detection head output shapes")
    heads.add_argument("--variant", choices=[v.value for v in HeadVariant], default="P5")
    heads.add_argument("--imgsz", type=int, default=640, help="square input size")
    heads.add_argument("--classes", type=positive_int_arg, default=5, help="number of classes")
    heads.add_argument("--anchors", type=positive_int_arg, default=3, help="anchors per cell")
    heads.set_defaults(handler=show_heads)


def check_blocks(args: argparse.Namespace) -> int:
    rows = run_block_checks(
        seed=args.seed,
        trials=args.trials,
        tokens=args.tokens,
        width=args.width,
        heads=args.heads,
        channels=args.channels,
    )
    print(f"{'block':<12} {'config':<18} {'max rel err':>12} {'tol':>8}  result")
    for r in rows:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.block:<12} {r.config:<18} {r.max_rel_error:>12.3e} {r.tolerance:>8.0e}  {status}")
    return 0 if all(r.passed for r in rows) else 1


def show_heads(args: argparse.Namespace) -> int:
    cfg = HeadConfig(variant=HeadVariant(args.variant), anchors=args.anchors, num_classes=args.classes)
    for stride, shape in zip(cfg.strides, head_shapes(cfg, args.imgsz)):
        print(f"P{stride.bit_length() - 1} stride {stride:>2}: "
              f"{shape.grid_h}x{shape.grid_w}x{shape.channels}")
    return 0
