"""featex command line: extract embedding files from an image list."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .extract import ExtractSpec, extract_features
from .models import SUPPORTED
from .preprocess import DEFAULT_BOTTOM_CROP_FRACTION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featex",
        description="Run pretrained vision backbones over an image list and "
        "write fusion-engine feature files",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="extract features for one or more representations")
    p.add_argument("--images", required=True,
                   help='image-list JSON: {"items": [{"item_id", "path"}]}')
    p.add_argument("--repr", dest="reprs", nargs="+", required=True,
                   metavar="NAME", help=f"representations: {', '.join(SUPPORTED)}")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--weights-dir", default=None,
                   help="directory holding <name>.pt checkpoints")
    p.add_argument("--allow-random-init", action="store_true",
                   help="run without checkpoints (pipeline testing only)")
    p.add_argument("--crop-bottom", action="store_true",
                   help="drop the bottom strip before resizing")
    p.add_argument("--crop-bottom-frac", type=float,
                   default=DEFAULT_BOTTOM_CROP_FRACTION)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ExtractSpec(
            image_list=Path(args.images),
            repr_names=tuple(args.reprs),
            out_dir=Path(args.out_dir),
            weights_dir=Path(args.weights_dir) if args.weights_dir else None,
            crop_bottom=args.crop_bottom,
            crop_bottom_fraction=args.crop_bottom_frac,
            batch_size=args.batch_size,
            allow_random_init=args.allow_random_init,
            seed=args.seed,
        )
        written = extract_features(spec)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
