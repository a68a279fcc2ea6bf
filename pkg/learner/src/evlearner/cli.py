"""Command line: train the contour classifier, export probabilities."""

from __future__ import annotations

import argparse
import sys

from .train import TrainConfig, train


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="evlearner", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train on simulator dataset directories")
    t.add_argument("datasets", nargs="+")
    t.add_argument("--out", required=True, help="weights archive path")
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--window-events", type=int, default=10_000)
    t.add_argument("--max-windows", type=int, default=200)

    i = sub.add_parser("infer", help="write EVP1 probabilities for an event file")
    i.add_argument("--events", required=True)
    i.add_argument("--weights", required=True)
    i.add_argument("--out", required=True)

    args = p.parse_args(argv)
    try:
        if args.command == "train":
            cfg = TrainConfig(
                epochs=args.epochs, lr=args.lr, seed=args.seed,
                window_events=args.window_events, max_windows=args.max_windows,
            )
            train(args.datasets, args.out, cfg)
        else:
            from .infer import infer

            infer(args.events, args.weights, args.out)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
