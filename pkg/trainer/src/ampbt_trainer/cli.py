"""Command-line trainer: reads ABTD0001 records, writes AMPW0001 weights."""

import argparse
import sys

from .export import export_weights
from .train import TrainConfig, train_ampbt, train_spbt


def build_parser():
    p = argparse.ArgumentParser(prog="ampbt-train", description=__doc__)
    p.add_argument("--data", required=True, help="ABTD0001 record file")
    p.add_argument("--out", required=True, help="output AMPW0001 weights file")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--weighting", choices=("ew", "dwa"), default="ew")
    p.add_argument("--temperature", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--single-task", type=int, default=None,
                   help="train one single-parameter network for this task index")
    p.add_argument("--report", default=None, help="write per-epoch report JSON here")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    config = TrainConfig(batch_size=args.batch, learning_rate=args.lr,
                         epochs=args.epochs, weighting=args.weighting,
                         temperature=args.temperature, seed=args.seed,
                         patience=args.patience, split_seed=args.split_seed)
    if args.single_task is None:
        model, report = train_ampbt(args.data, config)
    else:
        model, report = train_spbt(args.data, config, args.single_task)
    export_weights(model, args.out)
    if args.report:
        with open(args.report, "w") as f:
            f.write(report.to_json())
    last = report.epochs[-1]
    print(f"trained {len(report.epochs)} epochs; best epoch {report.best_epoch} "
          f"(val loss {report.best_val_loss:.4f}); final val accuracy "
          f"{[round(a, 3) for a in last['val_accuracy']]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
