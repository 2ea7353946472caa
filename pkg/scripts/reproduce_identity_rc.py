"""Classify RC without preprocessing against HAAR with every algorithm.

Without preprocessing the RC outputs are stabilizer states, whose outcome
probabilities are 0 or 2^-a, so all three classifiers should separate the
two ensembles almost perfectly.

    python scripts/reproduce_identity_rc.py --n 4 --per-class 3000
"""

import argparse

from _common import mean_std, rc_vs_haar, write_csv

from designscope import ml
from designscope.ml import TrainConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--per-class", type=int, default=3000)
    p.add_argument("--nu", type=int, default=500)
    p.add_argument("--ns", type=int, default=500)
    p.add_argument("--kprime", type=int, default=4)
    p.add_argument("--models", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    args = p.parse_args()

    train, valid, test = rc_vs_haar(args.n, "identity", args.per_class, args.nu, args.ns, (args.kprime,), args.seed, args.workers)
    rows = []
    for algo in ml.ALGORITHMS:
        rep = ml.ensemble_protocol(train, valid, algo, TrainConfig(learning_rate=args.lr), args.models, rng=args.seed, test=test)
        print(f"{algo:9s} train {mean_std(rep.train_acc)}  valid {mean_std(rep.valid_acc)}  test {mean_std(rep.test_acc)}")
        rows.append([algo, *(f"{v:.4f}" for v in rep.summary()["test"])])
    write_csv(args.out, ["algo", "test_acc_mean", "test_acc_std"], rows)


if __name__ == "__main__":
    main()
