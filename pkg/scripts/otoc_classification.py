"""Classify RC against HAAR from flattened OTOC matrices.

    python scripts/otoc_classification.py --n 3 --m 20 --variants ALV,TR
"""

import argparse

from _common import mean_std, take, write_csv

from designscope import features, ml, otoc
from designscope.ensembles import EnsembleSpec
from designscope.ml import TrainConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--per-class", type=int, default=500)
    p.add_argument("--variants", default="ALV,CB,TR")
    p.add_argument("--preproc", default="fixed:12345")
    p.add_argument("--models", type=int, default=5)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=5)
    p.add_argument("--out", default=None)
    args = p.parse_args()

    rows = []
    cuts = [0, int(0.6 * args.per_class), int(0.8 * args.per_class), args.per_class]
    for variant in args.variants.split(","):
        sets = [
            otoc.otoc_dataset(otoc.OtocConfig(EnsembleSpec(kind, args.n, preproc=pre), args.m, variant=variant), args.per_class, args.seed + i)
            for i, (kind, pre) in enumerate((("RC", args.preproc), ("HAAR", "identity")))
        ]
        train, valid, test = (
            features.concat([take(s, lo, hi) for s in sets]) for lo, hi in zip(cuts[:-1], cuts[1:])
        )
        for algo in ("logistic", "mlp"):
            rep = ml.ensemble_protocol(train, valid, algo, TrainConfig(learning_rate=args.lr), args.models, rng=args.seed, test=test)
            print(f"{variant:3s} {algo:9s} test {mean_std(rep.test_acc)}")
            rows.append([variant, algo, *(f"{v:.4f}" for v in rep.summary()["test"])])
    write_csv(args.out, ["variant", "algo", "test_acc_mean", "test_acc_std"], rows)


if __name__ == "__main__":
    main()
