"""Test accuracy against the moment order k' for RC with fixed preprocessing.

RC with Haar preprocessing forms a unitary 3-design, so moments with
k' <= 3 match HAAR and carry no signal; only k' = 4 can separate them.

    python scripts/kprime_degeneracy.py --n 4 --per-class 2000
"""

import argparse

from _common import mean_std, rc_vs_haar, write_csv

from designscope import features, ml
from designscope.ml import TrainConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--per-class", type=int, default=2000)
    p.add_argument("--nu", type=int, default=500)
    p.add_argument("--ns", type=int, default=500)
    p.add_argument("--preproc", default="fixed:12345")
    p.add_argument("--models", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=2)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    args = p.parse_args()

    parts = rc_vs_haar(args.n, args.preproc, args.per_class, args.nu, args.ns, (1, 2, 3, 4), args.seed, args.workers)
    cfg = TrainConfig(learning_rate=args.lr)
    rows = []
    for k in (1, 2, 3, 4):
        train, valid, test = (features.select_kprimes(d, (k,)) for d in parts)
        for algo in ("logistic", "mlp"):
            rep = ml.ensemble_protocol(train, valid, algo, cfg, args.models, rng=args.seed, test=test)
            print(f"k'={k} {algo:9s} test {mean_std(rep.test_acc)}")
            rows.append([k, algo, *(f"{v:.4f}" for v in rep.summary()["test"])])
    write_csv(args.out, ["kprime", "algo", "test_acc_mean", "test_acc_std"], rows)


if __name__ == "__main__":
    main()
