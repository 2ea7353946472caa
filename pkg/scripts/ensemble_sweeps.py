"""P_RC of a trained classifier ensemble across circuit families.

Trains MLPs on RC (fixed preprocessing) against HAAR at k' = 4, then
reports the fraction of probe vectors assigned to RC for LRC and its noisy
and monitored variants as a function of depth, and for RDC as a function
of the number of iterations.

    python scripts/ensemble_sweeps.py --n 5 --families lrc,noisy_lrc --depths 2:20:2
"""

import argparse

from _common import mean_std, rc_vs_haar, write_csv

from designscope import features, ml
from designscope.ensembles import EnsembleSpec
from designscope.ml import TrainConfig


def int_range(text):
    if ":" in text:
        a, b, *step = (int(v) for v in text.split(":"))
        return list(range(a, b + 1, step[0] if step else 1))
    return [int(v) for v in text.split(",")]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--per-class", type=int, default=2000)
    p.add_argument("--nu", type=int, default=500)
    p.add_argument("--ns", type=int, default=500)
    p.add_argument("--preproc", default="fixed:12345")
    p.add_argument("--models", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--families", default="lrc,rdc,noisy_lrc,monit_lrc")
    p.add_argument("--depths", type=int_range, default=int_range("2:20:2"))
    p.add_argument("--iterations", type=int_range, default=int_range("1:6"))
    p.add_argument("--ps", default="0.001,0.01")
    p.add_argument("--probes", type=int, default=50)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    args = p.parse_args()

    train, valid, test = rc_vs_haar(args.n, args.preproc, args.per_class, args.nu, args.ns, (4,), args.seed, args.workers)
    rep = ml.ensemble_protocol(train, valid, "mlp", TrainConfig(learning_rate=args.lr), args.models, rng=args.seed, test=test)
    print(f"MLP test accuracy {mean_std(rep.test_acc)}")

    grid = []
    for family in args.families.split(","):
        kind = family.strip().upper()
        if kind == "RDC":
            grid += [(kind, None, i, None) for i in args.iterations]
        elif kind == "LRC":
            grid += [(kind, d, None, None) for d in args.depths]
        else:
            grid += [(kind, d, None, float(q)) for q in args.ps.split(",") for d in args.depths]
    rows = []
    for point, (kind, depth, it, prob) in enumerate(grid):
        spec = EnsembleSpec(kind, args.n, depth=depth, iterations=it, p=prob, preproc=args.preproc if kind != "RDC" else "identity")
        ds = features.generate_dataset(spec, args.probes, args.nu, args.ns, (4,), args.seed + 1000, workers=args.workers, first_index=point * args.probes)
        m, s = ml.mean_p_rc(rep.models, ds)
        print(f"{spec.to_text():45s} P_RC {m:.3f} +- {s:.3f}")
        rows.append([kind, depth or "", it or "", "" if prob is None else prob, f"{m:.4f}", f"{s:.4f}"])
    write_csv(args.out, ["kind", "D", "I", "p", "P_RC_mean", "P_RC_std"], rows)


if __name__ == "__main__":
    main()
