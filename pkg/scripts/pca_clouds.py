"""Two-component PCA of RC and HAAR feature vectors, with LRC probes projected in.

    python scripts/pca_clouds.py --n 4 --depths 2,6,12 --out pca.csv
"""

import argparse

import numpy as np
from _common import write_csv

from designscope import features, ml
from designscope.ensembles import EnsembleSpec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--count", type=int, default=300)
    p.add_argument("--nu", type=int, default=500)
    p.add_argument("--ns", type=int, default=500)
    p.add_argument("--kprime", type=int, default=4)
    p.add_argument("--preproc", default="identity")
    p.add_argument("--depths", default="2,6,12")
    p.add_argument("--seed", type=int, default=4)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    args = p.parse_args()

    kw = dict(n_u=args.nu, n_s=args.ns, kprimes=(args.kprime,), workers=args.workers)
    sets = {
        "RC": features.generate_dataset(EnsembleSpec("RC", args.n, preproc=args.preproc), args.count, seed=args.seed, **kw),
        "HAAR": features.generate_dataset(EnsembleSpec("HAAR", args.n), args.count, seed=args.seed + 1, **kw),
    }
    pca = ml.pca_fit(features.concat(list(sets.values())))
    for d in (int(v) for v in args.depths.split(",")):
        spec = EnsembleSpec("LRC", args.n, depth=d, preproc=args.preproc)
        sets[f"LRC_D{d}"] = features.generate_dataset(spec, args.count, seed=args.seed + 10 + d, **kw)
    print(f"explained variance ratio {np.round(pca.explained_variance_ratio, 4)}")
    rows = []
    for name, ds in sets.items():
        pts = ml.pca_project(ds, pca)
        print(f"{name:10s} centroid PC1 {pts[:, 0].mean():+.4f}  PC2 {pts[:, 1].mean():+.4f}")
        rows += [[name, f"{a:.6g}", f"{b:.6g}"] for a, b in pts]
    write_csv(args.out, ["dataset", "PC1", "PC2"], rows)


if __name__ == "__main__":
    main()
