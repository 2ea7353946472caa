"""Helpers shared by the experiment scripts."""

import csv
import sys

import numpy as np

from designscope import features
from designscope.ensembles import EnsembleSpec
from designscope.features import Dataset


def take(ds: Dataset, lo: int, hi: int) -> Dataset:
    return Dataset(ds.features[lo:hi], ds.labels[lo:hi], ds.meta, dict(ds.info))


def rc_vs_haar(n, preproc, per_class, n_u, n_s, kprimes, seed, workers=None):
    """Train/valid/test splits (60/20/20 per class) of RC against HAAR."""
    kw = dict(count=per_class, n_u=n_u, n_s=n_s, kprimes=kprimes, workers=workers)
    rc = features.generate_dataset(EnsembleSpec("RC", n, preproc=preproc), seed=seed, **kw)
    haar = features.generate_dataset(EnsembleSpec("HAAR", n), seed=seed + 1, **kw)
    cuts = [0, int(0.6 * per_class), int(0.8 * per_class), per_class]
    return tuple(
        features.concat([take(rc, lo, hi), take(haar, lo, hi)]) for lo, hi in zip(cuts[:-1], cuts[1:])
    )


def mean_std(values) -> str:
    return f"{np.mean(values):.3f} +- {np.std(values):.3f}"


def write_csv(path, header, rows):
    """Write to ``path``, or to stdout when ``path`` is None."""
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if path:
            fh.close()
