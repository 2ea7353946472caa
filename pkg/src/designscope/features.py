"""Moment-of-correlation features, datasets, normalisation and the dataset file format.

A feature vector holds, for every non-empty qubit subset ``S`` and every
requested moment order ``k'``, the mean over ``N_u`` sampled instances of
``(estimate of <Z_S>)**k'``. Values are laid out ``k'``-major; within one
``k'`` block the subset with characteristic bitmask ``m`` (bit ``q`` set when
qubit ``q`` is in ``S``) sits at offset ``m - 1``.

``N_s = None`` selects the exact mode: expectations are computed from the
output state instead of from shots. It is only available for unitary kinds.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import ensembles, qsim
from .ensembles import EnsembleSpec
from .errors import CompatibilityError, ParseError, SizeError
from .rng import RngStream, as_generator

FORMAT_VERSION = 1
# "moments": Z-string moment features; "otoc": flattened OTOC matrices (real parts, then imaginary)
LAYOUTS = ("moments", "otoc")
# instances simulated together when building one feature vector
_INSTANCE_CHUNK = 2048


@dataclass(frozen=True)
class FeatureMeta:
    """Settings that must agree before feature vectors can be compared."""

    n_qubits: int
    n_u: int
    n_s: int | None
    kprimes: tuple[int, ...]
    layout: str = "moments"

    def __post_init__(self):
        object.__setattr__(self, "kprimes", tuple(int(k) for k in self.kprimes))
        if self.n_u < 1:
            raise ValueError(f"N_u must be >= 1, got {self.n_u}")
        if self.n_s is not None and self.n_s < 1:
            raise ValueError(f"N_s must be >= 1, got {self.n_s}")
        if not self.kprimes or min(self.kprimes) < 1:
            raise ValueError(f"kprimes must be a non-empty list of positive integers, got {self.kprimes}")
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")

    @property
    def n_features(self) -> int:
        if self.layout == "otoc":
            return 2 * self.n_qubits**2
        return (2**self.n_qubits - 1) * len(self.kprimes)


@dataclass
class FeatureVector:
    values: np.ndarray
    meta: FeatureMeta
    tag: str = ""


@dataclass
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    @property
    def zero_std(self) -> np.ndarray:
        """Mask of constant features; they normalise to 0."""
        return self.std == 0


@dataclass
class Dataset:
    """Feature rows with one label per row.

    ``info`` carries provenance that is written to the file header but not
    checked for compatibility (ensemble text, seed, preprocessing, ...).
    """

    features: np.ndarray
    labels: np.ndarray
    meta: FeatureMeta
    info: dict = field(default_factory=dict)
    normalization: NormalizationStats | None = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=object)
        if len(self.labels) != self.features.shape[0]:
            raise SizeError(f"{self.features.shape[0]} rows but {len(self.labels)} labels")
        if self.features.shape[0] and self.features.shape[1] != self.meta.n_features:
            raise SizeError(f"rows have {self.features.shape[1]} features, meta expects {self.meta.n_features}")

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.meta == other.meta
            and self.info == other.info
            and np.array_equal(self.features, other.features)
            and list(self.labels) == list(other.labels)
        )

    def rows(self) -> list[FeatureVector]:
        return [FeatureVector(x, self.meta, str(lab)) for x, lab in zip(self.features, self.labels)]

    def with_features(self, features: np.ndarray, normalization=None) -> Dataset:
        return replace(self, features=features, labels=self.labels.copy(), info=dict(self.info), normalization=normalization)


def check_compatible(a: FeatureMeta, b: FeatureMeta) -> None:
    if a != b:
        raise CompatibilityError(f"feature settings differ: {a} vs {b}")


def concat(parts: list[Dataset]) -> Dataset:
    """Stack datasets with identical meta; ``info`` is taken from the first part."""
    if not parts:
        raise ValueError("nothing to concatenate")
    for p in parts[1:]:
        check_compatible(parts[0].meta, p.meta)
    return Dataset(
        np.concatenate([p.features for p in parts]),
        np.concatenate([p.labels for p in parts]),
        parts[0].meta,
        dict(parts[0].info),
    )


def select_kprimes(ds: Dataset, kprimes) -> Dataset:
    """Keep only the feature blocks of the given moment orders (in the given order)."""
    kprimes = tuple(int(k) for k in kprimes)
    missing = set(kprimes) - set(ds.meta.kprimes)
    if missing or ds.meta.layout != "moments":
        raise ValueError(f"dataset has moment orders {ds.meta.kprimes}, cannot select {kprimes}")
    width = 2**ds.meta.n_qubits - 1
    cols = np.concatenate([np.arange(width) + width * ds.meta.kprimes.index(k) for k in kprimes])
    meta = replace(ds.meta, kprimes=kprimes)
    return Dataset(ds.features[:, cols], ds.labels.copy(), meta, dict(ds.info))


# ---------------------------------------------------------------- estimators


def _check_subset(subset, n: int) -> list[int]:
    subset = [int(q) for q in subset]
    if not subset:
        raise ValueError("subset must be non-empty")
    if any(b <= a for a, b in zip(subset, subset[1:])):
        raise ValueError(f"subset must be strictly increasing, got {subset}")
    if subset[0] < 0 or subset[-1] >= n:
        raise ValueError(f"subset {subset} out of range for {n} qubits")
    return subset


def subset_index(subset, n: int) -> int:
    """Position of ``subset`` within one ``k'`` block: characteristic mask minus one."""
    return sum(1 << q for q in _check_subset(subset, n)) - 1


def subset_from_index(index: int, n: int) -> list[int]:
    mask = index + 1
    if not 1 <= mask < 2**n:
        raise ValueError(f"index {index} out of range for {n} qubits")
    return [q for q in range(n) if mask >> q & 1]


def estimate_z_string_from_shots(shots, subset) -> float:
    """Shot average of ``prod_{p in subset} (-1)**(1 - x_p)``."""
    shots = np.asarray(shots)
    if shots.ndim != 2 or shots.shape[0] == 0:
        raise ValueError("need a non-empty (n_shots, n_qubits) array of shots")
    subset = _check_subset(subset, shots.shape[1])
    signs = np.prod(2 * shots[:, subset].astype(np.int64) - 1, axis=1)
    return float(signs.mean())


@lru_cache(maxsize=None)
def sign_matrix(n: int) -> np.ndarray:
    """``(2**n, 2**n - 1)`` matrix of Z-string eigenvalues, columns in subset order."""
    bits = qsim.bit_table(n).astype(np.int64)
    masks = np.arange(1, 2**n)
    member = (masks[None, :] >> np.arange(n)[:, None]) & 1
    # each qubit of the subset that reads 0 contributes a factor -1
    out = np.where(((1 - bits) @ member) % 2 == 0, 1.0, -1.0)
    out.setflags(write=False)
    return out


def z_string_estimates(spec: EnsembleSpec, n_u: int, n_s: int | None, rng) -> np.ndarray:
    """``(n_u, 2**n - 1)`` per-instance Z-string estimates (exact when ``n_s`` is None)."""
    gen = as_generator(rng)
    signs = sign_matrix(spec.n_qubits)
    out = np.empty((n_u, signs.shape[1]))
    for lo in range(0, n_u, _INSTANCE_CHUNK):
        m = min(_INSTANCE_CHUNK, n_u - lo)
        if n_s is None:
            weights = qsim.outcome_probabilities(ensembles.sample_states(spec, m, gen))
        else:
            weights = ensembles.sample_counts(spec, m, n_s, gen) / n_s
        out[lo : lo + m] = weights @ signs
    return out


def moments(estimates: np.ndarray, kprimes) -> np.ndarray:
    return np.concatenate([np.mean(estimates**k, axis=0) for k in kprimes])


def compute_feature_vector(spec: EnsembleSpec, n_u: int, n_s: int | None, kprimes, rng) -> FeatureVector:
    meta = FeatureMeta(spec.n_qubits, n_u, n_s, tuple(kprimes))
    values = moments(z_string_estimates(spec, n_u, n_s, rng), meta.kprimes)
    return FeatureVector(values, meta, spec.kind)


# ---------------------------------------------------------------- dataset generation


def default_workers() -> int:
    env = os.environ.get("DESIGNSCOPE_WORKERS")
    return max(1, int(env)) if env else 1


def _vector_block(args) -> np.ndarray:
    spec, n_u, n_s, kprimes, seed, indices = args
    return np.stack([compute_feature_vector(spec, n_u, n_s, kprimes, RngStream(seed, i)).values for i in indices])


def generate_dataset(
    spec: EnsembleSpec,
    count: int,
    n_u: int,
    n_s: int | None,
    kprimes,
    seed: int,
    label: str | None = None,
    workers: int | None = None,
    first_index: int = 0,
) -> Dataset:
    """``count`` feature vectors; vector ``i`` uses substream ``first_index + i`` of ``seed``.

    The result does not depend on ``workers``.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    meta = FeatureMeta(spec.n_qubits, n_u, n_s, tuple(kprimes))
    workers = default_workers() if workers is None else max(1, workers)
    indices = list(range(first_index, first_index + count))
    if workers == 1:
        features = _vector_block((spec, n_u, n_s, meta.kprimes, seed, indices))
    else:
        size = max(1, math.ceil(count / (4 * workers)))
        blocks = [indices[i : i + size] for i in range(0, count, size)]
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_vector_block, [(spec, n_u, n_s, meta.kprimes, seed, b) for b in blocks])
            features = np.concatenate(list(parts))
    info = {"ensemble": spec.to_text(), "seed": str(seed), "preproc": spec.preproc}
    return Dataset(features, np.full(count, label or spec.kind, dtype=object), meta, info)


# ---------------------------------------------------------------- normalisation and splits


def zscore_fit(ds: Dataset) -> NormalizationStats:
    """Per-feature mean and population standard deviation."""
    if len(ds) < 2:
        raise ValueError("z-score statistics need at least two rows")
    return NormalizationStats(ds.features.mean(axis=0), ds.features.std(axis=0))


def zscore_apply(ds: Dataset, stats: NormalizationStats) -> Dataset:
    if stats.mean.shape != (ds.features.shape[1],) or stats.std.shape != stats.mean.shape:
        raise SizeError(f"stats cover {stats.mean.shape[0]} features, dataset has {ds.features.shape[1]}")
    safe = np.where(stats.zero_std, 1.0, stats.std)
    z = np.where(stats.zero_std, 0.0, (ds.features - stats.mean) / safe)
    return ds.with_features(z, stats)


def split_shuffle(train: Dataset, valid: Dataset, rng) -> tuple[Dataset, Dataset]:
    """Pool both sets, permute uniformly, and cut into two equal halves."""
    check_compatible(train.meta, valid.meta)
    total = len(train) + len(valid)
    if total % 2:
        raise ValueError(f"cannot split {total} rows into equal halves")
    x = np.concatenate([train.features, valid.features])
    y = np.concatenate([train.labels, valid.labels])
    perm = as_generator(rng).permutation(total)
    a, b = perm[: total // 2], perm[total // 2 :]
    return (
        Dataset(x[a], y[a], train.meta, dict(train.info)),
        Dataset(x[b], y[b], train.meta, dict(train.info)),
    )


# ---------------------------------------------------------------- file format

_REQUIRED = ("format_version", "N_q", "N_u", "N_s", "kprimes")
_META_KEYS = _REQUIRED + ("layout",)


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(ds: Dataset, path) -> None:
    """Write the text format; floats use the shortest round-trip decimal form."""
    meta = ds.meta
    header = {
        "format_version": str(FORMAT_VERSION),
        "ensemble": ds.info.get("ensemble", ""),
        "N_q": str(meta.n_qubits),
        "N_u": str(meta.n_u),
        "N_s": "inf" if meta.n_s is None else str(meta.n_s),
        "kprimes": ",".join(map(str, meta.kprimes)),
        "seed": ds.info.get("seed", ""),
        "preproc": ds.info.get("preproc", ""),
    }
    # provenance keys the dataset does not carry are left out so load(save(ds)) == ds
    header = {k: v for k, v in header.items() if v != "" or k not in ("ensemble", "seed", "preproc")}
    if meta.layout != "moments":
        header["layout"] = meta.layout
    for key, value in ds.info.items():
        header.setdefault(key, str(value))
    lines = [f"# {k}={v}" for k, v in header.items()]
    for label, row in zip(ds.labels, ds.features):
        lines.append(",".join([str(label)] + [_fmt(v) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_dataset(path) -> Dataset:
    header: dict[str, str] = {}
    labels, rows = [], []
    meta = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="ascii").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if rows:
                raise ParseError(f"line {lineno}: header line after data rows")
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise ParseError(f"line {lineno}: header line is not key=value")
            header[key.strip()] = value.strip()
            continue
        if meta is None:
            meta = _meta_from_header(header, lineno)
        label, *values = line.split(",")
        if len(values) != meta.n_features:
            raise ParseError(f"line {lineno}: row {len(rows) + 1} has {len(values)} features, expected {meta.n_features}")
        try:
            rows.append([float(v) for v in values])
        except ValueError:
            raise ParseError(f"line {lineno}: row {len(rows) + 1} has a non-numeric feature") from None
        labels.append(label)
    if meta is None:
        meta = _meta_from_header(header, 0)
    info = {k: v for k, v in header.items() if k not in _META_KEYS}
    features = np.array(rows, dtype=float).reshape(len(rows), meta.n_features)
    return Dataset(features, np.array(labels, dtype=object), meta, info)


def _meta_from_header(header: dict, lineno: int) -> FeatureMeta:
    for key in _REQUIRED:
        if key not in header:
            raise ParseError(f"line {lineno}: header is missing {key}")
    if header["format_version"] != str(FORMAT_VERSION):
        raise ParseError(f"unsupported format_version {header['format_version']}")
    try:
        return FeatureMeta(
            int(header["N_q"]),
            int(header["N_u"]),
            None if header["N_s"] == "inf" else int(header["N_s"]),
            tuple(int(k) for k in header["kprimes"].split(",")),
            header.get("layout", "moments"),
        )
    except ValueError as exc:
        raise ParseError(f"line {lineno}: bad header value ({exc})") from None
