"""Classifiers written directly in numpy: logistic regression, linear SVM and a
three-layer MLP, plus the reshuffled ten-model protocol, P_RC and PCA.

Label encoding: ``RC`` is the positive class (1), ``HAAR`` the negative class
(0). A row is assigned ``RC`` when the model output is at least 0.5, i.e.
when the final pre-sigmoid score is non-negative.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import features as feat
from .errors import ParseError, SizeError, TrainingDivergedError
from .features import Dataset, FeatureMeta, NormalizationStats
from .rng import RngStream, as_generator

POSITIVE = "RC"
NEGATIVE = "HAAR"
ALGORITHMS = ("mlp", "logistic", "svm")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 128
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    svm_lambda: float = 1e-4
    hidden: tuple[int, int] | None = None

    def __post_init__(self):
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        positive = [self.learning_rate, self.batch_size, self.epochs, self.adam_eps]
        if min(positive) <= 0 or not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"invalid training configuration {self}")
        if self.svm_lambda < 0 or (self.hidden is not None and min(self.hidden) < 1):
            raise ValueError(f"invalid training configuration {self}")


@dataclass
class MlpModel:
    """Dense ReLU -> ReLU -> sigmoid network; ``params`` is ``[W1, b1, W2, b2, W3, b3]``."""

    params: list[np.ndarray]
    meta: FeatureMeta | None = None
    normalization: NormalizationStats | None = None
    cfg: TrainConfig | None = None
    history: dict = field(default_factory=dict)

    algo = "mlp"

    @property
    def sizes(self) -> tuple[int, ...]:
        w = self.params[0::2]
        return (w[0].shape[0],) + tuple(m.shape[1] for m in w)


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    loss: str
    meta: FeatureMeta | None = None
    normalization: NormalizationStats | None = None
    cfg: TrainConfig | None = None
    history: dict = field(default_factory=dict)

    @property
    def algo(self) -> str:
        return "logistic" if self.loss == "logistic" else "svm"

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights, np.array([self.bias])]


def init_mlp(sizes, rng) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    gen = as_generator(rng)
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        params.append(gen.uniform(-bound, bound, (fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return MlpModel(params)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _bce_from_logits(z: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy, evaluated stably from pre-sigmoid scores."""
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _mlp_logits(params, x):
    w1, b1, w2, b2, w3, b3 = params
    a1 = x @ w1 + b1
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ w2 + b2
    h2 = np.maximum(a2, 0.0)
    return (h2 @ w3 + b3)[:, 0], (x, a1, h1, a2, h2)


def _check_dim(expected: int, x: np.ndarray):
    if x.shape[-1] != expected:
        raise SizeError(f"model expects {expected} features, got {x.shape[-1]}")


def mlp_forward(model: MlpModel, x) -> np.ndarray | float:
    """Output probability for one row (returns a float) or for a batch."""
    x = np.asarray(x, dtype=float)
    _check_dim(model.sizes[0], x)
    z, _ = _mlp_logits(model.params, np.atleast_2d(x))
    p = _sigmoid(z)
    return float(p[0]) if x.ndim == 1 else p


def _mlp_loss_and_grads(params, x, y):
    z, (x, a1, h1, a2, h2) = _mlp_logits(params, x)
    w1, b1, w2, b2, w3, b3 = params
    n = x.shape[0]
    dz = (_sigmoid(z) - y)[:, None] / n
    g_w3 = h2.T @ dz
    g_b3 = dz.sum(axis=0)
    d2 = (dz @ w3.T) * (a2 > 0)
    g_w2 = h1.T @ d2
    g_b2 = d2.sum(axis=0)
    d1 = (d2 @ w2.T) * (a1 > 0)
    g_w1 = x.T @ d1
    g_b1 = d1.sum(axis=0)
    return _bce_from_logits(z, y), [g_w1, g_b1, g_w2, g_b2, g_w3, g_b3]


def gradient_check(model: MlpModel, x, y, step: float = 1e-5) -> float:
    """Largest relative gap between backprop and central-difference gradients.

    Entries where both gradients are below 1e-4 in magnitude are compared on an
    absolute scale (the denominator is floored at 1e-4), because the
    finite-difference estimate itself carries ~1e-10 of rounding error.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _check_dim(model.sizes[0], x)
    params = [p.astype(float).copy() for p in model.params]
    _, grads = _mlp_loss_and_grads(params, x, y)
    worst = 0.0
    for p, g in zip(params, grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = _bce_from_logits(_mlp_logits(params, x)[0], y)
            flat[i] = keep - step
            down = _bce_from_logits(_mlp_logits(params, x)[0], y)
            flat[i] = keep
            numeric = (up - down) / (2 * step)
            denom = max(abs(numeric), abs(gflat[i]), 1e-4)
            worst = max(worst, abs(numeric - gflat[i]) / denom)
    return worst


class _Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        corr1 = 1 - c.beta1**self.t
        corr2 = 1 - c.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= c.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + c.adam_eps)


def binary_labels(ds: Dataset) -> np.ndarray:
    labels = set(ds.labels.tolist())
    if not labels <= {POSITIVE, NEGATIVE}:
        raise ValueError(f"expected labels {POSITIVE}/{NEGATIVE}, found {sorted(labels)}")
    return (ds.labels == POSITIVE).astype(float)


def _fit(params, loss_and_grads, train: Dataset, valid: Dataset | None, cfg: TrainConfig, gen, score):
    """Shared mini-batch Adam loop; returns the per-epoch history."""
    x, y = train.features, binary_labels(train)
    vx, vy = (valid.features, binary_labels(valid)) if valid is not None else (None, None)
    opt = _Adam(params, cfg)
    history = {"train_loss": [], "train_acc": [], "valid_loss": [], "valid_acc": []}
    for epoch in range(1, cfg.epochs + 1):
        order = gen.permutation(len(y))
        for lo in range(0, len(y), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss, grads = loss_and_grads(params, x[idx], y[idx])
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDivergedError(epoch)
            opt.step(params, grads)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDivergedError(epoch, "parameters became non-finite")
        for split, (sx, sy) in (("train", (x, y)), ("valid", (vx, vy))):
            if sx is None:
                continue
            z = score(params, sx)
            # the recorded loss is the training objective (BCE, or regularised hinge for the SVM)
            history[f"{split}_loss"].append(loss_and_grads(params, sx, sy)[0])
            history[f"{split}_acc"].append(float(np.mean((z >= 0) == (sy == 1))))
    return history


def _training_generator(cfg: TrainConfig, rng):
    return as_generator(cfg.seed if rng is None else rng)


def mlp_train(train: Dataset, valid: Dataset | None, cfg: TrainConfig, rng=None) -> MlpModel:
    """Mini-batch Adam on the binary cross-entropy; hidden widths default to the input width."""
    gen = _training_generator(cfg, rng)
    dim = train.features.shape[1]
    hidden = cfg.hidden or (dim, dim)
    model = init_mlp((dim,) + tuple(hidden) + (1,), gen)
    model.history = _fit(model.params, _mlp_loss_and_grads, train, valid, cfg, gen, lambda p, x: _mlp_logits(p, x)[0])
    model.meta, model.normalization, model.cfg = train.meta, train.normalization, cfg
    return model


def _linear_score(params, x):
    return x @ params[0] + params[1][0]


def _logistic_loss_and_grads(params, x, y):
    z = _linear_score(params, x)
    dz = (_sigmoid(z) - y) / len(y)
    return _bce_from_logits(z, y), [x.T @ dz, np.array([dz.sum()])]


def _hinge_objective(lam):
    def loss_and_grads(params, x, y):
        s = 2 * y - 1
        margin = s * _linear_score(params, x)
        active = margin < 1
        loss = float(np.mean(np.maximum(0.0, 1 - margin)) + 0.5 * lam * params[0] @ params[0])
        coef = -(s * active) / len(y)
        return loss, [x.T @ coef + lam * params[0], np.array([coef.sum()])]

    return loss_and_grads


def _train_linear(train, valid, cfg, rng, loss):
    gen = _training_generator(cfg, rng)
    params = [np.zeros(train.features.shape[1]), np.zeros(1)]
    objective = _logistic_loss_and_grads if loss == "logistic" else _hinge_objective(cfg.svm_lambda)
    history = _fit(params, objective, train, valid, cfg, gen, _linear_score)
    return LinearModel(params[0], float(params[1][0]), loss, train.meta, train.normalization, cfg, history)


def train_logistic(train: Dataset, cfg: TrainConfig, valid: Dataset | None = None, rng=None) -> LinearModel:
    return _train_linear(train, valid, cfg, rng, "logistic")


def train_linear_svm(train: Dataset, cfg: TrainConfig, valid: Dataset | None = None, rng=None) -> LinearModel:
    """Primal hinge loss plus ``lambda/2 |w|^2``, minimised with Adam-scaled subgradient steps."""
    return _train_linear(train, valid, cfg, rng, "hinge")


def train_model(algo: str, train: Dataset, valid: Dataset | None, cfg: TrainConfig, rng=None):
    if algo == "mlp":
        return mlp_train(train, valid, cfg, rng)
    if algo == "logistic":
        return train_logistic(train, cfg, valid, rng)
    if algo == "svm":
        return train_linear_svm(train, cfg, valid, rng)
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")


# ---------------------------------------------------------------- prediction and metrics


def decision_scores(model, x: np.ndarray) -> np.ndarray:
    """Pre-sigmoid scores; non-negative means ``RC``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if isinstance(model, MlpModel):
        _check_dim(model.sizes[0], x)
        return _mlp_logits(model.params, x)[0]
    _check_dim(model.weights.shape[0], x)
    return _linear_score(model.params, x)


def _prepared(model, ds: Dataset) -> np.ndarray:
    """Feature matrix in the model's input space.

    Raw datasets are normalised with the statistics stored in the model;
    datasets that already carry normalisation statistics are used as given.
    """
    if model.meta is not None:
        feat.check_compatible(model.meta, ds.meta)
    if ds.normalization is None and model.normalization is not None:
        return feat.zscore_apply(ds, model.normalization).features
    return ds.features


def predict_rc(model, ds: Dataset) -> np.ndarray:
    return decision_scores(model, _prepared(model, ds)) >= 0


def evaluate_accuracy(model, ds: Dataset) -> float:
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    y = binary_labels(ds) == 1
    return float(np.mean(predict_rc(model, ds) == y))


def compute_p_rc(model, ds: Dataset) -> float:
    """Fraction of rows the model assigns to ``RC``."""
    if len(ds) == 0:
        raise ValueError("P_RC is undefined on an empty dataset")
    return float(np.mean(predict_rc(model, ds)))


# ---------------------------------------------------------------- ten-model protocol


@dataclass
class ClassifierReport:
    algo: str
    train_acc: list[float]
    valid_acc: list[float]
    test_acc: list[float] = field(default_factory=list)
    p_rc: dict[str, list[float]] = field(default_factory=dict)
    models: list = field(default_factory=list, repr=False)

    @staticmethod
    def _ms(values) -> tuple[float, float]:
        return (float(np.mean(values)), float(np.std(values))) if values else (math.nan, math.nan)

    def summary(self) -> dict[str, tuple[float, float]]:
        out = {"train": self._ms(self.train_acc), "valid": self._ms(self.valid_acc)}
        if self.test_acc:
            out["test"] = self._ms(self.test_acc)
        for name, values in self.p_rc.items():
            out[f"P_RC[{name}]"] = self._ms(values)
        return out


def _protocol_member(args):
    index, train, valid, test, probes, algo, cfg, seed = args
    stream = RngStream(seed, index)
    half_a, half_b = feat.split_shuffle(train, valid, stream.child(0))
    stats = feat.zscore_fit(half_a)
    tr, va = feat.zscore_apply(half_a, stats), feat.zscore_apply(half_b, stats)
    model = train_model(algo, tr, va, cfg, stream.child(1))
    result = {
        "train": evaluate_accuracy(model, tr),
        "valid": evaluate_accuracy(model, va),
        "test": evaluate_accuracy(model, test) if test is not None else None,
        "p_rc": {name: compute_p_rc(model, ds) for name, ds in (probes or {}).items()},
    }
    return model, result


def ensemble_protocol(
    train: Dataset,
    valid: Dataset,
    algo: str,
    cfg: TrainConfig,
    n_models: int = 10,
    rng: int = 0,
    test: Dataset | None = None,
    probes: dict[str, Dataset] | None = None,
    workers: int = 1,
) -> ClassifierReport:
    """Train ``n_models`` classifiers, each on a fresh reshuffled half of train+valid.

    Member ``i`` draws its split and its training randomness from substream
    ``i`` of the master seed ``rng``, so the report does not depend on
    ``workers``. The z-score statistics are refit on every new training half;
    the other half serves as validation data.
    """
    if n_models < 1:
        raise ValueError("n_models must be >= 1")
    seed = int(rng) if not isinstance(rng, RngStream) else rng.master_seed
    jobs = [(i, train, valid, test, probes, algo, cfg, seed) for i in range(n_models)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_protocol_member, jobs))
    else:
        outcomes = [_protocol_member(job) for job in jobs]
    report = ClassifierReport(algo, [], [])
    for model, res in outcomes:
        report.models.append(model)
        report.train_acc.append(res["train"])
        report.valid_acc.append(res["valid"])
        if res["test"] is not None:
            report.test_acc.append(res["test"])
        for name, value in res["p_rc"].items():
            report.p_rc.setdefault(name, []).append(value)
    return report


def mean_p_rc(models, ds: Dataset) -> tuple[float, float]:
    values = [compute_p_rc(m, ds) for m in models]
    return float(np.mean(values)), float(np.std(values))


# ---------------------------------------------------------------- PCA


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray


def pca_fit(ds: Dataset | np.ndarray, n_components: int = 2) -> PcaModel:
    """Top eigenvectors of the feature covariance matrix.

    Each component's sign is fixed so that its largest-magnitude entry is positive.
    """
    x = ds.features if isinstance(ds, Dataset) else np.atleast_2d(np.asarray(ds, dtype=float))
    if x.shape[0] < 2:
        raise ValueError("PCA needs at least two rows")
    if not 1 <= n_components <= x.shape[1]:
        raise ValueError(f"n_components must be in 1..{x.shape[1]}")
    mean = x.mean(axis=0)
    cov = np.cov(x - mean, rowvar=False, bias=True).reshape(x.shape[1], x.shape[1])
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order[:n_components]].T
    pivot = np.argmax(np.abs(evecs), axis=1)
    evecs *= np.sign(evecs[np.arange(n_components), pivot])[:, None]
    total = evals.sum()
    ratio = evals[:n_components] / total if total > 0 else np.zeros(n_components)
    return PcaModel(mean, evecs, evals[:n_components], ratio)


def pca_project(ds: Dataset | np.ndarray, pca: PcaModel) -> np.ndarray:
    x = ds.features if isinstance(ds, Dataset) else np.atleast_2d(np.asarray(ds, dtype=float))
    _check_dim(pca.mean.shape[0], x)
    return (x - pca.mean) @ pca.components.T


# ---------------------------------------------------------------- model files


def _meta_text(meta: FeatureMeta | None) -> str:
    if meta is None:
        return ""
    n_s = "inf" if meta.n_s is None else meta.n_s
    return f"{meta.n_qubits};{meta.n_u};{n_s};{','.join(map(str, meta.kprimes))};{meta.layout}"


def _meta_parse(text: str) -> FeatureMeta | None:
    if not text:
        return None
    nq, nu, ns, kp, *layout = text.split(";")
    kprimes = tuple(int(k) for k in kp.split(","))
    return FeatureMeta(int(nq), int(nu), None if ns == "inf" else int(ns), kprimes, *layout)


def save_model(model, path, extra: dict | None = None) -> None:
    """Text header plus one ``name,shape,values...`` line per parameter array.

    ``extra`` adds informational header keys; they are ignored on load.
    """
    cfg = model.cfg or TrainConfig()
    header = {"algo": model.algo, "meta": _meta_text(model.meta)}
    for key, value in asdict(cfg).items():
        header[f"cfg.{key}"] = "" if value is None else (",".join(map(str, value)) if isinstance(value, tuple) else repr(value))
    arrays = {}
    if isinstance(model, MlpModel):
        header["dims"] = ",".join(map(str, model.sizes))
        arrays.update({f"p{i}": p for i, p in enumerate(model.params)})
    else:
        header["dims"] = str(model.weights.shape[0])
        arrays.update({"weights": model.weights, "bias": np.array([model.bias])})
    if model.normalization is not None:
        arrays["norm_mean"] = model.normalization.mean
        arrays["norm_std"] = model.normalization.std
    header.update(extra or {})
    lines = [f"# {k}={v}" for k, v in header.items()]
    for name, arr in arrays.items():
        shape = "x".join(map(str, arr.shape))
        lines.append(",".join([name, shape] + [repr(float(v)) for v in arr.reshape(-1)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _parse_cfg(header: dict) -> TrainConfig:
    kwargs = {}
    for f in TrainConfig.__dataclass_fields__.values():
        raw = header.get(f"cfg.{f.name}")
        if raw is None:
            continue
        if f.name == "hidden":
            kwargs[f.name] = tuple(int(h) for h in raw.split(",")) if raw else None
        elif f.name in ("batch_size", "epochs", "seed"):
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = float(raw)
    return TrainConfig(**kwargs)


def load_model(path):
    header, arrays = {}, {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="ascii").splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.startswith("#"):
            key, sep, value = raw[1:].strip().partition("=")
            if not sep:
                raise ParseError(f"line {lineno}: header line is not key=value")
            header[key] = value
            continue
        name, shape, *values = raw.split(",")
        try:
            dims = tuple(int(s) for s in shape.split("x")) if shape else ()
            arr = np.array([float(v) for v in values])
            arrays[name] = arr.reshape(dims)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad parameter row {name!r} ({exc})") from None
    try:
        algo = header["algo"]
        meta = _meta_parse(header.get("meta", ""))
        cfg = _parse_cfg(header)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"model header incomplete or malformed ({exc})") from None
    norm = None
    if "norm_mean" in arrays:
        norm = NormalizationStats(arrays["norm_mean"], arrays["norm_std"])
    if algo == "mlp":
        params = [arrays[f"p{i}"] for i in range(6)]
        return MlpModel(params, meta, norm, cfg)
    if algo in ("logistic", "svm"):
        loss = "logistic" if algo == "logistic" else "hinge"
        return LinearModel(arrays["weights"], float(arrays["bias"][0]), loss, meta, norm, cfg)
    raise ParseError(f"unknown algo {algo!r}")


def with_scaled_output(model: MlpModel, factor: float) -> MlpModel:
    """Copy whose final pre-sigmoid score is multiplied by ``factor``."""
    params = [p.copy() for p in model.params]
    params[4] *= factor
    params[5] *= factor
    return replace(model, params=params, history={})

