"""Command-line harness: ``designscope <command> [options]``.

Commands: gen, train, eval, sweep, pca, otoc, bounds. Options may also come
from a ``--config`` file of ``key=value`` lines (``#`` starts a comment);
command-line flags win. Every output records a manifest, the fully resolved
configuration, and its hash. Worker count and output paths are left out of
the hash because they cannot change results.

Exit codes: 0 success, 2 usage error, 3 data or compatibility error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import ensembles, features, ml, otoc
from .ensembles import DesignBoundParams, EnsembleSpec
from .errors import CompatibilityError, DomainError, ParseError, TrainingDivergedError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
_UNHASHED = {"config", "out", "workers", "func"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config and manifests


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def manifest_text(command: str, args: argparse.Namespace) -> str:
    items = {k: v for k, v in vars(args).items() if k not in _UNHASHED}
    lines = [f"command={command}"]
    for key in sorted(items):
        value = items[key]
        if isinstance(value, (list, tuple)):
            value = ",".join(map(str, value))
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def manifest_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _write_manifest(path: Path, text: str) -> str:
    path.write_text(text)
    return manifest_hash(text)


def _write_csv(path: Path, header: list[str], rows: list[list], digest: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header + ["manifest_hash"])
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row] + [digest])


# ---------------------------------------------------------------- argument helpers


def _n_s(text: str) -> str:
    """Shot count as text: a positive integer, or ``inf`` for exact expectations."""
    text = str(text).strip().lower()
    if text in ("inf", "exact"):
        return "inf"
    if not text.isdigit() or int(text) < 1:
        raise argparse.ArgumentTypeError(f"N_s must be a positive integer or 'inf', got {text!r}")
    return text


def _shots(text: str | None) -> int | None:
    return None if text in (None, "inf") else int(text)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v]


def _range(text: str) -> list[int]:
    """``a:b:step`` (inclusive), ``a:b`` or a comma list."""
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        if len(parts) == 2:
            parts.append(1)
        lo, hi, step = parts
        if step < 1 or hi < lo:
            raise UsageError(f"bad range {text!r}")
        return list(range(lo, hi + 1, step))
    return _int_list(text)


def _spec_from(args, kind=None, **over) -> EnsembleSpec:
    kind = (kind or args.kind).upper()
    kw = {
        "depth": args.depth if kind in ("LRC", "NOISY_LRC", "MONIT_LRC") else None,
        "iterations": args.iterations if kind == "RDC" else None,
        "p": args.p if kind in ("NOISY_LRC", "MONIT_LRC") else None,
        "preproc": args.preproc,
    }
    kw.update(over)
    return EnsembleSpec(kind, args.n, **kw)


def _add_spec_args(p):
    p.add_argument("--kind", type=str)
    p.add_argument("--n", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--preproc", type=str, default="identity")


def _add_common(p, out_help: str):
    p.add_argument("--config", type=str)
    p.add_argument("--seed", type=int, default="0")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", type=str, required=False, help=out_help)


def _load_many(paths) -> features.Dataset:
    return features.concat([features.load_dataset(p) for p in paths])


def _load_models(paths) -> list:
    files = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("model_*.txt")) if p.is_dir() else [p])
    if not files:
        raise UsageError("no model files found")
    return [ml.load_model(f) for f in files]


def _workers(args) -> int:
    return args.workers if args.workers else features.default_workers()


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) in (None, [], "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    _require(args, "kind", "n", "nu", "ns", "kprime", "count", "out")
    spec = _spec_from(args)
    ds = features.generate_dataset(
        spec, args.count, args.nu, _shots(args.ns), args.kprime, args.seed, args.label or spec.kind, _workers(args)
    )
    out = Path(args.out)
    ds.info["manifest_hash"] = _write_manifest(out.with_suffix(out.suffix + ".manifest"), manifest_text("gen", args))
    features.save_dataset(ds, out)
    print(f"wrote {len(ds)} rows x {ds.meta.n_features} features to {out}")
    return EXIT_OK


def _cfg(args) -> ml.TrainConfig:
    return ml.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        svm_lambda=args.svm_lambda,
        hidden=tuple(args.hidden) if args.hidden else None,
    )


def cmd_train(args) -> int:
    _require(args, "train", "valid", "out")
    train, valid = _load_many(args.train), _load_many(args.valid)
    test = _load_many(args.test) if args.test else None
    if test is not None:
        features.check_compatible(train.meta, test.meta)
    report = ml.ensemble_protocol(
        train, valid, args.algo, _cfg(args), n_models=args.models, rng=args.seed, test=test, workers=_workers(args)
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = _write_manifest(out / "manifest.txt", manifest_text("train", args))
    for i, model in enumerate(report.models):
        ml.save_model(model, out / f"model_{i:02d}.txt", extra={"manifest_hash": digest})
    rows = []
    for i in range(len(report.models)):
        rows.append([str(i), report.train_acc[i], report.valid_acc[i], report.test_acc[i] if report.test_acc else ""])
    summary = report.summary()
    for j, label in enumerate(("mean", "std")):
        rows.append([label] + [summary[s][j] if s in summary else "" for s in ("train", "valid", "test")])
    _write_csv(out / "report.csv", ["model", "train_acc", "valid_acc", "test_acc"], rows, digest)
    for split, (m, s) in summary.items():
        print(f"{args.algo} {split}: {m:.4f} +- {s:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _require(args, "models", "data", "out")
    models = _load_models(args.models)
    rows = []
    for path in args.data:
        ds = features.load_dataset(path)
        p_mean, p_std = ml.mean_p_rc(models, ds)
        try:
            accs = [ml.evaluate_accuracy(m, ds) for m in models]
            acc_mean, acc_std = float(np.mean(accs)), float(np.std(accs))
        except ValueError:
            acc_mean = acc_std = ""
        rows.append([str(path), len(ds), p_mean, p_std, acc_mean, acc_std])
        print(f"{path}: P_RC {p_mean:.4f} +- {p_std:.4f}")
    digest = manifest_hash(manifest_text("eval", args))
    out = Path(args.out)
    _write_manifest(out.with_suffix(out.suffix + ".manifest"), manifest_text("eval", args))
    _write_csv(out, ["dataset", "rows", "P_RC_mean", "P_RC_std", "accuracy_mean", "accuracy_std"], rows, digest)
    return EXIT_OK


def cmd_sweep(args) -> int:
    _require(args, "models", "kind", "n", "values", "count", "out")
    models = _load_models(args.models)
    meta = models[0].meta
    n_u = args.nu if args.nu is not None else meta.n_u
    n_s = _shots(args.ns) if args.ns is not None else meta.n_s
    kprimes = args.kprime or list(meta.kprimes)
    kind = args.kind.upper()
    if kind not in ("LRC", "RDC", "NOISY_LRC", "MONIT_LRC"):
        raise UsageError("sweep kind must be one of lrc, rdc, noisy_lrc, monit_lrc")
    ps = args.ps if kind in ("NOISY_LRC", "MONIT_LRC") else [None]
    if ps is None:
        raise UsageError(f"--ps is required for {kind}")
    rows = []
    point = 0
    for p in ps:
        for value in args.values:
            over = {"iterations": value} if kind == "RDC" else {"depth": value}
            if p is not None:
                over["p"] = p
            spec = _spec_from(args, kind, **over)
            # each grid point gets its own block of substreams
            ds = features.generate_dataset(
                spec, args.count, n_u, n_s, kprimes, args.seed, workers=_workers(args), first_index=point * args.count
            )
            point += 1
            p_mean, p_std = ml.mean_p_rc(models, ds)
            rows.append([kind, value if kind != "RDC" else "", value if kind == "RDC" else "", "" if p is None else p, p_mean, p_std])
            print(f"{spec.to_text()}: P_RC {p_mean:.4f} +- {p_std:.4f}", flush=True)
    out = Path(args.out)
    digest = _write_manifest(out.with_suffix(out.suffix + ".manifest"), manifest_text("sweep", args))
    _write_csv(out, ["kind", "D", "I", "p", "P_RC_mean", "P_RC_std"], rows, digest)
    return EXIT_OK


def cmd_pca(args) -> int:
    _require(args, "reference", "out")
    ref = _load_many(args.reference)
    stats = features.zscore_fit(ref)
    pca = ml.pca_fit(features.zscore_apply(ref, stats), n_components=2)
    rows = []
    named = [("reference", ref)] + [(str(p), features.load_dataset(p)) for p in args.probe or []]
    for name, ds in named:
        features.check_compatible(ref.meta, ds.meta)
        pts = ml.pca_project(features.zscore_apply(ds, stats), pca)
        labels = ds.labels
        rows.extend([name, str(lab), float(a), float(b)] for lab, (a, b) in zip(labels, pts))
    out = Path(args.out)
    digest = _write_manifest(out.with_suffix(out.suffix + ".manifest"), manifest_text("pca", args))
    _write_csv(out, ["dataset", "label", "PC1", "PC2"], rows, digest)
    var_rows = [[f"PC{i + 1}", float(v), float(r)] for i, (v, r) in enumerate(zip(pca.explained_variance, pca.explained_variance_ratio))]
    _write_csv(out.with_suffix(".variance.csv"), ["component", "explained_variance", "explained_variance_ratio"], var_rows, digest)
    print(f"explained variance ratio: {', '.join(f'{r:.4f}' for r in pca.explained_variance_ratio)}")
    return EXIT_OK


def cmd_otoc(args) -> int:
    _require(args, "kind", "n", "m", "count", "out")
    cfg = otoc.OtocConfig(_spec_from(args), args.m, args.a, args.b, args.variant)
    ds = otoc.otoc_dataset(cfg, args.count, args.seed, args.label)
    out = Path(args.out)
    ds.info["manifest_hash"] = _write_manifest(out.with_suffix(out.suffix + ".manifest"), manifest_text("otoc", args))
    features.save_dataset(ds, out)
    print(f"wrote {len(ds)} OTOC rows ({cfg.variant}) to {out}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    _require(args, "t", "n", "eps")
    params = DesignBoundParams(args.t, args.n, args.eps, args.c)
    print(f"lrc_depth_bound={ensembles.lrc_design_depth_bound(params)!r}")
    print(f"  (c * t^9 * (n t + log2(1/eps)) with c={args.c}; c is not fixed by the bound)")
    try:
        value = ensembles.rdc_design_iteration_bound(args.t, args.n, args.eps)
    except DomainError as exc:
        print("rdc_iteration_bound=inapplicable")
        print(f"  ({exc})")
    else:
        print(f"rdc_iteration_bound={value!r}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="designscope", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a feature dataset")
    _add_spec_args(p)
    p.add_argument("--nu", type=int)
    p.add_argument("--ns", type=_n_s)
    p.add_argument("--kprime", type=_int_list)
    p.add_argument("--count", type=int)
    p.add_argument("--label", type=str)
    _add_common(p, "dataset file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="run the ten-model protocol")
    p.add_argument("--train", nargs="+")
    p.add_argument("--valid", nargs="+")
    p.add_argument("--test", nargs="+")
    p.add_argument("--algo", choices=ml.ALGORITHMS, default="mlp")
    p.add_argument("--lr", type=float, default="1e-5")
    p.add_argument("--batch", type=int, default="128")
    p.add_argument("--epochs", type=int, default="100")
    p.add_argument("--hidden", type=_int_list)
    p.add_argument("--svm-lambda", type=float, default="1e-4")
    p.add_argument("--models", type=int, default="10")
    _add_common(p, "output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score datasets with trained models")
    p.add_argument("--models", nargs="+")
    p.add_argument("--data", nargs="+")
    _add_common(p, "CSV file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="P_RC over a parameter range of a probe family")
    p.add_argument("--models", nargs="+")
    _add_spec_args(p)
    p.add_argument("--values", type=_range, help="depths or iterations, e.g. 4:30:2")
    p.add_argument("--ps", type=_float_list, help="noise or measurement ratios, comma separated")
    p.add_argument("--nu", type=int)
    p.add_argument("--ns", type=_n_s)
    p.add_argument("--kprime", type=_int_list)
    p.add_argument("--count", type=int)
    _add_common(p, "CSV file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pca", help="project probe datasets onto the reference principal plane")
    p.add_argument("--reference", nargs="+")
    p.add_argument("--probe", nargs="+")
    _add_common(p, "CSV file")
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("otoc", help="generate an OTOC dataset")
    _add_spec_args(p)
    p.add_argument("--m", type=int)
    p.add_argument("--a", type=str, default="X")
    p.add_argument("--b", type=str, default="Y")
    p.add_argument("--variant", type=str, default="ALV")
    p.add_argument("--count", type=int)
    p.add_argument("--label", type=str)
    _add_common(p, "dataset file")
    p.set_defaults(func=cmd_otoc)

    p = sub.add_parser("bounds", help="print the design-depth bounds")
    p.add_argument("--t", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--c", type=float, default="1.0")
    p.add_argument("--config", type=str)
    p.set_defaults(func=cmd_bounds, workers=None)
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CompatibilityError, ParseError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, FloatingPointError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
