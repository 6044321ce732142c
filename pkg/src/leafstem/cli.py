"""Command-line front end: every stage on its own plus the full pipeline.

Exit codes: 0 success, 1 usage or parameter error, 2 data or validation
error. Diagnostics go to stderr; reports go to files or stdout.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .cloud import (
    LEAF,
    STEM,
    CloudFormatError,
    PointCloud,
    build_index,
    load_labels,
    load_xyz,
    save_labeled,
    save_ply,
)
from .density import DensityParams, StemSelectionError, select_validated_stem_samples, write_density_csv
from .hull import HullError, SampleSet, convex_hull_3d, expand_training, leaf_samples, save_off
from .metrics import confusion, format_report, report_record, to_jsonl
from .pipeline import PipelineConfig, PipelineError, random_baseline, resolve_overlap, run
from .svm import SvmFormatError, SvmParams, load_model, predict, save_model, train
from .synth import PlantSpec, generate_plant

log = logging.getLogger("leafstem")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DATA_ERRORS = (
    CloudFormatError,
    HullError,
    PipelineError,
    StemSelectionError,
    SvmFormatError,
    OSError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# value checks shared by flags and config-file entries
def _positive(v: float) -> bool:
    return v > 0


def _at_least_one(v: int) -> bool:
    return v >= 1


def _gamma(text: str):
    if text == "auto":
        return "auto"
    return float(text)


# name -> (converter, check, description of the check)
PARAMS = {
    "r1": (float, _positive, "must be positive"),
    "r2": (float, _positive, "must be positive"),
    "r": (float, _positive, "must be positive"),
    "p": (int, _at_least_one, "must be >= 1"),
    "n": (int, _at_least_one, "must be >= 1"),
    "grid_spacing": (float, _positive, "must be positive"),
    "seed": (int, lambda v: v >= 0, "must be >= 0"),
    "threads": (int, _at_least_one, "must be >= 1"),
    "max_retries": (int, _at_least_one, "must be >= 1"),
    "k": (int, lambda v: v >= 2, "must be >= 2"),
    "C": (float, _positive, "must be positive"),
    "gamma": (_gamma, lambda v: v == "auto" or v > 0, "must be positive or 'auto'"),
    "tol": (float, _positive, "must be positive"),
    "max_passes": (int, _at_least_one, "must be >= 1"),
}
BOOLS = ("scaling", "validate")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _check(name: str, raw: str, source: str):
    conv, ok, what = PARAMS[name]
    try:
        v = conv(raw)
    except ValueError:
        raise UsageError(f"{source}: invalid value {raw!r}") from None
    if not ok(v):
        raise UsageError(f"{source} {what}, got {raw}")
    return v


def _typed(name: str):
    # argparse already prefixes "argument --flag:"
    def parse(raw):
        conv, ok, what = PARAMS[name]
        try:
            v = conv(raw)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {raw!r}") from None
        if not ok(v):
            raise argparse.ArgumentTypeError(f"{what}, got {raw}")
        return v

    parse.__name__ = name
    return parse


def read_config(path) -> dict:
    """Parse a ``key = value`` file; keys use the flag names with underscores."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path} ({exc.strerror})") from None
    try:
        cp.read_string("[leafstem]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise UsageError(f"--config: {exc}") from None
    out = {}
    for key, raw in cp["leafstem"].items():
        key = key.replace("-", "_")
        if key in PARAMS:
            out[key] = _check(key, raw, f"{path}: {key}")
        elif key in BOOLS:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"{path}: {key} must be true or false, got {raw!r}")
            out[key] = raw.lower() in ("true", "1", "yes")
        else:
            raise UsageError(f"{path}: unknown key {key!r}")
    return out


def _merged(args, defaults: dict) -> dict:
    """defaults < config file < command-line flags."""
    vals = dict(defaults)
    if getattr(args, "config", None):
        vals.update({k: v for k, v in read_config(args.config).items() if k in defaults})
    for key in defaults:
        v = getattr(args, key, None)
        if v is not None:
            vals[key] = v
    return vals


def _build(fn, source: str, **kw):
    try:
        return fn(**kw)
    except ValueError as exc:
        raise UsageError(f"{source}: {exc}") from None


# defaults per parameter group
DENSITY_DEFAULTS = {"p": 500, "r": 5.0, "grid_spacing": 0.1, "n": 20, "seed": 0,
                    "validate": True, "max_retries": 10, "threads": 1}
SVM_DEFAULTS = {"C": 10.0, "gamma": 0.02, "tol": 1e-3, "max_passes": 100, "scaling": False}
EXPAND_DEFAULTS = {"r1": 0.2, "r2": 0.2, "threads": 1}


def _svm_params(v: dict) -> SvmParams:
    return _build(SvmParams, "svm", C=v["C"], gamma=v["gamma"], tol=v["tol"],
                  max_passes=v["max_passes"], scaling=v["scaling"])


def _density_params(v: dict) -> DensityParams:
    return _build(DensityParams, "density", p=v["p"], r=v["r"], grid_spacing=v["grid_spacing"],
                  n=v["n"], seed=v["seed"])


def read_indices(path) -> np.ndarray:
    try:
        arr = np.loadtxt(path, dtype=np.int64, ndmin=1, comments="#")
    except ValueError as exc:
        raise CloudFormatError(f"{path}: {exc}") from None
    return arr


def write_indices(path, idx) -> None:
    Path(path).write_text("".join(f"{int(i)}\n" for i in idx))


def _write_report(rec: dict, path) -> None:
    sys.stdout.write(format_report(rec))
    if path:
        Path(path).write_text(to_jsonl(rec))


def _write_labels(cloud: PointCloud, labels, out, ply) -> None:
    if out:
        save_labeled(out, cloud, labels)
    if ply:
        save_ply(ply, cloud, labels)


def _check_indices(idx: np.ndarray, n: int, path) -> None:
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise CloudFormatError(f"{path}: index out of range for a cloud of {n} points")


# subcommands

def cmd_generate(args) -> int:
    spec = _build(
        PlantSpec, "generate",
        points_total=args.points, leaf_count=args.leaf_count, leaf_droop_angle=args.droop,
        noise_sigma=args.noise, slender_leaf=args.slender_leaf, seed=args.seed or 0,
    )
    cloud, labels = generate_plant(spec)
    save_labeled(args.out, cloud, labels)
    if args.ply:
        save_ply(args.ply, cloud, labels)
    log.info("wrote %d points (%d stem) to %s", len(cloud), int((labels == STEM).sum()), args.out)
    return EXIT_OK


def cmd_hull(args) -> int:
    cloud = load_xyz(args.inp)
    hull = convex_hull_3d(cloud)
    samples = leaf_samples(hull)
    write_indices(args.out, samples.indices)
    if args.off:
        save_off(args.off, cloud, hull)
    log.info("%d hull faces, %d leaf samples", len(hull.faces), len(samples))
    return EXIT_OK


def cmd_stems(args) -> int:
    v = _merged(args, DENSITY_DEFAULTS)
    params = _density_params(v)
    cloud = load_xyz(args.inp)
    if len(cloud) < params.p:
        raise PipelineError(f"cloud has {len(cloud)} points, fewer than p={params.p}")
    index = build_index(cloud, workers=v["threads"])
    samples, reports, seed = select_validated_stem_samples(
        cloud, index, params, validate=v["validate"], max_retries=v["max_retries"]
    )
    write_indices(args.out, samples.indices)
    if args.csv:
        write_density_csv(args.csv, reports)
    log.info("%d stem samples (seed %d)", len(samples), seed)
    return EXIT_OK


def cmd_train(args) -> int:
    v = _merged(args, {**EXPAND_DEFAULTS, **SVM_DEFAULTS})
    svm = _svm_params(v)
    cloud = load_xyz(args.inp)
    leaf_idx, stem_idx = read_indices(args.leaf_samples), read_indices(args.stem_samples)
    _check_indices(leaf_idx, len(cloud), args.leaf_samples)
    _check_indices(stem_idx, len(cloud), args.stem_samples)
    index = build_index(cloud, workers=v["threads"])
    x_leaf = expand_training(cloud, index, SampleSet(leaf_idx, LEAF), v["r1"])
    x_stem = expand_training(cloud, index, SampleSet(stem_idx, STEM), v["r2"])
    ts = resolve_overlap(x_leaf, x_stem, 0.1)
    model = train(cloud.points[ts.leaf_indices], cloud.points[ts.stem_indices], svm)
    save_model(args.model, model)
    log.info("trained on %d leaf / %d stem points, %d support vectors",
             len(ts.leaf_indices), len(ts.stem_indices), len(model.dual_coefs))
    return EXIT_OK


def cmd_classify(args) -> int:
    cloud = load_xyz(args.inp)
    model = load_model(args.model)
    labels = predict(model, cloud.points)
    _write_labels(cloud, labels, args.out, args.ply)
    log.info("%d leaf, %d stem", int((labels == LEAF).sum()), int((labels == STEM).sum()))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    truth, pred = load_labels(args.truth), load_labels(args.pred)
    if len(truth) != len(pred):
        raise CloudFormatError(f"{len(truth)} truth labels but {len(pred)} predictions")
    rec = report_record(confusion(truth, pred), args.method, args.seed)
    _write_report(rec, args.report)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    v = _merged(args, {**DENSITY_DEFAULTS, **SVM_DEFAULTS, **EXPAND_DEFAULTS})
    config = _build(
        PipelineConfig, "pipeline",
        r1=v["r1"], r2=v["r2"], density=_density_params(v), svm=_svm_params(v),
        validate=v["validate"], max_retries=v["max_retries"], threads=v["threads"],
    )
    cloud = load_xyz(args.inp)
    truth = load_labels(args.truth) if args.truth else None
    t0 = time.perf_counter()
    result = run(config, cloud, truth)
    log.info("pipeline finished in %.2f s", time.perf_counter() - t0)
    _write_labels(cloud, result.labels, args.out, args.ply)
    if args.model:
        save_model(args.model, result.model)
    if result.report is not None:
        _write_report(result.report, args.report)
    elif args.report:
        raise UsageError("--report needs --truth")
    return EXIT_OK


def cmd_baseline(args) -> int:
    v = _merged(args, {**SVM_DEFAULTS, "r1": 0.2, "r2": 0.2, "k": 50, "seed": 0, "max_retries": 10})
    cloud, truth = load_xyz(args.inp), load_labels(args.truth)
    result = random_baseline(cloud, truth, v["k"], r1=v["r1"], r2=v["r2"], seed=v["seed"],
                             svm_params=_svm_params(v), max_retries=v["max_retries"])
    _write_labels(cloud, result.labels, args.out, args.ply)
    _write_report(result.report, args.report)
    return EXIT_OK


def _add(p, *names):
    for name in names:
        p.add_argument(_flag(name), dest=name, type=_typed(name), default=None, metavar=name.upper())


def _add_svm(p):
    _add(p, "C", "gamma", "tol", "max_passes")
    p.add_argument("--no-scaling", dest="scaling", action="store_const", const=False)
    p.add_argument("--scaling", dest="scaling", action="store_const", const=True,
                   help="standardize features before training (off by default)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="leafstem", description="Leaf/stem separation of plant point clouds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser(parents=[common], name="generate", help="write a synthetic labeled plant")
    p.add_argument("--out", required=True)
    p.add_argument("--ply")
    p.add_argument("--points", type=int, default=100_000)
    p.add_argument("--leaf-count", type=int, default=8)
    p.add_argument("--droop", type=float, default=55.0, help="leaf angle from vertical, degrees")
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--slender-leaf", action="store_true")
    _add(p, "seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser(parents=[common], name="hull", help="leaf samples from the convex hull")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="leaf sample indices, one per line")
    p.add_argument("--off", help="also write the hull mesh as OFF")
    p.set_defaults(func=cmd_hull)

    p = sub.add_parser(parents=[common], name="stems", help="stem samples by grid-projection density")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="stem sample indices, one per line")
    p.add_argument("--csv", help="density table of all candidates")
    p.add_argument("--config")
    p.add_argument("--no-validate", dest="validate", action="store_const", const=False)
    _add(p, "p", "r", "n", "grid_spacing", "seed", "max_retries", "threads")
    p.set_defaults(func=cmd_stems)

    p = sub.add_parser(parents=[common], name="train", help="expand samples and train the SVM")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--leaf-samples", required=True)
    p.add_argument("--stem-samples", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    _add(p, "r1", "r2", "threads")
    _add_svm(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(parents=[common], name="classify", help="label every point with a trained model")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.add_argument("--ply")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser(parents=[common], name="evaluate", help="confusion matrix and kappa")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report")
    p.add_argument("--method", default="external")
    _add(p, "seed")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(parents=[common], name="pipeline", help="hull + density + SVM, end to end")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--truth")
    p.add_argument("--report")
    p.add_argument("--out")
    p.add_argument("--ply")
    p.add_argument("--model")
    p.add_argument("--config")
    p.add_argument("--no-validate", dest="validate", action="store_const", const=False)
    _add(p, "r1", "r2", "p", "r", "n", "grid_spacing", "seed", "max_retries", "threads")
    _add_svm(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser(parents=[common], name="baseline", help="random-sample baseline")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report")
    p.add_argument("--out")
    p.add_argument("--ply")
    p.add_argument("--config")
    _add(p, "k", "r1", "r2", "seed", "max_retries")
    _add_svm(p)
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"leafstem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"leafstem {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
