"""Command-line surface: train / eval / compress / suite.

Every flag falls back to a TOKCOMP_-prefixed environment variable
(e.g. --data -> TOKCOMP_DATA). Exit codes: 2 configuration error,
3 data error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import os
import sys


from . import data as data_mod
from . import features as feat_mod
from . import models, train_eval
from .errors import ConfigurationError, DataError, DivergenceError, TokcompError
from .manifest import build_manifest, read_manifest, write_manifest
from .models import ModelConfig
from .train_eval import TrainConfig

MODEL_NAMES = {
    "unet": "full_unet",
    "unet-noconv245": "no_conv245",
    "unet-nopool": "no_pool_block",
    "bilstm": "bilstm",
}

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


def _env_default(flag: str):
    return os.environ.get("TOKCOMP_" + flag.upper().replace("-", "_"))


def _add_flag(parser, flag: str, **kwargs):
    env = _env_default(flag)
    if env is not None:
        # argparse only applies type= to command-line values, not defaults
        kwargs["default"] = kwargs["type"](env) if "type" in kwargs else env
        kwargs.pop("required", None)
    parser.add_argument("--" + flag, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tokcomp",
                                     description="Token-wise sentence compression")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write a run directory")
    _add_flag(p_train, "data", help="dataset file")
    _add_flag(p_train, "format", default="tsv_labeled",
              choices=["tsv_labeled", "pairs_json"])
    _add_flag(p_train, "features", help="glove:PATH or tcf:PATH")
    _add_flag(p_train, "layers", type=int, default=1,
              help="contextual layers to use with tcf features")
    _add_flag(p_train, "model", default="unet", choices=sorted(MODEL_NAMES))
    _add_flag(p_train, "seed", type=int, default=0)
    _add_flag(p_train, "out", help="output directory")
    _add_flag(p_train, "checkpoints", default="",
              help="comma-separated wall-clock seconds for timed snapshots")
    _add_flag(p_train, "epochs", type=int, default=200)
    _add_flag(p_train, "batch-size", type=int, default=32)
    _add_flag(p_train, "lr", type=float, default=1e-3)
    _add_flag(p_train, "patience", type=int, default=10)
    _add_flag(p_train, "test-size", type=int, default=1000)
    _add_flag(p_train, "val-size", type=int, default=1000)
    _add_flag(p_train, "manifest", help="rerun from a previously written manifest")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    _add_flag(p_eval, "checkpoint", help="TCKPT1 file")
    _add_flag(p_eval, "data")
    _add_flag(p_eval, "format", default="tsv_labeled",
              choices=["tsv_labeled", "pairs_json"])
    _add_flag(p_eval, "features")
    _add_flag(p_eval, "layers", type=int, default=1)
    _add_flag(p_eval, "split", default="test",
              choices=["test", "validation", "train"])
    _add_flag(p_eval, "test-size", type=int, default=1000)
    _add_flag(p_eval, "val-size", type=int, default=1000)

    p_comp = sub.add_parser("compress",
                            help="compress sentences from stdin, one per line")
    _add_flag(p_comp, "checkpoint")
    _add_flag(p_comp, "features")
    _add_flag(p_comp, "layers", type=int, default=1)

    p_suite = sub.add_parser("suite", help="run a reported table/figure")
    _add_flag(p_suite, "suite", choices=list(train_eval.SUITES))
    _add_flag(p_suite, "data")
    _add_flag(p_suite, "format", default="tsv_labeled",
              choices=["tsv_labeled", "pairs_json"])
    _add_flag(p_suite, "glove", help="GloVe embeddings for +Emb cells")
    _add_flag(p_suite, "tcf", help="TCF1 feature file for +BERT cells")
    _add_flag(p_suite, "seeds", default="0,1,2")
    _add_flag(p_suite, "out", help="output directory")
    _add_flag(p_suite, "sizes", default="8000,16000",
              help="training-size schedule for fig2")
    _add_flag(p_suite, "epochs", type=int, default=200)
    _add_flag(p_suite, "test-size", type=int, default=1000)
    _add_flag(p_suite, "val-size", type=int, default=1000)
    return parser


def _require(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_"), None) in (None, ""):
            raise ConfigurationError(f"--{name} is required")


def _load_splits(args) -> dict[str, list]:
    records = data_mod.load_dataset(args.data, args.format)
    if args.format == "pairs_json":
        records = data_mod.derive_corpus(records)
    examples = [data_mod.pad_truncate(ex) for ex in records]
    spec = data_mod.SplitSpec(test_size=args.test_size, validation_size=args.val_size)
    return data_mod.split_dataset(examples, spec)


def _load_features(spec: str, layers: int) -> feat_mod.FeatureProvider:
    kind, _, path = spec.partition(":")
    if not path:
        raise ConfigurationError(
            f"--features must look like glove:PATH or tcf:PATH, got {spec!r}")
    if kind == "glove":
        return feat_mod.GloveFeatures(feat_mod.load_glove(path))
    if kind == "tcf":
        return feat_mod.TcfFeatures(path, layers)
    raise ConfigurationError(f"unknown feature source {kind!r}")


def cmd_train(args) -> int:
    if args.manifest:
        stored = read_manifest(args.manifest)
        if stored.get("command") != "train":
            raise ConfigurationError("manifest is not from a train run")
        for key, value in stored["options"].items():
            setattr(args, key, value)
    _require(args, "data", "features", "out")
    os.makedirs(args.out, exist_ok=True)
    splits = _load_splits(args)
    provider = _load_features(args.features, args.layers)
    checkpoints = [float(v) for v in args.checkpoints.split(",") if v.strip()]

    model_cfg = ModelConfig(variant=MODEL_NAMES[args.model],
                            input_channels=provider.dim)
    train_cfg = TrainConfig(batch_size=args.batch_size, max_epochs=args.epochs,
                            lr=args.lr, patience=args.patience, seed=args.seed,
                            timing_checkpoints=checkpoints)
    params, report = train_eval.train(model_cfg, train_cfg, splits, provider)
    report.run_id = f"{args.model}-{os.path.basename(args.data)}-seed{args.seed}"

    models.save_checkpoint(os.path.join(args.out, "model.tckpt"), params)
    train_eval.write_report_csv(os.path.join(args.out, "report.csv"), [report])
    options = {key: getattr(args, key) for key in
               ("data", "format", "features", "layers", "model", "seed",
                "checkpoints", "epochs", "batch_size", "lr", "patience",
                "test_size", "val_size")}
    feature_path = args.features.partition(":")[2]
    write_manifest(os.path.join(args.out, "manifest.json"),
                   build_manifest("train", options, [args.data, feature_path]))
    print(f"test_f1={report.test_f1:.4f} test_accuracy={report.test_accuracy:.4f} "
          f"convergence_s={report.convergence_time:.1f}")
    return 0


def cmd_eval(args) -> int:
    _require(args, "checkpoint", "data", "features")
    if not os.path.exists(args.checkpoint):
        raise DataError(f"checkpoint {args.checkpoint} not found")
    params = models.load_checkpoint(args.checkpoint)
    splits = _load_splits(args)
    provider = _load_features(args.features, args.layers)
    result = train_eval.evaluate(params, splits[args.split], provider)
    print(f"{result.f1:.4f} {result.accuracy:.4f}")
    return 0


def cmd_compress(args) -> int:
    _require(args, "checkpoint", "features")
    if not os.path.exists(args.checkpoint):
        raise DataError(f"checkpoint {args.checkpoint} not found")
    params = models.load_checkpoint(args.checkpoint)
    provider = _load_features(args.features, args.layers)
    for line in sys.stdin:
        result = train_eval.compress(params, line.rstrip("\n"), provider)
        print(result.text)
    return 0


def cmd_suite(args) -> int:
    _require(args, "suite", "data", "out")
    os.makedirs(args.out, exist_ok=True)
    splits = _load_splits(args)
    seeds = [int(v) for v in args.seeds.split(",") if v.strip()]
    sizes = [int(v) for v in args.sizes.split(",") if v.strip()]

    feature_map: dict[str, feat_mod.FeatureProvider] = {}
    if args.glove:
        feature_map["glove"] = feat_mod.GloveFeatures(feat_mod.load_glove(args.glove))
    if args.tcf:
        for layer in (1, 2, 3, 4):
            try:
                feature_map[f"tcf:L{layer}"] = feat_mod.TcfFeatures(args.tcf, layer)
            except ConfigurationError:
                break

    cells = train_eval.suite_cells(args.suite, size_schedule=sizes)
    train_cfg = TrainConfig(max_epochs=args.epochs)
    out_csv = os.path.join(args.out, f"{args.suite}.csv")
    reports, skipped = train_eval.run_cells(cells, splits, feature_map, seeds,
                                            train_cfg, out_path=out_csv)
    write_manifest(os.path.join(args.out, f"{args.suite}.manifest.json"),
                   build_manifest("suite", {"suite": args.suite, "seeds": seeds,
                                            "sizes": sizes},
                                  [args.data, args.glove, args.tcf]))
    for run_id in skipped:
        print(f"skipped {run_id}: feature source missing", file=sys.stderr)
    print(f"wrote {out_csv} ({len(reports)} report rows, {len(skipped)} cells skipped)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"train": cmd_train, "eval": cmd_eval,
               "compress": cmd_compress, "suite": cmd_suite}[args.command]
    try:
        return handler(args)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as e:
        print(f"divergence: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except TokcompError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
