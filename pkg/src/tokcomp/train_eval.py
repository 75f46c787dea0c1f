"""Training loop with early stopping, token-level metrics, wall-clock
timing checkpoints, and the table/figure suite drivers.

Both model families run through the exact same batching, shuffling, and
evaluation code; only the forward/backward cost differs, which is the
fairness contract behind the timing comparison.
"""

from __future__ import annotations

import csv
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import models
from .data import SEQ_LEN, TokenizedExample, pad_truncate, tokenize
from .errors import ConfigurationError, DivergenceError, EmptyDatasetError
from .features import FeatureProvider
from .models import ModelConfig, ModelParams
from .optim import AdamState, adam_step, zero_grads
from .tensor import Tensor, masked_cross_entropy

REPORT_HEADER = ["run_id", "variant", "features", "L", "train_size", "seed",
                 "elapsed_s", "split", "f1", "accuracy", "loss"]


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 200
    lr: float = 1e-3
    patience: int = 10              # evaluations without val-F1 improvement
    eval_every: int = 1             # epochs
    seed: int = 0
    timing_checkpoints: list[float] = field(default_factory=list)
    target_f1: float | None = None  # stop as soon as validation F1 reaches it
    verbose: bool = False


@dataclass
class ReportRow:
    elapsed_s: float
    split: str
    f1: float
    accuracy: float
    loss: float


@dataclass
class RunReport:
    run_id: str = ""
    variant: str = ""
    features: str = ""
    layers: int = 0
    train_size: int = 0
    seed: int = 0
    rows: list[ReportRow] = field(default_factory=list)
    convergence_time: float = 0.0
    best_val_f1: float = 0.0
    test_f1: float = 0.0
    test_accuracy: float = 0.0

    def csv_rows(self) -> list[list]:
        return [[self.run_id, self.variant, self.features, self.layers,
                 self.train_size, self.seed, f"{r.elapsed_s:.3f}", r.split,
                 f"{r.f1:.6f}", f"{r.accuracy:.6f}", f"{r.loss:.6f}"]
                for r in self.rows]


def write_report_csv(path, reports: list[RunReport]) -> None:
    """Atomic write (temp file + rename) of one CSV for a set of runs."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(REPORT_HEADER)
            for report in reports:
                writer.writerows(report.csv_rows())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class EvalResult:
    f1: float
    accuracy: float
    precision: float
    recall: float
    loss: float
    masks: list[np.ndarray]


def metrics_from_counts(tp: int, fp: int, fn: int, correct: int,
                        total: int) -> tuple[float, float, float, float]:
    """(f1, accuracy, precision, recall) over the retained class."""
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    # same as 2PR/(P+R) but in one division, so it is exact on integer counts
    f1 = 2 * tp / (2 * tp + fp + fn) if precision + recall > 0 else 0.0
    accuracy = correct / total if total > 0 else 0.0
    return f1, accuracy, precision, recall


def _batches(examples: list[TokenizedExample], features: FeatureProvider,
             batch_size: int, order: np.ndarray | None = None):
    idx = order if order is not None else np.arange(len(examples))
    for start in range(0, len(idx), batch_size):
        chunk = [examples[i] for i in idx[start:start + batch_size]]
        x = np.stack([features.matrix(ex) for ex in chunk])
        labels = np.stack([ex.labels for ex in chunk])
        pad = np.stack([ex.pad_mask for ex in chunk])
        yield chunk, x, labels, pad


def evaluate(params: ModelParams, examples: list[TokenizedExample],
             features: FeatureProvider, batch_size: int = 64) -> EvalResult:
    """Token-level P/R/F1/accuracy over the retained class, padding excluded."""
    if not examples:
        raise EmptyDatasetError("cannot evaluate an empty split")
    tp = fp = fn = correct = total = 0
    loss_sum = 0.0
    loss_n = 0
    masks: list[np.ndarray] = []
    for chunk, x, labels, pad in _batches(examples, features, batch_size):
        probs = models.forward(params, Tensor(x), training=False)
        loss = masked_cross_entropy(probs, labels, pad)
        n_valid = int(pad.sum())
        loss_sum += float(loss.data) * n_valid
        loss_n += n_valid
        pred = models.predict_mask(probs, pad)
        masks.extend(pred)
        valid = pad.astype(bool)
        p = pred[valid]
        y = labels[valid]
        tp += int(((p == 1) & (y == 1)).sum())
        fp += int(((p == 1) & (y == 0)).sum())
        fn += int(((p == 0) & (y == 1)).sum())
        correct += int((p == y).sum())
        total += int(valid.sum())
    f1, acc, precision, recall = metrics_from_counts(tp, fp, fn, correct, total)
    return EvalResult(f1=f1, accuracy=acc, precision=precision, recall=recall,
                      loss=loss_sum / max(loss_n, 1), masks=masks)


def train(model_cfg: ModelConfig, train_cfg: TrainConfig,
          splits: dict[str, list[TokenizedExample]],
          features: FeatureProvider) -> tuple[ModelParams, RunReport]:
    """Train to best validation F1 with patience-based early stopping.

    Returns the best-validation parameters and a report holding one row
    per evaluation plus any wall-clock timing checkpoints.
    """
    train_set = splits["train"]
    val_set = splits["validation"]
    test_set = splits.get("test", [])
    if not train_set:
        raise EmptyDatasetError("empty training set")
    if features.dim != model_cfg.input_channels:
        raise ConfigurationError(
            f"feature dim {features.dim} != model input_channels "
            f"{model_cfg.input_channels}")

    params = models.build(model_cfg, seed=train_cfg.seed)
    state = AdamState(params.tensors)
    shuffle_rng = np.random.default_rng(train_cfg.seed)
    dropout_rng = np.random.default_rng(train_cfg.seed + 1)

    report = RunReport(variant=model_cfg.variant, features=features.name,
                       layers=features.layers, train_size=len(train_set),
                       seed=train_cfg.seed)
    checkpoints = sorted(train_cfg.timing_checkpoints)
    next_checkpoint = 0
    best_f1 = -1.0
    best_values = params.copy_values()
    best_elapsed = 0.0
    evals_since_best = 0
    start = time.perf_counter()
    stop = False

    def val_row(elapsed: float, loss_value: float) -> EvalResult:
        result = evaluate(params, val_set, features)
        report.rows.append(ReportRow(elapsed_s=elapsed, split="validation",
                                     f1=result.f1, accuracy=result.accuracy,
                                     loss=loss_value))
        return result

    for epoch in range(train_cfg.max_epochs):
        order = shuffle_rng.permutation(len(train_set))
        epoch_loss = 0.0
        n_batches = 0
        for _, x, labels, pad in _batches(train_set, features,
                                          train_cfg.batch_size, order):
            zero_grads(params.tensors)
            probs = models.forward(params, Tensor(x), training=True, rng=dropout_rng)
            loss = masked_cross_entropy(probs, labels, pad)
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}")
            loss.backward()
            adam_step(params.tensors, state, lr=train_cfg.lr)
            epoch_loss += value
            n_batches += 1
            elapsed = time.perf_counter() - start
            if next_checkpoint < len(checkpoints) \
                    and elapsed >= checkpoints[next_checkpoint]:
                # collapse ticks we ran past into a single evaluation
                while next_checkpoint < len(checkpoints) \
                        and elapsed >= checkpoints[next_checkpoint]:
                    next_checkpoint += 1
                result = val_row(elapsed, value)
                if result.f1 > best_f1:
                    best_f1 = result.f1
                    best_values = params.copy_values()
                    best_elapsed = elapsed
                if train_cfg.target_f1 is not None and result.f1 >= train_cfg.target_f1:
                    stop = True
            if stop:
                break
        mean_loss = epoch_loss / max(n_batches, 1)
        if not stop and (epoch + 1) % train_cfg.eval_every == 0:
            elapsed = time.perf_counter() - start
            result = val_row(elapsed, mean_loss)
            if result.f1 > best_f1:
                best_f1 = result.f1
                best_values = params.copy_values()
                best_elapsed = elapsed
                evals_since_best = 0
            else:
                evals_since_best += 1
            if train_cfg.verbose:
                print(f"epoch {epoch + 1}: loss={mean_loss:.4f} "
                      f"val_f1={result.f1:.4f} best={best_f1:.4f}")
            if train_cfg.target_f1 is not None and result.f1 >= train_cfg.target_f1:
                stop = True
            if evals_since_best >= train_cfg.patience:
                stop = True
        if stop:
            break

    params.load_values(best_values)
    report.best_val_f1 = max(best_f1, 0.0)
    report.convergence_time = best_elapsed
    if test_set:
        result = evaluate(params, test_set, features)
        report.test_f1 = result.f1
        report.test_accuracy = result.accuracy
        report.rows.append(ReportRow(elapsed_s=time.perf_counter() - start,
                                     split="test", f1=result.f1,
                                     accuracy=result.accuracy, loss=result.loss))
    return params, report


@dataclass
class CompressResult:
    text: str
    empty_warning: bool = False
    truncated: bool = False


def compress(params: ModelParams, sentence: str,
             features: FeatureProvider) -> CompressResult:
    """Run the model on one sentence and join the retained tokens."""
    tokens = tokenize(sentence)
    if not tokens:
        return CompressResult(text="", empty_warning=True)
    ex = TokenizedExample(tokens=tokens,
                          labels=np.zeros(len(tokens), dtype=np.int64),
                          pad_mask=np.ones(len(tokens), dtype=np.int64),
                          original_length=len(tokens), id="<stdin>")
    ex = pad_truncate(ex, SEQ_LEN)
    x = Tensor(features.matrix(ex))
    probs = models.forward(params, x, training=False)
    mask = models.predict_mask(probs, ex.pad_mask)
    text = " ".join(tok for tok, keep in zip(ex.tokens, mask) if keep == 1)
    return CompressResult(text=text, empty_warning=(mask.sum() == 0),
                          truncated=ex.truncated)


# --------------------------------------------------------------------------
# suite drivers

SUITES = ("table1", "table2", "table3", "table5", "fig2")


def _mean_report(reports: list[RunReport]) -> RunReport:
    mean = RunReport(run_id=reports[0].run_id + "-mean",
                     variant=reports[0].variant, features=reports[0].features,
                     layers=reports[0].layers, train_size=reports[0].train_size,
                     seed=-1)
    mean.test_f1 = float(np.mean([r.test_f1 for r in reports]))
    mean.test_accuracy = float(np.mean([r.test_accuracy for r in reports]))
    mean.convergence_time = float(np.mean([r.convergence_time for r in reports]))
    mean.rows.append(ReportRow(elapsed_s=mean.convergence_time, split="test",
                               f1=mean.test_f1, accuracy=mean.test_accuracy,
                               loss=0.0))
    return mean


def run_cells(cells: list[dict], splits, feature_map: dict[str, FeatureProvider],
              seeds: list[int], train_cfg: TrainConfig,
              out_path=None) -> tuple[list[RunReport], list[str]]:
    """Train every (cell, seed) combination and collect reports.

    Each cell is {"run_id", "variant", "features", optional "train_size",
    "timing_checkpoints"}. Cells whose feature provider is missing are
    skipped and listed. A mean row per cell follows its per-seed rows.
    """
    reports: list[RunReport] = []
    skipped: list[str] = []
    for cell in cells:
        provider = feature_map.get(cell["features"])
        if provider is None:
            skipped.append(cell["run_id"])
            continue
        cell_reports = []
        for seed in seeds:
            cfg = ModelConfig(variant=cell["variant"],
                              input_channels=provider.dim)
            tc = TrainConfig(**{**train_cfg.__dict__, "seed": seed})
            if "timing_checkpoints" in cell:
                tc.timing_checkpoints = list(cell["timing_checkpoints"])
            cell_splits = dict(splits)
            if cell.get("train_size"):
                cell_splits["train"] = splits["train"][:cell["train_size"]]
            _, report = train(cfg, tc, cell_splits, provider)
            report.run_id = cell["run_id"]
            cell_reports.append(report)
            reports.append(report)
        if cell_reports:
            reports.append(_mean_report(cell_reports))
    if out_path is not None:
        write_report_csv(out_path, reports)
    return reports, skipped


def suite_cells(suite: str, size_schedule: list[int] | None = None,
                timing_checkpoints: list[float] | None = None) -> list[dict]:
    """The cell list for each reported table/figure."""
    if suite == "table1":
        return [
            {"run_id": "bilstm+emb", "variant": "bilstm", "features": "glove"},
            {"run_id": "cnn+emb", "variant": "full_unet", "features": "glove"},
            {"run_id": "bilstm+bert", "variant": "bilstm", "features": "tcf:L1"},
            {"run_id": "cnn+multilayer-bert", "variant": "full_unet",
             "features": "tcf:L4"},
        ]
    if suite == "table2":
        return [{"run_id": f"cnn+bert-L{layer}", "variant": "full_unet",
                 "features": f"tcf:L{layer}"} for layer in (1, 2, 3, 4)]
    if suite == "table3":
        return [
            {"run_id": "full", "variant": "full_unet", "features": "glove"},
            {"run_id": "no_conv245", "variant": "no_conv245", "features": "glove"},
            {"run_id": "no_pool_block", "variant": "no_pool_block",
             "features": "glove"},
        ]
    if suite == "table5":
        ticks = timing_checkpoints or [16, 64, 120, 210, 720, 1095, 1483,
                                       1863, 2239, 2622, 3303]
        return [
            {"run_id": "cnn+bert-timing", "variant": "full_unet",
             "features": "tcf:L1", "timing_checkpoints": ticks},
            {"run_id": "bilstm+bert-timing", "variant": "bilstm",
             "features": "tcf:L1", "timing_checkpoints": ticks},
        ]
    if suite == "fig2":
        schedule = size_schedule or [8000, 16000]
        return [{"run_id": f"cnn+bert-n{n}", "variant": "full_unet",
                 "features": "tcf:L4", "train_size": n} for n in schedule]
    raise ValueError(f"unknown suite {suite!r}")
