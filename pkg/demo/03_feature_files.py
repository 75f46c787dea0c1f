"""Round-trip the TCF1 contextual-feature file format and train from it.

Writes a small feature file where layer -1 holds informative embeddings,
then trains once with one layer and once with all four stacked.

Run: python3 demo/03_feature_files.py
"""

import tempfile
from pathlib import Path

import numpy as np

from tokcomp import synth
from tokcomp.features import TcfFeatures, write_feature_file
from tokcomp.models import ModelConfig
from tokcomp.train_eval import TrainConfig, train

cfg = synth.SynthConfig(n_examples=400, embed_dim=16, min_len=8, max_len=24,
                        stopword_rate=0.5, negation_rate=0.05, seed=5)
splits, glove = synth.make_splits(cfg, n_test=60, n_val=60)
everything = splits["test"] + splits["validation"] + splits["train"]

rng = np.random.default_rng(0)
hidden = glove.dim


def record(ex):
    base = glove.matrix(ex).T                      # [T, hidden]
    layers = [base]
    for _ in range(3):                              # deeper layers: noisy copies
        noisy = base + rng.normal(scale=0.5, size=base.shape).astype(np.float32)
        noisy[ex.pad_mask == 0] = 0.0
        layers.append(noisy.astype(np.float32))
    return ex.id, np.stack(layers)


with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "features.tcf"
    n = write_feature_file(path, (record(ex) for ex in everything),
                           layers=4, hidden=hidden)
    print(f"wrote {n} records, {path.stat().st_size / 1e6:.1f} MB")

    for n_layers in (1, 4):
        provider = TcfFeatures(path, layers=n_layers)
        params, report = train(
            ModelConfig(variant="full_unet", input_channels=provider.dim),
            TrainConfig(batch_size=32, max_epochs=10, seed=0),
            splits, provider)
        print(f"L={n_layers} (dim {provider.dim}): test F1 {report.test_f1:.3f}")
