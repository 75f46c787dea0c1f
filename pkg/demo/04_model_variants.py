"""Compare the full U-Net against its ablations and the BiLSTM baseline
on a synthetic task with a long-range labeling rule.

The rule flips the label of a token 7 positions after a marker, which is
inside the full U-Net's receptive field but outside the shallow variant's.

Run: python3 demo/04_model_variants.py   (a few minutes)
"""

import time

from tokcomp import synth
from tokcomp.models import VARIANTS, ModelConfig, build
from tokcomp.train_eval import TrainConfig, train

cfg = synth.SynthConfig(n_examples=700, embed_dim=48, min_len=12, max_len=32,
                        stopword_rate=0.45, negation_rate=0.05,
                        flip_rate=0.25, seed=7)
splits, features = synth.make_splits(cfg, n_test=100, n_val=100)

print(f"{'variant':<14} {'params':>10} {'test F1':>8} {'seconds':>8}")
for variant in VARIANTS:
    mc = ModelConfig(variant=variant, input_channels=features.dim)
    n_params = build(mc, seed=0).n_parameters()
    t0 = time.perf_counter()
    _, report = train(mc, TrainConfig(batch_size=32, max_epochs=10, seed=0),
                      splits, features)
    print(f"{variant:<14} {n_params:>10,} {report.test_f1:>8.3f} "
          f"{time.perf_counter() - t0:>8.1f}")
