"""Train the conv U-Net on a small synthetic deletion corpus, report F1,
and compress a few sentences with the trained model.

Run: python3 demo/02_train_and_compress.py   (about a minute on a laptop)
"""

from tokcomp import synth
from tokcomp.models import ModelConfig
from tokcomp.train_eval import TrainConfig, compress, train

cfg = synth.SynthConfig(n_examples=600, embed_dim=48, min_len=8, max_len=24,
                        stopword_rate=0.5, negation_rate=0.05, seed=42)
splits, features = synth.make_splits(cfg, n_test=80, n_val=80)

params, report = train(
    ModelConfig(variant="full_unet", input_channels=features.dim),
    TrainConfig(batch_size=32, max_epochs=15, seed=0, verbose=True),
    splits, features)

print(f"\ntest F1 {report.test_f1:.3f}, accuracy {report.test_accuracy:.3f}, "
      f"converged after {report.convergence_time:.1f}s")

print("\nsample compressions (stopwords should vanish):")
for ex in splits["test"][:5]:
    sentence = " ".join(ex.tokens)
    result = compress(params, sentence, features)
    print(f"  in : {sentence}")
    print(f"  out: {result.text}")
