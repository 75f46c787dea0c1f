"""A tour of the tensor engine: build a tiny conv stack by hand, run a
forward pass, and check one gradient against finite differences.

Run: python3 demo/01_autodiff_basics.py
"""

import numpy as np

from tokcomp import tensor as T

rng = np.random.default_rng(0)

# a 3-channel, 12-token input, one conv layer, pooling, and a softmax head
x = T.Tensor(rng.normal(size=(3, 12)).astype(np.float32))
w = T.Tensor(rng.normal(scale=0.5, size=(4, 3, 3)).astype(np.float32),
             requires_grad=True)
b = T.Tensor(np.zeros(4, dtype=np.float32), requires_grad=True)
head_w = T.Tensor(rng.normal(size=(2, 4)).astype(np.float32))
labels = np.ones(6, dtype=np.int64)
pad_mask = np.ones(6, dtype=np.int64)


def loss():
    h = T.relu(T.conv1d(x, w, b))
    pooled, _ = T.maxpool1d(h)
    probs = T.token_softmax_head(pooled, head_w)
    return T.masked_cross_entropy(probs, labels, pad_mask)


value = loss()
value.backward()
print(f"loss {float(value.data):.4f}, grad shapes w {w.grad.shape} b {b.grad.shape}")

# finite-difference spot check on a single conv weight
i = (0, 0, 0)
analytic = w.grad[i]
eps, saved = 1e-2, w.data[i]
w.data[i] = saved + eps
up = float(loss().data)
w.data[i] = saved - eps
down = float(loss().data)
w.data[i] = saved

print(f"d(loss)/d(w[0,0,0]): analytic {analytic:+.6f}, "
      f"finite difference {(up - down) / (2 * eps):+.6f}")
