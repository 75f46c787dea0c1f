"""Shared oracles: 64-bit central finite differences and brute-force
reference implementations kept independent of the code paths they check."""

from __future__ import annotations

import numpy as np
import pytest

from tokcomp.tensor import Tensor

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def numerical_gradients(value_fn, arrays, h=1e-3):
    """Central differences of a scalar function of several float64 arrays."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = a[idx]
            a[idx] = orig + h
            fp = value_fn()
            a[idx] = orig - h
            fm = value_fn()
            a[idx] = orig
            g[idx] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def check_gradients(op_fn, arrays, seed=0, tol=1e-4, h=1e-3):
    """Compare an op's backward pass against finite differences.

    ``op_fn`` maps Tensors to one output Tensor; the output is projected
    to a scalar with a fixed random adjoint so every element matters.
    All arrays must be float64.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = op_fn(*tensors)
    proj = np.random.default_rng(seed).normal(size=out.shape)
    out.backward(proj)
    analytic = [t.grad for t in tensors]

    def value():
        fresh = [Tensor(a) for a in arrays]
        return float((op_fn(*fresh).data * proj).sum())

    numeric = numerical_gradients(value, arrays, h=h)
    for a_grad, n_grad in zip(analytic, numeric):
        err = np.abs(a_grad - n_grad)
        denom = np.maximum(np.abs(a_grad) + np.abs(n_grad), 1e-6)
        assert (err / denom).max() < tol, f"max rel err {(err / denom).max():.2e}"


def conv1d_oracle(x, w, b):
    """Direct O(C_out * C_in * K * T) same-padded convolution in float64."""
    c_out, c_in, k = w.shape
    t = x.shape[1]
    pad = k // 2
    out = np.zeros((c_out, t), dtype=np.float64)
    for co in range(c_out):
        for tt in range(t):
            acc = float(b[co])
            for ci in range(c_in):
                for kk in range(k):
                    src = tt + kk - pad
                    if 0 <= src < t:
                        acc += float(w[co, ci, kk]) * float(x[ci, src])
            out[co, tt] = acc
    return out


def upsample2_oracle(x, w):
    """Direct transposed-conv scatter (kernel 2, stride 2) in float64."""
    c_in, c_out, _ = w.shape
    t = x.shape[1]
    out = np.zeros((c_out, 2 * t), dtype=np.float64)
    for ci in range(c_in):
        for tt in range(t):
            for co in range(c_out):
                for r in range(2):
                    out[co, 2 * tt + r] += float(x[ci, tt]) * float(w[ci, co, r])
    return out


def softmax_oracle(logits):
    """Column-wise exp/sum softmax in float64, no stabilization tricks."""
    e = np.exp(np.asarray(logits, dtype=np.float64))
    return e / e.sum(axis=0, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
