"""Dense-tensor math with reverse-mode automatic differentiation.

The op set is deliberately minimal: exactly what a 1-D conv U-Net and a
stacked BiLSTM need. Tensors wrap a numpy array (float32 for training;
tests may use float64 for tight finite-difference comparisons). Every op
records a backward closure; ``Tensor.backward()`` runs a topological
sweep so each node's closure fires exactly once.

Sequence ops accept either a single example ``[C, T]`` or a batch
``[B, C, T]``; the batch axis, when present, is always leading.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateBatchError, DimensionError


class Tensor:
    """A dense n-d array plus optional gradient and autograd hooks."""

    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 _prev: tuple["Tensor", ...] = (),
                 _backward: Callable[[], None] | None = None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._prev = _prev
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Reverse sweep from this node. Seeds with ones (or ``grad``)."""
        if grad is None:
            grad = np.ones_like(self.data)
        self.accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo_order(self)):
            if node._backward is not None and node.grad is not None:
                node._backward()

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)


def topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS; inputs always precede their consumers."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._prev:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _needs_grad(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """View an array as [B, C, T]; remembers if a batch axis was added."""
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise DimensionError(f"expected 2-d [C,T] or 3-d [B,C,T] input, got shape {x.shape}")


def _debatch(x: np.ndarray, squeeze: bool) -> np.ndarray:
    return x[0] if squeeze else x


def conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Same-padded 1-D convolution over the token axis.

    ``x`` is [C_in, T] or [B, C_in, T]; ``weight`` is [C_out, C_in, K] with
    odd K; ``bias`` is [C_out]. Output length equals input length.
    """
    if weight.data.ndim != 3:
        raise DimensionError(f"conv1d weight must be [C_out, C_in, K], got {weight.shape}")
    c_out, c_in, k = weight.shape
    if k % 2 == 0:
        raise ConfigurationError(f"conv1d kernel width must be odd for same-padding, got {k}")
    xb, squeeze = _batched(x.data)
    if xb.shape[1] != c_in:
        raise DimensionError(
            f"conv1d input has {xb.shape[1]} channels, weight expects {c_in}")
    if bias.shape != (c_out,):
        raise DimensionError(f"conv1d bias must be [{c_out}], got {bias.shape}")
    b, _, t = xb.shape
    pad = k // 2
    # channel-major padded copy: every tap becomes one [C_out,C_in]x[C_in,B*T]
    # matmul instead of B small ones. k is tiny (1/3/5), so this still beats
    # im2col on memory.
    xp = np.zeros((c_in, b, t + 2 * pad), dtype=xb.dtype)
    xp[:, :, pad:pad + t] = xb.transpose(1, 0, 2)
    # [K, C_out, C_in] contiguous: strided weight views fall off the BLAS path
    wk = np.ascontiguousarray(np.moveaxis(weight.data, 2, 0))
    out = np.empty((c_out, b * t), dtype=xb.dtype)
    out[:] = bias.data[:, None]
    for kk in range(k):
        s = np.ascontiguousarray(xp[:, :, kk:kk + t]).reshape(c_in, b * t)
        out += wk[kk] @ s
    out_b = np.ascontiguousarray(out.reshape(c_out, b, t).transpose(1, 0, 2))

    result = Tensor(_debatch(out_b, squeeze), requires_grad=_needs_grad(x, weight, bias),
                    _prev=(x, weight, bias))

    def backward():
        go, _ = _batched(result.grad)
        go_f = np.ascontiguousarray(go.transpose(1, 0, 2)).reshape(c_out, b * t)
        if bias.requires_grad:
            bias.accumulate(go_f.sum(axis=1))
        if weight.requires_grad:
            gw = np.empty_like(weight.data)
            for kk in range(k):
                s = np.ascontiguousarray(xp[:, :, kk:kk + t]).reshape(c_in, b * t)
                gw[:, :, kk] = go_f @ s.T
            weight.accumulate(gw)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for kk in range(k):
                gxp[:, :, kk:kk + t] += (wk[kk].T @ go_f).reshape(c_in, b, t)
            x.accumulate(_debatch(
                gxp[:, :, pad:pad + t].transpose(1, 0, 2), squeeze))

    if result.requires_grad:
        result._backward = backward
    return result


def maxpool1d(x: Tensor) -> tuple[Tensor, np.ndarray]:
    """Stride-2 max pooling over pairs; returns (pooled, argmax indices).

    Ties route the gradient to the lower index (numpy argmax convention).
    """
    xb, squeeze = _batched(x.data)
    b, c, t = xb.shape
    if t % 2 != 0:
        raise DimensionError(f"maxpool1d needs an even length, got T={t}")
    pairs = xb.reshape(b, c, t // 2, 2)
    idx = pairs.argmax(axis=3)
    out = np.take_along_axis(pairs, idx[..., None], axis=3)[..., 0]

    result = Tensor(_debatch(out, squeeze), requires_grad=x.requires_grad, _prev=(x,))

    def backward():
        go, _ = _batched(result.grad)
        gx = np.zeros_like(pairs)
        np.put_along_axis(gx, idx[..., None], go[..., None], axis=3)
        x.accumulate(_debatch(gx.reshape(b, c, t), squeeze))

    if result.requires_grad:
        result._backward = backward
    return result, _debatch(idx, squeeze)


def upsample2(x: Tensor, weight: Tensor) -> Tensor:
    """Transposed convolution with kernel 2, stride 2; doubles the length.

    ``weight`` is [C_in, C_out, 2]: out[:, 2t + r] += W[:, :, r]^T x[:, t].
    """
    if weight.data.ndim != 3 or weight.shape[2] != 2:
        raise DimensionError(f"upsample2 weight must be [C_in, C_out, 2], got {weight.shape}")
    c_in, c_out, _ = weight.shape
    xb, squeeze = _batched(x.data)
    if xb.shape[1] != c_in:
        raise DimensionError(
            f"upsample2 input has {xb.shape[1]} channels, weight expects {c_in}")
    b, _, t = xb.shape
    # contiguous per-phase weights keep the matmuls on the BLAS path
    w0 = np.ascontiguousarray(weight.data[:, :, 0])
    w1 = np.ascontiguousarray(weight.data[:, :, 1])
    xf = np.ascontiguousarray(xb.transpose(1, 0, 2)).reshape(c_in, b * t)
    out = np.empty((b, c_out, 2 * t), dtype=xb.dtype)
    out[:, :, 0::2] = (w0.T @ xf).reshape(c_out, b, t).transpose(1, 0, 2)
    out[:, :, 1::2] = (w1.T @ xf).reshape(c_out, b, t).transpose(1, 0, 2)

    result = Tensor(_debatch(out, squeeze), requires_grad=_needs_grad(x, weight),
                    _prev=(x, weight))

    def backward():
        go, _ = _batched(result.grad)
        even = np.ascontiguousarray(
            go[:, :, 0::2].transpose(1, 0, 2)).reshape(c_out, b * t)
        odd = np.ascontiguousarray(
            go[:, :, 1::2].transpose(1, 0, 2)).reshape(c_out, b * t)
        if weight.requires_grad:
            gw = np.empty_like(weight.data)
            gw[:, :, 0] = xf @ even.T
            gw[:, :, 1] = xf @ odd.T
            weight.accumulate(gw)
        if x.requires_grad:
            gx = (w0 @ even + w1 @ odd).reshape(c_in, b, t)
            x.accumulate(_debatch(gx.transpose(1, 0, 2), squeeze))

    if result.requires_grad:
        result._backward = backward
    return result


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two sequences along the channel axis."""
    ab, sq_a = _batched(a.data)
    bb, sq_b = _batched(b.data)
    if sq_a != sq_b or ab.shape[0] != bb.shape[0] or ab.shape[2] != bb.shape[2]:
        raise DimensionError(
            f"concat_channels needs matching batch and length: {a.shape} vs {b.shape}")
    c_a = ab.shape[1]
    out = np.concatenate([ab, bb], axis=1)

    result = Tensor(_debatch(out, sq_a), requires_grad=_needs_grad(a, b), _prev=(a, b))

    def backward():
        go, _ = _batched(result.grad)
        if a.requires_grad:
            a.accumulate(_debatch(go[:, :c_a], sq_a))
        if b.requires_grad:
            b.accumulate(_debatch(go[:, c_a:], sq_b))

    if result.requires_grad:
        result._backward = backward
    return result


def concat_vec(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two per-step vectors ([C] or [B, C]) along the last axis."""
    if a.data.ndim != b.data.ndim or a.data.shape[:-1] != b.data.shape[:-1]:
        raise DimensionError(f"concat_vec shape mismatch: {a.shape} vs {b.shape}")
    c_a = a.data.shape[-1]
    out = np.concatenate([a.data, b.data], axis=-1)
    result = Tensor(out, requires_grad=_needs_grad(a, b), _prev=(a, b))

    def backward():
        if a.requires_grad:
            a.accumulate(result.grad[..., :c_a])
        if b.requires_grad:
            b.accumulate(result.grad[..., c_a:])

    if result.requires_grad:
        result._backward = backward
    return result


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); subgradient at 0 taken as 0."""
    out = np.maximum(x.data, 0)
    result = Tensor(out, requires_grad=x.requires_grad, _prev=(x,))

    def backward():
        x.accumulate(result.grad * (x.data > 0))

    if result.requires_grad:
        result._backward = backward
    return result


def dropout(x: Tensor, p: float, training: bool,
            rng: np.random.Generator | int | None = None) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Identity at inference or at p == 0. The RNG is explicit so runs are
    reproducible from a seed.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        result = Tensor(x.data, requires_grad=x.requires_grad, _prev=(x,))

        def backward_id():
            x.accumulate(result.grad)

        if result.requires_grad:
            result._backward = backward_id
        return result

    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    result = Tensor(x.data * keep, requires_grad=x.requires_grad, _prev=(x,))

    def backward():
        x.accumulate(result.grad * keep)

    if result.requires_grad:
        result._backward = backward
    return result


def token_softmax_head(x: Tensor, w: Tensor) -> Tensor:
    """Per-token linear map followed by a numerically stable softmax.

    ``x`` is [C, T] or [B, C, T]; ``w`` is [n_classes, C]. Each output
    column sums to 1.
    """
    xb, squeeze = _batched(x.data)
    if w.data.ndim != 2 or w.shape[1] != xb.shape[1]:
        raise DimensionError(f"head weight {w.shape} does not match input {x.shape}")
    logits = np.matmul(w.data, xb)                      # [B, n_classes, T]
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=1, keepdims=True)

    result = Tensor(_debatch(probs, squeeze), requires_grad=_needs_grad(x, w),
                    _prev=(x, w))

    def backward():
        go, _ = _batched(result.grad)
        # softmax jacobian: dL/dz = p * (g - sum_c g*p)
        dot = (go * probs).sum(axis=1, keepdims=True)
        dz = probs * (go - dot)
        if w.requires_grad:
            w.accumulate(np.einsum("bct,bit->ci", dz, xb))
        if x.requires_grad:
            x.accumulate(_debatch(np.matmul(w.data.T, dz), squeeze))

    if result.requires_grad:
        result._backward = backward
    return result


def masked_cross_entropy(probs: Tensor, labels: np.ndarray,
                         pad_mask: np.ndarray) -> Tensor:
    """Mean negative log-likelihood over unpadded positions.

    ``probs`` is [n_classes, T] or [B, n_classes, T] with columns summing
    to 1; ``labels`` and ``pad_mask`` are integer arrays of shape [T] or
    [B, T]. Padded positions contribute nothing to the loss or gradient.
    """
    pb, squeeze = _batched(probs.data)
    labels = np.atleast_2d(np.asarray(labels))
    mask = np.atleast_2d(np.asarray(pad_mask)).astype(bool)
    b, n_classes, t = pb.shape
    if labels.shape != (b, t) or mask.shape != (b, t):
        raise DimensionError(
            f"labels/pad_mask {labels.shape}/{mask.shape} do not match probs {probs.shape}")
    col_sums = pb.sum(axis=1)
    if not np.allclose(col_sums[mask], 1.0, atol=1e-5):
        raise DimensionError("probability columns must sum to 1 (pass softmax output)")
    n_valid = int(mask.sum())
    if n_valid == 0:
        raise DegenerateBatchError("all positions are padded; loss undefined")

    picked = np.take_along_axis(pb, labels[:, None, :], axis=1)[:, 0, :]  # [B, T]
    # clip only guards log(0) from float32 underflow of extreme logits
    logp = np.log(np.maximum(picked, 1e-12))
    loss = -(logp * mask).sum() / n_valid

    result = Tensor(np.asarray(loss, dtype=pb.dtype), requires_grad=probs.requires_grad,
                    _prev=(probs,))

    def backward():
        g = np.zeros_like(pb)
        coeff = -(result.grad / n_valid) / np.maximum(picked, 1e-12)
        np.put_along_axis(g, labels[:, None, :], (coeff * mask)[:, None, :], axis=1)
        probs.accumulate(_debatch(g, squeeze))

    if result.requires_grad:
        result._backward = backward
    return result


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor,
              wx: Tensor, wh: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM step with standard i/f/g/o gating.

    ``x`` is [B, I] (or [I]), states are [B, H]; ``wx`` is [4H, I],
    ``wh`` is [4H, H], ``b`` is [4H], gate order (input, forget,
    candidate, output). Returns (h_t, c_t); both participate in the
    autograd graph, so backward through time just works.
    """
    xv = np.atleast_2d(x.data)
    hv = np.atleast_2d(h_prev.data)
    cv = np.atleast_2d(c_prev.data)
    squeeze = x.data.ndim == 1
    h_dim = hv.shape[1]
    if wx.shape != (4 * h_dim, xv.shape[1]) or wh.shape != (4 * h_dim, h_dim) \
            or b.shape != (4 * h_dim,):
        raise DimensionError(
            f"lstm_cell params {wx.shape}/{wh.shape}/{b.shape} do not match "
            f"input {xv.shape} and hidden size {h_dim}")

    z = xv @ wx.data.T + hv @ wh.data.T + b.data
    zi, zf, zg, zo = np.split(z, 4, axis=1)
    i = _sigmoid(zi)
    f = _sigmoid(zf)
    g = np.tanh(zg)
    o = _sigmoid(zo)
    c = f * cv + i * g
    tc = np.tanh(c)
    h = o * tc

    needs = _needs_grad(x, h_prev, c_prev, wx, wh, b)
    prev = (x, h_prev, c_prev, wx, wh, b)
    h_t = Tensor(h[0] if squeeze else h, requires_grad=needs, _prev=prev)
    c_t = Tensor(c[0] if squeeze else c, requires_grad=needs, _prev=prev)

    def cell_backward(dh: np.ndarray, dc_in: np.ndarray):
        dc = dc_in + dh * o * (1 - tc * tc)
        dzo = dh * tc * o * (1 - o)
        dzf = dc * cv * f * (1 - f)
        dzi = dc * g * i * (1 - i)
        dzg = dc * i * (1 - g * g)
        dz = np.concatenate([dzi, dzf, dzg, dzo], axis=1)
        if x.requires_grad:
            gx = dz @ wx.data
            x.accumulate(gx[0] if squeeze else gx)
        if h_prev.requires_grad:
            gh = dz @ wh.data
            h_prev.accumulate(gh[0] if squeeze else gh)
        if c_prev.requires_grad:
            gc = dc * f
            c_prev.accumulate(gc[0] if squeeze else gc)
        if wx.requires_grad:
            wx.accumulate(dz.T @ xv)
        if wh.requires_grad:
            wh.accumulate(dz.T @ hv)
        if b.requires_grad:
            b.accumulate(dz.sum(axis=0))

    # h_t and c_t share every consumer that touches either state (the next
    # cell lists both in _prev), so when either node's backward fires in
    # reverse topological order both adjoints are already final. Run the
    # shared cell backward once instead of once per node with a zero half.
    done = [False]

    def backward_shared():
        if done[0]:
            return
        done[0] = True
        dh = (np.atleast_2d(h_t.grad) if h_t.grad is not None
              else np.zeros_like(hv))
        dc = (np.atleast_2d(c_t.grad) if c_t.grad is not None
              else np.zeros_like(cv))
        cell_backward(dh, dc)

    if needs:
        h_t._backward = backward_shared
        c_t._backward = backward_shared
    return h_t, c_t


def select_time(x: Tensor, t: int) -> Tensor:
    """Column t of a [B, C, T] (or [C, T]) sequence, as [B, C] (or [C])."""
    xb, squeeze = _batched(x.data)
    # Copy out of the strided view: downstream matmuls on a non-contiguous
    # column slice fall off the BLAS fast path.
    out = np.ascontiguousarray(xb[:, :, t])
    result = Tensor(_debatch(out, squeeze), requires_grad=x.requires_grad, _prev=(x,))

    def backward():
        # Write into the grad slice directly; materializing a full [B, C, T]
        # zeros buffer per selected column costs O(C*T) each and dominates
        # recurrent backward passes.
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        gslice = x.grad[:, :, t] if x.grad.ndim == 3 else x.grad[:, t]
        gslice += result.grad

    if result.requires_grad:
        result._backward = backward
    return result


def stack_time(columns: Sequence[Tensor]) -> Tensor:
    """Stack per-step [B, C] (or [C]) vectors into a [B, C, T] sequence."""
    if not columns:
        raise DimensionError("stack_time needs at least one column")
    out = np.stack([np.atleast_2d(c.data) for c in columns], axis=2)
    squeeze = columns[0].data.ndim == 1
    result = Tensor(_debatch(out, squeeze), requires_grad=_needs_grad(*columns),
                    _prev=tuple(columns))

    def backward():
        go, _ = _batched(result.grad)
        for t, col in enumerate(columns):
            if col.requires_grad:
                g = go[:, :, t]
                col.accumulate(g[0] if squeeze else g)

    if result.requires_grad:
        result._backward = backward
    return result


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
