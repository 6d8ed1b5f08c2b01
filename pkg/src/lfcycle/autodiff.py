"""Small define-by-run reverse-mode autodiff engine on numpy arrays.

Arrays are laid out NCHW for everything spatial. A graph is recorded only
when at least one input requires grad; ``backward`` walks it once in reverse
topological order and then releases it.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op", "_consumed")

    def __init__(self, data, requires_grad=False, _parents=(), _op=""):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = None
        self._op = _op
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self._op or 'leaf'})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, idx):
        return slice_(self, idx)

    def backward(self):
        backward(self)


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else DEFAULT_DTYPE
    return Tensor(np.asarray(x, dtype=dtype))


def _result(data, parents, op, backward_fn):
    parents = tuple(parents)
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs, _parents=parents if needs else (), _op=op)
    if needs:
        out._backward = backward_fn
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def _check_broadcast(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), "add", bw)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), "sub", bw)


def mul(a, b):
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    if not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    _check_broadcast("mul", a, b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), "mul", bw)


def relu(x):
    mask = x.data > 0

    def bw(g):
        return (g * mask,)

    return _result(x.data * mask, (x,), "relu", bw)


def abs_(x):
    sign = np.sign(x.data)

    def bw(g):
        return (g * sign,)

    return _result(np.abs(x.data), (x,), "abs", bw)


def square(x):
    def bw(g):
        return (2.0 * g * x.data,)

    return _result(x.data * x.data, (x,), "square", bw)


def clamp(x, lo=0.0, hi=1.0):
    inside = (x.data >= lo) & (x.data <= hi)

    def bw(g):
        return (g * inside,)

    return _result(np.clip(x.data, lo, hi), (x,), "clamp", bw)


# ---------------------------------------------------------------- reductions


def sum_(x, axis=None, keepdims=False):
    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.dtype, copy=True),)

    return _result(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), "sum", bw)


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / float(n))


# ---------------------------------------------------------------- structural


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(
            i != axis % len(ref) and t.shape[i] != ref[i] for i in range(len(ref))
        ):
            raise ValueError(
                f"concat: shapes {[t.shape for t in tensors]} disagree off axis {axis}"
            )
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, "concat", bw)


def slice_(x, idx):
    def bw(g):
        out = np.zeros_like(x.data)
        out[idx] = g
        return (out,)

    return _result(x.data[idx], (x,), "slice", bw)


def crop(x, top, left, height, width):
    """Spatial crop of an NCHW tensor."""
    if top < 0 or left < 0 or top + height > x.shape[-2] or left + width > x.shape[-1]:
        raise ValueError(
            f"crop: window ({top},{left},{height},{width}) outside spatial shape {x.shape[-2:]}"
        )
    return slice_(x, (..., slice(top, top + height), slice(left, left + width)))


def pad_replicate(x, top, bottom, left, right):
    """Edge-replicating pad of the last two axes."""
    h, w = x.shape[-2:]
    widths = [(0, 0)] * (x.ndim - 2) + [(top, bottom), (left, right)]
    out = np.pad(x.data, widths, mode="edge")

    def bw(g):
        g = g.copy()
        if top:
            g[..., top, :] += g[..., :top, :].sum(axis=-2)
        if bottom:
            g[..., top + h - 1, :] += g[..., top + h :, :].sum(axis=-2)
        g = g[..., top : top + h, :]
        if left:
            g[..., left] += g[..., :left].sum(axis=-1)
        if right:
            g[..., left + w - 1] += g[..., left + w :].sum(axis=-1)
        return (np.ascontiguousarray(g[..., left : left + w]),)

    return _result(out, (x,), "pad_replicate", bw)


# ---------------------------------------------------------------- spatial


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-D cross-correlation, NCHW input, (Cout, Cin, kh, kw) weight, zero padding."""
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"conv2d: input {x.shape} incompatible with weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ValueError(f"conv2d: bias {bias.shape} does not match weight {weight.shape}")
    n, cin, h, w = x.shape
    cout, _, kh, kw = weight.shape
    p, s = padding, stride
    hp, wp = h + 2 * p, w + 2 * p
    if hp < kh or wp < kw:
        raise ValueError(f"conv2d: input {x.shape} smaller than kernel {weight.shape}")
    ho, wo = (hp - kh) // s + 1, (wp - kw) // s + 1
    # channel-major layout so forward and both backward products are single GEMMs
    xp = np.zeros((cin, n, hp, wp), dtype=x.dtype)
    xp[:, :, p : p + h, p : p + w] = x.data.transpose(1, 0, 2, 3)
    cols = np.empty((cin, kh, kw, n, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xp[:, :, i : i + s * ho : s, j : j + s * wo : s]
    cols = cols.reshape(cin * kh * kw, n * ho * wo)
    wmat = weight.data.reshape(cout, -1)
    out = wmat @ cols
    if bias is not None:
        out += bias.data[:, None]
    out = np.ascontiguousarray(out.reshape(cout, n, ho, wo).transpose(1, 0, 2, 3))

    def bw(g):
        g2 = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(cout, -1)
        gw = (g2 @ cols.T).reshape(weight.shape)
        gcols = (wmat.T @ g2).reshape(cin, kh, kw, n, ho, wo)
        gxp = np.zeros((cin, n, hp, wp), dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i : i + s * ho : s, j : j + s * wo : s] += gcols[:, i, j]
        gx = gxp[:, :, p : p + h, p : p + w].transpose(1, 0, 2, 3)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=1))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _result(out, parents, "conv2d", bw)


def avg_pool2(x):
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"avg_pool2: spatial shape {(h, w)} not divisible by 2")
    out = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def bw(g):
        return (np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25,)

    return _result(out, (x,), "avg_pool2", bw)


_UPSAMPLE_CACHE: dict = {}


def _upsample_matrix(n, dtype):
    key = (n, np.dtype(dtype).str)
    mat = _UPSAMPLE_CACHE.get(key)
    if mat is None:
        # half-pixel-centred bilinear x2, edges clamped
        mat = np.zeros((2 * n, n), dtype=dtype)
        for i in range(n):
            lo, hi = max(i - 1, 0), min(i + 1, n - 1)
            mat[2 * i, i] += 0.75
            mat[2 * i, lo] += 0.25
            mat[2 * i + 1, i] += 0.75
            mat[2 * i + 1, hi] += 0.25
        _UPSAMPLE_CACHE[key] = mat
    return mat


def upsample2(x):
    """Bilinear x2 upsampling of an NCHW tensor."""
    n, c, h, w = x.shape
    uh = _upsample_matrix(h, x.dtype)
    uw = _upsample_matrix(w, x.dtype)
    out = np.matmul(np.matmul(uh, x.data), uw.T)

    def bw(g):
        return (np.matmul(np.matmul(uh.T, g), uw),)

    return _result(out, (x,), "upsample2", bw)


def local_separable(padded, k_v, k_h):
    """Per-pixel separable filtering.

    ``padded`` is (N, C, H+K-1, W+K-1); ``k_v`` and ``k_h`` are (N, K, H, W).
    out[n,c,y,x] = sum_ij k_v[n,i,y,x] k_h[n,j,y,x] padded[n,c,y+i,x+j]
    """
    n, c, hp, wp = padded.shape
    if k_v.shape != k_h.shape or k_v.ndim != 4 or k_v.shape[0] != n:
        raise ValueError(
            f"local_separable: kernels {k_v.shape}/{k_h.shape} do not match frame {padded.shape}"
        )
    _, k, h, w = k_v.shape
    if hp != h + k - 1 or wp != w + k - 1:
        raise ValueError(
            f"local_separable: padded frame {padded.shape} needs spatial {(h + k - 1, w + k - 1)}"
        )
    p, kv, kh = padded.data, k_v.data, k_h.data
    kh_cols = [kh[:, j : j + 1] for j in range(k)]
    # rows[i][n,c,y,x] = sum_j kh[n,j,y,x] p[n,c,y+i,x+j]
    rows = []
    out = np.zeros((n, c, h, w), dtype=p.dtype)
    for i in range(k):
        acc = np.zeros((n, c, h, w), dtype=p.dtype)
        for j in range(k):
            acc += kh_cols[j] * p[:, :, i : i + h, j : j + w]
        rows.append(acc)
        out += kv[:, i : i + 1] * acc

    def bw(g):
        gkv = np.empty_like(kv)
        gkh = np.zeros_like(kh)
        gp = np.zeros_like(p)
        for i in range(k):
            gkv[:, i] = np.einsum("ncyx,ncyx->nyx", g, rows[i])
            gi = g * kv[:, i : i + 1]
            for j in range(k):
                gkh[:, j] += np.einsum("ncyx,ncyx->nyx", gi, p[:, :, i : i + h, j : j + w])
                gp[:, :, i : i + h, j : j + w] += gi * kh_cols[j]
        return gp, gkv, gkh

    return _result(out, (padded, k_v, k_h), "local_separable", bw)


# ---------------------------------------------------------------- backward


def _toposort(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Populate ``.grad`` on every leaf reachable from scalar ``loss``; frees the graph."""
    if loss.data.size != 1 or loss.ndim > 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss._consumed:
        raise RuntimeError("backward: graph already consumed; run a new forward pass")
    if not loss.requires_grad:
        raise RuntimeError("backward: loss does not depend on any tensor requiring grad")
    order = _toposort(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=parent.dtype).reshape(parent.shape)
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    for node in order:
        if node._backward is not None:
            node._parents = ()
            node._backward = None
    loss._consumed = True


# ---------------------------------------------------------------- optimizer


class AdamState:
    def __init__(self):
        self.step = 0
        self.m = None
        self.v = None


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam update of ``params`` (list of Tensor) from ``grads`` (list of arrays)."""
    if len(params) != len(grads):
        raise ValueError(f"adam_step: {len(params)} params but {len(grads)} grads")
    if state.m is None:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ValueError("adam_step: optimizer state does not match parameter list")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            continue
        if g.shape != p.shape or m.shape != p.shape:
            raise ValueError(f"adam_step: shape mismatch param {p.shape} grad {g.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype)
    return params, state


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState()

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        grads = [p.grad for p in self.params]
        adam_step(self.params, grads, self.state, self.lr, *self.betas, self.eps)
