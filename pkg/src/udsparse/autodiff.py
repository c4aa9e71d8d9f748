"""Minimal reverse-mode autodiff over dense float64 numpy arrays.

Each ``Tensor`` wraps an ndarray plus the operation that produced it
(parents and a local-gradient closure), so the op graph doubles as the
tape.  ``backward`` walks the tape once in reverse topological order.
Subgraphs that cannot reach a parameter are pruned at construction time.

Design constraints kept deliberately tight:

  * float64 everywhere; any op producing NaN/Inf raises NonFiniteError;
  * no broadcasting beyond scalars and row-broadcast bias addition --
    shapes must match exactly otherwise (ShapeMismatchError);
  * single-threaded tape construction; identical inputs give bit-identical
    forward and backward results.

Parameters live in a ParameterStore (name -> Tensor).  The optimizer may
rebind ``.data`` in place between steps; everything else is treated as
immutable.
"""

import numpy as np

from .rng import XorShiftRNG


class ShapeMismatchError(Exception):
    pass


class NonFiniteError(Exception):
    pass


class NotScalarError(Exception):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "grad_fn")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.parents = ()
        self.grad_fn = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data):
    return Tensor(data)


def _result(data, parents, grad_fn):
    """Wrap an op result, recording the tape edge only when needed."""
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("operation produced a non-finite value")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.grad_fn = grad_fn
    return out


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _binary_shapes(a, b, op):
    """Classify an elementwise pair: same shape, scalar operand, or row bias."""
    if a.data.shape == b.data.shape:
        return "same"
    if b.data.ndim == 0 or b.data.size == 1:
        return "b_scalar"
    if a.data.ndim == 0 or a.data.size == 1:
        return "a_scalar"
    if op in ("add", "sub") and a.data.ndim == 2 and b.data.ndim == 1 \
            and a.data.shape[1] == b.data.shape[0]:
        return "row_bias"
    raise ShapeMismatchError(f"{op}: {a.data.shape} vs {b.data.shape}")


def _reduce_like(grad, shape):
    """Sum a gradient down to the shape of a broadcast operand."""
    if grad.shape == shape:
        return grad
    if shape == () or int(np.prod(shape)) == 1:
        return np.asarray(grad.sum()).reshape(shape)
    # row-broadcast vector
    return grad.sum(axis=0).reshape(shape)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "add")

    def grad_fn(g):
        return (_reduce_like(g, a.data.shape), _reduce_like(g, b.data.shape))

    return _result(a.data + b.data, (a, b), grad_fn)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "sub")

    def grad_fn(g):
        return (_reduce_like(g, a.data.shape), _reduce_like(-g, b.data.shape))

    return _result(a.data - b.data, (a, b), grad_fn)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _binary_shapes(a, b, "mul")
    if kind == "row_bias":
        raise ShapeMismatchError(f"mul: {a.data.shape} vs {b.data.shape}")

    def grad_fn(g):
        return (
            _reduce_like(g * b.data, a.data.shape),
            _reduce_like(g * a.data, b.data.shape),
        )

    return _result(a.data * b.data, (a, b), grad_fn)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _binary_shapes(a, b, "div")
    if kind == "row_bias":
        raise ShapeMismatchError(f"div: {a.data.shape} vs {b.data.shape}")

    def grad_fn(g):
        return (
            _reduce_like(g / b.data, a.data.shape),
            _reduce_like(-g * a.data / (b.data * b.data), b.data.shape),
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data
    return _result(out, (a, b), grad_fn)


def neg(a):
    a = _as_tensor(a)

    def grad_fn(g):
        return (-g,)

    return _result(-a.data, (a,), grad_fn)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise ShapeMismatchError(f"matmul: {ad.shape} @ {bd.shape}")
    if ad.shape[-1] != (bd.shape[0] if bd.ndim >= 1 else None):
        raise ShapeMismatchError(f"matmul: {ad.shape} @ {bd.shape}")

    def grad_fn(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return (g @ bd.T, ad.T @ g)
        if ad.ndim == 2 and bd.ndim == 1:
            return (np.outer(g, bd), ad.T @ g)
        if ad.ndim == 1 and bd.ndim == 2:
            return (bd @ g, np.outer(ad, g))
        return (g * bd, g * ad)  # vector . vector -> scalar

    return _result(ad @ bd, (a, b), grad_fn)


def transpose(a):
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError("transpose expects a matrix")

    def grad_fn(g):
        return (g.T,)

    return _result(a.data.T.copy(), (a,), grad_fn)


def concat(tensors):
    tensors = [_as_tensor(t) for t in tensors]
    if any(t.data.ndim != 1 for t in tensors):
        raise ShapeMismatchError("concat expects vectors")
    sizes = [t.data.shape[0] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(sizes)))

    return _result(np.concatenate([t.data for t in tensors]), tensors, grad_fn)


def concat_cols(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[0] != b.data.shape[0]:
        raise ShapeMismatchError(f"concat_cols: {a.data.shape} vs {b.data.shape}")
    p = a.data.shape[1]

    def grad_fn(g):
        return (g[:, :p], g[:, p:])

    return _result(np.concatenate([a.data, b.data], axis=1), (a, b), grad_fn)


def tile_rows(v, n):
    v = _as_tensor(v)
    if v.data.ndim != 1:
        raise ShapeMismatchError("tile_rows expects a vector")

    def grad_fn(g):
        return (g.sum(axis=0),)

    return _result(np.tile(v.data, (n, 1)), (v,), grad_fn)


def stack_rows(tensors):
    tensors = [_as_tensor(t) for t in tensors]
    if any(t.data.ndim != 1 for t in tensors):
        raise ShapeMismatchError("stack_rows expects vectors")

    def grad_fn(g):
        return tuple(g[i] for i in range(len(tensors)))

    return _result(np.stack([t.data for t in tensors]), tensors, grad_fn)


def slice1d(a, start, stop):
    a = _as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeMismatchError("slice1d expects a vector")

    def grad_fn(g):
        out = np.zeros_like(a.data)
        out[start:stop] = g
        return (out,)

    return _result(a.data[start:stop].copy(), (a,), grad_fn)


def row(a, i):
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError("row expects a matrix")

    def grad_fn(g):
        out = np.zeros_like(a.data)
        out[i] = g
        return (out,)

    return _result(a.data[i].copy(), (a,), grad_fn)


def pick(a, i):
    a = _as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeMismatchError("pick expects a vector")

    def grad_fn(g):
        out = np.zeros_like(a.data)
        out[i] = g
        return (out,)

    return _result(np.asarray(a.data[i]), (a,), grad_fn)


def softmax(a):
    a = _as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeMismatchError("softmax expects a vector")
    shifted = a.data - a.data.max()
    e = np.exp(shifted)
    y = e / e.sum()

    def grad_fn(g):
        return ((g - np.dot(g, y)) * y,)

    return _result(y, (a,), grad_fn)


def sigmoid(a):
    a = _as_tensor(a)
    with np.errstate(over="ignore", invalid="ignore"):
        y = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)),
                     np.exp(a.data) / (1.0 + np.exp(a.data)))

    def grad_fn(g):
        return (g * y * (1.0 - y),)

    return _result(y, (a,), grad_fn)


def tanh(a):
    a = _as_tensor(a)
    y = np.tanh(a.data)

    def grad_fn(g):
        return (g * (1.0 - y * y),)

    return _result(y, (a,), grad_fn)


def log(a):
    a = _as_tensor(a)

    def grad_fn(g):
        return (g / a.data,)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _result(out, (a,), grad_fn)


def sum_all(a):
    a = _as_tensor(a)

    def grad_fn(g):
        return (np.full_like(a.data, float(g)),)

    return _result(np.asarray(a.data.sum()), (a,), grad_fn)


def mean_all(a):
    a = _as_tensor(a)
    n = a.data.size

    def grad_fn(g):
        return (np.full_like(a.data, float(g) / n),)

    return _result(np.asarray(a.data.mean()), (a,), grad_fn)


def mean_axis0(a):
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError("mean_axis0 expects a matrix")
    n = a.data.shape[0]

    def grad_fn(g):
        return (np.tile(g / n, (n, 1)),)

    return _result(a.data.mean(axis=0), (a,), grad_fn)


def minimum(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _binary_shapes(a, b, "minimum")
    if kind == "row_bias":
        raise ShapeMismatchError("minimum: incompatible shapes")
    # ties split the gradient evenly between operands
    a_lt = (a.data < b.data).astype(np.float64)
    b_lt = (b.data < a.data).astype(np.float64)
    tie = 0.5 * (a.data == b.data).astype(np.float64)

    def grad_fn(g):
        return (
            _reduce_like(g * (a_lt + tie), a.data.shape),
            _reduce_like(g * (b_lt + tie), b.data.shape),
        )

    return _result(np.minimum(a.data, b.data), (a, b), grad_fn)


def maximum(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _binary_shapes(a, b, "maximum")
    if kind == "row_bias":
        raise ShapeMismatchError("maximum: incompatible shapes")
    a_gt = (a.data > b.data).astype(np.float64)
    b_gt = (b.data > a.data).astype(np.float64)
    tie = 0.5 * (a.data == b.data).astype(np.float64)

    def grad_fn(g):
        return (
            _reduce_like(g * (a_gt + tie), a.data.shape),
            _reduce_like(g * (b_gt + tie), b.data.shape),
        )

    return _result(np.maximum(a.data, b.data), (a, b), grad_fn)


def bilinear(x, y, A, b):
    """out_k = x^T A_k y + b_k with A shaped (K, dx, dy) and b shaped (K,)."""
    x, y, A, b = _as_tensor(x), _as_tensor(y), _as_tensor(A), _as_tensor(b)
    if x.data.ndim != 1 or y.data.ndim != 1 or A.data.ndim != 3:
        raise ShapeMismatchError("bilinear expects (dx,), (dy,), (K,dx,dy)")
    if A.data.shape[1] != x.data.shape[0] or A.data.shape[2] != y.data.shape[0] \
            or b.data.shape != (A.data.shape[0],):
        raise ShapeMismatchError(
            f"bilinear: x{x.data.shape} A{A.data.shape} y{y.data.shape} b{b.data.shape}"
        )
    out = np.einsum("kij,i,j->k", A.data, x.data, y.data) + b.data

    def grad_fn(g):
        return (
            np.einsum("kij,k,j->i", A.data, g, y.data),
            np.einsum("kij,k,i->j", A.data, g, x.data),
            g[:, None, None] * np.outer(x.data, y.data)[None, :, :],
            g,
        )

    return _result(out, (x, y, A, b), grad_fn)


def conv1d_rows(c, W, b):
    """Valid 1-D convolution over row windows.

    ``c`` is (L, d) input rows, ``W`` is (F, w*d) filters over flattened
    windows of ``w`` consecutive rows, ``b`` is (F,).  Output is
    (L - w + 1, F); L must be at least w.
    """
    c, W, b = _as_tensor(c), _as_tensor(W), _as_tensor(b)
    if c.data.ndim != 2 or W.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeMismatchError("conv1d_rows expects (L,d), (F,w*d), (F,)")
    L, d = c.data.shape
    F, wd = W.data.shape
    if wd % d != 0:
        raise ShapeMismatchError(f"filter width {wd} not a multiple of row size {d}")
    w = wd // d
    if L < w:
        raise ShapeMismatchError(f"input rows {L} shorter than window {w}")
    windows = np.stack([c.data[t:t + w].reshape(-1) for t in range(L - w + 1)])
    out = windows @ W.data.T + b.data

    def grad_fn(g):
        dW = g.T @ windows
        dwin = g @ W.data  # (L-w+1, w*d)
        dc = np.zeros_like(c.data)
        for t in range(L - w + 1):
            dc[t:t + w] += dwin[t].reshape(w, d)
        return (dc, dW, g.sum(axis=0))

    return _result(out, (c, W, b), grad_fn)


def affine(W, x, b):
    """W @ x + b for a vector x."""
    return add(matmul(W, x), b)


def affine_rows(X, W, b):
    """X @ W^T + b applied to every row of X."""
    return add(matmul(X, transpose(W)), b)


def lstm_step(x, h_prev, c_prev, W, U, b):
    """One LSTM cell step; gate order i, f, g, o along the 4H axis.

    W is (4H, D), U is (4H, H), b is (4H,).  Returns (h, c).
    """
    hidden = h_prev.data.shape[0]
    pre = add(add(matmul(W, x), matmul(U, h_prev)), b)
    i = sigmoid(slice1d(pre, 0, hidden))
    f = sigmoid(slice1d(pre, hidden, 2 * hidden))
    g = tanh(slice1d(pre, 2 * hidden, 3 * hidden))
    o = sigmoid(slice1d(pre, 3 * hidden, 4 * hidden))
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def bce_with_logits(logits, targets, weights=None):
    """Mean binary cross-entropy from logits, numerically stable.

    ``targets`` (and optional ``weights``) are plain arrays, not tensors.
    Uses max(x,0) - x*t + log(1 + exp(-|x|)) elementwise; the mean is over
    all positions regardless of weighting.
    """
    logits = _as_tensor(logits)
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != logits.data.shape:
        raise ShapeMismatchError(f"bce targets {t.shape} vs logits {logits.data.shape}")
    w = None if weights is None else np.asarray(weights, dtype=np.float64)
    x = logits.data
    elt = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    if w is not None:
        elt = elt * w
    n = x.size

    def grad_fn(g):
        with np.errstate(over="ignore"):
            s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)),
                         np.exp(x) / (1.0 + np.exp(x)))
        d = (s - t) / n
        if w is not None:
            d = d * w
        return (float(g) * d,)

    return _result(np.asarray(elt.mean()), (logits,), grad_fn)


def dropout(a, rate, rng):
    """Inverted dropout with an xorshift-drawn mask; identity at rate 0."""
    if rate <= 0.0:
        return a
    a = _as_tensor(a)
    keep = 1.0 - rate
    mask = (rng.uniform_array(a.data.shape) < keep).astype(np.float64) / keep
    return mul(a, constant(mask))


class ParameterStore:
    """Named trainable tensors; the registry the optimizer walks."""

    def __init__(self):
        self._params = {}

    def add(self, name, array):
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(array, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def state_dict(self):
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_dict(self, state):
        for name, arr in state.items():
            if name not in self._params:
                raise KeyError(f"unknown parameter {name!r}")
            if self._params[name].data.shape != arr.shape:
                raise ShapeMismatchError(
                    f"{name}: checkpoint shape {arr.shape} vs {self._params[name].data.shape}"
                )
            self._params[name].data = np.array(arr, dtype=np.float64)


def _toposort(root):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss, wrt):
    """Gradients of a scalar loss.

    ``wrt`` may be a ParameterStore, a mapping name -> Tensor, or an
    iterable of Tensors.  Tensors unreachable from the loss get zero
    gradients.  Returns a dict name -> ndarray (or a list for an iterable).
    """
    if loss.data.size != 1:
        raise NotScalarError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    grads = {}
    if loss.requires_grad:
        grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(_toposort(loss)):
            g = grads.get(id(node))
            if g is None or node.grad_fn is None:
                continue
            parent_grads = node.grad_fn(g)
            for parent, pg in zip(node.parents, parent_grads):
                if not parent.requires_grad or pg is None:
                    continue
                acc = grads.get(id(parent))
                if acc is None:
                    grads[id(parent)] = np.array(pg, dtype=np.float64)
                else:
                    acc += pg

    if isinstance(wrt, ParameterStore):
        items = wrt.items()
    elif isinstance(wrt, dict):
        items = wrt.items()
    else:
        return [
            grads.get(id(t), np.zeros_like(t.data)) for t in wrt
        ]
    return {
        name: grads.get(id(t), np.zeros_like(t.data)) for name, t in items
    }


def gradient_check(build, store, eps=1e-5, max_coordinates=None, seed=0):
    """Max relative error between analytic and central-difference gradients.

    ``build`` rebuilds the scalar loss from the tensors in ``store`` on
    every call.  Error per coordinate is |analytic - numeric| divided by
    max(1, |numeric|).  When the parameter count exceeds
    ``max_coordinates``, a seeded sample of coordinates is checked.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    analytic = backward(build(), store)
    coords = []
    for name, t in store.items():
        for idx in range(t.data.size):
            coords.append((name, idx))
    if max_coordinates is not None and len(coords) > max_coordinates:
        rng = XorShiftRNG(seed)
        rng.shuffle(coords)
        coords = coords[:max_coordinates]
    worst = 0.0
    for name, idx in coords:
        flat = store[name].data.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + eps
        f_plus = float(build().data)
        flat[idx] = orig - eps
        f_minus = float(build().data)
        flat[idx] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        error = abs(float(analytic[name].reshape(-1)[idx]) - numeric)
        worst = max(worst, error / max(1.0, abs(numeric)))
    return worst
