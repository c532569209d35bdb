"""Compact neural-network substrate with reverse-mode gradients.

Everything is float64 numpy, batch-first, and deterministic given the
initialization seed.  Layers cache what their backward pass needs;
``Network.backward`` accumulates parameter gradients (``Tensor.grad``)
and returns the gradient of the loss with respect to the network input,
which the deterministic-policy-gradient chain rule needs to push a
critic's action sensitivity through an actor.

Structured inputs: a network whose first layer is a :class:`Branch`
takes a tuple of arrays (for example a price window plus current weights
plus a candidate action) and concatenates the per-branch embeddings.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import NumericalError


class Tensor:
    """A parameter: float64 data plus an accumulated gradient."""

    __slots__ = ("data", "grad", "name")

    def __init__(self, data: np.ndarray, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.name = name

    @property
    def shape(self):
        return self.data.shape


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer; stateless layers only override forward/backward."""

    def params(self) -> list[Tensor]:
        return []

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, zero_init: bool = False):
        w = np.zeros((n_in, n_out)) if zero_init else glorot_uniform(rng, (n_in, n_out), n_in, n_out)
        self.w = Tensor(w, "w")
        self.b = Tensor(np.zeros(n_out), "b")
        self._x = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        self._x = x
        return x @ self.w.data + self.b.data

    def backward(self, g):
        self.w.grad += self._x.T @ g
        self.b.grad += g.sum(axis=0)
        return g @ self.w.data.T


class Relu(Layer):
    def forward(self, x):
        self._mask = x > 0
        # distance of the nearest pre-activation to the kink; gradient
        # checkers use it to reject draws where the derivative is undefined
        self.last_kink_distance = float(np.min(np.abs(x))) if x.size else np.inf
        return np.where(self._mask, x, 0.0)

    def backward(self, g):
        return np.where(self._mask, g, 0.0)


class Center(Layer):
    """Subtract a fixed offset; price-ratio windows cluster around 1, and
    feeding them uncentered starves relu stacks of sign diversity."""

    def __init__(self, offset: float = 1.0):
        self.offset = offset

    def forward(self, x):
        return x - self.offset

    def backward(self, g):
        return g


class Tanh(Layer):
    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, g):
        return g * (1.0 - self._y**2)


class Conv1d(Layer):
    """Valid 1-D cross-correlation on (batch, channels, length)."""

    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator):
        fan_in, fan_out = c_in * kernel, c_out * kernel
        self.w = Tensor(glorot_uniform(rng, (c_out, c_in, kernel), fan_in, fan_out), "w")
        self.b = Tensor(np.zeros(c_out), "b")
        self.kernel = kernel
        self._xw = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        if x.shape[2] < self.kernel:
            raise ValueError(f"length {x.shape[2]} shorter than kernel {self.kernel}")
        xw = np.lib.stride_tricks.sliding_window_view(x, self.kernel, axis=2)
        self._xw = xw  # (B, C_in, L_out, K)
        return np.einsum("bclk,ock->bol", xw, self.w.data) + self.b.data[None, :, None]

    def backward(self, g):
        self.w.grad += np.einsum("bot,bctk->ock", g, self._xw)
        self.b.grad += g.sum(axis=(0, 2))
        k = self.kernel
        gp = np.pad(g, ((0, 0), (0, 0), (k - 1, k - 1)))
        gw = np.lib.stride_tricks.sliding_window_view(gp, k, axis=2)
        return np.einsum("bolj,ocj->bcl", gw, self.w.data[:, :, ::-1])


class Rnn(Layer):
    """Plain tanh recurrence over (batch, time, features); emits the last
    hidden state."""

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator):
        self.wx = Tensor(glorot_uniform(rng, (n_in, n_hidden), n_in, n_hidden), "wx")
        self.wh = Tensor(glorot_uniform(rng, (n_hidden, n_hidden), n_hidden, n_hidden), "wh")
        self.b = Tensor(np.zeros(n_hidden), "b")
        self.n_hidden = n_hidden

    def params(self):
        return [self.wx, self.wh, self.b]

    def forward(self, x):
        batch, steps, _ = x.shape
        self._x = x
        hs = [np.zeros((batch, self.n_hidden))]
        for t in range(steps):
            hs.append(np.tanh(x[:, t] @ self.wx.data + hs[-1] @ self.wh.data + self.b.data))
        self._hs = hs
        return hs[-1]

    def backward(self, g):
        x, hs = self._x, self._hs
        dx = np.zeros_like(x)
        dh = g
        for t in range(x.shape[1] - 1, -1, -1):
            dpre = dh * (1.0 - hs[t + 1] ** 2)
            self.wx.grad += x[:, t].T @ dpre
            self.wh.grad += hs[t].T @ dpre
            self.b.grad += dpre.sum(axis=0)
            dx[:, t] = dpre @ self.wx.data.T
            dh = dpre @ self.wh.data.T
        return dx


class PerAsset(Layer):
    """Apply a shared conv stack to each asset's (features, window) slab.

    Input (B, A, W, F) is folded to (B*A, F, W), run through the inner
    layers, and unfolded to a flat (B, A * conv_features) embedding, so
    every asset is encoded by the same filters.
    """

    def __init__(self, inner: list[Layer]):
        self.inner = inner

    def params(self):
        return [p for layer in self.inner for p in layer.params()]

    def forward(self, x):
        b, a, w, f = x.shape
        self._in_shape = (b, a, w, f)
        h = np.ascontiguousarray(x.transpose(0, 1, 3, 2)).reshape(b * a, f, w)
        for layer in self.inner:
            h = layer.forward(h)
        self._out_shape = h.shape
        return h.reshape(b, -1)

    def backward(self, g):
        b, a, w, f = self._in_shape
        h = g.reshape(self._out_shape)
        for layer in reversed(self.inner):
            h = layer.backward(h)
        return h.reshape(b, a, f, w).transpose(0, 1, 3, 2)


class AsSequence(Layer):
    """Reshape (B, A, W, F) to (B, W, A*F) so a recurrence can walk the
    window axis with all assets' features at each step."""

    def forward(self, x):
        b, a, w, f = x.shape
        self._shape = (b, a, w, f)
        return np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(b, w, a * f)

    def backward(self, g):
        b, a, w, f = self._shape
        return g.reshape(b, w, a, f).transpose(0, 2, 1, 3)


class Branch(Layer):
    """Run one layer stack per input of a tuple and concatenate the
    (B, n_i) results; an empty stack passes its input straight through."""

    def __init__(self, stacks: list[list[Layer]]):
        self.stacks = stacks

    def params(self):
        return [p for stack in self.stacks for layer in stack for p in layer.params()]

    def forward(self, xs):
        if len(xs) != len(self.stacks):
            raise ValueError(f"expected {len(self.stacks)} inputs, got {len(xs)}")
        outs = []
        for x, stack in zip(xs, self.stacks):
            h = x
            for layer in stack:
                h = layer.forward(h)
            outs.append(h)
        self._widths = [o.shape[1] for o in outs]
        return np.concatenate(outs, axis=1)

    def backward(self, g):
        grads = []
        offset = 0
        for width, stack in zip(self._widths, self.stacks):
            h = g[:, offset : offset + width]
            offset += width
            for layer in reversed(stack):
                h = layer.backward(h)
            grads.append(h)
        return tuple(grads)


class Network:
    """Ordered layer composition with explicit forward/backward."""

    def __init__(self, layers: list[Layer], rng_seed: int | None = None):
        self.layers = layers
        self.rng_seed = rng_seed

    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def zero_grads(self) -> None:
        for p in self.params():
            p.grad[...] = 0.0

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out):
        """Propagate an output gradient; returns the input gradient(s)."""
        g = grad_out
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def get_flat(self) -> np.ndarray:
        ps = self.params()
        return np.concatenate([p.data.ravel() for p in ps]) if ps else np.zeros(0)

    def set_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.params():
            n = p.data.size
            p.data[...] = flat[offset : offset + n].reshape(p.shape)
            offset += n
        if offset != flat.size:
            raise ValueError(f"flat vector size {flat.size} != parameter count {offset}")

    def flat_grad(self) -> np.ndarray:
        ps = self.params()
        return np.concatenate([p.grad.ravel() for p in ps]) if ps else np.zeros(0)

    def set_flat_grad(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.params():
            n = p.grad.size
            p.grad[...] = flat[offset : offset + n].reshape(p.shape)
            offset += n
        if offset != flat.size:
            raise ValueError(f"flat vector size {flat.size} != parameter count {offset}")


def forward(net: Network, x):
    return net.forward(x)


def backward(net: Network, grad_out):
    return net.backward(grad_out)


def stable_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_head(logits: np.ndarray) -> np.ndarray:
    """Map a logit vector to portfolio weights on the simplex."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite logits in softmax head")
    return stable_softmax(logits, axis=-1)


def softmax_backward(softmax_out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Gradient through softmax: s * (g - sum(g * s))."""
    s, g = softmax_out, grad_out
    return s * (g - (g * s).sum(axis=-1, keepdims=True))


class Adam:
    """Adaptive-moment optimizer over a fixed parameter list."""

    def __init__(self, params: list[Tensor], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self) -> None:
        """Apply one update from the accumulated grads, then clear them."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NumericalError("non-finite gradient in optimizer step")
            m[...] = b1 * m + (1 - b1) * g
            v[...] = b2 * v + (1 - b2) * g * g
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
            p.grad[...] = 0.0


# ---------------------------------------------------------------------------
# checkpoint serialization: little-endian float64 payload with a shape
# table, plus a JSON sidecar for run metadata.

_MAGIC = b"DFNN0001"


def save_params(path: str | Path, named: dict[str, np.ndarray], metadata: dict | None = None) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(named)))
        for name, arr in named.items():
            arr = np.asarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
        for arr in named.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    sidecar = {
        "format": _MAGIC.decode("ascii"),
        "tensors": {k: list(np.asarray(v).shape) for k, v in named.items()},
        "metadata": metadata or {},
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_params(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a parameter checkpoint")
        (count,) = struct.unpack("<I", fh.read(4))
        entries: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
            entries.append((name, shape))
        named = {}
        for name, shape in entries:
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            named[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
    meta_path = Path(str(path) + ".meta.json")
    metadata = json.loads(meta_path.read_text())["metadata"] if meta_path.exists() else {}
    return named, metadata


def named_params(net: Network, prefix: str) -> dict[str, np.ndarray]:
    return {f"{prefix}.{i}.{p.name}": p.data for i, p in enumerate(net.params())}


def load_into(net: Network, named: dict[str, np.ndarray], prefix: str) -> None:
    for i, p in enumerate(net.params()):
        key = f"{prefix}.{i}.{p.name}"
        if key not in named:
            raise ValueError(f"checkpoint missing tensor {key}")
        if named[key].shape != p.shape:
            raise ValueError(
                f"checkpoint tensor {key} has shape {named[key].shape}, expected {p.shape}"
            )
        p.data[...] = named[key]
