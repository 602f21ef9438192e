"""Layers and the sequential ``Model`` container."""

from __future__ import annotations

import copy

import numpy as np

from .tensor import Tensor, as_tensor, no_grad


class Layer:
    kind = "layer"
    in_dim = None
    out_dim = None

    def __init__(self):
        self.params = {}
        self.buffers = {}

    def forward(self, x, train):
        raise NotImplementedError

    def token(self):
        return self.kind


class Linear(Layer):
    kind = "linear"

    def __init__(self, in_dim, out_dim, rng=None):
        super().__init__()
        self.in_dim, self.out_dim = int(in_dim), int(out_dim)
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(self.in_dim)
        self.params["W"] = Tensor(rng.uniform(-bound, bound, (self.in_dim, self.out_dim)), requires_grad=True)
        self.params["b"] = Tensor(rng.uniform(-bound, bound, self.out_dim), requires_grad=True)

    def forward(self, x, train):
        return x @ self.params["W"] + self.params["b"]

    def token(self):
        return f"linear:{self.in_dim}:{self.out_dim}"


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x, train):
        return x.tanh()


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train):
        return x.relu()


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, train):
        return x.softmax(axis=-1)


class BatchNorm(Layer):
    """Batch normalisation over the batch axis of a 2-D input."""

    kind = "batchnorm"

    def __init__(self, dim, momentum=0.1, eps=1e-5):
        super().__init__()
        self.in_dim = self.out_dim = int(dim)
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = Tensor(np.ones(self.in_dim), requires_grad=True)
        self.params["beta"] = Tensor(np.zeros(self.in_dim), requires_grad=True)
        self.buffers["running_mean"] = np.zeros(self.in_dim)
        self.buffers["running_var"] = np.ones(self.in_dim)

    def forward(self, x, train):
        if train:
            n = x.shape[0]
            if n < 2:
                raise ValueError("batchnorm in train mode needs a batch of at least 2 rows")
            mu = x.mean(axis=0, keepdims=True)
            centered = x - mu
            var = (centered * centered).mean(axis=0, keepdims=True)
            mom = self.momentum
            self.buffers["running_mean"] = (1 - mom) * self.buffers["running_mean"] + mom * mu.data[0]
            unbiased = var.data[0] * n / (n - 1)
            self.buffers["running_var"] = (1 - mom) * self.buffers["running_var"] + mom * unbiased
            xhat = centered / (var + self.eps).sqrt()
        else:
            xhat = (x - self.buffers["running_mean"]) / np.sqrt(self.buffers["running_var"] + self.eps)
        return xhat * self.params["gamma"] + self.params["beta"]

    def token(self):
        return f"batchnorm:{self.in_dim}"


def parse_layers(spec, rng=None):
    """Build layers from a comma-separated spec like ``linear:32:64,relu,linear:64:4,softmax``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    layers = []
    for tok in spec.split(","):
        parts = tok.strip().split(":")
        kind = parts[0]
        if kind == "linear":
            layers.append(Linear(int(parts[1]), int(parts[2]), rng))
        elif kind == "batchnorm":
            layers.append(BatchNorm(int(parts[1])))
        elif kind == "tanh":
            layers.append(Tanh())
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "softmax":
            layers.append(Softmax())
        else:
            raise ValueError(f"unknown layer kind {kind!r} in {spec!r}")
    return layers


def mlp_spec(sizes, hidden_act="relu", head=None, batchnorm=False):
    """Layer spec for an MLP with the given layer widths."""
    toks = []
    for i in range(len(sizes) - 1):
        toks.append(f"linear:{sizes[i]}:{sizes[i + 1]}")
        if i < len(sizes) - 2:
            if batchnorm:
                toks.append(f"batchnorm:{sizes[i + 1]}")
            toks.append(hidden_act)
    if head:
        toks.append(head)
    return ",".join(toks)


class Model:
    def __init__(self, layers, seed=None):
        if isinstance(layers, str):
            layers = parse_layers(layers, np.random.default_rng(seed))
        self.layers = list(layers)
        self.seed = seed
        self.training = True
        dims = [l.in_dim for l in self.layers if l.in_dim is not None]
        if not dims:
            raise ValueError("model needs at least one layer with a declared width")
        self.input_dim = dims[0]
        self.output_dim = [l.out_dim for l in self.layers if l.out_dim is not None][-1]

    @property
    def spec(self):
        return ",".join(l.token() for l in self.layers)

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def named_params(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                out[f"{i}.{name}"] = p
        return out

    def named_buffers(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, b in layer.buffers.items():
                out[f"{i}.{name}"] = b
        return out

    def num_params(self):
        return sum(p.size for p in self.named_params().values())

    def zero_grad(self):
        for p in self.named_params().values():
            p.grad = None

    def gradients(self):
        """Current ``.grad`` of every parameter, zeros where none was accumulated."""
        return {
            name: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for name, p in self.named_params().items()
        }

    def _check_input(self, x):
        if x.ndim != 2:
            raise ValueError(f"model input must be 2-D (batch, features), got shape {x.shape}")

    def forward(self, x, upto=None):
        x = as_tensor(x)
        self._check_input(x)
        layers = self.layers if upto is None else self.layers[:upto]
        for i, layer in enumerate(layers):
            if layer.in_dim is not None and x.shape[-1] != layer.in_dim:
                raise ValueError(
                    f"layer {i} ({layer.token()}) expects {layer.in_dim} features, got {x.shape[-1]}"
                )
            x = layer.forward(x, self.training)
        return x

    __call__ = forward

    def forward_split(self, x):
        """Return ``(pre, out)``: the input to the last layer and the model output."""
        pre = self.forward(x, upto=len(self.layers) - 1)
        return pre, self.layers[-1].forward(pre, self.training)

    def predict(self, x):
        """Eval-mode forward without a tape; returns an ndarray."""
        was = self.training
        self.training = False
        try:
            with no_grad():
                return self.forward(np.asarray(x, dtype=np.float64)).data
        finally:
            self.training = was

    def copy(self):
        return copy.deepcopy(self)

    def state(self):
        """Flat ordered mapping of parameter and buffer arrays (declaration order)."""
        out = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                out[f"{i}.{name}"] = p.data
            for name, b in layer.buffers.items():
                out[f"{i}.{name}"] = b
        return out

    def load_state(self, state):
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                key = f"{i}.{name}"
                arr = np.asarray(state[key], dtype=np.float64)
                if arr.shape != p.shape:
                    raise ValueError(f"{key}: shape {arr.shape} != {p.shape}")
                p.data = arr.copy()
            for name in layer.buffers:
                key = f"{i}.{name}"
                layer.buffers[name] = np.asarray(state[key], dtype=np.float64).copy()
        return self
