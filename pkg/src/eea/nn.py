"""A small dense-network engine: forward pass, reverse-mode gradients, optimizers.

Parameters of a network live in a single flat vector so optimizers, snapshots
and finite-difference checks can treat them uniformly. Losses are squared
error, averaged over the batch.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(name, z, h):
    if name == "tanh":
        return 1.0 - h * h
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return np.ones_like(z)


class DenseNet:
    """Fully connected network ``layer_sizes[0] -> ... -> layer_sizes[-1]``.

    ``activations`` holds one name per hidden layer; the output layer is linear.
    ``skips`` lists ``(from_layer, to_layer)`` identity connections, where layer 0
    is the input and layer ``k`` is the output of the ``k``-th linear map; the
    source activation is added to the pre-activation of ``to_layer``.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        activations: Sequence[str] | str = "tanh",
        skips: Sequence[tuple] = (),
        rng=None,
        dtype=np.float64,
    ):
        self.layer_sizes = [int(n) for n in layer_sizes]
        if len(self.layer_sizes) < 2:
            raise ValueError("a network needs at least an input and an output size")
        n_hidden = len(self.layer_sizes) - 2
        if isinstance(activations, str):
            activations = [activations] * n_hidden
        self.activations = list(activations)
        if len(self.activations) != n_hidden:
            raise ValueError(f"expected {n_hidden} hidden activations, got {len(self.activations)}")
        for name in self.activations:
            if name not in ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")
        self.skips = [tuple(map(int, s)) for s in skips]
        for src, dst in self.skips:
            if not 0 <= src < dst < len(self.layer_sizes):
                raise ValueError(f"skip ({src}, {dst}) must point forwards")
            if self.layer_sizes[src] != self.layer_sizes[dst]:
                raise ValueError(f"skip ({src}, {dst}) joins layers of different width")
        self.dtype = dtype

        self._slices = []
        offset = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = slice(offset, offset + n_in * n_out)
            offset += n_in * n_out
            b = slice(offset, offset + n_out)
            offset += n_out
            self._slices.append((w, b, n_in, n_out))
        self.params = np.zeros(offset, dtype=dtype)
        self.init(rng if rng is not None else np.random.default_rng(0))

    @property
    def parameter_count(self) -> int:
        return self.params.size

    def init(self, rng) -> None:
        """Glorot-uniform weights, zero biases."""
        for w, b, n_in, n_out in self._slices:
            limit = np.sqrt(6.0 / (n_in + n_out))
            self.params[w] = rng.uniform(-limit, limit, size=n_in * n_out)
            self.params[b] = 0.0

    def layers(self, params=None):
        p = self.params if params is None else params
        return [(p[w].reshape(n_out, n_in), p[b]) for w, b, n_in, n_out in self._slices]

    def copy(self) -> "DenseNet":
        other = DenseNet.__new__(DenseNet)
        other.__dict__.update(self.__dict__)
        other.params = self.params.copy()
        return other

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.layer_sizes[0]:
            raise ValueError(f"input width {x.shape[-1]} != {self.layer_sizes[0]}")
        return x

    def _forward(self, x, params=None):
        hs = [x]
        zs = [None]
        layers = self.layers(params)
        last = len(layers)
        for k, (W, b) in enumerate(layers, start=1):
            z = hs[-1] @ W.T + b
            for src, dst in self.skips:
                if dst == k:
                    z = z + hs[src]
            h = z if k == last else _act(self.activations[k - 1], z)
            zs.append(z)
            hs.append(h)
        return hs, zs

    def forward(self, x, params=None) -> np.ndarray:
        x = self._check_input(x)
        return self._forward(x, params)[0][-1]

    __call__ = forward

    def backward(self, x, grad_out) -> np.ndarray:
        """Gradient of ``sum(grad_out * forward(x))`` with respect to the parameters."""
        x = self._check_input(x)
        batched = x.ndim == 2
        if not batched:
            x = x[None, :]
            grad_out = np.asarray(grad_out)[None, :]
        hs, zs = self._forward(x)
        layers = self.layers()
        grads = np.zeros_like(self.params)
        dh = [np.zeros_like(h) for h in hs]
        dh[-1] = np.asarray(grad_out, dtype=self.dtype)
        last = len(layers)
        for k in range(last, 0, -1):
            W, _ = layers[k - 1]
            if k == last:
                dz = dh[k]
            else:
                dz = dh[k] * _act_grad(self.activations[k - 1], zs[k], hs[k])
            w, b, _, _ = self._slices[k - 1]
            grads[w] = (dz.T @ hs[k - 1]).ravel()
            grads[b] = dz.sum(axis=0)
            dh[k - 1] += dz @ W
            for src, dst in self.skips:
                if dst == k:
                    dh[src] += dz
        return grads

    def gradient(self, x, target):
        """Loss ``mean_batch 0.5 * ||forward(x) - target||^2`` and its gradient."""
        x = self._check_input(x)
        y = self.forward(x)
        target = np.asarray(target, dtype=self.dtype)
        if target.shape != y.shape:
            raise ValueError(f"target shape {target.shape} != output shape {y.shape}")
        resid = y - target
        n = x.shape[0] if x.ndim == 2 else 1
        loss = 0.5 * float(np.sum(resid * resid)) / n
        return loss, self.backward(x, resid / n)

    # -- snapshots -------------------------------------------------------------

    def header(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "activations": self.activations,
            "skips": [list(s) for s in self.skips],
        }

    def save(self, path) -> None:
        """Text snapshot: a JSON shape header line, then one parameter per line."""
        path = Path(path)
        lines = ["# " + json.dumps(self.header())]
        lines.extend(repr(float(v)) for v in self.params)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DenseNet":
        path = Path(path)
        with path.open(encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise ValueError(f"{path}: missing snapshot header")
            header = json.loads(first[2:])
            values = np.array([float(line) for line in fh if line.strip()])
        net = cls(header["layer_sizes"], header["activations"], header.get("skips", ()))
        if values.size != net.parameter_count:
            raise ValueError(
                f"{path}: {values.size} parameters for a network needing {net.parameter_count}"
            )
        net.params[:] = values
        return net


class LinearModel(DenseNet):
    """Affine map ``x -> W x + b``."""

    def __init__(self, n_in: int, n_out: int, rng=None):
        super().__init__([n_in, n_out], [], rng=rng)

    @property
    def weight(self) -> np.ndarray:
        return self.layers()[0][0]

    @property
    def bias(self) -> np.ndarray:
        return self.layers()[0][1]


# -- optimizers ----------------------------------------------------------------


class Optimizer:
    kind = "sgd"

    def __init__(self, n_params: int, step_size: float):
        self.n_params = n_params
        self.step_size = step_size
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        if params.shape != (self.n_params,) or grads.shape != params.shape:
            raise ValueError(
                f"optimizer sized for {self.n_params} parameters got "
                f"params {params.shape}, grads {grads.shape}"
            )
        self.t += 1
        params -= self._delta(grads)
        return params

    def _delta(self, g):
        return self.step_size * g


class SGD(Optimizer):
    kind = "sgd"


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, n_params, step_size=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(n_params, step_size)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def _delta(self, g):
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return self.step_size * m_hat / (np.sqrt(v_hat) + self.eps)


class RMSprop(Optimizer):
    kind = "rmsprop"

    def __init__(self, n_params, step_size=1e-3, decay=0.99, eps=1e-8):
        super().__init__(n_params, step_size)
        self.decay, self.eps = decay, eps
        self.cache = np.zeros(n_params)

    def _delta(self, g):
        self.cache = self.decay * self.cache + (1 - self.decay) * g * g
        return self.step_size * g / (np.sqrt(self.cache) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam, "rmsprop": RMSprop}


def make_optimizer(kind: str, n_params: int, step_size: float) -> Optimizer:
    try:
        return OPTIMIZERS[kind](n_params, step_size)
    except KeyError:
        raise ValueError(f"unknown optimizer {kind!r}; choose from {sorted(OPTIMIZERS)}") from None


def apply_update(opt: Optimizer, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    return opt.step(params, grads)


# -- training ------------------------------------------------------------------


def mse(net: DenseNet, inputs, targets) -> float:
    resid = net.forward(inputs) - np.asarray(targets)
    return float(np.mean(resid * resid))


def fit(
    net: DenseNet,
    inputs,
    targets,
    optimizer: Optimizer,
    epochs: int,
    batch_size: Optional[int] = None,
    rng=None,
) -> list:
    """Mini-batch gradient training; returns the full-data MSE after each epoch."""
    inputs = np.asarray(inputs, dtype=net.dtype)
    targets = np.asarray(targets, dtype=net.dtype)
    n = len(inputs)
    if n == 0:
        raise ValueError("cannot fit on an empty dataset")
    if len(targets) != n:
        raise ValueError(f"{n} inputs but {len(targets)} targets")
    bs = n if batch_size is None else min(batch_size, n)
    rng = rng if rng is not None else np.random.default_rng(0)
    curve = []
    for _ in range(epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            _, g = net.gradient(inputs[idx], targets[idx])
            optimizer.step(net.params, g)
        curve.append(mse(net, inputs, targets))
    return curve


def fit_linear(
    model: LinearModel, dataset, optimizer: Optimizer, epochs: int, batch_size=None, rng=None
) -> float:
    """Train on ``(input, target)`` pairs and return the final MSE."""
    dataset = list(dataset)
    if not dataset:
        raise ValueError("cannot fit on an empty dataset")
    x = np.array([d[0] for d in dataset], dtype=float)
    y = np.array([d[1] for d in dataset], dtype=float)
    curve = fit(model, x, y, optimizer, epochs, batch_size, rng)
    return curve[-1] if curve else mse(model, x, y)
