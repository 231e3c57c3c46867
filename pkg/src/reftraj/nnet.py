"""Small fully connected networks with hand-written backprop, Adam and Polyak averaging.

All parameters of a network live in one contiguous float64 vector; per-layer weight and
bias arrays are views into it. That keeps Adam, Polyak updates and checkpointing to a
handful of vector operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("tanh", "identity")


class MLP:
    """ReLU hidden layers, tanh or identity output. Weights are ``(fan_in, fan_out)``."""

    def __init__(self, sizes, output="identity", rng=None, params=None):
        if output not in ACTIVATIONS:
            raise ValueError(f"unknown output activation {output!r}")
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least an input and an output size")
        self.output = output
        n = sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:]))
        if params is None:
            rng = rng if rng is not None else np.random.default_rng()
            params = np.empty(n)
            self.params = params
            self._bind()
            for W, b in zip(self.weights, self.biases):
                bound = 1.0 / np.sqrt(W.shape[0])
                W[...] = rng.uniform(-bound, bound, W.shape)
                b[...] = rng.uniform(-bound, bound, b.shape)
        else:
            params = np.array(params, dtype=float)
            if params.shape != (n,):
                raise ValueError(f"expected {n} parameters, got {params.shape}")
            self.params = params
            self._bind()

    def _bind(self):
        self.weights, self.biases = [], []
        i = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(self.params[i : i + a * b].reshape(a, b))
            i += a * b
            self.biases.append(self.params[i : i + b])
            i += b

    @property
    def n_params(self) -> int:
        return self.params.size

    def copy(self) -> "MLP":
        return MLP(self.sizes, self.output, params=self.params)

    def __call__(self, x):
        return forward(self, x)


def forward(net: MLP, x, cache: bool = False):
    """Evaluate the network on a vector or a ``(batch, in)`` array.

    With ``cache=True`` also returns the layer inputs needed by :func:`gradient`.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.sizes[0]:
        raise ValueError(f"expected input size {net.sizes[0]}, got {x.shape[-1]}")
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
        elif net.output == "tanh":
            h = np.tanh(h)
        acts.append(h)
    return (h, acts) if cache else h


def gradient(net: MLP, x, upstream, acts=None):
    """Reverse-mode gradient of ``sum(upstream * net(x))``.

    Returns ``(param_grad, input_grad)``; ``param_grad`` is flat and matches ``net.params``.
    Batched inputs sum parameter gradients over the batch.
    """
    if acts is None:
        _, acts = forward(net, x, cache=True)
    g = np.asarray(upstream, dtype=float)
    if g.shape != acts[-1].shape:
        raise ValueError(f"upstream shape {g.shape} does not match output {acts[-1].shape}")
    if net.output == "tanh":
        g = g * (1.0 - acts[-1] ** 2)
    grad = np.empty_like(net.params)
    views = MLP.__new__(MLP)
    views.sizes, views.params = net.sizes, grad
    views._bind()
    for i in range(len(net.weights) - 1, -1, -1):
        a = acts[i]
        if a.ndim == 1:
            np.outer(a, g, out=views.weights[i])
            views.biases[i][...] = g
        else:
            np.matmul(a.T, g, out=views.weights[i])
            g.sum(axis=0, out=views.biases[i])
        g = g @ net.weights[i].T
        if i > 0:
            g = g * (acts[i] > 0.0)
    return grad, g


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, net: MLP, **kwargs) -> "AdamState":
        return cls(np.zeros_like(net.params), np.zeros_like(net.params), **kwargs)


def adam_step(net: MLP, grad, state: AdamState) -> None:
    """Bias-corrected Adam descent step, in place on ``net.params`` and ``state``."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grad
    state.v *= b2
    state.v += (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1**state.step)
    v_hat = state.v / (1.0 - b2**state.step)
    net.params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def polyak_update(target: MLP, online: MLP, decay: float) -> None:
    """``target <- decay * target + (1 - decay) * online``."""
    if target.sizes != online.sizes:
        raise ValueError("target and online networks differ in shape")
    if not 0.0 <= decay <= 1.0:
        raise ValueError("decay must lie in [0, 1]")
    target.params *= decay
    target.params += (1.0 - decay) * online.params


def state_dict(net: MLP, prefix: str) -> dict:
    return {
        f"{prefix}/sizes": np.array(net.sizes),
        f"{prefix}/output": np.array(net.output),
        f"{prefix}/params": net.params.copy(),
    }


def from_state_dict(d, prefix: str) -> MLP:
    return MLP(d[f"{prefix}/sizes"].tolist(), str(d[f"{prefix}/output"]), params=d[f"{prefix}/params"])


def adam_state_dict(state: AdamState, prefix: str) -> dict:
    return {
        f"{prefix}/m": state.m.copy(),
        f"{prefix}/v": state.v.copy(),
        f"{prefix}/hyper": np.array([state.step, state.lr, state.beta1, state.beta2, state.eps]),
    }


def adam_from_state_dict(d, prefix: str) -> AdamState:
    step, lr, b1, b2, eps = d[f"{prefix}/hyper"]
    return AdamState(d[f"{prefix}/m"].copy(), d[f"{prefix}/v"].copy(), int(step), lr, b1, b2, eps)


def save(net: MLP, path) -> None:
    np.savez(path, **state_dict(net, "net"))


def load(path) -> MLP:
    with np.load(path) as d:
        return from_state_dict(d, "net")
