"""Dense Q-network with explicit backpropagation and Adam.

Architecture: fully connected layers, LeakyReLU(0.01) on every hidden layer,
Tanh on the output so Q-values live in (-1, 1). Weights are float64
throughout; training is exactly reproducible from the init seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

LEAKY_SLOPE = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Network:
    weights: List[np.ndarray]  # layer i: shape (dims[i], dims[i+1])
    biases: List[np.ndarray]  # layer i: shape (dims[i+1],)

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def params(self) -> List[np.ndarray]:
        """Flat parameter list (W1, b1, W2, b2, ...); views, not copies."""
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Network":
        return Network(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def assert_finite(self) -> None:
        for p in self.params:
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("network parameters became non-finite")


def init_network(dims: Sequence[int], seed: Union[int, np.random.Generator]) -> Network:
    """Kaiming-style uniform fan-in init, zero biases."""
    if len(dims) < 2:
        raise ValueError("need at least input and output dimensions")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights = []
    biases = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return Network(weights=weights, biases=biases)


def _leaky(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, z, LEAKY_SLOPE * z)


def _leaky_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, 1.0, LEAKY_SLOPE)


def _forward_cached(net: Network, batch: np.ndarray):
    """Activations of every layer; batch has shape (B, dims[0])."""
    pre: List[np.ndarray] = []
    act: List[np.ndarray] = [batch]
    a = batch
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        pre.append(z)
        a = np.tanh(z) if i == last else _leaky(z)
        act.append(a)
    return pre, act


def forward(net: Network, s: np.ndarray) -> np.ndarray:
    """Q-values for one state vector or a batch of them."""
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    batch = s[None, :] if single else s
    if batch.shape[1] != net.dims[0]:
        raise ValueError(f"state dimension {batch.shape[1]} != network input {net.dims[0]}")
    _, act = _forward_cached(net, batch)
    return act[-1][0] if single else act[-1]


def backward(
    net: Network,
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
) -> Tuple[List[np.ndarray], float]:
    """Gradient of the mean squared TD error over the batch.

    Loss = mean_j (Q(s_j, a_j) - target_j)^2; gradients come back in the same
    flat order as Network.params.
    """
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=float)
    if states.ndim != 2 or len(states) == 0:
        raise ValueError("expected a non-empty batch of state vectors")
    B = len(states)
    pre, act = _forward_cached(net, states)
    q = act[-1]
    rows = np.arange(B)
    err = q[rows, actions] - targets
    loss = float(np.mean(err**2))

    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / B
    delta = dq * (1.0 - q**2)  # tanh'
    grads: List[np.ndarray] = []
    for i in range(len(net.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))  # db_i
        grads.append(act[i].T @ delta)  # dW_i
        if i > 0:
            delta = (delta @ net.weights[i].T) * _leaky_grad(pre[i - 1])
    grads.reverse()
    return grads, loss


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
) -> AdamState:
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state shapes disagree")
    state.t += 1
    c1 = 1.0 - ADAM_BETA1**state.t
    c2 = 1.0 - ADAM_BETA2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g**2
        p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return state
