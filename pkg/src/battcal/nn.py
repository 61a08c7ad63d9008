"""Minimal differentiable function-approximator toolkit.

Fully connected networks with LeakyReLU hidden layers, hand-written
reverse-mode gradients, a bias-corrected Adam optimizer, and the squashed
Gaussian policy head. Everything is plain numpy; batches are row-major
(batch, features).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch

LEAKY_SLOPE = 0.01
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
TANH_EPS = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


def leaky_relu(z: np.ndarray) -> np.ndarray:
    # equivalent to where(z > 0, z, slope * z) since 0 < slope < 1
    return np.maximum(z, LEAKY_SLOPE * z)


def leaky_relu_grad(z: np.ndarray) -> np.ndarray:
    g = (z > 0.0).astype(z.dtype)
    g *= 1.0 - LEAKY_SLOPE
    g += LEAKY_SLOPE
    return g


class Mlp:
    """Fully connected network: LeakyReLU on hidden layers, identity on the
    output unless final_activation is set (used by the Lyapunov critic,
    whose value is formed from its last activations)."""

    def __init__(self, dims, final_activation: bool = False,
                 dtype=np.float64):
        if len(dims) < 2:
            raise DimensionMismatch("Mlp needs at least input and output dims")
        self.dims = tuple(int(d) for d in dims)
        self.final_activation = final_activation
        self.dtype = np.dtype(dtype)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            self.weights.append(np.zeros((fan_in, fan_out), dtype=self.dtype))
            self.biases.append(np.zeros(fan_out, dtype=self.dtype))

    @property
    def in_dim(self) -> int:
        return self.dims[0]

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def init(self, rng: np.random.Generator) -> "Mlp":
        """Glorot-uniform weights, zero biases."""
        for i, (fan_in, fan_out) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights[i] = rng.uniform(-lim, lim, size=(fan_in, fan_out)) \
                                 .astype(self.dtype)
            self.biases[i] = np.zeros(fan_out, dtype=self.dtype)
        return self

    def param_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=self.dtype)
        i = 0
        for p in self.parameters():
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size
        if i != flat.size:
            raise DimensionMismatch("flat parameter vector has wrong length")

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionMismatch(
                f"expected input dim {self.in_dim}, got shape {x.shape}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        squeeze = np.asarray(x).ndim == 1
        h = self._check_input(x)
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < n_layers - 1 or self.final_activation:
                h = leaky_relu(h)
        return h[0] if squeeze else h

    def forward_cache(self, x: np.ndarray):
        """Forward pass keeping per-layer inputs and pre-activations for
        backward()."""
        h = self._check_input(x)
        inputs = []
        pre = []
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            if i < n_layers - 1 or self.final_activation:
                h = leaky_relu(z)
            else:
                h = z
        return h, (inputs, pre)

    def backward(self, cache, grad_out: np.ndarray):
        """Reverse-mode pass. grad_out is dLoss/dOutput for the batch.

        Returns (grads, grad_in) where grads matches parameters() layout.
        """
        inputs, pre = cache
        n_layers = len(self.weights)
        g = np.asarray(grad_out, dtype=self.dtype)
        if g.ndim == 1:
            g = g[None, :]
        grads: list[np.ndarray] = [None] * (2 * n_layers)  # type: ignore[list-item]
        for i in range(n_layers - 1, -1, -1):
            if i < n_layers - 1 or self.final_activation:
                g = g * leaky_relu_grad(pre[i])
            grads[2 * i] = inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def gradients(net: Mlp, x: np.ndarray, loss):
    """Gradients of a scalar loss of the network output over a batch.

    `loss(y)` must return (value, dvalue_dy); the mean-over-batch reduction
    is the caller's responsibility inside `loss`. Returns (value, grads).
    """
    y, cache = net.forward_cache(x)
    value, grad_y = loss(y)
    grads, _ = net.backward(cache, grad_y)
    return value, grads


class Adam:
    """Bias-corrected Adam over a list of parameter arrays."""

    def __init__(self, params, lr: float = 5e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def state_arrays(self):
        return self.m + self.v


def adam_step(opt: Adam, params, grads) -> None:
    opt.step(params, grads)


def split_head(out: np.ndarray, action_dim: int):
    """Split a policy-network output into mean and clamped log-std.

    Returns (mean, log_std, clip_mask); the mask is 1 where the clamp is
    inactive so gradients can be zeroed where it binds.
    """
    out = np.asarray(out)
    if out.shape[-1] != 2 * action_dim:
        raise DimensionMismatch("policy head expects 2 outputs per action")
    mean = out[..., :action_dim]
    raw = out[..., action_dim:]
    log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    mask = ((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)).astype(out.dtype)
    return mean, log_std, mask


def squash_sample(mean: np.ndarray, log_std: np.ndarray, eps: np.ndarray):
    """Reparameterized squashed-Gaussian sample.

    u = mean + exp(log_std) * eps, action = tanh(u); the log-density carries
    the tanh change-of-variables correction. Returns (action, log_prob)
    with log_prob summed over action components.
    """
    std = np.exp(log_std)
    u = mean + std * eps
    # tanh saturates to exactly +/-1 in floating point; keep actions strictly
    # inside the box
    action = np.clip(np.tanh(u), -1.0 + TANH_EPS, 1.0 - TANH_EPS)
    log_prob = (-0.5 * np.square(eps) - log_std - 0.5 * LOG_2PI
                - np.log(1.0 - np.square(action) + TANH_EPS))
    return action, log_prob.sum(axis=-1)


def squash_logprob_grads(action: np.ndarray, log_std: np.ndarray,
                         eps: np.ndarray):
    """Partials of the summed log-prob w.r.t. the head's mean and log-std,
    holding the noise fixed (reparameterization path included)."""
    w = 1.0 - np.square(action) + TANH_EPS
    dlogp_du = 2.0 * action * (1.0 - np.square(action)) / w
    dmean = dlogp_du
    dlog_std = -1.0 + dlogp_du * np.exp(log_std) * eps
    return dmean, dlog_std
