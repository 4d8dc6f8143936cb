"""Three-layer tanh feed-forward network with hand-written backprop and Adam."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

N_FEATURES = 6
N_OUTPUTS = 3
MATRICES = ("w1", "w2", "w3")


@dataclass
class FfnWeights:
    w1: np.ndarray  # (6, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h, h)
    b2: np.ndarray  # (h,)
    w3: np.ndarray  # (h, 3)
    b3: np.ndarray  # (3,)

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=float))
        h = self.w1.shape[1] if self.w1.ndim == 2 else -1
        expected = {
            "w1": (N_FEATURES, h),
            "b1": (h,),
            "w2": (h, h),
            "b2": (h,),
            "w3": (h, N_OUTPUTS),
            "b3": (N_OUTPUTS,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @classmethod
    def zeros(cls, hidden: int = 10) -> "FfnWeights":
        return cls(
            np.zeros((N_FEATURES, hidden)),
            np.zeros(hidden),
            np.zeros((hidden, hidden)),
            np.zeros(hidden),
            np.zeros((hidden, N_OUTPUTS)),
            np.zeros(N_OUTPUTS),
        )

    @classmethod
    def init(cls, hidden: int = 10, rng: np.random.Generator | int | None = None) -> "FfnWeights":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
        rng = np.random.default_rng(rng)

        def layer(fan_in, fan_out):
            s = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-s, s, (fan_in, fan_out)), rng.uniform(-s, s, fan_out)

        w1, b1 = layer(N_FEATURES, hidden)
        w2, b2 = layer(hidden, hidden)
        w3, b3 = layer(hidden, N_OUTPUTS)
        return cls(w1, b1, w2, b2, w3, b3)

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]

    def copy(self) -> "FfnWeights":
        return FfnWeights(*(a.copy() for a in self.arrays()))

    def matrix_norm2(self) -> float:
        """Sum of squared Frobenius norms of the weight matrices (biases excluded)."""
        return float(sum(np.sum(getattr(self, k) ** 2) for k in MATRICES))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name).tolist() for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "FfnWeights":
        return cls(**{f.name: np.asarray(d[f.name], dtype=float) for f in fields(cls)})


def ffn_forward(weights: FfnWeights, x: np.ndarray) -> np.ndarray:
    """``tanh(tanh(x W1 + b1) W2 + b2) W3 + b3`` for one sample or a batch of rows."""
    if type(x) is not np.ndarray or x.dtype != np.float64:
        x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        # single sample (the rollout hot path): in-place to avoid temporaries
        h1 = np.dot(x, weights.w1)
        h1 += weights.b1
        np.tanh(h1, out=h1)
        h2 = np.dot(h1, weights.w2)
        h2 += weights.b2
        np.tanh(h2, out=h2)
        out = np.dot(h2, weights.w3)
        out += weights.b3
        return out
    h1 = np.tanh(x @ weights.w1 + weights.b1)
    h2 = np.tanh(h1 @ weights.w2 + weights.b2)
    return h2 @ weights.w3 + weights.b3


def mse_loss_and_grad(weights: FfnWeights, x: np.ndarray, target: np.ndarray, lam: float):
    """Loss ``mean_n ||f(x_n) - target_n||^2 + lam/2 * sum ||W||_F^2`` and its gradient.

    Returns ``(loss, grads)`` with ``grads`` shaped like ``weights``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    h1 = np.tanh(x @ weights.w1 + weights.b1)
    h2 = np.tanh(h1 @ weights.w2 + weights.b2)
    out = h2 @ weights.w3 + weights.b3
    err = out - target
    loss = float(np.sum(err**2) / n + 0.5 * lam * weights.matrix_norm2())

    g_out = 2.0 * err / n
    g_w3 = h2.T @ g_out + lam * weights.w3
    g_b3 = g_out.sum(axis=0)
    g_a2 = (g_out @ weights.w3.T) * (1.0 - h2**2)
    g_w2 = h1.T @ g_a2 + lam * weights.w2
    g_b2 = g_a2.sum(axis=0)
    g_a1 = (g_a2 @ weights.w2.T) * (1.0 - h1**2)
    g_w1 = x.T @ g_a1 + lam * weights.w1
    g_b1 = g_a1.sum(axis=0)
    grads = (g_w1, g_b1, g_w2, g_b2, g_w3, g_b3)
    if not (np.isfinite(loss) and all(np.all(np.isfinite(g)) for g in grads)):
        raise FloatingPointError(f"non-finite loss or gradient (loss {loss})")
    return loss, FfnWeights(*grads)


class Adam:
    """Bias-corrected Adam over the arrays of an :class:`FfnWeights`."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = None
        self._v = None

    def step(self, weights: FfnWeights, grads: FfnWeights) -> None:
        params, gs = weights.arrays(), grads.arrays()
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, gs, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)
