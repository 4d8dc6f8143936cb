"""Independent reference computations shared by the unit and acceptance tests."""
import math

import numpy as np

from hybridmaneuver.hybrid import FeatureScaler, TrainingSample, loss, loss_gradient
from hybridmaneuver.network import FfnWeights


def forward_oracle(w: FfnWeights, x) -> list:
    """Plain-Python evaluation of the two-hidden-layer tanh network, one scalar at a time."""
    h = w.hidden
    h1 = [math.tanh(sum(x[i] * w.w1[i][j] for i in range(6)) + w.b1[j]) for j in range(h)]
    h2 = [math.tanh(sum(h1[i] * w.w2[i][j] for i in range(h)) + w.b2[j]) for j in range(h)]
    return [sum(h2[i] * w.w3[i][k] for i in range(h)) + w.b3[k] for k in range(3)]


def random_batch(rng, size):
    out = []
    for _ in range(size):
        feat = (
            rng.uniform(0.2, 1.2),
            rng.normal(0, 0.1),
            rng.normal(0, 0.2),
            rng.uniform(-0.5, 0.5),
            *(lambda p: (math.cos(p), math.sin(p)))(rng.uniform(-math.pi, math.pi)),
        )
        target = tuple(np.array(feat[:3]) + rng.normal(0, 0.05, 3))
        out.append(TrainingSample(feat, target))
    return out


def gradient_check(rng, hidden=10, batch=8, lam=0.01, step=1e-5, floor=1e-6):
    """Max relative error between analytic and central-difference loss gradients.

    Entries whose magnitude is below ``floor`` are compared with ``floor`` as
    the denominator, since relative error is meaningless for exact zeros.
    """
    weights = FfnWeights.init(hidden, rng)
    for a in weights.arrays():
        a *= rng.uniform(0.5, 2.0)
    samples = random_batch(rng, batch)
    scaler = FeatureScaler(rng.normal(0, 0.1, 6), rng.uniform(0.5, 2, 6), rng.uniform(0.5, 2, 3))
    grads = loss_gradient(weights, samples, lam, scaler)
    worst = 0.0
    for w_arr, g_arr in zip(weights.arrays(), grads.arrays()):
        flat, gflat = w_arr.reshape(-1), g_arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss(weights, samples, lam, scaler)
            flat[i] = orig - step
            down = loss(weights, samples, lam, scaler)
            flat[i] = orig
            fd = (up - down) / (2 * step)
            err = abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), floor)
            worst = max(worst, err)
    return worst
