"""Shared oracles and instance generators for the test suite.

Oracles are deliberately independent of the library code paths they check:
LMO results are compared against exhaustive vertex enumeration, assignments
against brute force over permutations, gradients against central finite
differences, and moment-matched distortions against closed forms composed
from scratch or Monte Carlo estimates.
"""

from itertools import combinations, permutations

import numpy as np

from fwrde.classifier import (
    DistortionObjective,
    FeedforwardNetwork,
    GaussianInputModel,
    Layer,
)


def enumerate_ksparse_vertices(n, k, tau):
    """All vertices with exactly k entries of +-tau (independent of region code)."""
    out = []
    for support in combinations(range(n), k):
        for bits in range(2**k):
            v = np.zeros(n)
            for pos, idx in enumerate(support):
                v[idx] = tau if (bits >> pos) & 1 else -tau
            out.append(v)
    return np.array(out)


def enumerate_nonneg_ksparse_vertices(n, k, tau):
    """All vertices with at most k entries of tau (including the origin)."""
    out = [np.zeros(n)]
    for size in range(1, k + 1):
        for support in combinations(range(n), size):
            v = np.zeros(n)
            v[list(support)] = tau
            out.append(v)
    return np.array(out)


def enumerate_permutation_matrices(n):
    eye = np.eye(n)
    return np.array([eye[list(p)] for p in permutations(range(n))])


def brute_force_assignment_cost(cost):
    n = cost.shape[0]
    return min(sum(cost[i, p[i]] for i in range(n)) for p in permutations(range(n)))


def central_difference(fun, x, h=1e-5):
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for j in range(x.size):
        step = np.zeros_like(x)
        step[j] = h
        grad[j] = (fun(x + step) - fun(x - step)) / (2.0 * h)
    return grad


def affine_closed_form_distortion(net, x, noise, scores):
    """Closed-form distortion for affine networks, composed independently.

    Collapses the layer chain to a single affine map y -> A y + b, then
    evaluates (A (x - masked_mean))_target ... directly from Gaussian algebra:
    D = (a . (1-s)(x - mu))^2 + sum(a^2 (1-s)^2 sigma^2) for the target row a.
    """
    A = np.eye(net.input_dim)
    b = np.zeros(net.input_dim)
    for layer in net.layers:
        assert layer.activation == "identity"
        A = layer.weights @ A
        b = layer.weights @ b + layer.bias
    logits = A @ x + b
    target = int(np.argmax(logits))
    row = A[target]
    scores = np.asarray(scores, dtype=np.float64)
    mean_shift = row @ ((1.0 - scores) * (x - noise.mean))
    variance = np.sum(row**2 * (1.0 - scores) ** 2 * noise.std**2)
    return mean_shift**2 + variance


def random_relu_net(rng, n, hidden, outputs):
    return FeedforwardNetwork(
        (
            Layer(rng.standard_normal((hidden, n)), rng.standard_normal(hidden), "relu"),
            Layer(rng.standard_normal((outputs, hidden)), rng.standard_normal(outputs), "identity"),
        )
    )


def planted_instance(seed, n=16, d=4, hidden=6, scale=2.0):
    """Classifier whose output depends on exactly d of the n inputs.

    Returns (objective, planted_indices).  The planted columns carry strong
    weights; all other input columns are exactly zero, so only the planted
    features can influence the output.
    """
    rng = np.random.default_rng(seed)
    planted = np.sort(rng.choice(n, size=d, replace=False))
    w1 = np.zeros((hidden, n))
    w1[:, planted] = scale * rng.standard_normal((hidden, d))
    b1 = 0.1 * rng.standard_normal(hidden)
    w2 = rng.standard_normal((2, hidden))
    net = FeedforwardNetwork((Layer(w1, b1, "relu"), Layer(w2, np.zeros(2), "identity")))
    x = rng.standard_normal(n)
    noise = GaussianInputModel(mean=np.zeros(n), std=np.full(n, 1.0))
    return DistortionObjective(net, x, noise), planted


def best_support_by_exhaustion(objective, d):
    """Exhaustive search over all d-sparse binary supports minimizing D."""
    n = objective.n
    best_support, best_value = None, np.inf
    for support in combinations(range(n), d):
        scores = np.zeros(n)
        scores[list(support)] = 1.0
        value = objective.value(scores)
        if value < best_value:
            best_support, best_value = support, value
    return np.array(best_support), best_value


def gated_instance(seed, n=12):
    """Instance where the gradient baseline misranks a gated feature.

    One hidden unit reads a decoy feature through a relu that is off at x
    (zero input gradient) but fires under noise, so keeping the decoy fixed
    matters for the prediction even though sensitivity scores it zero.
    """
    rng = np.random.default_rng(seed)
    relevant = np.sort(rng.choice(n - 1, size=3, replace=False))
    decoy = n - 1
    x = rng.standard_normal(n)
    x[decoy] = -0.5

    hidden = 5
    w1 = np.zeros((hidden, n))
    w1[:3, relevant] = 1.5 * rng.standard_normal((3, 3))
    w1[3, decoy] = 2.0
    b1 = 0.1 * rng.standard_normal(hidden)
    b1[3] = -2.0 * x[decoy] - 0.5  # unit off at x, near its threshold
    w1[4, :] = 0.05 * rng.standard_normal(n)
    w2 = np.zeros((2, hidden))
    w2[0, :3] = rng.standard_normal(3)
    w2[0, 3] = 3.0
    w2[0, 4] = 0.3
    w2[1, :] = 0.1 * rng.standard_normal(hidden)
    net = FeedforwardNetwork((Layer(w1, b1, "relu"), Layer(w2, np.zeros(2), "identity")))

    std = np.full(n, 0.8)
    std[decoy] = 2.5
    noise = GaussianInputModel(mean=np.zeros(n), std=std)
    return net, x, noise
