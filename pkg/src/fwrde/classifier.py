"""Small feedforward classifiers and the moment-matched distortion objective.

A network is a chain of affine layers with relu or identity activations,
evaluated on pre-softmax scores.  The distortion of a relevance vector s
measures the expected squared change of the target logit when the features
not kept by s are replaced by Gaussian noise:

    D(s) = E[(net(x)_target - net(s*x + (1-s)*noise)_target)^2].

The expectation is approximated by propagating a diagonal Gaussian through
the network with layerwise moment matching (exact for affine layers,
Gaussian relu moments otherwise).  Gradients of the approximation are exact
reverse-mode derivatives through the moment propagation.  ``mc_distortion``
is an unbiased Monte Carlo estimator of the same expectation, kept as an
independent check of the moment-matched value.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import InputError

SIGMA_FLOOR = 1e-3
BOX_TOL = 1e-9

ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "bias", np.asarray(self.bias, dtype=np.float64))
        if self.weights.ndim != 2:
            raise InputError("layer weights must be a matrix")
        if self.bias.shape != (self.weights.shape[0],):
            raise InputError("bias length must equal the weight row count")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise InputError("layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class FeedforwardNetwork:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InputError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.weights.shape[1] != prev.weights.shape[0]:
                raise InputError("consecutive layer dimensions do not chain")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self):
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self):
        return self.layers[-1].weights.shape[0]

    def forward(self, x):
        """Pre-softmax scores for a single input vector."""
        x = _as_vector(x, self.input_dim, "x")
        h = x
        for layer in self.layers:
            h = layer.weights @ h + layer.bias
            if layer.activation == "relu":
                h = np.maximum(h, 0.0)
        return h

    def forward_batch(self, xs):
        """Pre-softmax scores for a batch of inputs, one per row."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.input_dim:
            raise InputError(f"batch must have shape (m, {self.input_dim})")
        h = xs
        for layer in self.layers:
            h = h @ layer.weights.T + layer.bias
            if layer.activation == "relu":
                h = np.maximum(h, 0.0)
        return h


def _as_vector(x, n, name):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise InputError(f"{name} must have shape ({n},), got {x.shape}")
    return x


def forward(net, x):
    return net.forward(x)


def input_gradient(net, x, logit_index):
    """Exact gradient of one logit w.r.t. the input; relu'(0) is taken as 0."""
    x = _as_vector(x, net.input_dim, "x")
    if not 0 <= logit_index < net.output_dim:
        raise InputError(f"logit_index {logit_index} out of range")
    pre_activations = []
    h = x
    for layer in net.layers:
        z = layer.weights @ h + layer.bias
        pre_activations.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
    grad = np.zeros(net.output_dim)
    grad[logit_index] = 1.0
    for layer, z in zip(reversed(net.layers), reversed(pre_activations)):
        if layer.activation == "relu":
            grad = grad * (z > 0.0)
        grad = layer.weights.T @ grad
    return grad


@dataclass(frozen=True)
class GaussianInputModel:
    """Diagonal Gaussian over inputs; std components are floored at SIGMA_FLOOR."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.ndim != 1 or std.shape != mean.shape:
            raise InputError("mean and std must be vectors of equal length")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise InputError("noise model parameters must be finite")
        if np.any(std < 0):
            raise InputError("std components must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", np.maximum(std, SIGMA_FLOOR))

    @property
    def n(self):
        return self.mean.shape[0]

    def sample(self, rng, size):
        return self.mean + self.std * rng.standard_normal((size, self.n))


def fit_gaussian(data):
    """Per-component sample mean and std (ddof=1) of the rows of ``data``."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise InputError("data must be a matrix with one sample per row")
    if data.shape[0] < 2:
        raise InputError("need at least two samples to fit the noise model")
    return GaussianInputModel(mean=data.mean(axis=0), std=data.std(axis=0, ddof=1))


def _affine_blocks(net):
    """Layers grouped into maximal affine runs, each ending at a relu or the output.

    Consecutive affine maps are composed before the variance is propagated,
    so purely affine stretches stay exact; the diagonal approximation only
    enters at relu activations (where componentwise moment matching happens
    anyway).
    """
    blocks = []
    weights = None
    bias = None
    for layer in net.layers:
        if weights is None:
            weights = layer.weights
            bias = layer.bias
        else:
            weights = layer.weights @ weights
            bias = layer.weights @ bias + layer.bias
        if layer.activation == "relu":
            blocks.append((weights, bias, True))
            weights, bias = None, None
    if weights is not None:
        blocks.append((weights, bias, False))
    return blocks


def _adf_propagate(net, mean, var, want_partials):
    """Moment matching through the network; caches relu partials when asked."""
    caches = []
    m, v = mean, var
    for weights, bias, has_relu in _affine_blocks(net):
        m = weights @ m + bias
        v = (weights * weights) @ v
        if has_relu:
            if want_partials:
                m, v, dmm, dmv, dvm, dvv = _kernels.relu_moment_partials(m, v)
                caches.append((weights, (dmm, dmv, dvm, dvv)))
            else:
                m, v = _kernels.relu_moments(m, v)
                caches.append((weights, None))
        else:
            caches.append((weights, None))
    return m, v, caches


def _adf_backprop(caches, d_mean, d_var):
    for weights, relu_partials in reversed(caches):
        if relu_partials is not None:
            dmm, dmv, dvm, dvv = relu_partials
            d_mean, d_var = d_mean * dmm + d_var * dvm, d_mean * dmv + d_var * dvv
        d_mean = weights.T @ d_mean
        d_var = (weights * weights).T @ d_var
    return d_mean, d_var


def adf_forward(net, mean, var, logit_index):
    """Moment-matched (mean, variance) of one logit for Gaussian input N(mean, diag(var))."""
    mean = _as_vector(mean, net.input_dim, "mean")
    var = _as_vector(var, net.input_dim, "var")
    if np.any(var < 0):
        raise InputError("variances must be non-negative")
    if not 0 <= logit_index < net.output_dim:
        raise InputError(f"logit_index {logit_index} out of range")
    m, v, _ = _adf_propagate(net, mean, var, want_partials=False)
    return float(m[logit_index]), float(v[logit_index])


@dataclass(frozen=True)
class DistortionObjective:
    """Distortion D(s) of keeping features per s and randomizing the rest.

    The target logit is the argmax of the network at ``x`` (lowest index on
    ties) and its clean score is cached at construction.
    """

    network: FeedforwardNetwork
    x: np.ndarray
    noise: GaussianInputModel
    target_index: int = field(init=False)
    reference_score: float = field(init=False)

    def __post_init__(self):
        x = _as_vector(self.x, self.network.input_dim, "x")
        if self.noise.n != self.network.input_dim:
            raise InputError("noise model dimension does not match the network")
        object.__setattr__(self, "x", x)
        logits = self.network.forward(x)
        object.__setattr__(self, "target_index", int(np.argmax(logits)))
        object.__setattr__(self, "reference_score", float(logits[self.target_index]))

    @property
    def n(self):
        return self.network.input_dim

    def _validated(self, scores):
        scores = _as_vector(scores, self.n, "scores")
        if scores.min() < -BOX_TOL or scores.max() > 1.0 + BOX_TOL:
            raise InputError("scores must lie in [0, 1] (within tolerance)")
        return np.clip(scores, 0.0, 1.0)

    def masked_moments(self, scores):
        scores = self._validated(scores)
        kept = scores * self.x + (1.0 - scores) * self.noise.mean
        var = (1.0 - scores) ** 2 * self.noise.std**2
        return kept, var

    def value(self, scores):
        mean, var = self.masked_moments(scores)
        m, v, _ = _adf_propagate(self.network, mean, var, want_partials=False)
        i = self.target_index
        return float((self.reference_score - m[i]) ** 2 + v[i])

    def gradient(self, scores):
        scores = self._validated(scores)
        mean = scores * self.x + (1.0 - scores) * self.noise.mean
        var = (1.0 - scores) ** 2 * self.noise.std**2
        m, v, caches = _adf_propagate(self.network, mean, var, want_partials=True)
        i = self.target_index
        d_mean = np.zeros(self.network.output_dim)
        d_var = np.zeros(self.network.output_dim)
        d_mean[i] = -2.0 * (self.reference_score - m[i])
        d_var[i] = 1.0
        g_mean, g_var = _adf_backprop(caches, d_mean, d_var)
        return g_mean * (self.x - self.noise.mean) - 2.0 * (1.0 - scores) * self.noise.std**2 * g_var


def distortion(obj, scores):
    """Moment-matched distortion D(scores)."""
    return obj.value(scores)


def distortion_gradient(obj, scores):
    """Exact gradient of the moment-matched distortion w.r.t. the scores."""
    return obj.gradient(scores)


def mc_distortion(obj, scores, num_samples, seed):
    """Unbiased Monte Carlo estimate of D(scores) with its standard error."""
    if num_samples < 2:
        raise InputError("num_samples must be >= 2")
    scores = obj._validated(scores)
    rng = np.random.default_rng(seed)
    noise = obj.noise.sample(rng, num_samples)
    masked = scores * obj.x + (1.0 - scores) * noise
    logits = obj.network.forward_batch(masked)[:, obj.target_index]
    values = (obj.reference_score - logits) ** 2
    estimate = float(values.mean())
    std_error = float(values.std(ddof=1) / np.sqrt(num_samples))
    return estimate, std_error


def network_to_dict(net):
    return {
        "input_dim": int(net.input_dim),
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }


def network_from_dict(doc):
    try:
        layers = tuple(
            Layer(entry["weights"], entry["bias"], entry["activation"])
            for entry in doc["layers"]
        )
        net = FeedforwardNetwork(layers)
        declared = int(doc["input_dim"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed network document: {exc}")
    if net.input_dim != declared:
        raise InputError(
            f"declared input_dim {declared} does not match layer shapes ({net.input_dim})"
        )
    return net


def save_network(net, path):
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh, indent=2)
        fh.write("\n")


def load_network(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read network file {path}: {exc}")
    return network_from_dict(doc)


def save_noise_model(model, path):
    with open(path, "w") as fh:
        json.dump({"mean": model.mean.tolist(), "std": model.std.tolist()}, fh, indent=2)
        fh.write("\n")


def load_noise_model(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        return GaussianInputModel(mean=np.asarray(doc["mean"]), std=np.asarray(doc["std"]))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read noise model file {path}: {exc}")
