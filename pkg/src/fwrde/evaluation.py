"""Relevance-ordering comparison test.

Given a feature ordering, the test fixes increasingly large prefixes of the
input, replaces the remaining features with Gaussian noise, and records the
empirical distortion (mean squared change of the target logit) and accuracy
(fraction of noise draws whose predicted class survives) at each rate.  The
same noise draws are reused across all rates of one test, so curves are
comparable point by point.
"""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .attribution import induced_ordering
from .exceptions import InputError

DEFAULT_RATE_GRID_SIZE = 64


def default_rate_grid(size=DEFAULT_RATE_GRID_SIZE):
    """Evenly spaced rate fractions in [0, 1], endpoints included."""
    return np.linspace(0.0, 1.0, size)


@dataclass(frozen=True)
class OrderingTestCurve:
    """Per-rate distortion/accuracy values of one ordering test.

    ``distortion`` and ``accuracy`` hold means over the noise samples for a
    single test; aggregation reuses the same container for pointwise means
    and standard deviations across tests.
    """

    rates: np.ndarray
    distortion: np.ndarray
    accuracy: np.ndarray
    num_samples: int
    seed: Optional[int] = None

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=np.float64)
        distortion = np.asarray(self.distortion, dtype=np.float64)
        accuracy = np.asarray(self.accuracy, dtype=np.float64)
        if rates.ndim != 1 or distortion.shape != rates.shape or accuracy.shape != rates.shape:
            raise InputError("rates, distortion and accuracy must be equal-length vectors")
        if rates.size and (rates[0] < 0.0 or rates[-1] > 1.0 or np.any(np.diff(rates) <= 0)):
            raise InputError("rates must be strictly increasing within [0, 1]")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "distortion", distortion)
        object.__setattr__(self, "accuracy", accuracy)


def ordering_test(net, x, ordering, noise, num_samples, seed, rate_grid=None):
    """Run the relevance-ordering test for one input and one feature ordering.

    For each rate r the first floor(r*n) features of ``ordering`` are kept at
    their values in ``x`` and the rest are redrawn from ``noise``
    (``num_samples`` draws, shared across rates).  Deterministic given
    ``seed``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    ordering = np.asarray(ordering)
    if ordering.shape != (n,) or not np.array_equal(np.sort(ordering), np.arange(n)):
        raise InputError("ordering must be a permutation of range(n)")
    if num_samples < 1:
        raise InputError("num_samples must be >= 1")
    if noise.n != n:
        raise InputError("noise model dimension does not match the input")
    rates = default_rate_grid() if rate_grid is None else np.asarray(rate_grid, dtype=np.float64)

    logits = net.forward(x)
    target = int(np.argmax(logits))
    reference = logits[target]

    rng = np.random.default_rng(seed)
    noise_draws = noise.sample(rng, num_samples)

    distortion = np.empty(rates.shape)
    accuracy = np.empty(rates.shape)
    for idx, rate in enumerate(rates):
        kept = int(math.floor(rate * n))
        mask = np.zeros(n, dtype=bool)
        mask[ordering[:kept]] = True
        samples = np.where(mask, x, noise_draws)
        out = net.forward_batch(samples)
        distortion[idx] = float(np.mean((reference - out[:, target]) ** 2))
        accuracy[idx] = float(np.mean(np.argmax(out, axis=1) == target))
    return OrderingTestCurve(rates=rates, distortion=distortion, accuracy=accuracy,
                             num_samples=int(num_samples), seed=seed)


def map_to_curve(net, x, relevance_map, noise, num_samples, seed, rate_grid=None):
    """Ordering test for the ordering induced by a relevance map."""
    ordering = induced_ordering(relevance_map)
    return ordering_test(net, x, ordering, noise, num_samples, seed, rate_grid=rate_grid)


def aggregate(curves):
    """Pointwise mean and sample standard deviation across test curves.

    All curves must share the rate grid.  Returns ``(mean_curve, std_curve)``;
    a single curve aggregates to itself with zero deviations.
    """
    if not curves:
        raise InputError("need at least one curve to aggregate")
    rates = curves[0].rates
    for curve in curves[1:]:
        if not np.array_equal(curve.rates, rates):
            raise InputError("curves have mismatched rate grids")
    dist = np.stack([c.distortion for c in curves])
    acc = np.stack([c.accuracy for c in curves])
    m = len(curves)
    mean_curve = OrderingTestCurve(
        rates=rates,
        distortion=dist.mean(axis=0),
        accuracy=acc.mean(axis=0),
        num_samples=curves[0].num_samples,
        seed=curves[0].seed,
    )
    if m == 1:
        zero = np.zeros_like(rates)
        std_dist, std_acc = zero, zero.copy()
    else:
        std_dist = dist.std(axis=0, ddof=1)
        std_acc = acc.std(axis=0, ddof=1)
    std_curve = OrderingTestCurve(
        rates=rates,
        distortion=std_dist,
        accuracy=std_acc,
        num_samples=curves[0].num_samples,
        seed=None,
    )
    return mean_curve, std_curve


def write_curve_csv(path_or_fh, curve, std_curve=None):
    """Write a curve (optionally with deviations) in the standard CSV layout."""
    if std_curve is None:
        std_dist = np.zeros_like(curve.rates)
        std_acc = std_dist
    else:
        if not np.array_equal(std_curve.rates, curve.rates):
            raise InputError("std curve has a mismatched rate grid")
        std_dist = std_curve.distortion
        std_acc = std_curve.accuracy
    own = isinstance(path_or_fh, str)
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["rate", "mean_distortion", "std_distortion", "mean_accuracy", "std_accuracy", "num_samples"]
        )
        for i in range(curve.rates.size):
            writer.writerow(
                [
                    repr(float(curve.rates[i])),
                    repr(float(curve.distortion[i])),
                    repr(float(std_dist[i])),
                    repr(float(curve.accuracy[i])),
                    repr(float(std_acc[i])),
                    curve.num_samples,
                ]
            )
    finally:
        if own:
            fh.close()


def read_curve_csv(path):
    """Read back a curve CSV; returns ``(mean_curve, std_curve)``."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
    except (OSError, StopIteration) as exc:
        raise InputError(f"cannot read curve file {path}: {exc}")
    expected = ["rate", "mean_distortion", "std_distortion", "mean_accuracy", "std_accuracy", "num_samples"]
    if header != expected:
        raise InputError(f"unexpected curve CSV header {header}")
    cols = list(zip(*rows))
    rates = np.array([float(v) for v in cols[0]])
    num_samples = int(cols[5][0])
    mean_curve = OrderingTestCurve(
        rates=rates,
        distortion=np.array([float(v) for v in cols[1]]),
        accuracy=np.array([float(v) for v in cols[3]]),
        num_samples=num_samples,
    )
    std_curve = OrderingTestCurve(
        rates=rates,
        distortion=np.array([float(v) for v in cols[2]]),
        accuracy=np.array([float(v) for v in cols[4]]),
        num_samples=num_samples,
    )
    return mean_curve, std_curve
