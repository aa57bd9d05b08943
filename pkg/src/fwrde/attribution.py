"""Relevance attribution pipelines.

Four ways to score the input features of one prediction:

* ``rc_rde``          minimize the distortion at a single rate k over
                      {s in [0,1]^n : ||s||_1 <= k},
* ``mr_rde``          average independent single-rate solutions over a rate set,
* ``ord_rde``         optimize a feature ordering directly, as a doubly
                      stochastic matrix minimizing the distortion averaged
                      over all rates,
* ``sensitivity_map`` the input-gradient-magnitude baseline.

``induced_ordering`` turns any relevance map into the feature ordering used
by the evaluation test.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .classifier import input_gradient
from .exceptions import InputError
from .regions import BirkhoffPolytope, NonNegKSparsePolytope
from .solvers import SFWConfig, SolverConfig, sfw_minimize, solve

DETERMINISTIC_SOLVERS = ("fw", "afw", "lcg", "lafw")
ORDERING_SOLVERS = ("sfw",) + DETERMINISTIC_SOLVERS


@dataclass(frozen=True)
class RelevanceMap:
    """Per-feature relevance scores in [0, 1] plus run metadata."""

    scores: np.ndarray
    method: str
    rates: tuple = ()
    solver: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise InputError("scores must be a vector")
        if scores.min(initial=0.0) < -1e-9 or scores.max(initial=0.0) > 1.0 + 1e-9:
            raise InputError("scores must lie in [0, 1] (tolerance 1e-9)")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "rates", tuple(int(k) for k in self.rates))

    @property
    def n(self):
        return self.scores.shape[0]

    def to_dict(self):
        return {
            "n": self.n,
            "scores": self.scores.tolist(),
            "method": self.method,
            "rates": list(self.rates),
            "solver": self.solver,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            scores = np.asarray(doc["scores"], dtype=np.float64)
            if int(doc["n"]) != scores.shape[0]:
                raise InputError("declared n does not match the score count")
            return cls(
                scores=scores,
                method=doc["method"],
                rates=tuple(doc.get("rates") or ()),
                solver=doc.get("solver"),
                seed=doc.get("seed"),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed relevance map document: {exc}")

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read relevance map file {path}: {exc}")
        return cls.from_dict(doc)


@dataclass(frozen=True)
class OrderingResult:
    """Doubly stochastic ordering iterate with its derived multi-rate map."""

    pi: np.ndarray
    multirate_scores: np.ndarray
    trace: object = None
    solver: Optional[str] = None
    seed: Optional[int] = None

    @property
    def n(self):
        return self.pi.shape[0]

    def single_rate_map(self, k):
        """Relevance of fixing the k highest-ranked features: pi @ p_k."""
        if not 1 <= k <= self.n - 1:
            raise InputError(f"rate k={k} out of range [1, {self.n - 1}]")
        return self.pi[:, :k].sum(axis=1)

    def to_relevance_map(self):
        return RelevanceMap(
            scores=np.clip(self.multirate_scores, 0.0, 1.0),
            method="ord",
            rates=tuple(range(1, self.n)),
            solver=self.solver,
            seed=self.seed,
        )

    def to_dict(self):
        doc = self.to_relevance_map().to_dict()
        doc["pi"] = [float(v) for v in self.pi.reshape(-1)]
        doc["multirate_scores"] = self.multirate_scores.tolist()
        return doc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def rc_rde(objective, k, solver="fw", config=None, seed=None):
    """Single-rate attribution: minimize D(s) subject to ||s||_1 <= k, s in [0,1]^n."""
    n = objective.n
    if not 1 <= k <= n - 1:
        raise InputError(f"rate k={k} out of range [1, {n - 1}] (k=n is trivially all-ones)")
    if solver not in DETERMINISTIC_SOLVERS:
        raise InputError(f"unknown solver {solver!r}; expected one of {DETERMINISTIC_SOLVERS}")
    region = NonNegKSparsePolytope(n, int(k), 1.0)
    solution, trace = solve(solver, objective, region, config=config, initial=region.initial_point())
    result = RelevanceMap(
        scores=np.clip(solution, 0.0, 1.0),
        method="rc",
        rates=(int(k),),
        solver=solver,
        seed=seed,
    )
    return result, trace


def mr_rde(objective, rates, solver="fw", config=None, seed=None):
    """Multi-rate attribution: the average of independent single-rate solutions."""
    rates = sorted({int(k) for k in rates})
    if not rates:
        raise InputError("rate set must be non-empty")
    sub_maps = []
    traces = []
    for k in rates:
        sub, trace = rc_rde(objective, k, solver=solver, config=config, seed=seed)
        sub_maps.append(sub)
        traces.append(trace)
    scores = np.mean([m.scores for m in sub_maps], axis=0)
    result = RelevanceMap(scores=scores, method="mr", rates=tuple(rates), solver=solver, seed=seed)
    return result, traces


class OrderingObjective:
    """Average distortion of a doubly stochastic ordering across all rates.

    F(pi) = mean_k D(pi @ p_k) with p_k the vector of k ones then zeros;
    its gradient is mean_k grad D(pi @ p_k) p_k^T, accumulated as a reverse
    cumulative sum over the rate-specific gradients.  Doubles as the
    stochastic-gradient sampler: population index j stands for rate k = j + 1.
    """

    def __init__(self, distortion_objective):
        self.objective = distortion_objective
        self.n = distortion_objective.n
        if self.n < 2:
            raise InputError("ordering attribution needs at least two features")

    @property
    def population_size(self):
        return self.n - 1

    def _rate_scores(self, pi, k):
        return np.clip(pi[:, :k].sum(axis=1), 0.0, 1.0)

    def value(self, pi):
        total = 0.0
        for k in range(1, self.n):
            total += self.objective.value(self._rate_scores(pi, k))
        return total / (self.n - 1)

    def gradient(self, pi):
        grads = [self.objective.gradient(self._rate_scores(pi, k)) for k in range(1, self.n)]
        out = np.zeros((self.n, self.n))
        acc = np.zeros(self.n)
        for k in range(self.n - 1, 0, -1):
            acc += grads[k - 1]
            out[:, k - 1] = acc
        return out / (self.n - 1)

    def gradient_estimate(self, pi, indices):
        out = np.zeros((self.n, self.n))
        counts = np.bincount(np.asarray(indices), minlength=self.population_size)
        for j in np.nonzero(counts)[0]:
            k = int(j) + 1
            grad = self.objective.gradient(self._rate_scores(pi, k))
            out[:, :k] += counts[j] * grad[:, None]
        return out / len(indices)


def ord_rde(objective, solver="sfw", config=None, sfw_config=None, seed=None):
    """Ordering attribution over the Birkhoff polytope.

    The stochastic solver samples rates; the deterministic solvers evaluate
    the full rate sum each iteration, which is fine for small n.
    """
    if solver not in ORDERING_SOLVERS:
        raise InputError(f"unknown solver {solver!r}; expected one of {ORDERING_SOLVERS}")
    ordering_objective = OrderingObjective(objective)
    n = ordering_objective.n
    region = BirkhoffPolytope(n)
    if solver == "sfw":
        if sfw_config is None:
            sfw_config = SFWConfig.from_preset("A", rng_seed=seed if seed is not None else 0)
        pi, trace = sfw_minimize(ordering_objective, region, config=config, sfw_config=sfw_config)
        effective_seed = sfw_config.rng_seed
    else:
        pi, trace = solve(solver, ordering_objective, region, config=config)
        effective_seed = seed
    rate_weights = (n - 1.0 - np.arange(n)) / (n - 1.0)
    multirate = np.clip(pi @ rate_weights, 0.0, 1.0)
    return OrderingResult(pi=pi, multirate_scores=multirate, trace=trace,
                          solver=solver, seed=effective_seed)


def sensitivity_map(net, x):
    """Gradient-magnitude baseline, rescaled to [0, 1] by the maximum."""
    logits = net.forward(x)
    target = int(np.argmax(logits))
    magnitude = np.abs(input_gradient(net, x, target))
    peak = magnitude.max()
    scores = magnitude / peak if peak > 0 else np.zeros_like(magnitude)
    return RelevanceMap(scores=scores, method="sensitivity")


def induced_ordering(relevance_map):
    """Feature indices sorted by score descending, ties by ascending index."""
    scores = relevance_map.scores if isinstance(relevance_map, RelevanceMap) else np.asarray(relevance_map)
    return np.argsort(-scores, kind="stable")
