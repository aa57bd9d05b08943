"""Frank-Wolfe solvers: vanilla, away-step, lazified, lazified away-step, stochastic.

All solvers work over any region exposing ``lmo``/``contains``/``initial_point``
(see :mod:`fwrde.regions`) and an objective exposing ``value(x)`` and
``gradient(x)``.  They return ``(solution, SolverTrace)`` where the trace holds
one record per iteration and the termination reason.

Step-size rules:

* ``basic``     eta_t = 1/sqrt(t+1), suitable for non-convex objectives,
* ``monotone``  eta_t = 2^-r_t / sqrt(t+1) with r_t >= r_{t-1} increased until
  the objective strictly decreases (at most ``MAX_STEP_HALVINGS`` increments
  per iteration; a failed search stalls the solver),
* ``fixed``     a constant eta in [0, 1].

Deterministic runs are bit-reproducible; the stochastic solver is
bit-reproducible given its RNG seed.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import InputError, NumericError
from .regions import DEFAULT_MEMBERSHIP_TOL

MAX_STEP_HALVINGS = 64

TERMINATION_GAP = "gap_reached"
TERMINATION_MAX_ITER = "max_iterations"
TERMINATION_STALL = "stall"


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver settings.

    ``lazy_accuracy`` is the weak-separation slack K: a cached vertex is
    accepted when its linear improvement reaches phi/K, and phi is at least
    halved whenever the true oracle disproves the current estimate.
    """

    max_iterations: int = 2000
    dual_gap_tolerance: float = 1e-7
    step_rule: str = "monotone"
    fixed_step: Optional[float] = None
    lazy_accuracy: float = 2.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        if not self.dual_gap_tolerance > 0:
            raise InputError("dual_gap_tolerance must be > 0")
        if self.step_rule not in ("basic", "monotone", "fixed"):
            raise InputError(f"unknown step_rule {self.step_rule!r}")
        if self.step_rule == "fixed":
            if self.fixed_step is None or not 0.0 <= self.fixed_step <= 1.0:
                raise InputError("fixed step rule needs fixed_step in [0, 1]")
        if not self.lazy_accuracy >= 1.0:
            raise InputError("lazy_accuracy must be >= 1")


@dataclass(frozen=True)
class SFWConfig:
    """Batch/momentum schedules for the stochastic solver.

    ``batch_schedule(t)`` returns the batch size b_t >= 1 and
    ``momentum_schedule(t)`` the momentum factor rho_t in [0, 1] for
    iteration t (1-based).  ``from_preset`` builds the six standard
    configurations:

    ======  ==========================  =====================
    preset  momentum rho_t              batch size b_t
    ======  ==========================  =====================
    A       0                           40
    B       0                           min(40 + t, 100)
    C       1/2                         40
    D       1/2                         min(40 + t, 100)
    E       1 - 4/(8 + t)^(2/3)         40
    F       1 - 4/(8 + t)^(2/3)         min(40 + t, 100)
    ======  ==========================  =====================
    """

    batch_schedule: Callable[[int], int]
    momentum_schedule: Callable[[int], float]
    rng_seed: int = 0

    PRESETS = ("A", "B", "C", "D", "E", "F")

    @staticmethod
    def from_preset(name, rng_seed=0):
        constant = lambda t: 40
        growing = lambda t: min(40 + t, 100)
        zero = lambda t: 0.0
        half = lambda t: 0.5
        decaying = lambda t: 1.0 - 4.0 / (8.0 + t) ** (2.0 / 3.0)
        table = {
            "A": (zero, constant),
            "B": (zero, growing),
            "C": (half, constant),
            "D": (half, growing),
            "E": (decaying, constant),
            "F": (decaying, growing),
        }
        if name not in table:
            raise InputError(f"unknown SFW preset {name!r}")
        momentum, batch = table[name]
        return SFWConfig(batch_schedule=batch, momentum_schedule=momentum, rng_seed=rng_seed)


@dataclass
class TraceRecord:
    iteration: int
    objective: float
    dual_gap: float
    step_size: float
    lmo_call: bool


@dataclass
class SolverTrace:
    """Per-iteration solver history plus the termination reason.

    On lazy (cache-hit) iterations ``dual_gap`` records the accepted
    direction's linear improvement, a lower bound on the true gap; on all
    other iterations it is the exact gap at the pre-step iterate.
    """

    records: list = field(default_factory=list)
    termination: str = TERMINATION_MAX_ITER

    def append(self, iteration, objective, dual_gap, step_size, lmo_call):
        self.records.append(
            TraceRecord(iteration, float(objective), float(dual_gap), float(step_size), bool(lmo_call))
        )

    def __len__(self):
        return len(self.records)

    @property
    def final_objective(self):
        return self.records[-1].objective if self.records else math.nan

    @property
    def final_gap(self):
        return self.records[-1].dual_gap if self.records else math.nan

    @property
    def lmo_calls(self):
        return sum(1 for r in self.records if r.lmo_call)

    def objectives(self):
        return np.array([r.objective for r in self.records])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "objective", "dual_gap", "step_size", "lmo_call"])
        for r in self.records:
            writer.writerow(
                [r.iteration, repr(r.objective), repr(r.dual_gap), repr(r.step_size), int(r.lmo_call)]
            )


class FunctionObjective:
    """Adapter wrapping plain callables into the value/gradient protocol."""

    def __init__(self, value, gradient):
        self._value = value
        self._gradient = gradient

    def value(self, x):
        return float(self._value(x))

    def gradient(self, x):
        return np.asarray(self._gradient(x), dtype=np.float64)


@dataclass
class ActiveSet:
    """Convex decomposition of the current iterate into region vertices.

    Weights are non-negative and sum to one; ``point()`` reconstructs the
    iterate exactly as the weighted vertex sum.
    """

    vertices: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {self._key(v): i for i, v in enumerate(self.vertices)}

    @staticmethod
    def _key(vertex):
        return np.ascontiguousarray(vertex).tobytes()

    @classmethod
    def singleton(cls, vertex):
        return cls(vertices=[np.array(vertex, dtype=np.float64)], weights=[1.0])

    def __len__(self):
        return len(self.vertices)

    def point(self):
        out = np.zeros_like(self.vertices[0])
        for w, v in zip(self.weights, self.vertices):
            out += w * v
        return out

    def weight_sum(self):
        return math.fsum(self.weights)

    def fw_update(self, vertex, eta):
        """Move toward ``vertex`` with step eta: weights scale by (1 - eta)."""
        if eta >= 1.0:
            self.vertices = [np.array(vertex, dtype=np.float64)]
            self.weights = [1.0]
            self._index = {self._key(vertex): 0}
            return
        self.weights = [w * (1.0 - eta) for w in self.weights]
        key = self._key(vertex)
        pos = self._index.get(key)
        if pos is None:
            self.vertices.append(np.array(vertex, dtype=np.float64))
            self.weights.append(eta)
            self._index[key] = len(self.vertices) - 1
        else:
            self.weights[pos] += eta

    def away_update(self, away_index, eta):
        """Move away from vertex ``away_index``: weights scale by (1 + eta)."""
        self.weights = [w * (1.0 + eta) for w in self.weights]
        self.weights[away_index] -= eta
        if self.weights[away_index] <= 1e-12:
            del self.vertices[away_index]
            del self.weights[away_index]
            self._index = {self._key(v): i for i, v in enumerate(self.vertices)}

    def inner_products(self, gradient):
        return np.array([float(np.vdot(gradient, v)) for v in self.vertices])


def step_basic(t):
    """Step size 1/sqrt(t+1)."""
    return 1.0 / math.sqrt(t + 1.0)


def step_monotone(t, r_prev, objective, iterate, direction, current_value=None,
                  max_increments=MAX_STEP_HALVINGS):
    """Smallest r >= r_prev with f(x + 2^-r/sqrt(t+1) * d) < f(x).

    Returns ``(eta, r)``; a failed search (no strict decrease within
    ``max_increments`` unit increments of r) returns ``(0.0, r_prev)``,
    which callers treat as a stall.
    """
    if r_prev < 0:
        raise InputError("r_prev must be >= 0")
    if current_value is None:
        current_value = objective.value(iterate)
    base = 1.0 / math.sqrt(t + 1.0)
    r = r_prev
    for _ in range(max_increments + 1):
        eta = 2.0 ** (-r) * base
        if objective.value(iterate + eta * direction) < current_value:
            return eta, r
        r += 1
    return 0.0, r_prev


def dual_gap(gradient, iterate, lmo_vertex):
    """Frank-Wolfe gap <iterate - lmo_vertex, gradient> (Frobenius for matrices)."""
    return float(np.vdot(np.asarray(iterate) - np.asarray(lmo_vertex), gradient))


def _check_initial(region, initial):
    if initial is None:
        initial = region.initial_point()
    initial = np.asarray(initial, dtype=np.float64)
    if not region.contains(initial, DEFAULT_MEMBERSHIP_TOL):
        raise InputError("initial point is not feasible for the region")
    return initial


def _checked_value(objective, x, trace):
    val = objective.value(x)
    if not math.isfinite(val):
        raise NumericError(f"objective is not finite ({val})", trace=trace)
    return val


def _choose_step(config, t, r, objective, iterate, direction, current_value, gamma_max=1.0):
    """Step size for the configured rule, truncated to gamma_max.

    Returns (eta, r, stalled); only the monotone rule can stall.
    """
    if config.step_rule == "basic":
        return min(step_basic(t), gamma_max), r, False
    if config.step_rule == "fixed":
        return min(config.fixed_step, gamma_max), r, False
    base = 1.0 / math.sqrt(t + 1.0)
    for _ in range(MAX_STEP_HALVINGS + 1):
        eta = min(2.0 ** (-r) * base, gamma_max)
        if objective.value(iterate + eta * direction) < current_value:
            return eta, r, False
        r += 1
    return 0.0, r, True


def fw_minimize(objective, region, config=None, initial=None, callback=None):
    """Vanilla Frank-Wolfe: one exact LMO call and one convex step per iteration.

    ``callback(t, iterate, active_set)`` (active_set None here) is invoked
    after every completed iteration; intended for diagnostics.
    """
    config = config or SolverConfig()
    iterate = _check_initial(region, initial)
    trace = SolverTrace()
    current = _checked_value(objective, iterate, trace)
    r = 0
    for t in range(1, config.max_iterations + 1):
        grad = objective.gradient(iterate)
        vertex = region.lmo(grad)
        gap = dual_gap(grad, iterate, vertex)
        if gap < config.dual_gap_tolerance:
            trace.append(t, current, gap, 0.0, True)
            trace.termination = TERMINATION_GAP
            return iterate, trace
        direction = vertex - iterate
        eta, r, stalled = _choose_step(config, t, r, objective, iterate, direction, current)
        if stalled:
            trace.append(t, current, gap, 0.0, True)
            trace.termination = TERMINATION_STALL
            return iterate, trace
        iterate = iterate + eta * direction
        current = _checked_value(objective, iterate, trace)
        trace.append(t, current, gap, eta, True)
        if callback:
            callback(t, iterate, None)
    trace.termination = TERMINATION_MAX_ITER
    return iterate, trace


def afw_minimize(objective, region, config=None, initial=None, callback=None):
    """Away-step Frank-Wolfe with an explicit active set.

    Per iteration either a step toward the LMO vertex or a step away from
    the worst active vertex is taken, whichever has the strictly larger
    linear decrease (ties go to the FW step).  Away steps are capped at
    alpha/(1 - alpha) so weights stay non-negative; vertices whose weight
    reaches zero are dropped.
    """
    config = config or SolverConfig()
    iterate = _check_initial(region, initial)
    active = ActiveSet.singleton(iterate)
    trace = SolverTrace()
    current = _checked_value(objective, iterate, trace)
    r = 0
    for t in range(1, config.max_iterations + 1):
        grad = objective.gradient(iterate)
        vertex = region.lmo(grad)
        gap = dual_gap(grad, iterate, vertex)
        if gap < config.dual_gap_tolerance:
            trace.append(t, current, gap, 0.0, True)
            trace.termination = TERMINATION_GAP
            return iterate, trace
        inner = active.inner_products(grad)
        away_index = int(np.argmax(inner))
        iterate_inner = float(np.vdot(grad, iterate))
        away_gap = inner[away_index] - iterate_inner
        if away_gap > gap:
            away_weight = active.weights[away_index]
            gamma_max = away_weight / (1.0 - away_weight) if away_weight < 1.0 else math.inf
            direction = iterate - active.vertices[away_index]
            eta, r, stalled = _choose_step(
                config, t, r, objective, iterate, direction, current, gamma_max=gamma_max
            )
            if stalled:
                trace.append(t, current, gap, 0.0, True)
                trace.termination = TERMINATION_STALL
                return iterate, trace
            active.away_update(away_index, eta)
        else:
            direction = vertex - iterate
            eta, r, stalled = _choose_step(config, t, r, objective, iterate, direction, current)
            if stalled:
                trace.append(t, current, gap, 0.0, True)
                trace.termination = TERMINATION_STALL
                return iterate, trace
            active.fw_update(vertex, eta)
        iterate = active.point()
        current = _checked_value(objective, iterate, trace)
        trace.append(t, current, gap, eta, True)
        if callback:
            callback(t, iterate, active)
    trace.termination = TERMINATION_MAX_ITER
    return iterate, trace


def lcg_minimize(objective, region, config=None, initial=None, callback=None):
    """Lazified conditional gradients: a vertex cache replaces most LMO calls.

    A cached vertex is accepted when its linear improvement reaches phi/K
    (K = ``config.lazy_accuracy``); phi starts at the first true LMO gap.
    On a cache miss the true oracle is called; if even its vertex falls
    short, the iteration takes no step and phi <- min(gap, phi/2).
    """
    config = config or SolverConfig()
    iterate = _check_initial(region, initial)
    trace = SolverTrace()
    current = _checked_value(objective, iterate, trace)
    cache = []
    phi = None
    r = 0
    for t in range(1, config.max_iterations + 1):
        grad = objective.gradient(iterate)
        vertex = None
        lmo_called = False
        gap_recorded = None
        if phi is not None and cache:
            improvements = [float(np.vdot(grad, iterate - w)) for w in cache]
            best = int(np.argmax(improvements))
            if improvements[best] >= phi / config.lazy_accuracy:
                vertex = cache[best]
                gap_recorded = improvements[best]
        if vertex is None:
            lmo_called = True
            vertex = region.lmo(grad)
            gap = dual_gap(grad, iterate, vertex)
            gap_recorded = gap
            if gap < config.dual_gap_tolerance:
                trace.append(t, current, gap, 0.0, True)
                trace.termination = TERMINATION_GAP
                return iterate, trace
            if phi is None:
                phi = gap
                cache.append(vertex)
            elif gap >= phi / config.lazy_accuracy:
                cache.append(vertex)
            else:
                # Negative certificate: the estimate was too optimistic.
                phi = min(gap, phi / 2.0)
                trace.append(t, current, gap, 0.0, True)
                continue
        direction = vertex - iterate
        eta, r, stalled = _choose_step(config, t, r, objective, iterate, direction, current)
        if stalled:
            trace.append(t, current, gap_recorded, 0.0, lmo_called)
            trace.termination = TERMINATION_STALL
            return iterate, trace
        iterate = iterate + eta * direction
        current = _checked_value(objective, iterate, trace)
        trace.append(t, current, gap_recorded, eta, lmo_called)
        if callback:
            callback(t, iterate, None)
    trace.termination = TERMINATION_MAX_ITER
    return iterate, trace


def lafw_minimize(objective, region, config=None, initial=None, callback=None):
    """Lazified away-step Frank-Wolfe.

    The weak-separation search runs over the active set: if either the best
    toward-direction or the best away-direction within the active set reaches
    phi/K, it is used without consulting the oracle; otherwise the true LMO
    decides, with the same negative-certificate phi update as LCG.
    """
    config = config or SolverConfig()
    iterate = _check_initial(region, initial)
    active = ActiveSet.singleton(iterate)
    trace = SolverTrace()
    current = _checked_value(objective, iterate, trace)
    phi = None
    r = 0

    def take_step(t, toward, vertex_or_index, gap_recorded, lmo_called):
        nonlocal iterate, current, r
        if toward:
            direction = vertex_or_index - iterate
            gamma_max = 1.0
        else:
            away_weight = active.weights[vertex_or_index]
            gamma_max = away_weight / (1.0 - away_weight) if away_weight < 1.0 else math.inf
            direction = iterate - active.vertices[vertex_or_index]
        eta, r, stalled = _choose_step(
            config, t, r, objective, iterate, direction, current, gamma_max=gamma_max
        )
        if stalled:
            trace.append(t, current, gap_recorded, 0.0, lmo_called)
            trace.termination = TERMINATION_STALL
            return False
        if toward:
            active.fw_update(vertex_or_index, eta)
        else:
            active.away_update(vertex_or_index, eta)
        iterate = active.point()
        current = _checked_value(objective, iterate, trace)
        trace.append(t, current, gap_recorded, eta, lmo_called)
        if callback:
            callback(t, iterate, active)
        return True

    for t in range(1, config.max_iterations + 1):
        grad = objective.gradient(iterate)
        inner = active.inner_products(grad)
        iterate_inner = float(np.vdot(grad, iterate))
        toward_index = int(np.argmin(inner))
        away_index = int(np.argmax(inner))
        toward_gap = iterate_inner - inner[toward_index]
        away_gap = inner[away_index] - iterate_inner
        if phi is not None and max(toward_gap, away_gap) >= phi / config.lazy_accuracy:
            if away_gap > toward_gap:
                ok = take_step(t, False, away_index, away_gap, False)
            else:
                ok = take_step(t, True, active.vertices[toward_index], toward_gap, False)
            if not ok:
                return iterate, trace
            continue
        vertex = region.lmo(grad)
        gap = dual_gap(grad, iterate, vertex)
        if gap < config.dual_gap_tolerance:
            trace.append(t, current, gap, 0.0, True)
            trace.termination = TERMINATION_GAP
            return iterate, trace
        if phi is None:
            phi = gap
        elif gap < phi / config.lazy_accuracy:
            phi = min(gap, phi / 2.0)
            trace.append(t, current, gap, 0.0, True)
            continue
        if away_gap > gap:
            ok = take_step(t, False, away_index, gap, True)
        else:
            ok = take_step(t, True, vertex, gap, True)
        if not ok:
            return iterate, trace
    trace.termination = TERMINATION_MAX_ITER
    return iterate, trace


def sfw_minimize(stochastic_gradient, region, config=None, sfw_config=None, initial=None,
                 callback=None):
    """Stochastic Frank-Wolfe with momentum-averaged gradient estimates.

    ``stochastic_gradient`` exposes ``population_size``,
    ``gradient_estimate(iterate, indices)`` returning the batch-averaged
    gradient estimate, and ``value(iterate)`` (full objective, used for the
    trace).  Per iteration t: draw b_t population indices i.i.d. uniformly
    (when b_t >= population_size every term is used exactly once, making the
    estimate exact), average into G_t, update the momentum estimate
    M_t = rho_t * M_{t-1} + (1 - rho_t) * G_t, call the LMO on M_t, and take
    a convex step with the basic step size.  Terminates when
    <iterate - vertex, M_t> drops below the gap tolerance.
    """
    config = config or SolverConfig()
    sfw_config = sfw_config or SFWConfig.from_preset("A")
    iterate = _check_initial(region, initial)
    rng = np.random.default_rng(sfw_config.rng_seed)
    population = stochastic_gradient.population_size
    trace = SolverTrace()
    current = _checked_value(stochastic_gradient, iterate, trace)
    momentum = np.zeros_like(iterate)
    for t in range(1, config.max_iterations + 1):
        batch_size = int(sfw_config.batch_schedule(t))
        if batch_size < 1:
            raise InputError(f"batch_schedule({t}) = {batch_size} must be >= 1")
        rho = float(sfw_config.momentum_schedule(t))
        if not 0.0 <= rho <= 1.0:
            raise InputError(f"momentum_schedule({t}) = {rho} must be in [0, 1]")
        if batch_size >= population:
            indices = np.arange(population)
        else:
            indices = rng.integers(0, population, size=batch_size)
        estimate = stochastic_gradient.gradient_estimate(iterate, indices)
        momentum = rho * momentum + (1.0 - rho) * estimate
        vertex = region.lmo(momentum)
        gap = dual_gap(momentum, iterate, vertex)
        if gap < config.dual_gap_tolerance:
            trace.append(t, current, gap, 0.0, True)
            trace.termination = TERMINATION_GAP
            return iterate, trace
        eta = step_basic(t)
        iterate = iterate + eta * (vertex - iterate)
        current = _checked_value(stochastic_gradient, iterate, trace)
        trace.append(t, current, gap, eta, True)
        if callback:
            callback(t, iterate, None)
    trace.termination = TERMINATION_MAX_ITER
    return iterate, trace


SOLVERS = {
    "fw": fw_minimize,
    "afw": afw_minimize,
    "lcg": lcg_minimize,
    "lafw": lafw_minimize,
}


def solve(name, objective, region, config=None, initial=None, callback=None):
    """Dispatch to a deterministic solver by name ('fw', 'afw', 'lcg', 'lafw')."""
    try:
        solver = SOLVERS[name]
    except KeyError:
        raise InputError(f"unknown solver {name!r}; expected one of {sorted(SOLVERS)}")
    return solver(objective, region, config=config, initial=initial, callback=callback)
