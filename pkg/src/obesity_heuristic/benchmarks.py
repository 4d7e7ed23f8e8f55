"""Benchmark objectives and a uniform random-search baseline."""

import numpy as np

from .ais_core import Objective
from .errors import ConfigurationError

__all__ = ["sphere", "ackley", "BENCHMARKS", "benchmark_objective", "random_search"]


def sphere(x):
    x = np.asarray(x, dtype=float)
    return float(np.sum(x**2))


def ackley(x, a=20.0, b=0.2, c=2 * np.pi):
    x = np.asarray(x, dtype=float)
    # grouped so each bracket cancels exactly at the origin
    out = (a - a * np.exp(-b * np.sqrt(np.mean(x**2)))) + (np.e - np.exp(np.mean(np.cos(c * x))))
    return float(max(out, 0.0))


# name -> (function to minimize, symmetric half-width of the default box)
BENCHMARKS = {
    "sphere": (sphere, 5.12),
    "ackley": (ackley, 32.768),
}


def benchmark_objective(name, dims, half_width=None):
    """Negated benchmark as a maximization :class:`Objective`."""
    if name not in BENCHMARKS:
        raise ConfigurationError(
            f"unknown benchmark {name!r}; choose one of {sorted(BENCHMARKS)}"
        )
    if int(dims) != dims or dims < 1:
        raise ConfigurationError(f"dims must be a positive integer, got {dims!r}")
    func, default_width = BENCHMARKS[name]
    w = default_width if half_width is None else half_width
    return Objective.minimize(func, [-w] * dims, [w] * dims)


def random_search(objective, budget, seed):
    """Best fitness among ``budget`` uniform samples in the objective's box.

    Returns ``(best_genome, best_fitness)``.
    """
    rng = np.random.default_rng(seed)
    samples = rng.uniform(objective.lower, objective.upper, size=(budget, objective.dim))
    best_x, best_f = None, -np.inf
    for x in samples:
        f = objective(x)
        if f > best_f:
            best_x, best_f = x, f
    return best_x, best_f
