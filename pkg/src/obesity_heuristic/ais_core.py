"""Clonal selection optimizer over bounded real-vector genomes.

One generation performs, in order:

1. evaluate every member that has no fitness yet,
2. rank members and select the ``select_count`` best,
3. clone each selected antibody (more clones for better ranks) and
   hypermutate the clones (larger steps for worse ranks),
4. merge each parent's best clone into the parent's slot if it is strictly
   better,
5. delete the ``replace_count`` worst members and insert fresh uniform
   random antibodies in their slots, always keeping the best antibody seen.

Fitness is maximized. Wrap minimization problems with
:meth:`Objective.minimize`.

All randomness comes from a single ``numpy.random.Generator`` created from
``ClonalParams.seed``. Draw order is fixed: the initial population
(``N x D`` uniforms), then per generation the clone perturbations in rank
order (rank 1 first, ``n_clones x D`` standard normals per rank), then the
newcomers (``d x D`` uniforms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, RunError, StateError

__all__ = [
    "Antibody",
    "Population",
    "ClonalParams",
    "Objective",
    "RunResult",
    "init_population",
    "evaluate",
    "select_top",
    "clone_counts",
    "mutation_scale",
    "clone_and_hypermutate",
    "replace_worst",
    "run",
]


@dataclass(eq=False)
class Antibody:
    """A candidate solution.

    ``origin`` is the 1-based rank of the parent for clones and ``None``
    for antibodies drawn from scratch.
    """

    genome: np.ndarray
    fitness: Optional[float] = None
    origin: Optional[int] = None

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None

    def copy(self) -> "Antibody":
        return Antibody(self.genome.copy(), self.fitness, self.origin)


@dataclass(eq=False)
class Population:
    members: List[Antibody]
    generation: int = 0

    def __len__(self) -> int:
        return len(self.members)

    @property
    def fitnesses(self) -> np.ndarray:
        if any(not m.evaluated for m in self.members):
            raise StateError("population has unevaluated members")
        return np.array([m.fitness for m in self.members], dtype=float)

    def best(self) -> Antibody:
        """Highest-fitness member, lowest index on ties."""
        return self.members[int(np.argmax(self.fitnesses))]


@dataclass(frozen=True)
class ClonalParams:
    """Parameters of a clonal selection run.

    Parameters
    ----------
    population_size : int
        Number of antibodies ``N``.
    select_count : int
        Number of best antibodies ``k`` that get cloned, ``1 <= k <= N``.
    clone_factor : float
        ``beta`` in the clone count ``round(beta * N / rank)``.
    mutation_base : float
        ``sigma0``; the clone at rank ``r`` is perturbed with standard
        deviation ``sigma0 * r / k``. Zero disables mutation.
    replace_count : int
        Number of worst antibodies ``d`` replaced by random newcomers.
    max_generations : int
        Stop criterion.
    seed : int
        Seed of the run's random generator (unsigned 64-bit).
    """

    population_size: int = 50
    select_count: int = 10
    clone_factor: float = 1.0
    mutation_base: float = 0.3
    replace_count: int = 5
    max_generations: int = 200
    seed: int = 0

    def __post_init__(self):
        if int(self.population_size) != self.population_size or self.population_size < 1:
            raise ConfigurationError(
                f"population_size must be a positive integer, got {self.population_size!r}"
            )
        if int(self.select_count) != self.select_count or self.select_count < 1:
            raise ConfigurationError(
                f"select_count must be a positive integer, got {self.select_count!r}"
            )
        if self.select_count > self.population_size:
            raise ConfigurationError(
                f"select_count ({self.select_count}) exceeds population_size "
                f"({self.population_size})"
            )
        if int(self.replace_count) != self.replace_count or self.replace_count < 0:
            raise ConfigurationError(
                f"replace_count must be a non-negative integer, got {self.replace_count!r}"
            )
        if self.replace_count > self.population_size:
            raise ConfigurationError(
                f"replace_count ({self.replace_count}) exceeds population_size "
                f"({self.population_size})"
            )
        if not (self.clone_factor > 0 and math.isfinite(self.clone_factor)):
            raise ConfigurationError(
                f"clone_factor must be positive, got {self.clone_factor!r}"
            )
        if not (self.mutation_base >= 0 and math.isfinite(self.mutation_base)):
            raise ConfigurationError(
                f"mutation_base must be non-negative, got {self.mutation_base!r}"
            )
        if int(self.max_generations) != self.max_generations or self.max_generations < 1:
            raise ConfigurationError(
                f"max_generations must be a positive integer, got {self.max_generations!r}"
            )
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


class Objective:
    """A deterministic fitness function with per-dimension closed bounds.

    Higher fitness is better.
    """

    def __init__(self, func: Callable[[np.ndarray], float], lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ConfigurationError("lower and upper bounds must be 1-D and of equal length")
        if lower.size == 0:
            raise ConfigurationError("objective must have at least one dimension")
        if np.any(~np.isfinite(lower)) or np.any(~np.isfinite(upper)):
            raise ConfigurationError("bounds must be finite")
        if np.any(upper < lower):
            raise ConfigurationError("lower bound greater than upper bound")
        self.func = func
        self.lower = lower
        self.upper = upper

    @classmethod
    def minimize(cls, func, lower, upper) -> "Objective":
        """Wrap a function to be minimized by negating it."""
        obj = cls(lambda x: -func(x), lower, upper)
        obj.__wrapped__ = func
        return obj

    @property
    def dim(self) -> int:
        return self.lower.size

    def clip(self, genome: np.ndarray) -> np.ndarray:
        return np.clip(genome, self.lower, self.upper)

    def __call__(self, genome: np.ndarray) -> float:
        return float(self.func(genome))


@dataclass
class RunResult:
    best: Antibody
    history: List[float]
    population: Population
    evaluations: int = 0

    def history_pairs(self):
        """History as ``(generation, best_fitness)`` pairs, generations from 1."""
        return [(g + 1, f) for g, f in enumerate(self.history)]


def init_population(params: ClonalParams, objective: Objective, rng=None) -> Population:
    """Draw ``N`` genomes uniformly within the objective's bounds."""
    if rng is None:
        rng = np.random.default_rng(params.seed)
    genomes = rng.uniform(
        objective.lower, objective.upper, size=(params.population_size, objective.dim)
    )
    # uniform() is half-open; clip guards against rounding at the top edge
    genomes = objective.clip(genomes)
    return Population([Antibody(g) for g in genomes], generation=0)


def _score(objective: Objective, genome: np.ndarray) -> float:
    try:
        value = objective(genome)
    except Exception as exc:
        raise RunError(f"objective failed on genome {genome.tolist()}: {exc}", genome) from exc
    if not math.isfinite(value):
        raise RunError(f"objective returned {value} for genome {genome.tolist()}", genome)
    return value


def evaluate(pop: Population, objective: Objective, force: bool = False) -> Population:
    """Set the fitness of every member.

    Members that already carry a fitness are skipped unless ``force`` is
    true; since objectives are deterministic the result is the same.
    Member order and genomes are unchanged.
    """
    members = []
    for m in pop.members:
        if m.evaluated and not force:
            members.append(m)
        else:
            members.append(Antibody(m.genome, _score(objective, m.genome), m.origin))
    return Population(members, pop.generation)


def _ranking(pop: Population) -> List[int]:
    fit = pop.fitnesses
    return sorted(range(len(fit)), key=lambda i: (-fit[i], i))


def select_top(pop: Population, k: int) -> List[Antibody]:
    """The ``k`` fittest members, best first; lower index wins ties."""
    if k < 1 or k > len(pop):
        raise StateError(f"cannot select {k} of {len(pop)} members")
    return [pop.members[i] for i in _ranking(pop)[:k]]


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def clone_counts(params: ClonalParams, k: Optional[int] = None) -> List[int]:
    """Clone count per rank 1..k: ``round(beta * N / r)``, at least 1."""
    k = params.select_count if k is None else k
    n = params.population_size
    return [max(1, _round_half_away(params.clone_factor * n / r)) for r in range(1, k + 1)]


def mutation_scale(params: ClonalParams, rank: int, k: Optional[int] = None) -> float:
    k = params.select_count if k is None else k
    return params.mutation_base * rank / k


def clone_and_hypermutate(
    selected: Sequence[Antibody],
    params: ClonalParams,
    objective: Objective,
    rng: np.random.Generator,
) -> List[Antibody]:
    """Clone a best-first selection and mutate the clones.

    The antibody at rank ``r`` yields ``round(beta * N / r)`` clones, each
    perturbed by Gaussian noise of scale ``sigma0 * r / k`` and clipped to
    bounds. Returned clones are evaluated and tagged with ``origin = r``.
    """
    if len(selected) == 0:
        raise StateError("cannot clone an empty selection")
    k = len(selected)
    clones = []
    for rank, (parent, count) in enumerate(zip(selected, clone_counts(params, k)), start=1):
        step = rng.standard_normal((count, objective.dim)) * mutation_scale(params, rank, k)
        for genome in objective.clip(parent.genome + step):
            clones.append(Antibody(genome, _score(objective, genome), origin=rank))
    return clones


def replace_worst(
    pop: Population, newcomers: Sequence[Antibody], d: int, params: ClonalParams
) -> Population:
    """Delete the ``d`` worst members and insert the ``d`` best newcomers.

    Vacated slots are filled in index order with newcomers best-first.
    Afterwards, if the best antibody across the old population and the
    newcomers is missing, it takes the slot of the worst member, so the
    best-so-far fitness never decreases.
    """
    if len(newcomers) < d:
        raise StateError(f"need at least {d} newcomers, got {len(newcomers)}")
    if len(pop) != params.population_size:
        raise StateError(
            f"population has {len(pop)} members, expected {params.population_size}"
        )
    if any(not a.evaluated for a in newcomers):
        raise StateError("newcomers must be evaluated")
    fit = pop.fitnesses
    n = len(fit)
    worst_first = sorted(range(n), key=lambda i: (fit[i], -i))
    vacated = sorted(worst_first[:d])
    incoming = sorted(newcomers, key=lambda a: -a.fitness)

    members = list(pop.members)
    for slot, ab in zip(vacated, incoming):
        members[slot] = ab

    champion = pop.members[int(np.argmax(fit))]
    if incoming and incoming[0].fitness > champion.fitness:
        champion = incoming[0]
    if not any(m is champion for m in members):
        new_fit = [m.fitness for m in members]
        slot = min(range(n), key=lambda i: (new_fit[i], -i))
        members[slot] = champion
    return Population(members, pop.generation)


def _merge_clones(pop: Population, ranking: List[int], clones: List[Antibody]) -> Population:
    best_per_rank = {}
    for c in clones:
        cur = best_per_rank.get(c.origin)
        if cur is None or c.fitness > cur.fitness:
            best_per_rank[c.origin] = c
    members = list(pop.members)
    for rank, clone in sorted(best_per_rank.items(), key=lambda kv: -kv[1].fitness):
        slot = ranking[rank - 1]
        if clone.fitness > members[slot].fitness:
            members[slot] = clone
    return Population(members, pop.generation)


class _Counter:
    def __init__(self, objective):
        self.objective = objective
        self.calls = 0

    def __call__(self, genome):
        self.calls += 1
        return self.objective(genome)


def run(objective: Objective, params: ClonalParams) -> RunResult:
    """Run clonal selection for ``params.max_generations`` generations."""
    counter = _Counter(objective)
    counted = Objective(counter, objective.lower, objective.upper)
    rng = np.random.default_rng(params.seed)
    k, d = params.select_count, params.replace_count

    pop = init_population(params, counted, rng)
    history = []
    for _ in range(params.max_generations):
        pop = evaluate(pop, counted)
        ranking = _ranking(pop)
        selected = [pop.members[i] for i in ranking[:k]]
        clones = clone_and_hypermutate(selected, params, counted, rng)
        pop = _merge_clones(pop, ranking, clones)
        fresh = evaluate(
            Population(
                [Antibody(g) for g in counted.clip(
                    rng.uniform(counted.lower, counted.upper, size=(d, counted.dim))
                )]
            ),
            counted,
        ).members
        pop = replace_worst(pop, fresh, d, params)
        pop.generation += 1
        history.append(pop.best().fitness)
    return RunResult(pop.best(), history, pop, counter.calls)
