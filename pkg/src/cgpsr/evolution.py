"""Multi-objective memetic evolution over (loss, complexity).

Each generation every parent is mutated, the offspring's active constants
take one Newton step, and survivors are picked by non-dominated sorting
with crowding-distance truncation of the last admitted front.  Offspring
join the candidate pool only when their (loss, complexity) pair is not
already present, which keeps the population free of duplicate fitness
tuples.  Repeated neutral mutations of the same formula turn the single
Newton step into a full local descent over the generations.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .data import Dataset
from .genotype import (
    CgpParams,
    ConstInit,
    Genotype,
    complexity,
    decode_infix,
    mutate,
    random_genotype,
    uses_constants,
)
from .loss import loss_with_derivatives, mse_loss, newton_step


@dataclass(frozen=True)
class Individual:
    """A genotype with its cached fitness tuple."""

    genotype: Genotype
    loss: float  # +inf when the program is non-finite on the data
    complexity: int

    @property
    def fitness(self) -> tuple[float, int]:
        return (self.loss, self.complexity)


@dataclass(frozen=True)
class EvolutionConfig:
    cgp: CgpParams
    population_size: int = 40
    generations: int = 1000
    max_mutations: int = 4
    const_init: Optional[ConstInit] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.max_mutations < 1:
            raise ValueError("max_mutations must be >= 1")


@dataclass(frozen=True)
class FrontMember:
    genotype: Genotype
    expression: str
    loss: float
    complexity: int


@dataclass(frozen=True)
class ParetoFront:
    """Non-dominated set, complexity strictly increasing, loss strictly decreasing."""

    members: tuple[FrontMember, ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.members, self.members[1:]):
            if not (b.complexity > a.complexity and b.loss < a.loss):
                raise ValueError("front is not strictly monotone in (complexity, loss)")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def best_loss(self) -> float:
        return min(m.loss for m in self.members)

    @property
    def extreme(self) -> FrontMember:
        """The lowest-loss member (the accuracy end of the front)."""
        return min(self.members, key=lambda m: (m.loss, m.complexity))


@dataclass(frozen=True)
class LogEntry:
    generation: int
    best_loss: float
    front_size: int


@dataclass(frozen=True)
class RunResult:
    population: tuple[Individual, ...]
    front: ParetoFront
    log: tuple[LogEntry, ...]
    seed: int


@dataclass(frozen=True)
class MultiStartResult:
    runs: tuple[RunResult, ...]  # ordered by seed
    best_index: int  # run whose front extreme has the lowest training loss

    @property
    def best_run(self) -> RunResult:
        return self.runs[self.best_index]


def non_dominated_sort(pool: Sequence[Individual]) -> list[list[int]]:
    """Indices of pool split into fronts F1, F2, ... by domination peeling.

    Between finite losses, a dominates b iff a.loss <= b.loss and
    a.complexity <= b.complexity with at least one strict.  An infinite
    loss is dominated by every finite-loss individual; two infinite losses
    compare by complexity alone.
    """
    n = len(pool)
    if n == 0:
        return []
    losses = np.array([ind.loss for ind in pool])
    comps = np.array([float(ind.complexity) for ind in pool])
    li, lj = losses[:, None], losses[None, :]
    ci, cj = comps[:, None], comps[None, :]
    dom = (li <= lj) & (ci <= cj) & ((li < lj) | (ci < cj))
    fin = np.isfinite(losses)
    fi, fj = fin[:, None], fin[None, :]
    dom = np.where(fi & ~fj, True, dom)
    dom = np.where(~fi & fj, False, dom)
    dom = np.where(~fi & ~fj, ci < cj, dom)
    alive = np.ones(n, dtype=bool)
    fronts: list[list[int]] = []
    while alive.any():
        dominated = (dom & alive[:, None]).any(axis=0)
        front = alive & ~dominated
        fronts.append(np.flatnonzero(front).tolist())
        alive &= ~front
    return fronts


def crowding_truncate(front: Sequence[Individual], k: int) -> list[Individual]:
    """The k members with the largest crowding distance over (loss, complexity).

    Boundary members carry infinite distance and always survive when k >= 2.
    Ties break deterministically: lower complexity, then lower loss, then
    position in the input.
    """
    n = len(front)
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < len(front), got k={k}, len={n}")
    distance = np.zeros(n)
    losses = np.array([ind.loss for ind in front])
    comps = np.array([float(ind.complexity) for ind in front])
    for values in (losses, comps):
        order = np.argsort(values, kind="stable")
        distance[order[0]] = math.inf
        distance[order[-1]] = math.inf
        lo, hi = values[order[0]], values[order[-1]]
        if np.isfinite(lo) and np.isfinite(hi) and hi > lo:
            inner = order[1:-1]
            distance[inner] += (values[order[2:]] - values[order[:-2]]) / (hi - lo)
    ranked = sorted(
        range(n), key=lambda i: (-distance[i], front[i].complexity, front[i].loss, i)
    )
    return [front[i] for i in sorted(ranked[:k])]


def select_survivors(pool: Sequence[Individual], n_survivors: int) -> list[Individual]:
    """Whole non-dominated fronts, then a crowding-truncated last front."""
    survivors: list[Individual] = []
    for front_idx in non_dominated_sort(pool):
        remaining = n_survivors - len(survivors)
        if remaining <= 0:
            break
        members = [pool[i] for i in front_idx]
        if len(members) <= remaining:
            survivors.extend(members)
        else:
            survivors.extend(crowding_truncate(members, remaining))
    return survivors


def _learn_and_score(g: Genotype, params: CgpParams, data: Dataset) -> Individual:
    """One Newton step on the active constants, then the fitness tuple."""
    if uses_constants(g, params):
        report = loss_with_derivatives(g, params, data)
        updated = newton_step(g.constants, report)
        if np.array_equal(updated, g.constants):
            loss = report.loss
        else:
            g = g.with_constants(updated)
            loss = mse_loss(g, params, data)
    else:
        loss = mse_loss(g, params, data)
    if not math.isfinite(loss):
        loss = math.inf
    return Individual(g, loss, complexity(g, params))


def initialize_population(
    data: Dataset, cfg: EvolutionConfig, rng: np.random.Generator
) -> list[Individual]:
    """Random genotypes, each Newton-stepped once; fitness tuples kept unique.

    Uniqueness mirrors the per-generation diversity rule so that selection
    never has to arbitrate between identical fitness pairs.  If the search
    space is too degenerate to produce enough distinct tuples, the rule is
    relaxed after a bounded number of redraws.
    """
    target = cfg.population_size
    population: list[Individual] = []
    seen: set[tuple[float, int]] = set()
    for _ in range(200 * target):
        if len(population) >= target:
            break
        ind = _learn_and_score(random_genotype(cfg.cgp, rng, cfg.const_init), cfg.cgp, data)
        if ind.fitness in seen:
            continue
        seen.add(ind.fitness)
        population.append(ind)
    while len(population) < target:
        population.append(
            _learn_and_score(random_genotype(cfg.cgp, rng, cfg.const_init), cfg.cgp, data)
        )
    return population


def evolve_generation(
    parents: Sequence[Individual],
    data: Dataset,
    cfg: EvolutionConfig,
    rng: np.random.Generator,
) -> list[Individual]:
    """Mutate every parent, Newton-learn the offspring, pool with the
    diversity filter, select by non-dominated sorting."""
    params = cfg.cgp
    pool = list(parents)
    seen = {ind.fitness for ind in parents}
    for parent in parents:
        child_genotype = mutate(parent.genotype, params, cfg.max_mutations, rng)
        child = _learn_and_score(child_genotype, params, data)
        if child.fitness not in seen:
            seen.add(child.fitness)
            pool.append(child)
    return select_survivors(pool, cfg.population_size)


def build_front(
    population: Sequence[Individual],
    params: CgpParams,
    feature_names: Optional[Sequence[str]] = None,
) -> ParetoFront:
    """The first non-dominated front of the population, decoded and ordered."""
    first = [population[i] for i in non_dominated_sort(population)[0]]
    first.sort(key=lambda ind: (ind.complexity, ind.loss))
    members = []
    seen: set[tuple[float, int]] = set()
    for ind in first:
        if ind.fitness in seen:
            continue
        seen.add(ind.fitness)
        members.append(
            FrontMember(
                genotype=ind.genotype,
                expression=decode_infix(ind.genotype, params, feature_names),
                loss=ind.loss,
                complexity=ind.complexity,
            )
        )
    return ParetoFront(tuple(members))


def _log_entry(generation: int, population: Sequence[Individual]) -> LogEntry:
    best = min(ind.loss for ind in population)
    front_size = len(non_dominated_sort(population)[0])
    return LogEntry(generation, best, front_size)


def run(data: Dataset, cfg: EvolutionConfig) -> RunResult:
    """One full seeded evolution; fully deterministic given the config."""
    rng = np.random.default_rng(cfg.seed)
    population = initialize_population(data, cfg, rng)
    stride = max(1, cfg.generations // 1000)
    log = [_log_entry(0, population)]
    for generation in range(1, cfg.generations + 1):
        population = evolve_generation(population, data, cfg, rng)
        if generation % stride == 0 or generation == cfg.generations:
            log.append(_log_entry(generation, population))
    front = build_front(population, cfg.cgp, data.feature_names)
    return RunResult(tuple(population), front, tuple(log), cfg.seed)


def _run_task(args) -> RunResult:
    data, cfg = args
    return run(data, cfg)


def multi_start(
    data: Dataset, cfg: EvolutionConfig, n_starts: int, parallelism: int = 1
) -> MultiStartResult:
    """Independent runs with seeds cfg.seed .. cfg.seed + n_starts - 1.

    Results are ordered by seed and identical for any parallelism degree.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    configs = [replace(cfg, seed=cfg.seed + i) for i in range(n_starts)]
    if parallelism <= 1 or n_starts == 1:
        runs = [run(data, c) for c in configs]
    else:
        workers = min(parallelism, n_starts)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_task, [(data, c) for c in configs]))
    best_index = min(range(n_starts), key=lambda i: (runs[i].front.best_loss, i))
    return MultiStartResult(tuple(runs), best_index)
