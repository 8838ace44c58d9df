"""The evolution loop: MSE fitness, tournament selection, offspring
generation with comma replacement, and subset-scheduled runs.

Each generation builds an offspring pool roughly twice the population size;
the best offspring become the next population and the parents are discarded.
The only stopping criterion is the generation budget.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gptree import ExprTree, crossover, eval_tree, mutate, random_tree
from .quotes import Record
from .subsetsel import SampleStats, Scheduler, SubsetSchedule


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class GPConfig:
    """Evolution parameters. Defaults are the production settings."""

    population_size: int = 100
    offspring_size: int = 200
    max_generations: int = 400
    generations_per_sample: int = 50
    init_depth_min: int = 2
    init_depth_max: int = 6
    max_depth: int = 17
    tournament_size: int = 4
    p_crossover: float = 0.60
    p_branch: float = 0.20
    p_point: float = 0.10
    p_expansion: float = 0.10
    seed: int = 1
    weight_source: str = "best"
    reorder_each_activation: bool = False

    def __post_init__(self) -> None:
        if self.population_size < 1:
            raise ConfigError("population_size must be >= 1")
        if self.offspring_size < self.population_size:
            raise ConfigError("offspring_size must be >= population_size")
        if self.max_generations < 1:
            raise ConfigError("max_generations must be >= 1")
        if self.generations_per_sample < 1:
            raise ConfigError("generations_per_sample must be >= 1")
        if not 1 <= self.init_depth_min <= self.init_depth_max:
            raise ConfigError("need 1 <= init_depth_min <= init_depth_max")
        if self.init_depth_max > self.max_depth:
            raise ConfigError("init_depth_max cannot exceed max_depth")
        if self.tournament_size < 1:
            raise ConfigError("tournament_size must be >= 1")
        probs = (self.p_crossover, self.p_branch, self.p_point, self.p_expansion)
        if any(p < 0.0 for p in probs):
            raise ConfigError("operator probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigError(f"operator probabilities must sum to 1, got {sum(probs)}")
        if self.weight_source not in ("best", "population_mean"):
            raise ConfigError(f"unknown weight_source {self.weight_source!r}")


@dataclass(frozen=True)
class Individual:
    tree: ExprTree
    fitness: float


@dataclass(frozen=True)
class CompiledSample:
    """A record set unpacked into evaluation arrays."""

    name: str
    inputs: tuple[np.ndarray, np.ndarray, np.ndarray]
    target: np.ndarray

    @staticmethod
    def from_records(name: str, records: Sequence[Record]) -> "CompiledSample":
        if not records:
            raise ConfigError(f"sample {name!r} is empty")
        cok = np.array([r.price_over_strike for r in records])
        sok = np.array([r.moneyness for r in records])
        tau = np.array([r.tau for r in records])
        target = np.array([r.target for r in records])
        return CompiledSample(name, (cok, sok, tau), target)

    def __len__(self) -> int:
        return len(self.target)


def _compiled(data) -> CompiledSample:
    if isinstance(data, CompiledSample):
        return data
    return CompiledSample.from_records("", data)


def sq_errors(tree: ExprTree, data) -> np.ndarray:
    """Per-record squared errors of a tree on a record set."""
    sample = _compiled(data)
    prediction = eval_tree(tree, sample.inputs)
    residual = sample.target - prediction
    return np.asarray(residual * residual, dtype=float)


def fitness(tree: ExprTree, data) -> float:
    """Mean squared error between targets and tree output."""
    return float(np.mean(sq_errors(tree, data)))


def mse_total(tree: ExprTree, records) -> tuple[float, float]:
    """(mean, population standard deviation) of squared errors on a record
    set, conventionally the enlarged sample spanning training and test data."""
    errors = sq_errors(tree, records)
    return float(np.mean(errors)), float(np.std(errors))


def tournament(population: Sequence[Individual], size: int, rng) -> Individual:
    """Best of ``size`` uniform draws with replacement; ties go to the
    earliest draw."""
    if not population:
        raise ValueError("empty population")
    best = population[rng.randrange(len(population))]
    for _ in range(size - 1):
        contender = population[rng.randrange(len(population))]
        if contender.fitness < best.fitness:
            best = contender
    return best


def initial_population(cfg: GPConfig, rng) -> list[ExprTree]:
    """Ramped half-and-half: depths cycle over the init range, half grow and
    half full at each depth."""
    depths = list(range(cfg.init_depth_min, cfg.init_depth_max + 1))
    trees = []
    for i in range(cfg.population_size):
        max_depth = depths[i % len(depths)]
        method = "full" if (i // len(depths)) % 2 == 0 else "grow"
        trees.append(random_tree(max_depth, method, rng))
    return trees


def _spawn_offspring(population: Sequence[Individual], cfg: GPConfig, rng) -> list[ExprTree]:
    """Offspring trees via crossover (two children per application) or one of
    the three mutations, parents drawn by tournament."""
    children: list[ExprTree] = []
    b_branch = cfg.p_crossover + cfg.p_branch
    b_point = b_branch + cfg.p_point
    while len(children) < cfg.offspring_size:
        roll = rng.random()
        if roll < cfg.p_crossover:
            pa = tournament(population, cfg.tournament_size, rng)
            pb = tournament(population, cfg.tournament_size, rng)
            children.extend(crossover(pa.tree, pb.tree, rng, cfg.max_depth))
        else:
            parent = tournament(population, cfg.tournament_size, rng)
            kind = "branch" if roll < b_branch else "point" if roll < b_point else "expansion"
            children.append(mutate(parent.tree, kind, rng, cfg.max_depth))
    del children[cfg.offspring_size:]
    return children


def _evaluate(trees: Sequence[ExprTree], sample: CompiledSample,
              cache: dict | None) -> list[Individual]:
    out = []
    for tree in trees:
        if cache is not None:
            mse = cache.get(tree.root)
            if mse is None:
                mse = fitness(tree, sample)
                cache[tree.root] = mse
        else:
            mse = fitness(tree, sample)
        out.append(Individual(tree, mse))
    return out


def next_generation(population: Sequence[Individual], cfg: GPConfig, data,
                    rng, cache: dict | None = None) -> list[Individual]:
    """One comma-replacement step: spawn offspring, evaluate on the active
    sample, keep the best population_size of them (stable in creation order)."""
    sample = _compiled(data)
    offspring = _evaluate(_spawn_offspring(population, cfg, rng), sample, cache)
    offspring.sort(key=lambda ind: ind.fitness)
    return offspring[:cfg.population_size]


@dataclass(frozen=True)
class GenerationLog:
    generation: int
    sample: str
    best_mse: float
    mean_mse: float
    activated: bool
    weight: float | None


@dataclass(frozen=True)
class RunResult:
    best: Individual
    log: tuple[GenerationLog, ...]
    mse_total: float
    mse_total_std: float


def run(cfg: GPConfig, schedule: SubsetSchedule,
        samples: Sequence[tuple[str, Sequence[Record]]],
        eval_set: Sequence[Record]) -> RunResult:
    """Run one evolution under a sample-activation schedule.

    ``samples`` is the ordered list of (name, records) training samples the
    schedule indexes into (1-based). ``eval_set`` is the enlarged record set
    used for the reported mse_total. The best-of-run individual is the one
    with minimal fitness on the final active sample.
    """
    if schedule.is_dynamic and schedule.k != len(samples):
        raise ConfigError(
            f"schedule covers {schedule.k} samples but {len(samples)} were given")
    if not schedule.is_dynamic and schedule.static_sample > len(samples):
        raise ConfigError(
            f"static sample {schedule.static_sample} out of range for "
            f"{len(samples)} samples")
    compiled = [CompiledSample.from_records(name, recs) for name, recs in samples]

    rng = random.Random(cfg.seed)
    scheduler = Scheduler(schedule, rng, cfg.reorder_each_activation)
    active = scheduler.first(rng)
    sample = compiled[active - 1]
    cache: dict = {}

    population = _evaluate(initial_population(cfg, rng), sample, cache)
    population.sort(key=lambda ind: ind.fitness)

    collect = schedule.is_adaptive
    stats = SampleStats(len(sample)) if collect else None
    log = [GenerationLog(0, sample.name, population[0].fitness,
                         float(np.mean([i.fitness for i in population])),
                         True, scheduler.weight_of(active))]

    for gen in range(1, cfg.max_generations + 1):
        activated = False
        if schedule.is_dynamic and gen > 1 and (gen - 1) % cfg.generations_per_sample == 0:
            active = scheduler.advance(stats, rng)
            sample = compiled[active - 1]
            cache = {}
            population = _evaluate([ind.tree for ind in population], sample, cache)
            population.sort(key=lambda ind: ind.fitness)
            if collect:
                stats = SampleStats(len(sample))
            activated = True

        population = next_generation(population, cfg, sample, rng, cache)
        if collect:
            if cfg.weight_source == "best":
                stats.add_generation(sq_errors(population[0].tree, sample))
            else:
                per_record = np.mean(
                    [sq_errors(ind.tree, sample) for ind in population], axis=0)
                stats.add_generation(per_record)
        log.append(GenerationLog(
            gen, sample.name, population[0].fitness,
            float(np.mean([ind.fitness for ind in population])),
            activated, scheduler.weight_of(active) if activated else None))

    best = population[0]
    total, total_std = mse_total(best.tree, eval_set)
    return RunResult(best, tuple(log), total, total_std)
