"""Outer search: evaluate, select, recombine, mutate, repeat."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig
from ..env.ledger import SeedLedger, make_fair_ledger
from ..rl.policy import PolicyParams
from ..rl.trainer import TrainingFailure, pretrain_shared, train_policy
from ..sim.model import LegLengths, build_walker
from ..workers import parallel_map
from .genome import decode_genome, genome_key, random_genome
from .ops import crossover, mutate, roulette_select, shifted_fitness

_GA_TAG = 0x6A01
_POP_TAG = 0x6A02


@dataclass
class Individual:
    genome: np.ndarray
    lengths: LegLengths
    total_reward: float = np.nan
    fitness: float = np.nan


@dataclass
class Population:
    individuals: list
    generation: int
    ledger: SeedLedger | None = None

    def __len__(self):
        return len(self.individuals)

    @property
    def rewards(self):
        return np.array([ind.total_reward for ind in self.individuals])

    @property
    def fitnesses(self):
        return np.array([ind.fitness for ind in self.individuals])


@dataclass
class EvolutionState:
    """Everything needed to resume after a completed generation."""

    next_generation: int
    genomes: list                       # genomes queued for the next evaluation
    history: list = field(default_factory=list)
    best_genome: np.ndarray | None = None
    best_reward: float = -np.inf
    best_generation: int = -1
    warm_start: PolicyParams | None = None


@dataclass
class EvolutionResult:
    best_genome: np.ndarray
    best_lengths: LegLengths
    best_total_reward: float            # max over every evaluated individual
    best_generation: int
    final_ledger_reward: float          # best genome re-evaluated under the last ledger
    best_params: PolicyParams | None
    history: list
    generations_completed: int


def convergence_check(history: list, threshold: float, max_generations: int) -> bool:
    """True when the latest generation's reward variance drops below the
    threshold or the generation cap is reached."""
    if not history:
        raise ValueError("convergence check needs at least one completed generation")
    latest = history[-1]
    if len(history) >= max_generations:
        return True
    return latest["reward_variance"] < threshold


def synthetic_reward(lengths: LegLengths, optimum) -> float:
    """Closed-form test landscape peaking at the given optimum."""
    return -(lengths.thigh_m - optimum[0]) ** 2 - (lengths.shin_m - optimum[1]) ** 2


# worker context for forked evaluation processes; set before pool creation
_EVAL_CTX: dict = {}


def _eval_task(args):
    index, genome = args
    cfg: RunConfig = _EVAL_CTX["cfg"]
    lengths = decode_genome(genome, cfg.design)
    if cfg.evo.fitness_mode == "synthetic":
        return synthetic_reward(lengths, cfg.evo.synthetic_optimum)
    ledger: SeedLedger = _EVAL_CTX["ledger"]
    warm: PolicyParams = _EVAL_CTX["warm"]
    model = build_walker(lengths, cfg.sim, cfg.design.thigh_range)
    try:
        _, stats = train_policy(model, warm, cfg.evo.policy_iters_per_gen, ledger, cfg,
                                stream_key=(genome_key(genome),))
    except TrainingFailure:
        return np.nan
    return float(sum(stats.reward_trace))


def evaluate_population(pop: Population, cfg: RunConfig,
                        warm_start: PolicyParams | None, workers: int = 1) -> Population:
    """Fill in rewards and shifted fitness for every individual.

    Individuals are independent tasks; identical genomes receive identical
    rewards because every stochastic stream keys on (ledger, genome), never
    on the slot or evaluation order. Failed trainings take the generation's
    minimum observed reward as a floor.
    """
    _EVAL_CTX.update(cfg=cfg, ledger=pop.ledger, warm=warm_start)
    rewards = np.array(parallel_map(
        _eval_task, list(enumerate(ind.genome for ind in pop.individuals)), workers),
        dtype=np.float64)
    failed = ~np.isfinite(rewards)
    if failed.any():
        floor = rewards[~failed].min() if (~failed).any() else 0.0
        rewards[failed] = floor
    fitness = shifted_fitness(rewards, cfg.evo.fitness_epsilon)
    for ind, r, f in zip(pop.individuals, rewards, fitness):
        ind.total_reward = float(r)
        ind.fitness = float(f)
    return pop


def _generation_record(pop: Population) -> dict:
    rewards = pop.rewards
    fitness = pop.fitnesses
    best = int(np.argmax(rewards))
    rows = [{
        "generation": pop.generation, "individual": i,
        "thigh_m": ind.lengths.thigh_m, "shin_m": ind.lengths.shin_m,
        "total_reward": ind.total_reward, "shifted_fitness": ind.fitness,
    } for i, ind in enumerate(pop.individuals)]
    return {
        "generation": pop.generation,
        "mean_reward": float(rewards.mean()),
        "reward_variance": float(rewards.var()),
        "max_fitness": float(fitness.max()),
        "best_reward": float(rewards[best]),
        "best_individual": best,
        "rows": rows,
    }


def next_generation_genomes(pop: Population, cfg: RunConfig,
                            rng: np.random.Generator) -> list:
    """Selection, crossover and mutation; the best individual passes unchanged."""
    size = len(pop)
    children = []
    if cfg.evo.elitism:
        elite = pop.individuals[int(np.argmax(pop.fitnesses))]
        children.append(elite.genome.copy())
    need = size - len(children)
    n_pairs = (need + 1) // 2
    parents = roulette_select(pop.fitnesses, 2 * n_pairs, rng)
    for k in range(n_pairs):
        a = pop.individuals[parents[2 * k]].genome
        b = pop.individuals[parents[2 * k + 1]].genome
        ca, cb = crossover(a, b, cfg.evo.crossover_prob, rng)
        children.append(mutate(ca, cfg.evo.mutation_prob, rng))
        children.append(mutate(cb, cfg.evo.mutation_prob, rng))
    return children[:size]


def initial_state(cfg: RunConfig, warm_start: PolicyParams | None = None) -> EvolutionState:
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=[cfg.master_seed, _POP_TAG]))
    genomes = [random_genome(rng, cfg.design) for _ in range(cfg.evo.population_size)]
    return EvolutionState(next_generation=1, genomes=genomes, warm_start=warm_start)


def evolve(cfg: RunConfig, state: EvolutionState | None = None,
           on_generation=None, log=None) -> EvolutionResult:
    """Run the whole outer loop and return the best design found.

    `state` resumes from a checkpointed EvolutionState; `on_generation` is
    called with the updated state after every completed generation (the CLI
    uses it to persist checkpoints). Rewards are only comparable within one
    generation, so the reported champion is re-evaluated under the final
    generation's ledger.
    """
    cfg.validate()
    workers = cfg.effective_workers()
    rl_mode = cfg.evo.fitness_mode == "rl"
    if state is None:
        warm = None
        if rl_mode and not cfg.evo.cold_start:
            if log:
                log(f"pretraining shared policy "
                    f"({cfg.train.pretrain_iterations} iterations)")
            warm, _ = pretrain_shared(cfg)
        elif rl_mode:
            from ..rl.policy import init_policy
            warm = init_policy(cfg.task, cfg.train, np.random.default_rng(
                np.random.SeedSequence(entropy=[cfg.master_seed, 0x1123])))
        state = initial_state(cfg, warm)

    final_pop = None
    for gen in range(state.next_generation, cfg.evo.generations + 1):
        ledger = make_fair_ledger(gen, cfg.master_seed)
        pop = Population(
            individuals=[Individual(g, decode_genome(g, cfg.design)) for g in state.genomes],
            generation=gen, ledger=ledger)
        evaluate_population(pop, cfg, state.warm_start, workers)
        record = _generation_record(pop)
        state.history.append(record)
        final_pop = pop
        if record["best_reward"] > state.best_reward:
            state.best_reward = record["best_reward"]
            state.best_genome = pop.individuals[record["best_individual"]].genome.copy()
            state.best_generation = gen
        if log:
            log(f"generation {gen}: mean reward {record['mean_reward']:.3f}, "
                f"best {record['best_reward']:.3f}, max fitness {record['max_fitness']:.3f}")
        done = convergence_check(state.history, cfg.evo.convergence_variance_threshold,
                                 cfg.evo.generations)
        ga_rng = np.random.default_rng(np.random.SeedSequence(
            entropy=[cfg.master_seed, gen, _GA_TAG]))
        state.genomes = next_generation_genomes(pop, cfg, ga_rng)
        state.next_generation = gen + 1
        if on_generation is not None:
            on_generation(state)
        if done:
            break

    best_lengths = decode_genome(state.best_genome, cfg.design)
    final_reward, best_params = _reevaluate_best(cfg, state, final_pop.ledger)
    return EvolutionResult(
        best_genome=state.best_genome, best_lengths=best_lengths,
        best_total_reward=state.best_reward, best_generation=state.best_generation,
        final_ledger_reward=final_reward, best_params=best_params,
        history=state.history, generations_completed=len(state.history))


def _reevaluate_best(cfg: RunConfig, state: EvolutionState, ledger: SeedLedger):
    lengths = decode_genome(state.best_genome, cfg.design)
    if cfg.evo.fitness_mode == "synthetic":
        return synthetic_reward(lengths, cfg.evo.synthetic_optimum), None
    model = build_walker(lengths, cfg.sim, cfg.design.thigh_range)
    try:
        params, stats = train_policy(model, state.warm_start,
                                     cfg.evo.policy_iters_per_gen, ledger, cfg,
                                     stream_key=(genome_key(state.best_genome),))
    except TrainingFailure:
        return -np.inf, None
    return float(sum(stats.reward_trace)), params
