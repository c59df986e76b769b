from .genome import (CodecError, decode_gene, decode_genome, encode_gene, encode_lengths,
                     genome_key, genome_length, random_genome)
from .loop import (EvolutionResult, EvolutionState, Individual, Population,
                   convergence_check, evaluate_population, evolve, initial_state,
                   next_generation_genomes, synthetic_reward)
from .ops import crossover, mutate, roulette_select, shifted_fitness

__all__ = [
    "CodecError", "decode_gene", "decode_genome", "encode_gene", "encode_lengths",
    "genome_key", "genome_length", "random_genome", "EvolutionResult", "EvolutionState",
    "Individual", "Population", "convergence_check", "evaluate_population", "evolve",
    "initial_state", "next_generation_genomes", "synthetic_reward", "crossover",
    "mutate", "roulette_select", "shifted_fitness",
]
