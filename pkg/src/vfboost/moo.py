"""Constrained NSGA-II over a mixed binary/real genome.

The engine is generic over the genome shape and the evaluation function;
the hyperparameter encoding for federated boosting (11 bits for round
counts and depth, three unit-interval reals for subsample ratio, purity
threshold, and learning rate) lives here as the default decoding.
Selection runs on penalty-adjusted objectives while all reporting uses
the raw measurements.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fedproto import TrainingConfig

RANGE_N = (1, 16)
RANGE_D = (1, 8)
RANGE_R = (0.1, 1.0)
RANGE_P = (0.1, 1.0)
RANGE_P_BINARY = (0.7, 1.0)
RANGE_ETA = (0.01, 0.3)

_N_F_BITS = slice(0, 4)
_N_L_BITS = slice(4, 8)
_D_BITS = slice(8, 11)


@dataclass(frozen=True)
class GenomeSpec:
    n_bits: int
    n_reals: int


SECUREBOOST_GENOME = GenomeSpec(n_bits=11, n_reals=3)


@dataclass
class Chromosome:
    """Bit segment plus unit-interval real segment."""

    bits: np.ndarray
    reals: np.ndarray

    def copy(self) -> "Chromosome":
        return Chromosome(self.bits.copy(), self.reals.copy())


@dataclass(frozen=True)
class GAConfig:
    population: int = 20
    generations: int = 40
    crossover_prob_binary: float = 0.9
    crossover_prob_real: float = 0.9
    mutation_prob_binary: float = 0.1
    mutation_prob_real: float = 0.1
    sbx_index: float = 2.0
    mutation_index: float = 20.0
    seed: int = 0

    def __post_init__(self):
        probs = (
            self.crossover_prob_binary,
            self.crossover_prob_real,
            self.mutation_prob_binary,
            self.mutation_prob_real,
        )
        if not all(0.0 <= p <= 1.0 for p in probs):
            raise ParameterError("operator probabilities must lie in [0, 1]")
        if self.population < 2 or self.population % 2:
            raise ParameterError("population must be even and >= 2")
        if self.generations < 0:
            raise ParameterError("generations must be >= 0")


@dataclass(frozen=True)
class Constraints:
    """Upper bounds and penalty coefficients for the objective tuple.

    A bound set to None is inactive. ``phi_u`` exists for completeness
    but default campaigns never set it.
    """

    phi_p: float | None = None
    phi_c: float | None = None
    phi_u: float | None = None
    alpha_p: float = 20.0
    alpha_c: float = 20.0
    alpha_u: float = 20.0

    def __post_init__(self):
        for name in ("phi_p", "phi_c", "phi_u"):
            bound = getattr(self, name)
            if bound is not None and bound < 0:
                raise ParameterError(f"{name} must be non-negative")
        if min(self.alpha_p, self.alpha_c, self.alpha_u) < 0:
            raise ParameterError("penalty coefficients must be non-negative")

    @property
    def active(self) -> bool:
        return any(b is not None for b in (self.phi_p, self.phi_c, self.phi_u))


@dataclass
class Solution:
    chromosome: Chromosome
    raw: np.ndarray
    penalized: np.ndarray
    rank: int = 0
    crowding: float = 0.0


@dataclass
class ArchiveEntry:
    generation: int
    chromosome: Chromosome
    raw: np.ndarray


@dataclass
class CampaignResult:
    population: list
    front: list
    archive: list
    hv_trace: np.ndarray
    evaluations: int


def _bits_to_int(bits: np.ndarray) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _affine(u: float, lo: float, hi: float) -> float:
    return float(np.clip(lo + u * (hi - lo), lo, hi))


def decode(
    chromosome: Chromosome,
    p_range: tuple = RANGE_P,
    complete_secure: bool = False,
) -> TrainingConfig:
    """Map an 11-bit + 3-real genome onto a training configuration.

    Bit integers shift the lower range bound; unit reals map affinely
    onto their ranges. Binary classification campaigns pass the narrowed
    purity range (0.7, 1.0).
    """
    if len(chromosome.bits) != 11 or len(chromosome.reals) != 3:
        raise ParameterError("hyperparameter genome needs 11 bits and 3 reals")
    return TrainingConfig(
        n_f=RANGE_N[0] + _bits_to_int(chromosome.bits[_N_F_BITS]),
        n_l=RANGE_N[0] + _bits_to_int(chromosome.bits[_N_L_BITS]),
        d=RANGE_D[0] + _bits_to_int(chromosome.bits[_D_BITS]),
        r=_affine(chromosome.reals[0], *RANGE_R),
        p=_affine(chromosome.reals[1], *p_range),
        eta=_affine(chromosome.reals[2], *RANGE_ETA),
        complete_secure=complete_secure,
    )


def encode(config: TrainingConfig, p_range: tuple = RANGE_P) -> Chromosome:
    """Inverse of :func:`decode` up to real-gene quantization."""
    bits = np.concatenate(
        [
            _int_to_bits(config.n_f - RANGE_N[0], 4),
            _int_to_bits(config.n_l - RANGE_N[0], 4),
            _int_to_bits(config.d - RANGE_D[0], 3),
        ]
    )
    def unit(v, rng):
        return (v - rng[0]) / (rng[1] - rng[0])

    reals = np.array(
        [unit(config.r, RANGE_R), unit(config.p, p_range), unit(config.eta, RANGE_ETA)]
    )
    return Chromosome(bits, np.clip(reals, 0.0, 1.0))


def _to_array(objectives) -> np.ndarray:
    if hasattr(objectives, "as_array"):
        return objectives.as_array()
    return np.asarray(objectives, dtype=np.float64)


def dominates(a, b) -> bool:
    """True iff a is no worse everywhere and strictly better somewhere."""
    a = _to_array(a)
    b = _to_array(b)
    if a.shape != b.shape:
        raise ParameterError("objective vectors must have the same dimension")
    return bool(np.all(a <= b) and np.any(a < b))


def fast_non_dominated_sort(objectives) -> list:
    """Indices grouped into fronts; front 0 is the non-dominated set."""
    objs = np.asarray([_to_array(o) for o in objectives], dtype=np.float64)
    n = len(objs)
    if n == 0:
        raise ParameterError("population is empty")
    le = np.all(objs[:, None, :] <= objs[None, :, :], axis=-1)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=-1)
    dom = le & lt
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        idx = np.flatnonzero(remaining)
        sub = dom[np.ix_(idx, idx)]
        nd = ~sub.any(axis=0)
        front = idx[nd]
        fronts.append([int(i) for i in front])
        remaining[front] = False
    return fronts


def crowding_distance(objectives) -> np.ndarray:
    """NSGA-II crowding within one front; boundary members get +inf."""
    objs = np.asarray([_to_array(o) for o in objectives], dtype=np.float64)
    n, m = objs.shape
    if n == 0:
        raise ParameterError("front is empty")
    if n <= 2:
        return np.full(n, np.inf)
    distance = np.zeros(n)
    for j in range(m):
        order = np.argsort(objs[:, j], kind="stable")
        values = objs[order, j]
        distance[order[0]] = distance[order[-1]] = np.inf
        span = values[-1] - values[0]
        if span > 0:
            distance[order[1:-1]] += (values[2:] - values[:-2]) / span
    return distance


def apply_constraint_penalty(raw, constraints: Constraints | None) -> np.ndarray:
    """Add alpha * max(0, value - bound) to each constrained objective."""
    vec = _to_array(raw).copy()
    if constraints is None or not constraints.active:
        return vec
    if len(vec) != 3:
        raise ParameterError("constraints are defined for 3-objective vectors")
    if constraints.phi_u is not None:
        vec[0] += constraints.alpha_u * max(0.0, vec[0] - constraints.phi_u)
    if constraints.phi_c is not None:
        vec[1] += constraints.alpha_c * max(0.0, vec[1] - constraints.phi_c)
    if constraints.phi_p is not None:
        vec[2] += constraints.alpha_p * max(0.0, vec[2] - constraints.phi_p)
    return vec


def _sbx_pair(x1, x2, eta_c, rng):
    u = rng.random()
    if u <= 0.5:
        beta = (2.0 * u) ** (1.0 / (eta_c + 1.0))
    else:
        beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta_c + 1.0))
    c1 = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2)
    c2 = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2)
    return float(np.clip(c1, 0.0, 1.0)), float(np.clip(c2, 0.0, 1.0))


def _poly_mutate(x, eta_m, rng):
    u = rng.random()
    if u < 0.5:
        delta = (2.0 * u) ** (1.0 / (eta_m + 1.0)) - 1.0
    else:
        delta = 1.0 - (2.0 * (1.0 - u)) ** (1.0 / (eta_m + 1.0))
    return float(np.clip(x + delta, 0.0, 1.0))


def variation(parents: list, ga: GAConfig, rng, spec: GenomeSpec) -> list:
    """Offspring from consecutive parent pairs.

    Bit segment: single-point crossover, then a whole-genome gated
    bit-flip pass at rate 1/n_bits. Real segment: per-gene SBX and
    polynomial mutation. Offspring count equals parent count.
    """
    if len(parents) % 2:
        raise ParameterError("parent count must be even")
    offspring = []
    for a, b in zip(parents[::2], parents[1::2]):
        c1, c2 = a.copy(), b.copy()
        if spec.n_bits >= 2 and rng.random() < ga.crossover_prob_binary:
            cut = int(rng.integers(1, spec.n_bits))
            c1.bits = np.concatenate([a.bits[:cut], b.bits[cut:]])
            c2.bits = np.concatenate([b.bits[:cut], a.bits[cut:]])
        for gene in range(spec.n_reals):
            if rng.random() < ga.crossover_prob_real:
                c1.reals[gene], c2.reals[gene] = _sbx_pair(
                    a.reals[gene], b.reals[gene], ga.sbx_index, rng
                )
        for child in (c1, c2):
            if spec.n_bits and rng.random() < ga.mutation_prob_binary:
                flips = rng.random(spec.n_bits) < 1.0 / spec.n_bits
                child.bits = child.bits ^ flips
            for gene in range(spec.n_reals):
                if rng.random() < ga.mutation_prob_real:
                    child.reals[gene] = _poly_mutate(
                        child.reals[gene], ga.mutation_index, rng
                    )
        offspring.extend([c1, c2])
    return offspring


def hypervolume(points, reference, warn_on_clip: bool = True) -> float:
    """Exact dominated hypervolume against an upper reference point.

    Supports one to three objectives by dimension sweep. Points beyond
    the reference are dropped (optionally with a warning); an empty front
    has zero volume.
    """
    pts = np.asarray(points, dtype=np.float64)
    z = np.asarray(reference, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != len(z):
        raise ParameterError("points and reference dimensions disagree")
    keep = np.all(pts <= z, axis=1)
    if not keep.all() and warn_on_clip:
        warnings.warn(
            f"{int((~keep).sum())} point(s) beyond the reference were clipped",
            stacklevel=2,
        )
    pts = pts[keep]
    if len(pts) == 0:
        return 0.0
    m = len(z)
    if m == 1:
        return float(z[0] - pts.min())
    if m == 2:
        return _hv_2d(pts, z)
    if m == 3:
        return _hv_3d(pts, z)
    raise ParameterError("hypervolume supports at most 3 objectives")


def _hv_2d(pts, z) -> float:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    volume = 0.0
    best_y = z[1]
    for x, y in pts[order]:
        if y < best_y:
            volume += (z[0] - x) * (best_y - y)
            best_y = y
    return float(volume)


def _hv_3d(pts, z) -> float:
    levels = np.unique(pts[:, 2])
    boundaries = np.append(levels, z[2])
    volume = 0.0
    for i, level in enumerate(levels):
        thickness = boundaries[i + 1] - boundaries[i]
        if thickness <= 0:
            continue
        layer = pts[pts[:, 2] <= level][:, :2]
        volume += _hv_2d(layer, z[:2]) * thickness
    return float(volume)


def archive_front(archive: list, up_to_generation: int | None = None):
    """Non-dominated entries of the archive, optionally truncated by generation."""
    entries = [
        e
        for e in archive
        if up_to_generation is None or e.generation <= up_to_generation
    ]
    if not entries:
        return [], np.empty((0, 0))
    objs = np.asarray([e.raw for e in entries])
    first = fast_non_dominated_sort(objs)[0]
    return [entries[i] for i in first], objs[first]


def random_chromosome(spec: GenomeSpec, rng) -> Chromosome:
    return Chromosome(
        bits=rng.integers(0, 2, size=spec.n_bits).astype(np.uint8),
        reals=rng.random(spec.n_reals),
    )


def _tournament(solutions: list, rng) -> Chromosome:
    i = int(rng.integers(len(solutions)))
    j = int(rng.integers(len(solutions)))
    a, b = solutions[i], solutions[j]
    if a.rank != b.rank:
        return (a if a.rank < b.rank else b).chromosome
    if a.crowding != b.crowding:
        return (a if a.crowding > b.crowding else b).chromosome
    return solutions[min(i, j)].chromosome


def _rank_population(solutions: list) -> None:
    fronts = fast_non_dominated_sort([s.penalized for s in solutions])
    for rank, front in enumerate(fronts):
        distances = crowding_distance([solutions[i].penalized for i in front])
        for i, d in zip(front, distances):
            solutions[i].rank = rank
            solutions[i].crowding = float(d)


def _truncate(solutions: list, size: int) -> list:
    fronts = fast_non_dominated_sort([s.penalized for s in solutions])
    selected: list = []
    for front in fronts:
        if len(selected) + len(front) <= size:
            selected.extend(solutions[i] for i in front)
            continue
        distances = crowding_distance([solutions[i].penalized for i in front])
        order = np.argsort(-distances, kind="stable")
        for pos in order[: size - len(selected)]:
            selected.append(solutions[front[pos]])
        break
    return selected


def run_cmosb(
    evaluate,
    genome_spec: GenomeSpec,
    ga: GAConfig,
    constraints: Constraints | None = None,
    reference=(1.0, 100.0, 1.0),
    workers: int = 1,
) -> CampaignResult:
    """Elitist constrained NSGA-II loop.

    ``evaluate`` maps a chromosome to raw objective values and must be
    total (return upper-bound objectives on failure). Every evaluation is
    archived; the trace records the archive front's hypervolume per
    generation, with objectives normalized by the reference point so the
    axes are commensurate. The returned front is the final population's
    non-dominated set under the raw objectives.
    """
    rng = np.random.default_rng([ga.seed, 0x6A])
    reference = np.asarray(reference, dtype=np.float64)
    if np.any(reference <= 0):
        raise ParameterError("reference point components must be positive")
    archive: list = []
    evaluations = 0

    def evaluate_batch(chromosomes, generation):
        nonlocal evaluations
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                raws = list(pool.map(evaluate, chromosomes))
        else:
            raws = [evaluate(ch) for ch in chromosomes]
        evaluations += len(chromosomes)
        batch = []
        for ch, raw in zip(chromosomes, raws):
            vec = _to_array(raw)
            archive.append(ArchiveEntry(generation, ch.copy(), vec))
            batch.append(
                Solution(
                    chromosome=ch,
                    raw=vec,
                    penalized=apply_constraint_penalty(vec, constraints),
                )
            )
        return batch

    def trace_value():
        _, objs = archive_front(archive)
        scaled = objs / reference
        return hypervolume(scaled, np.ones(len(reference)), warn_on_clip=False)

    population = evaluate_batch(
        [random_chromosome(genome_spec, rng) for _ in range(ga.population)], 0
    )
    _rank_population(population)
    hv_trace = [trace_value()]

    for generation in range(1, ga.generations + 1):
        parents = [_tournament(population, rng) for _ in range(ga.population)]
        offspring = variation(parents, ga, rng, genome_spec)
        population = _truncate(
            population + evaluate_batch(offspring, generation), ga.population
        )
        _rank_population(population)
        hv_trace.append(trace_value())

    raw_fronts = fast_non_dominated_sort([s.raw for s in population])
    front = [population[i] for i in raw_fronts[0]]
    return CampaignResult(
        population=population,
        front=front,
        archive=archive,
        hv_trace=np.asarray(hv_trace),
        evaluations=evaluations,
    )
