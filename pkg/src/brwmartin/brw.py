"""Branching random walk engine.

A population is a counting function state -> count, stored as sorted state
codes plus counts.  One generation: every particle reproduces by the
offspring law and dies, then each child takes one chain step.  The aggregated
step draws, per occupied state with ``k`` particles, the total offspring of
``k`` parents (multinomial over the pmf support, or one binomial for the
binomial family) and scatters it over the transition row by sequential
binomial splits.  This is exact in law; ``step_per_particle`` is the
brute-force reference it is tested against.
"""
import hashlib
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .chains import RegularTree, transition_row
from .errors import ConfigError, PopulationOverflow
from .offspring import mean_offspring
from .potential import ConstantOne, TreeAggregates
from .rng import replica_stream, stream

__all__ = [
    "DEFAULT_CAP",
    "SupercriticalityWarning",
    "Population",
    "Observers",
    "TrajectorySummary",
    "step",
    "step_per_particle",
    "run",
    "run_replicas",
    "galton_watson",
    "galton_watson_batch",
]

DEFAULT_CAP = 10**8


class SupercriticalityWarning(UserWarning):
    """Raised (as a warning) when a run is started with mean offspring <= 1."""


@dataclass(frozen=True, eq=False)
class Population:
    chain: object
    generation: int
    codes: np.ndarray
    counts: np.ndarray
    resolution: int = None

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if codes.shape != counts.shape:
            raise ValueError("codes and counts must align")
        if counts.size and counts.min() < 1:
            keep = counts > 0
            codes, counts = codes[keep], counts[keep]
        if codes.size > 1 and np.any(np.diff(codes) <= 0):
            order = np.argsort(codes, kind="stable")
            codes, counts = codes[order], counts[order]
            uniq, inv = np.unique(codes, return_inverse=True)
            merged = np.zeros(uniq.size, dtype=np.int64)
            np.add.at(merged, inv, counts)
            codes, counts = uniq, merged
        codes.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "counts", counts)

    @property
    def codec(self):
        return self.chain.codec(self.resolution)

    @property
    def total(self):
        return int(self.counts.sum(dtype=np.int64))

    def __len__(self):
        return self.codes.size

    def as_dict(self):
        codec = self.codec
        return {codec.decode_state(c): int(k) for c, k in zip(self.codes.tolist(), self.counts.tolist())}

    def __eq__(self, other):
        return (
            isinstance(other, Population)
            and self.chain == other.chain
            and self.generation == other.generation
            and self.resolution == other.resolution
            and np.array_equal(self.codes, other.codes)
            and np.array_equal(self.counts, other.counts)
        )

    @classmethod
    def from_states(cls, chain, state_counts, generation=0, resolution=None):
        codec = chain.codec(resolution)
        items = [(codec.encode_state(chain.validate(x)), int(k)) for x, k in state_counts.items() if k]
        codes = np.array([c for c, _ in items], dtype=np.int64)
        counts = np.array([k for _, k in items], dtype=np.int64)
        return cls(chain, generation, codes, counts, resolution)

    @classmethod
    def singleton(cls, chain, x=None, resolution=None):
        x = chain.origin if x is None else x
        return cls.from_states(chain, {x: 1}, 0, resolution)


def _check_generations(chain, generations, resolution):
    if isinstance(chain, RegularTree):
        limit = chain.codec(resolution).max_depth
        if generations > limit:
            raise ConfigError(
                f"{generations} generations exceed the encodable tree depth {limit}; "
                "use a lumped resolution",
                key="generations",
            )


def step(chain, pop, mu, rng=0, cap=DEFAULT_CAP, backend=None, approximate=False):
    """Advance ``pop`` by one generation."""
    rng = stream(rng)
    nxt = pop.generation + 1
    if pop.total == 0:
        return Population(chain, nxt, pop.codes, pop.counts, pop.resolution)
    codec = pop.codec
    dest, cond = codec.rows(pop.codes)
    vals, ocond, bn, bp = mu.kernel_args
    k = _backend.get(backend)
    if approximate:
        totals = _approximate_totals(pop.counts, mu, rng, k)
        total = int(totals.sum())
        if total > cap:
            raise PopulationOverflow(nxt, total, cap)
        codes, counts = k.scatter(totals, dest, cond, rng) if total else (pop.codes[:0], pop.counts[:0])
    else:
        codes, counts = k.brw_step(pop.counts, dest, cond, vals, ocond, bn, bp, rng, cap, nxt)
    return Population(chain, nxt, codes, counts, pop.resolution)


def _approximate_totals(counts, mu, rng, kernels, threshold=1024):
    """Opt-in: normal approximation to offspring totals of large groups.

    Not exact in law; never used by the verification suites.
    """
    vals, ocond, bn, bp = mu.kernel_args
    counts = np.asarray(counts, dtype=np.int64)
    small = counts <= threshold
    totals = np.zeros_like(counts)
    if small.any():
        totals[small] = kernels.offspring_totals(np.ascontiguousarray(counts[small]), vals, ocond, bn, bp, rng)
    big = ~small
    if big.any():
        var = sum(p * (v - mu.mean) ** 2 for v, p in zip(mu.values, mu.probs))
        k = counts[big].astype(np.float64)
        draw = rng.normal(k * mu.mean, np.sqrt(k * var))
        totals[big] = np.maximum(np.rint(draw), 0).astype(np.int64)
    return totals


def step_per_particle(chain, pop, mu, rng=0):
    """Brute-force reference step: every particle and every child handled individually."""
    rng = stream(rng)
    out = {}
    for x, k in pop.as_dict().items():
        row = transition_row(chain, x)
        dests = [y for y, _ in row]
        probs = np.array([p for _, p in row])
        for _ in range(k):
            n_children = int(mu.sample(rng))
            for _ in range(n_children):
                y = dests[int(rng.choice(len(dests), p=probs))]
                out[y] = out.get(y, 0) + 1
    return Population.from_states(chain, out, pop.generation + 1)


# --------------------------------------------------------------------------
# observers and summaries


@dataclass(frozen=True)
class Observers:
    """What to record each generation besides ``|B_n|`` and ``W_n``."""

    cylinders: tuple = ()
    harmonics: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cylinders", tuple(self.cylinders))
        object.__setattr__(self, "harmonics", tuple(self.harmonics))

    @property
    def cylinder_labels(self):
        return [c.label for c in self.cylinders]

    @property
    def harmonic_labels(self):
        return [h.label for h in self.harmonics]

    def max_depth(self):
        depths = [c.depth for c in self.cylinders] + [getattr(h, "depth", 0) for h in self.harmonics]
        return max(depths, default=0)


@dataclass(eq=False)
class TrajectorySummary:
    """Per-generation records of one replica, zero-padded after extinction."""

    mean: float
    total: np.ndarray
    W: np.ndarray
    masses: np.ndarray
    pairings: np.ndarray
    root_count: np.ndarray
    extinction_generation: int = None
    cylinder_labels: list = field(default_factory=list)
    harmonic_labels: list = field(default_factory=list)
    seed_key: tuple = ()

    @property
    def generations(self):
        return self.total.shape[0] - 1

    @property
    def root_occupied(self):
        return self.root_count > 0

    @property
    def survived(self):
        return self.extinction_generation is None

    def digest(self):
        h = hashlib.sha256()
        for arr in (self.total, self.W, self.masses, self.pairings, self.root_count):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr(self.extinction_generation).encode())
        return h.hexdigest()


def _observe(chain, pop, mu_mean, observers, codec):
    n = pop.generation
    # dividing by mean**n keeps W_n exact whenever the power is representable
    growth = mu_mean**n
    total = pop.total
    W = total / growth
    codes, counts = pop.codes, pop.counts
    fc = counts.astype(np.float64)
    agg = None
    if isinstance(chain, RegularTree) and total and (observers.cylinders or observers.harmonics):
        agg = TreeAggregates(chain, codec, codes, counts, observers.max_depth())
    masses = np.empty(len(observers.cylinders))
    for i, C in enumerate(observers.cylinders):
        if agg is not None and hasattr(C, "mass_from"):
            masses[i] = C.mass_from(agg) / growth
        else:
            masses[i] = float(counts[C.shadow(codec, codes)].sum()) / growth
    pairings = np.empty(len(observers.harmonics))
    for i, h in enumerate(observers.harmonics):
        if isinstance(h, ConstantOne):
            pairings[i] = W
        elif total == 0:
            pairings[i] = 0.0
        elif agg is not None and hasattr(h, "pair_tree"):
            pairings[i] = h.pair_tree(agg) / growth
        else:
            pairings[i] = float(np.dot(h.values(chain, codec, codes), fc)) / growth
    origin_code = codec.encode_state(chain.origin)
    at = np.searchsorted(codes, origin_code)
    root = int(counts[at]) if at < codes.size and codes[at] == origin_code else 0
    return total, W, masses, pairings, root


def run(chain, mu, generations, observers=None, rng=0, cap=DEFAULT_CAP, resolution=None,
        backend=None, start=None):
    """Simulate from a single particle at the origin and summarise every generation."""
    observers = observers or Observers()
    mean = mean_offspring(mu)
    if mean <= 1.0:
        warnings.warn(
            f"mean offspring {mean!r} <= 1: the process is not supercritical",
            SupercriticalityWarning,
            stacklevel=2,
        )
    _check_generations(chain, generations, resolution)
    if resolution is not None and observers.max_depth() > resolution:
        raise ConfigError(
            f"observers need depth {observers.max_depth()} but resolution is {resolution}",
            key="resolution",
        )
    rng = stream(rng)
    pop = Population.singleton(chain, start, resolution)
    codec = pop.codec
    G = generations
    total = np.zeros(G + 1, dtype=np.int64)
    W = np.zeros(G + 1)
    masses = np.zeros((G + 1, len(observers.cylinders)))
    pairings = np.zeros((G + 1, len(observers.harmonics)))
    root = np.zeros(G + 1, dtype=np.int64)
    extinct = None
    for n in range(G + 1):
        if n > 0:
            pop = step(chain, pop, mu, rng, cap, backend)
        total[n], W[n], masses[n], pairings[n], root[n] = _observe(chain, pop, mean, observers, codec)
        if total[n] == 0:
            extinct = n
            break
    return TrajectorySummary(
        mean, total, W, masses, pairings, root, extinct,
        observers.cylinder_labels, observers.harmonic_labels,
    )


def _run_one(args):
    chain, mu, generations, observers, seed, i, cap, resolution, backend, case = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupercriticalityWarning)
        s = run(chain, mu, generations, observers, replica_stream(seed, i, case), cap, resolution, backend)
    s.seed_key = (seed, case, i) if case else (seed, i)
    return s


def run_replicas(chain, mu, generations, replicas, seed, observers=None, cap=DEFAULT_CAP,
                 resolution=None, backend=None, workers=1, case=0):
    """Independent replicas on child streams ``(seed, i)``, returned in replica order."""
    if mean_offspring(mu) <= 1.0:
        warnings.warn(
            f"mean offspring {mean_offspring(mu)!r} <= 1: the process is not supercritical",
            SupercriticalityWarning,
            stacklevel=2,
        )
    jobs = [(chain, mu, generations, observers, seed, i, cap, resolution, backend, case) for i in range(replicas)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_one, jobs, chunksize=max(1, replicas // (4 * workers))))
    return [_run_one(j) for j in jobs]


def galton_watson_batch(mu, replicas, generations, rng=0, stop_above=None, backend=None):
    """Generation sizes of ``replicas`` independent Galton-Watson processes, shape ``(R, G+1)``.

    All lines advance together, one kernel call per generation.  A line is
    frozen (its size carried forward) once it exceeds ``stop_above``.
    """
    rng = stream(rng)
    k = _backend.get(backend)
    vals, ocond, bn, bp = mu.kernel_args
    sizes = np.zeros((replicas, generations + 1), dtype=np.int64)
    sizes[:, 0] = 1
    z = np.ones(replicas, dtype=np.int64)
    for n in range(1, generations + 1):
        live = z > 0
        if stop_above is not None:
            live &= z <= stop_above
        if live.any():
            z = z.copy()
            z[live] = k.offspring_totals(np.ascontiguousarray(z[live]), vals, ocond, bn, bp, rng)
        sizes[:, n] = z
    return sizes


def galton_watson(mu, generations, rng=0, stop_above=None, backend=None):
    """Generation sizes of a Galton-Watson process from one individual.

    Stops early (and pads with the last size) once the size exceeds
    ``stop_above``; extinction pads with zeros.
    """
    rng = stream(rng)
    k = _backend.get(backend)
    vals, ocond, bn, bp = mu.kernel_args
    sizes = np.zeros(generations + 1, dtype=np.int64)
    sizes[0] = z = 1
    for n in range(1, generations + 1):
        if z == 0:
            break
        if stop_above is not None and z > stop_above:
            sizes[n:] = z
            break
        z = int(k.offspring_totals(np.array([z], dtype=np.int64), vals, ocond, bn, bp, rng)[0])
        sizes[n] = z
    return sizes
