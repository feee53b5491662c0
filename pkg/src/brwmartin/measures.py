"""Rescaled empirical measures, pairings and martingale / weak-convergence diagnostics."""
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .chains import DriftedLine, transition_row
from .errors import ConfigError, DomainError
from .offspring import mean_offspring
from .potential import ConstantOne, CompactificationPoint, cylinder_family, martin_kernel, MINUS_INFINITY

__all__ = [
    "EmpiricalBoundaryMeasure",
    "empirical_measure",
    "pair",
    "cylinder_mass",
    "MartingaleTrack",
    "tracks_from_summaries",
    "martingale_diagnostic",
    "MartingaleReport",
    "DiscrepancyReport",
    "discrepancy",
    "discrepancy_from_masses",
    "PerturbedFunction",
    "TruncatedLineKernel",
    "check_superharmonic",
]


def _mean(mu):
    return mu if isinstance(mu, (int, float)) else mean_offspring(mu)


@dataclass(frozen=True, eq=False)
class EmpiricalBoundaryMeasure:
    """``mean^-n B_n`` viewed as a measure on the compactification."""

    population: object
    mean: float

    @property
    def chain(self):
        return self.population.chain

    @property
    def generation(self):
        return self.population.generation

    @property
    def growth(self):
        return self.mean**self.generation

    @property
    def total_mass(self):
        return self.population.total / self.growth

    @property
    def atoms(self):
        g = self.growth
        return [
            (CompactificationPoint(self.chain, x), k / g) for x, k in self.population.as_dict().items()
        ]

    def mass(self, C):
        pop = self.population
        return float(pop.counts[C.shadow(pop.codec, pop.codes)].sum()) / self.growth


def empirical_measure(pop, mu):
    return EmpiricalBoundaryMeasure(pop, _mean(mu))


def pair(chain, h, pop, mu):
    """``<h, mean^-n B_n> = sum_x h(x) mean^-n B_n(x)``."""
    growth = _mean(mu) ** pop.generation
    if isinstance(h, ConstantOne):
        return pop.total / growth
    if pop.total == 0:
        return 0.0
    vals = h.values(chain, pop.codec, pop.codes)
    return float(np.dot(vals, pop.counts.astype(np.float64))) / growth


def cylinder_mass(pop, C, mu):
    return empirical_measure(pop, mu).mass(C)


# --------------------------------------------------------------------------
# martingale diagnostics


@dataclass(frozen=True, eq=False)
class MartingaleTrack:
    """``<h, Bbar_n>`` for every replica (rows) and generation (columns)."""

    label: str
    values: np.ndarray

    @property
    def replicas(self):
        return self.values.shape[0]


def tracks_from_summaries(summaries):
    if not summaries:
        return []
    labels = summaries[0].harmonic_labels
    stacked = np.stack([s.pairings for s in summaries])
    return [MartingaleTrack(lab, stacked[:, :, i]) for i, lab in enumerate(labels)]


@dataclass(frozen=True)
class TrackDiagnostic:
    label: str
    generations: tuple
    means: tuple
    std_errors: tuple
    z: tuple
    flagged: bool
    early_variance: float
    late_variance: float

    @property
    def max_abs_z(self):
        return max((abs(v) for v in self.z if np.isfinite(v)), default=0.0)


@dataclass(frozen=True)
class MartingaleReport:
    burn_in: int
    threshold: float
    tracks: tuple

    @property
    def flagged(self):
        return [t.label for t in self.tracks if t.flagged]


def martingale_diagnostic(tracks, burn_in=5, threshold=4.0, one_sided=False):
    """Across-replica increment means with standard errors, per track.

    An increment is flagged when its mean exceeds ``threshold`` standard
    errors (``|z|``, or ``z`` alone with ``one_sided`` for supermartingale
    checks).  Increments with zero spread are flagged iff their mean is
    nonzero.
    """
    out = []
    for tr in tracks:
        R, T = tr.values.shape
        if R < 30:
            raise ConfigError(f"martingale diagnostics need >= 30 replicas, track {tr.label!r} has {R}")
        inc = np.diff(tr.values, axis=1)[:, burn_in:]
        gens = tuple(range(burn_in, T - 1))
        means = inc.mean(axis=0)
        ses = inc.std(axis=0, ddof=1) / sqrt(R)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(ses > 0, means / ses, np.where(means == 0, 0.0, np.copysign(np.inf, means)))
        bad = z > threshold if one_sided else np.abs(z) > threshold
        var = inc.var(axis=0, ddof=1) if R > 1 else np.zeros(inc.shape[1])
        third = max(1, len(gens) // 3)
        out.append(
            TrackDiagnostic(
                tr.label, gens, tuple(means.tolist()), tuple(ses.tolist()), tuple(z.tolist()),
                bool(bad.any()), float(var[:third].mean()) if len(gens) else 0.0,
                float(var[-third:].mean()) if len(gens) else 0.0,
            )
        )
    return MartingaleReport(burn_in, threshold, tuple(out))


# --------------------------------------------------------------------------
# weak-convergence surrogate


@dataclass(frozen=True)
class DiscrepancyReport:
    n: int
    m: int
    depth: int
    value: float


def discrepancy(m1, m2, depth):
    """Max over cylinders of depth <= ``depth`` of the absolute mass difference."""
    if m1.chain != m2.chain:
        raise DomainError("measures live on different chains")
    fam = [C for C in cylinder_family(m1.chain, depth) if C.depth <= depth]
    value = max((abs(m1.mass(C) - m2.mass(C)) for C in fam), default=0.0)
    return DiscrepancyReport(m1.generation, m2.generation, depth, float(value))


def discrepancy_from_masses(masses, n, m, columns=None):
    """Same surrogate from recorded per-generation cylinder masses."""
    a = masses[n] if columns is None else masses[n, columns]
    b = masses[m] if columns is None else masses[m, columns]
    return float(np.max(np.abs(a - b))) if a.size else 0.0


# --------------------------------------------------------------------------
# test functions beyond the closed-form handles


@dataclass(frozen=True)
class PerturbedFunction:
    """``h`` with its value at one state shifted by ``delta`` (a negative control)."""

    base: object
    state: object
    delta: float = 1.0

    @property
    def label(self):
        return f"{self.base.label}~corrupted"

    @property
    def depth(self):
        return getattr(self.base, "depth", 0)

    def __call__(self, chain, x):
        v = self.base(chain, x)
        return v + self.delta if chain.validate(x) == chain.validate(self.state) else v

    def values(self, chain, codec, codes):
        vals = np.array(self.base.values(chain, codec, codes), dtype=np.float64)
        vals[np.asarray(codes) == codec.encode_state(chain.validate(self.state))] += self.delta
        return vals


class TruncatedLineKernel:
    """``min(1, K(x, -inf)) = min(1, (q/p)^x)`` on the drifted line (superharmonic)."""

    label = "min(1,K[-inf])"
    depth = 0

    def __init__(self, chain, check_radius=60):
        if not isinstance(chain, DriftedLine):
            raise DomainError("TruncatedLineKernel is defined on the drifted line")
        self.chain = chain
        check_superharmonic(chain, self, range(-check_radius, check_radius + 1))

    def __call__(self, chain, x):
        return min(1.0, martin_kernel(chain, x, MINUS_INFINITY))

    def values(self, chain, codec, codes):
        r = chain.q / chain.p
        return np.minimum(1.0, np.power(r, np.asarray(codes, dtype=np.float64)))


def check_superharmonic(chain, f, states, tol=1e-12):
    """Raise unless ``sum_y P(x,y) f(y) <= f(x) + tol`` on every listed state."""
    for x in states:
        Pf = sum(p * f(chain, y) for y, p in transition_row(chain, x))
        if Pf > f(chain, x) + tol:
            raise DomainError(f"function is not superharmonic at {x!r}: Pf={Pf!r} > f={f(chain, x)!r}")
    return True
