"""Verification suites.

A suite runs seeded replicas of one configuration and reduces them, in
replica order, to a list of assertions.  Each assertion records what was
observed, what it was compared with, the tolerance, the standard error when
there is one, and where the target comes from.  Almost-sure statements are
never asserted directly; each is replaced by a finite-sample surrogate whose
name says what it checks.
"""
import json
import time
from dataclasses import dataclass, field, replace
from math import floor, sqrt

import numpy as np
from scipy import stats

from .brw import DEFAULT_CAP, Observers, Population, galton_watson_batch, run_replicas, step
from .chains import ChainModel, DriftedLine, Lattice3D, RegularTree, spectral_radius
from .errors import ConfigError, EncodingError
from .measures import PerturbedFunction, martingale_diagnostic, tracks_from_summaries
from .offspring import (
    OffspringDistribution,
    binomial,
    deterministic,
    extinction_probability,
    survival_to,
    table,
)
from .potential import (
    LATTICE_INFINITY,
    MINUS_INFINITY,
    ConstantOne,
    CylinderExtension,
    FullBoundary,
    KernelFunction,
    LineCylinder,
    TreeRay,
    cylinder_family,
    harmonic_measure,
)
from .rng import auxiliary_stream, replica_stream

__all__ = [
    "SuiteConfig",
    "Assertion",
    "Verdict",
    "SuiteResult",
    "SUITES",
    "default_config",
    "run_suite",
    "trajectory_table",
    "kesten_stigum_suite",
    "identity_suite",
    "support_suite",
    "phase_transition_suite",
    "tail_example_suite",
    "martingale_suite",
    "discrepancy_suite",
]

# absolute slack for comparisons that should hold exactly up to rounding
NUMERIC_FLOOR = 1e-12
MIN_STAT_REPLICAS = 30
CRITICAL_MARGIN = 0.05
TINY_W = 1e-3


@dataclass(frozen=True)
class SuiteConfig:
    """Everything a suite or a plain simulation needs; serialises to config text."""

    suite: str = None
    chain: ChainModel = field(default_factory=lambda: RegularTree(3))
    offspring: OffspringDistribution = field(default_factory=lambda: table({0: 0.25, 2: 0.75}))
    generations: int = 20
    replicas: int = 2000
    depth: int = 2
    seed: int = 0
    tolerance: float = 3.0
    flag_threshold: float = 4.0
    contrast: OffspringDistribution = None
    resolution: int = None
    cap: int = DEFAULT_CAP
    workers: int = 1
    burn_in: int = 5
    window: int = 5
    start: int = 10
    ray: tuple = (0,)
    gw_replicas: int = 10_000

    def __post_init__(self):
        if self.suite is not None and self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; choose from {sorted(SUITES)}", key="suite")
        if not isinstance(self.chain, ChainModel):
            raise ConfigError(f"chain must be a chain model, got {self.chain!r}", key="chain")
        for key in ("generations", "replicas", "depth", "seed", "cap", "workers", "burn_in",
                    "window", "start", "gw_replicas"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"{key} must be an integer, got {v!r}", key=key)
        if self.generations < 0 or self.replicas < 1 or self.depth < 0 or self.workers < 1:
            raise ConfigError("generations >= 0, replicas >= 1, depth >= 0 and workers >= 1 required")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative", key="seed")
        if not self.tolerance > 0 or not self.flag_threshold > 0:
            raise ConfigError("tolerance multipliers must be positive", key="tolerance")
        if self.resolution is not None and self.resolution < 0:
            raise ConfigError("resolution must be non-negative", key="resolution")
        object.__setattr__(self, "ray", tuple(int(a) for a in self.ray))
        if isinstance(self.chain, RegularTree):
            try:
                self.chain.validate(self.ray)
            except EncodingError as exc:
                raise ConfigError(str(exc), key="ray") from None

    def replace(self, **changes):
        return replace(self, **changes)


# --------------------------------------------------------------------------
# verdict records


RELATIONS = {
    "approx": lambda obs, target, tol: abs(obs - target) <= tol,
    "in": lambda obs, target, tol: abs(obs - target) < tol,
    "lt": lambda obs, target, tol: obs < target + tol,
    "le": lambda obs, target, tol: obs <= target + tol,
    "gt": lambda obs, target, tol: obs > target + tol,
    "ge": lambda obs, target, tol: obs >= target + tol,
}


@dataclass(frozen=True)
class Assertion:
    """One comparison ``observed <relation> target`` with its tolerance.

    ``approx`` means ``|observed - target| <= tolerance`` and ``in`` the
    strict version; the order relations shift the target by the tolerance.
    """

    name: str
    observed: float
    target: float
    relation: str
    tolerance: float
    std_error: float
    provenance: str
    note: str = ""
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        for key in ("observed", "target", "tolerance", "std_error"):
            object.__setattr__(self, key, float(getattr(self, key)))
        ok = RELATIONS[self.relation](self.observed, self.target, self.tolerance)
        object.__setattr__(self, "passed", bool(ok))

    def as_dict(self):
        return {
            "name": self.name,
            "observed": self.observed,
            "relation": self.relation,
            "target": self.target,
            "tolerance": self.tolerance,
            "std_error": self.std_error,
            "provenance": self.provenance,
            "note": self.note,
            "passed": self.passed,
        }

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return (f"[{mark}] {self.name}: observed {self.observed:.6g} {self.relation} "
                f"target {self.target:.6g} (tol {self.tolerance:.3g}, se {self.std_error:.3g})")


@dataclass(frozen=True)
class Verdict:
    suite: str
    assertions: tuple
    metadata: tuple = ()
    runtime: float = field(default=0.0, compare=False)

    @property
    def passed(self):
        return all(a.passed for a in self.assertions)

    def as_dict(self):
        # runtime stays out so that reruns serialise identically
        return {
            "suite": self.suite,
            "passed": self.passed,
            "assertions": [a.as_dict() for a in self.assertions],
            "metadata": dict(self.metadata),
        }

    def to_text(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data, runtime=0.0):
        rows = []
        for a in data["assertions"]:
            a = dict(a)
            a.pop("passed", None)
            rows.append(Assertion(**a))
        return cls(data["suite"], tuple(rows), tuple(sorted(data.get("metadata", {}).items())), runtime)

    def report(self):
        head = f"{self.suite}: {'PASS' if self.passed else 'FAIL'}"
        return "\n".join([head] + ["  " + a.line() for a in self.assertions])


@dataclass
class SuiteResult:
    config: SuiteConfig
    verdict: Verdict
    tables: dict = field(default_factory=dict)
    digests: list = field(default_factory=list)
    oracles: dict = field(default_factory=dict)


def _meta(**kw):
    return tuple(sorted((k, v) for k, v in kw.items()))


def _approx(name, obs, target, k, se, provenance, extra=0.0, note=""):
    return Assertion(name, obs, target, "approx", k * se + extra + NUMERIC_FLOOR, se, provenance, note)


def _sample_se(x):
    x = np.asarray(x, dtype=np.float64)
    return float(x.std(ddof=1) / sqrt(x.size)) if x.size > 1 else 0.0


def _binomial_se(p, n):
    return sqrt(max(p * (1.0 - p), 0.0) / n)


def _need_replicas(n, what="replicas"):
    if n < MIN_STAT_REPLICAS:
        raise ConfigError(f"statistical assertions need >= {MIN_STAT_REPLICAS} {what}, got {n}", key="replicas")


# --------------------------------------------------------------------------
# evidence tables


def trajectory_table(summaries, case=None):
    """Rows ``n, replica, total, W_n, masses..., pairings...`` for every replica and generation."""
    if not summaries:
        return [], []
    s0 = summaries[0]
    header = ["n", "replica", "total", "W_n"] + list(s0.cylinder_labels) + list(s0.harmonic_labels)
    if case is not None:
        header = ["case"] + header
    rows = []
    for n in range(s0.generations + 1):
        for i, s in enumerate(summaries):
            row = [n, i, int(s.total[n]), float(s.W[n])]
            row += [float(v) for v in s.masses[n]] + [float(v) for v in s.pairings[n]]
            rows.append(([case] + row) if case is not None else row)
    return header, rows


def _replicas(cfg, observers, mu=None, case=0, resolution="cfg", cap=None):
    res = cfg.resolution if resolution == "cfg" else resolution
    return run_replicas(
        cfg.chain, cfg.offspring if mu is None else mu, cfg.generations, cfg.replicas, cfg.seed,
        observers, cap=cfg.cap if cap is None else cap, resolution=res, workers=cfg.workers, case=case,
    )


# --------------------------------------------------------------------------
# exact finite-generation laws of the walk


def _radial_law(d, n):
    """Law of the distance from the root after ``n`` steps of the walk on the d-regular tree."""
    p = np.zeros(n + 2)
    p[0] = 1.0
    for _ in range(n):
        q = np.zeros_like(p)
        q[1] += p[0]
        q[:-1] += p[1:] / d
        q[2:] += p[1:-1] * (d - 1) / d
        p = q
    return p


def finite_shadow_probability(chain, C, n):
    """``P_o(X_n in shadow(C))``, the exact mean of the rescaled cylinder mass at generation ``n``."""
    if isinstance(C, FullBoundary):
        return 1.0
    if isinstance(chain, RegularTree):
        d, L = chain.degree, len(C.word)
        radial = _radial_law(d, n)
        return float(radial[L:].sum()) / (d * (d - 1) ** (L - 1))
    if isinstance(chain, DriftedLine):
        # X_n = 2B - n with B ~ Binomial(n, p); X_n > 0 iff B > n/2
        up = float(stats.binom.sf(floor(n / 2), n, chain.p))
        return up if C.sign > 0 else 1.0 - up
    raise ConfigError(f"no finite-generation law for {chain!r}")


# --------------------------------------------------------------------------
# suites


def kesten_stigum_suite(cfg):
    _need_replicas(cfg.replicas)
    mu, N, R, k = cfg.offspring, cfg.generations, cfg.replicas, cfg.tolerance
    S = _replicas(cfg, Observers())
    W = np.array([s.W[-1] for s in S])
    extinct = np.array([not s.survived for s in S])
    q = extinction_probability(mu)
    qN = 1.0 - survival_to(mu, N)
    survivors = W[~extinct]
    tiny = float((survivors < TINY_W).mean()) if survivors.size else 0.0
    out = [
        _approx(f"mean W_{N}", W.mean(), 1.0, k, _sample_se(W), "martingale identity: E W_n = 1"),
        _approx(
            f"extinction fraction by n={N}", extinct.mean(), q, k, _binomial_se(q, R),
            "oracle: smallest fixed point of the pgf", extra=abs(q - qN),
            note=f"exact P(extinct by n={N}) = {qN!r}",
        ),
        Assertion(
            f"fraction of survivors with W_{N} < {TINY_W:g}", tiny, 0.01, "lt", 0.0, 0.0,
            "surrogate: W > 0 almost surely on survival",
            note=f"{survivors.size} survivors",
        ),
    ]
    meta = _meta(mean_offspring=mu.mean, extinction_probability=q, survivors=int(survivors.size))
    header, rows = trajectory_table(S)
    return out, meta, {"trajectories": (header, rows)}, S, {
        "extinction_probability": {"value": q, "provenance": "pgf fixed-point iteration"},
        "extinction_by_N": {"value": qN, "provenance": "N-fold pgf iterate at 0"},
    }


def identity_suite(cfg):
    _need_replicas(cfg.replicas)
    chain, N, k = cfg.chain, cfg.generations, cfg.tolerance
    if isinstance(chain, Lattice3D):
        fam = [FullBoundary()]
    else:
        fam = cylinder_family(chain, cfg.depth)
    S = _replicas(cfg, Observers(fam))
    M = np.stack([s.masses[-1] for s in S])
    out = []
    oracles = {}
    for i, C in enumerate(fam):
        h = harmonic_measure(chain, C)
        fin = finite_shadow_probability(chain, C, N)
        se = _sample_se(M[:, i])
        out.append(_approx(
            f"mean mass {C.label} at n={N}", M[:, i].mean(), h, k, se,
            "closed form: harmonic measure of the cylinder", extra=abs(fin - h),
            note=f"exact mean at n={N} is {fin!r}",
        ))
        out.append(_approx(f"{C.label} mass vs exact n={N} law", M[:, i].mean(), fin, k, se,
                           "exact: law of the walk at generation n"))
        oracles[f"harmonic_measure {C.label}"] = {"value": h, "provenance": "closed form"}
        oracles[f"shadow_probability {C.label} n={N}"] = {"value": fin, "provenance": "exact walk law"}
    header, rows = trajectory_table(S)
    return out, _meta(cylinders=len(fam)), {"trajectories": (header, rows)}, S, oracles


def support_suite(cfg):
    _need_replicas(cfg.replicas)
    chain, N, k = cfg.chain, cfg.generations, cfg.tolerance
    if isinstance(chain, Lattice3D):
        S = _replicas(cfg, Observers([FullBoundary()]))
        gap = max(float(np.max(np.abs(s.masses[:, 0] - s.W))) for s in S)
        out = [Assertion(
            "max |full-boundary mass - W_n| over replicas and generations", gap, 0.0, "le",
            NUMERIC_FLOOR, 0.0, "single boundary point: the mass of everything is W_n",
        )]
        header, rows = trajectory_table(S)
        return out, _meta(), {"trajectories": (header, rows)}, S, {}
    if not isinstance(chain, DriftedLine):
        raise ConfigError("the support suite needs a drifted line or the lattice", key="chain")
    C = LineCylinder(-1)
    S = _replicas(cfg, Observers([C]))
    M = np.stack([s.masses[:, 0] for s in S])
    half = N // 2
    m_half, m_end = float(M[:, half].mean()), float(M[:, N].mean())
    se_end = _sample_se(M[:, N])
    bound = finite_shadow_probability(chain, C, N)
    out = [
        Assertion(f"mean mass on states <= 0 at n={N}", m_end, 1e-3, "lt", 0.0, se_end,
                  "surrogate: the non-harmonic end carries no limiting mass"),
        Assertion(f"mean mass on states <= 0, n={half} to n={N}", m_end, m_half, "le", NUMERIC_FLOOR,
                  se_end, "surrogate: mass off the harmonic boundary does not grow",
                  note="non-increasing; both values may be 0"),
        Assertion(f"mean mass on states <= 0 at n={N} vs single-walk law", m_end, bound, "le",
                  k * se_end + NUMERIC_FLOOR, se_end, "exact: P_o(X_n <= 0) for one walk"),
    ]
    means = M.mean(axis=0)
    table_rows = [[n, float(means[n])] for n in range(N + 1)]
    header, rows = trajectory_table(S)
    tables = {"trajectories": (header, rows), "mean_mass": (["n", "mean_mass_nonpositive"], table_rows)}
    return out, _meta(half=half), tables, S, {
        "walk_nonpositive_probability": {"value": bound, "provenance": "binomial tail"},
    }


def phase_transition_suite(cfg):
    _need_replicas(cfg.replicas)
    chain, N = cfg.chain, cfg.generations
    if not isinstance(chain, RegularTree):
        raise ConfigError("the phase-transition suite needs a regular tree", key="chain")
    if cfg.contrast is None:
        raise ConfigError("the phase-transition suite needs a contrast offspring law", key="contrast")
    crit = 1.0 / spectral_radius(chain)
    laws = sorted([(cfg.offspring.mean, 0, cfg.offspring), (cfg.contrast.mean, 1, cfg.contrast)])
    (m_lo, case_lo, lo), (m_hi, case_hi, hi) = laws
    if not m_lo < crit < m_hi:
        raise ConfigError(
            f"offspring means {m_lo!r} and {m_hi!r} must bracket the critical mean {crit!r}",
            key="contrast",
        )
    for m in (m_lo, m_hi):
        if abs(m / crit - 1.0) < CRITICAL_MARGIN:
            raise ConfigError(f"mean {m!r} is within {CRITICAL_MARGIN:.0%} of the critical mean {crit!r}")
    res = 0 if cfg.resolution is None else cfg.resolution
    S_lo = _replicas(cfg, Observers(), mu=lo, case=case_lo, resolution=res)
    S_hi = _replicas(cfg, Observers(), mu=hi, case=case_hi, resolution=res)
    last = np.array([int(np.nonzero(s.root_count)[0].max()) for s in S_lo])
    a = N // 2
    surv = [s for s in S_hi if s.survived]
    fracs = np.array([(s.root_count[a:] > 0).mean() for s in surv])
    frac = float(fracs.mean()) if fracs.size else 0.0
    out = [
        Assertion(f"median last root-occupied generation, mean {m_lo:.4g}", float(np.median(last)),
                  N / 4, "lt", 0.0, 0.0, "suite definition: transient regime below the critical mean"),
        Assertion(f"late-window root occupancy among survivors, mean {m_hi:.4g}", frac, 0.5, "gt", 0.0,
                  _sample_se(fracs), "suite definition: recurrent regime above the critical mean",
                  note=f"window n={a}..{N}, {len(surv)} survivors; parity caps the fraction at "
                       f"{((N - a) // 2 + 1) / (N - a + 1):.4f}"),
    ]
    rows = []
    for case, S in ((m_lo, S_lo), (m_hi, S_hi)):
        for i, s in enumerate(S):
            occ = s.root_count > 0
            rows.append([case, i, int(np.nonzero(s.root_count)[0].max()), int(s.survived),
                         float(occ[a:].mean())])
    tables = {"root_occupancy": (["mean", "replica", "last_root_generation", "survived",
                                  "late_window_fraction"], rows)}
    meta = _meta(critical_mean=crit, low_mean=m_lo, high_mean=m_hi, resolution=res)
    return out, meta, tables, S_lo + S_hi, {
        "critical_mean": {"value": crit, "provenance": "inverse spectral radius, closed form"},
    }


DIAGONAL_STEP = 1.0 / 6.0


def _diagonal_counts(cfg, rng_case=3):
    """``D_n = B_n((n, 0, 0))`` for every replica; a replica stops once ``D_n = 0`` (it stays 0)."""
    chain, N = cfg.chain, cfg.generations
    codec = chain.codec()
    targets = [codec.encode_point((n, 0, 0)) for n in range(N + 1)]
    D = np.zeros((cfg.replicas, N + 1), dtype=np.int64)
    for i in range(cfg.replicas):
        rng = replica_stream(cfg.seed, i, rng_case)
        pop = Population.singleton(chain)
        D[i, 0] = 1
        for n in range(1, N + 1):
            pop = step(chain, pop, cfg.offspring, rng, cfg.cap)
            at = np.searchsorted(pop.codes, targets[n])
            D[i, n] = pop.counts[at] if at < pop.codes.size and pop.codes[at] == targets[n] else 0
            if D[i, n] == 0:
                break
    return D


def tail_example_suite(cfg):
    if not isinstance(cfg.chain, Lattice3D):
        raise ConfigError("the tail suite runs on the lattice", key="chain")
    if not cfg.offspring.is_deterministic():
        raise ConfigError("the tail suite needs deterministic offspring", key="offspring")
    _need_replicas(cfg.replicas)
    _need_replicas(cfg.gw_replicas, "Galton-Watson replicas")
    k, N, R = cfg.offspring.values[0], cfg.generations, cfg.replicas
    tol = cfg.tolerance
    # each of the k children of a particle at (n,0,0) steps to (n+1,0,0) with probability 1/6
    diag = binomial(k, DIAGONAL_STEP)
    q = extinction_probability(diag)
    out = []
    if diag.mean > 1.0:
        out.append(Assertion("diagonal extinction probability strictly inside (0, 1)", q, 0.5, "in",
                             0.5 - 1e-3, 0.0, "oracle: pgf fixed point of Binomial(k, 1/6)",
                             note="margin 1e-3 from both ends"))
    else:
        out.append(_approx("diagonal extinction probability", q, 1.0, 0.0, 0.0,
                           "non-supercritical diagonal law dies out"))
    sizes = galton_watson_batch(diag, cfg.gw_replicas, 200, auxiliary_stream(cfg.seed, "diagonal-gw"),
                                stop_above=1000)
    gw_ext = float((sizes[:, -1] == 0).mean())
    out.append(_approx("Monte-Carlo extinction fraction of the diagonal process", gw_ext, q, tol,
                       _binomial_se(q, cfg.gw_replicas), "oracle: pgf fixed point of Binomial(k, 1/6)",
                       note=f"{cfg.gw_replicas} independent lines, frozen above 1000"))
    D = _diagonal_counts(cfg)
    alive = float((D > 0).all(axis=1).mean())
    target = survival_to(diag, N)
    out.append(_approx(f"P(D_n > 0 for all n <= {N}) from the branching walk", alive, target, tol,
                       _binomial_se(target, R), "exact: 1 - f^(N)(0) for the diagonal law"))
    if N >= 1:
        out.append(_approx("mean D_1", D[:, 1].mean(), diag.mean, tol,
                           sqrt(k * DIAGONAL_STEP * (1 - DIAGONAL_STEP) / R), "binomial mean k/6"))
    rows = [[i] + [int(v) for v in D[i]] for i in range(R)]
    tables = {"diagonal": (["replica"] + [f"D_{n}" for n in range(N + 1)], rows)}
    meta = _meta(diagonal_law=diag.describe(), diagonal_step_probability="1/6",
                 gw_lines=cfg.gw_replicas)
    return out, meta, tables, [], {
        "diagonal_extinction_probability": {"value": q, "provenance": "pgf fixed-point iteration"},
        "diagonal_survival_to_N": {"value": target, "provenance": "N-fold pgf iterate at 0"},
    }


def _martingale_handles(cfg):
    chain = cfg.chain
    if isinstance(chain, RegularTree):
        fam = cylinder_family(chain, min(cfg.depth, 2))
        kernel = KernelFunction(TreeRay(cfg.ray))
    elif isinstance(chain, DriftedLine):
        fam = cylinder_family(chain)
        kernel = KernelFunction(MINUS_INFINITY)
    else:
        fam = [FullBoundary()]
        kernel = KernelFunction(LATTICE_INFINITY)
    bounded = [ConstantOne()] + [CylinderExtension(C) for C in fam]
    return bounded, kernel


def martingale_suite(cfg):
    _need_replicas(cfg.replicas)
    if cfg.generations < cfg.burn_in + 3:
        raise ConfigError("need at least three generations after the burn-in", key="generations")
    bounded, kernel = _martingale_handles(cfg)
    control = PerturbedFunction(ConstantOne(), cfg.chain.origin, 1.0)
    handles = bounded + [kernel, control]
    S = _replicas(cfg, Observers((), handles), resolution=None if isinstance(cfg.chain, RegularTree) else cfg.resolution)
    tracks = tracks_from_summaries(S)
    rep = martingale_diagnostic(tracks, cfg.burn_in, cfg.flag_threshold)
    thr = cfg.flag_threshold
    out = []
    nb = len(bounded)
    for i, td in enumerate(rep.tracks[:-1]):
        out.append(Assertion(f"max |z| of increment means, {td.label}", td.max_abs_z, thr, "le", 0.0, 0.0,
                             "martingale property: increments have mean zero"))
        if i < nb:
            out.append(Assertion(f"increment variance, last vs first third, {td.label}", td.late_variance,
                                 td.early_variance, "le", NUMERIC_FLOOR, 0.0,
                                 "surrogate: almost-sure convergence of the track"))
    td = rep.tracks[-1]
    out.append(Assertion(f"negative control flagged, {td.label}", td.max_abs_z, thr, "gt", 0.0, 0.0,
                         "fixture: value at the origin shifted by 1"))
    kt = rep.tracks[nb]
    meta = _meta(burn_in=cfg.burn_in, kernel_early_variance=kt.early_variance,
                 kernel_late_variance=kt.late_variance, threshold=thr)
    rows = []
    for td in rep.tracks:
        for g, m, se, z in zip(td.generations, td.means, td.std_errors, td.z):
            rows.append([td.label, g, m, se, z])
    header, traj = trajectory_table(S)
    tables = {"trajectories": (header, traj),
              "increments": (["track", "n", "mean_increment", "std_error", "z"], rows)}
    return out, meta, tables, S, {}


def discrepancy_suite(cfg):
    chain, N, w, a = cfg.chain, cfg.generations, cfg.window, cfg.start
    if N < a + w + 1:
        raise ConfigError(f"need generations >= start + window + 1 = {a + w + 1}", key="generations")
    fam = [FullBoundary()] if isinstance(chain, Lattice3D) else cylinder_family(chain, cfg.depth)
    S = _replicas(cfg, Observers(fam))
    surv = [s for s in S if s.survived]
    _need_replicas(len(surv), "surviving replicas")
    M = np.stack([s.masses for s in surv])
    ns = list(range(a, N - w + 1))
    med = [float(np.median(np.abs(M[:, n] - M[:, n + w]).max(axis=1))) for n in ns]
    bad = sum(1 for x, y in zip(med, med[1:]) if not y < x)
    pos = [(n, m) for n, m in zip(ns, med) if m > 0]
    rate = float(np.polyfit([n for n, _ in pos], np.log([m for _, m in pos]), 1)[0]) if len(pos) > 1 else 0.0
    out = [
        Assertion("surviving replicas", len(surv), 500, "ge", 0.0, 0.0, "suite definition"),
        Assertion(f"non-decreasing steps of median D(n, n+{w}), n={a}..{ns[-1]}", bad, 0, "le", 0.0, 0.0,
                  "surrogate: weak convergence of the rescaled measures",
                  note=f"max over {len(fam)} cylinders of depth <= {cfg.depth}"),
        Assertion(f"median D(n, n+{w}) at n={ns[-1]} vs n={a}", med[-1], med[0], "lt", 0.0, 0.0,
                  "surrogate: weak convergence of the rescaled measures"),
    ]
    meta = _meta(log_decay_per_generation=rate, window=w)
    tables = {"discrepancy": (["n", "median_discrepancy"], [[n, m] for n, m in zip(ns, med)])}
    return out, meta, tables, S, {}


SUITES = {
    "kesten_stigum": kesten_stigum_suite,
    "identity": identity_suite,
    "support": support_suite,
    "phase_transition": phase_transition_suite,
    "tail_example": tail_example_suite,
    "martingale": martingale_suite,
    "discrepancy": discrepancy_suite,
}


def _defaults():
    tree_law = table({0: 0.25, 2: 0.75})
    return {
        "kesten_stigum": dict(chain=RegularTree(3), offspring=tree_law, generations=20, replicas=2000),
        "martingale": dict(chain=RegularTree(3), offspring=tree_law, generations=20, replicas=2000, depth=2),
        "identity": dict(chain=RegularTree(3), offspring=tree_law, generations=30, replicas=5000, depth=2,
                         resolution=2),
        "support": dict(chain=DriftedLine(0.9), offspring=table({1: 0.8, 2: 0.2}), generations=30,
                        replicas=2000),
        "phase_transition": dict(chain=RegularTree(4), offspring=table({1: 0.95, 2: 0.05}),
                                 contrast=table({1: 0.5, 2: 0.5}), generations=60, replicas=1000,
                                 resolution=0, cap=10**18),
        "tail_example": dict(chain=Lattice3D(), offspring=deterministic(16), generations=5, replicas=2000,
                             cap=10**12),
        "discrepancy": dict(chain=RegularTree(3), offspring=tree_law, generations=30, replicas=1000, depth=2,
                            resolution=2),
    }


def default_config(suite, seed=7, **overrides):
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}", key="suite")
    kw = _defaults()[suite]
    kw.update(overrides)
    return SuiteConfig(suite=suite, seed=seed, **kw)


def run_suite(cfg):
    if cfg.suite is None:
        raise ConfigError("config names no suite", key="suite")
    t0 = time.perf_counter()
    assertions, meta, tables, summaries, oracles = SUITES[cfg.suite](cfg)
    meta = tuple(sorted(meta + (("seed", cfg.seed),)))
    verdict = Verdict(cfg.suite, tuple(assertions), meta, time.perf_counter() - t0)
    return SuiteResult(cfg, verdict, tables, [s.digest() for s in summaries], oracles)
