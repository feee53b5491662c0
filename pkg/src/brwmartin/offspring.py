"""Offspring distributions and Galton-Watson analytics."""
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, exp, fsum, lgamma, log

import numpy as np

from ._codes import conditional_split
from .errors import ConvergenceError, DomainError

__all__ = [
    "OffspringDistribution",
    "table",
    "deterministic",
    "binomial",
    "poisson",
    "geometric",
    "parse_pmf",
    "parse_offspring",
    "offspring_fields",
    "from_fields",
    "mean_offspring",
    "pgf",
    "extinction_probability",
    "survival_to",
    "llogl_check",
]

DEFAULT_TAIL = 1e-12


@dataclass(frozen=True)
class OffspringDistribution:
    """Finitely supported pmf on the non-negative integers.

    ``family``/``params`` remember how the law was specified so that configs
    round-trip; Poisson and geometric laws are truncated once the remaining
    tail mass drops to ``tail`` and renormalised.
    """

    values: tuple
    probs: tuple
    family: str = "table"
    params: tuple = ()
    mean: float = field(init=False)
    llogl_finite: bool = field(init=False)
    _kernel: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(vals) != len(probs) or not vals:
            raise DomainError("pmf needs matching, nonempty values and probabilities")
        if any(v < 0 for v in vals) or len(set(vals)) != len(vals):
            raise DomainError("pmf values must be distinct non-negative integers")
        if any(not p >= 0 for p in probs):
            raise DomainError("pmf probabilities must be non-negative")
        if abs(fsum(probs) - 1.0) > 1e-12:
            raise DomainError(f"pmf sums to {fsum(probs)!r}, not 1")
        pairs = sorted((v, p) for v, p in zip(vals, probs) if p > 0)
        object.__setattr__(self, "values", tuple(v for v, _ in pairs))
        object.__setattr__(self, "probs", tuple(p for _, p in pairs))
        object.__setattr__(self, "mean", fsum(v * p for v, p in pairs))
        # finite support: sum mu(n) n log n is a finite sum
        object.__setattr__(self, "llogl_finite", True)
        if self.family == "binomial":
            n, p = self.params
            kernel = (np.zeros(0, np.int64), np.zeros(0), int(n), float(p))
        else:
            kernel = (np.array(self.values, dtype=np.int64), conditional_split(np.array(self.probs)), 0, 0.0)
        for a in kernel[:2]:
            a.flags.writeable = False
        object.__setattr__(self, "_kernel", kernel)

    # kernel parameters ---------------------------------------------------
    @property
    def kernel_args(self):
        """``(values, conditional split probs, binomial n, binomial p)`` for the engine."""
        return self._kernel

    def pmf(self):
        return dict(zip(self.values, self.probs))

    def is_deterministic(self, k=None):
        return len(self.values) == 1 and (k is None or self.values[0] == k)

    def sample(self, rng, size=None):
        return rng.choice(np.array(self.values), size=size, p=np.array(self.probs))

    def describe(self):
        if self.family == "table":
            return "table{" + ", ".join(f"{v}: {p!r}" for v, p in zip(self.values, self.probs)) + "}"
        return f"{self.family}({', '.join(repr(a) for a in self.params)})"

    def __str__(self):
        return self.describe()


def table(pmf):
    """From a mapping ``{k: prob}`` or text ``"0:0.25,2:0.75"``."""
    if isinstance(pmf, str):
        pmf = parse_pmf(pmf)
    items = sorted(pmf.items())
    return OffspringDistribution(tuple(k for k, _ in items), tuple(p for _, p in items))


def parse_pmf(text):
    out = {}
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        k, sep, p = part.partition(":")
        if not sep:
            raise DomainError(f"pmf entry {part!r} is not 'k:prob'")
        k = int(k)
        if k in out:
            raise DomainError(f"duplicate pmf value {k}")
        out[k] = float(Fraction(p.strip()))
    return out


def deterministic(k):
    return OffspringDistribution((int(k),), (1.0,), "deterministic", (int(k),))


def binomial(n, p):
    n, p = int(n), float(p)
    if n < 0 or not 0.0 <= p <= 1.0:
        raise DomainError(f"bad binomial parameters ({n}, {p})")
    ks = range(n + 1)
    probs = [comb(n, k) * p**k * (1 - p) ** (n - k) for k in ks]
    s = fsum(probs)
    return OffspringDistribution(tuple(ks), tuple(q / s for q in probs), "binomial", (n, p))


def _truncate(logpmf, tail, family, params):
    if not 0 < tail <= DEFAULT_TAIL:
        raise DomainError(f"truncation tail mass must be in (0, {DEFAULT_TAIL}]")
    probs = []
    k = 0
    while True:
        probs.append(exp(logpmf(k)))
        if 1.0 - fsum(probs) <= tail:
            break
        k += 1
        if k > 100_000:
            raise DomainError("truncation did not terminate")
    s = fsum(probs)
    return OffspringDistribution(tuple(range(len(probs))), tuple(q / s for q in probs), family, params)


def poisson(lam, tail=DEFAULT_TAIL):
    lam = float(lam)
    if lam <= 0:
        raise DomainError("Poisson rate must be positive")
    return _truncate(lambda k: k * log(lam) - lam - lgamma(k + 1), tail, "poisson", (lam, tail))


def geometric(p, tail=DEFAULT_TAIL):
    """``mu(k) = p (1-p)^k`` on ``k = 0, 1, ...`` (mean ``(1-p)/p``)."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError("geometric parameter must be in (0, 1)")
    return _truncate(lambda k: log(p) + k * log(1 - p), tail, "geometric", (p, tail))


def _number(text):
    return float(Fraction(str(text).strip()))


def offspring_fields(mu):
    """Flat ``key -> text`` description that ``from_fields`` turns back into ``mu``."""
    if mu.family == "table":
        return {"family": "table", "pmf": ",".join(f"{v}:{p!r}" for v, p in zip(mu.values, mu.probs))}
    if mu.family == "deterministic":
        return {"family": "deterministic", "k": str(mu.params[0])}
    if mu.family == "binomial":
        return {"family": "binomial", "n": str(mu.params[0]), "p": repr(mu.params[1])}
    if mu.family == "poisson":
        return {"family": "poisson", "lam": repr(mu.params[0]), "tail": repr(mu.params[1])}
    return {"family": "geometric", "p": repr(mu.params[0]), "tail": repr(mu.params[1])}


FAMILY_KEYS = {
    "table": ("pmf",),
    "deterministic": ("k",),
    "binomial": ("n", "p"),
    "poisson": ("lam", "tail"),
    "geometric": ("p", "tail"),
}


def from_fields(fields):
    fields = dict(fields)
    family = fields.pop("family", "table")
    if family not in FAMILY_KEYS:
        raise DomainError(f"unknown offspring family {family!r}")
    extra = set(fields) - set(FAMILY_KEYS[family])
    if extra:
        raise DomainError(f"keys {sorted(extra)} do not apply to the {family} family")
    if family == "table":
        return table(fields["pmf"])
    if family == "deterministic":
        return deterministic(int(fields["k"]))
    if family == "binomial":
        return binomial(int(fields["n"]), _number(fields["p"]))
    tail = _number(fields.get("tail", DEFAULT_TAIL))
    if family == "poisson":
        return poisson(_number(fields["lam"]), tail)
    return geometric(_number(fields["p"]), tail)


def parse_offspring(text):
    """``table:0:0.25,2:0.75``, ``deterministic:2``, ``binomial:16,1/6``, ``poisson:1.5``, ``geometric:0.4``."""
    family, _, rest = text.strip().partition(":")
    family = family.strip().lower()
    if family == "table":
        return table(rest)
    args = [a.strip() for a in rest.split(",") if a.strip()]
    keys = FAMILY_KEYS.get(family)
    if keys is None:
        raise DomainError(f"unknown offspring family {family!r}")
    if family in ("deterministic", "binomial") and len(args) != len(keys):
        raise DomainError(f"{family} needs {len(keys)} parameter(s), got {text!r}")
    if not 1 <= len(args) <= len(keys):
        raise DomainError(f"{family} needs 1 to {len(keys)} parameters, got {text!r}")
    return from_fields({"family": family, **dict(zip(keys, args))})


# --------------------------------------------------------------------------


def mean_offspring(mu):
    return mu.mean


def llogl_check(mu):
    """Whether ``sum mu(n) n log n`` is finite (always, for finite support)."""
    return mu.llogl_finite and np.isfinite(fsum(p * v * log(v) for v, p in zip(mu.values, mu.probs) if v > 1))


def pgf(mu, s):
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"pgf argument {s!r} outside [0, 1]")
    return fsum(p * s**v for v, p in zip(mu.values, mu.probs))


def extinction_probability(mu, tol=1e-12, max_iter=1_000_000):
    """Smallest fixed point of the pgf in [0, 1], by iteration from 0."""
    if mu.is_deterministic(1):
        return 0.0
    if mu.mean <= 1.0:
        return 1.0
    q = 0.0
    for _ in range(max_iter):
        nxt = pgf(mu, q)
        if abs(nxt - q) < tol:
            return nxt
        q = nxt
    raise ConvergenceError("pgf fixed-point iteration hit the cap", last=q, gap=abs(pgf(mu, q) - q))


def survival_to(mu, n):
    """``P(Z_n > 0)`` for the Galton-Watson process started from one individual."""
    q = 0.0
    for _ in range(n):
        q = pgf(mu, q)
    return 1.0 - q
