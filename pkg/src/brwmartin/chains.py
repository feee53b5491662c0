"""Catalog of transient Markov chains and their potential-theory primitives.

Three models cover the boundary regimes of interest:

* ``RegularTree(d)``  simple walk on the d-regular tree (rich boundary),
* ``DriftedLine(p)``  nearest-neighbour walk on Z with right-step probability
  ``p > 1/2`` (two Martin boundary points, one of them harmonic),
* ``Lattice3D()``     simple walk on Z^3 (one-point boundary).

States are plain Python values: tree vertices are tuples of letters (the
non-backtracking word from the root, first letter in ``0..d-1`` and later
letters in ``0..d-2``), line states are ints and lattice states are integer
triples.
"""
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from math import sqrt

import numpy as np
from scipy import sparse

from . import _backend
from ._codes import LatticeCodec, LineCodec, TreeCodec
from .errors import DomainError, EncodingError
from .rng import stream

__all__ = [
    "ChainModel",
    "RegularTree",
    "DriftedLine",
    "Lattice3D",
    "parse_chain",
    "transition_row",
    "green_exact",
    "green_mc",
    "spectral_radius",
    "truncated_spectral_radius",
    "simulate_walk",
    "tree_distance",
]


class ChainModel:
    """Base class; concrete models are frozen dataclasses."""

    kind = None

    @property
    def origin(self):
        raise NotImplementedError

    def validate(self, x):
        raise NotImplementedError

    def codec(self, resolution=None):
        raise NotImplementedError

    def encode(self, x):
        return self.codec().encode_state(self.validate(x))

    def random_state(self, rng, radius=6):
        raise NotImplementedError

    def spec_string(self):
        raise NotImplementedError


@dataclass(frozen=True)
class RegularTree(ChainModel):
    degree: int
    kind = "regular_tree"

    def __post_init__(self):
        if not isinstance(self.degree, (int, np.integer)) or self.degree < 3:
            raise DomainError(f"RegularTree needs an integer degree >= 3, got {self.degree!r}")

    @property
    def origin(self):
        return ()

    @property
    def first_passage(self):
        """Probability the walk ever steps to a fixed neighbour, ``1/(d-1)``."""
        return 1.0 / (self.degree - 1)

    def validate(self, x):
        if x == "root":
            return ()
        try:
            word = tuple(int(a) for a in x)
        except (TypeError, ValueError):
            raise EncodingError(f"tree state must be a word (tuple of letters), got {x!r}") from None
        d = self.degree
        for i, a in enumerate(word):
            top = d - 1 if i == 0 else d - 2
            if not 0 <= a <= top:
                raise EncodingError(f"letter {a} at position {i} outside 0..{top} in word {word}")
        return word

    def neighbors(self, word):
        d = self.degree
        if not word:
            return [(a,) for a in range(d)]
        return [word[:-1]] + [word + (a,) for a in range(d - 1)]

    def codec(self, resolution=None):
        return _tree_codec(self.degree, resolution)

    def random_state(self, rng, radius=6):
        n = int(rng.integers(0, radius + 1))
        if n == 0:
            return ()
        first = int(rng.integers(0, self.degree))
        rest = rng.integers(0, self.degree - 1, size=n - 1)
        return (first,) + tuple(int(a) for a in rest)

    def spec_string(self):
        return f"regular_tree:{self.degree}"


@dataclass(frozen=True)
class DriftedLine(ChainModel):
    p: float
    kind = "drifted_line"

    def __post_init__(self):
        if not 0.5 < float(self.p) < 1.0:
            raise DomainError(f"DriftedLine needs 1/2 < p < 1, got {self.p!r}")
        object.__setattr__(self, "p", float(self.p))

    @property
    def q(self):
        return 1.0 - self.p

    @property
    def rational_p(self):
        """``p`` as the simplest fraction (denominator <= 10**6) that rounds to it."""
        r = Fraction(self.p).limit_denominator(10**6)
        return r if float(r) == self.p else Fraction(self.p)

    @property
    def origin(self):
        return 0

    def validate(self, x):
        if isinstance(x, bool) or not isinstance(x, (int, np.integer)):
            raise EncodingError(f"line state must be an integer, got {x!r}")
        return int(x)

    def neighbors(self, x):
        return [x + 1, x - 1]

    def codec(self, resolution=None):
        return LineCodec(self.p)

    def random_state(self, rng, radius=6):
        return int(rng.integers(-radius, radius + 1))

    def spec_string(self):
        return f"drifted_line:{self.p!r}"


@dataclass(frozen=True)
class Lattice3D(ChainModel):
    kind = "lattice3d"

    @property
    def origin(self):
        return (0, 0, 0)

    def validate(self, x):
        try:
            pt = tuple(int(c) for c in x)
        except (TypeError, ValueError):
            raise EncodingError(f"lattice state must be an integer triple, got {x!r}") from None
        if len(pt) != 3 or any(float(c) != float(v) for c, v in zip(pt, x)):
            raise EncodingError(f"lattice state must be an integer triple, got {x!r}")
        return pt

    def neighbors(self, pt):
        x, y, z = pt
        return [(x + 1, y, z), (x - 1, y, z), (x, y + 1, z), (x, y - 1, z), (x, y, z + 1), (x, y, z - 1)]

    def codec(self, resolution=None):
        return _LATTICE_CODEC

    def random_state(self, rng, radius=6):
        return tuple(int(c) for c in rng.integers(-radius, radius + 1, size=3))

    def spec_string(self):
        return "lattice3d"


_TREE_CODECS = {}
_LATTICE_CODEC = LatticeCodec()


def _tree_codec(d, resolution):
    key = (d, resolution)
    if key not in _TREE_CODECS:
        _TREE_CODECS[key] = TreeCodec(d, resolution)
    return _TREE_CODECS[key]


def parse_chain(text):
    """Parse ``regular_tree:3``, ``drifted_line:2/3`` or ``lattice3d``."""
    from fractions import Fraction

    kind, _, arg = text.strip().partition(":")
    kind = kind.strip().lower()
    try:
        if kind in ("regular_tree", "tree"):
            return RegularTree(int(arg))
        if kind in ("drifted_line", "line"):
            return DriftedLine(float(Fraction(arg.strip())))
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"bad chain parameter in {text!r}") from None
    if kind in ("lattice3d", "lattice"):
        if arg:
            raise DomainError("lattice3d takes no parameters")
        return Lattice3D()
    raise DomainError(f"unknown chain kind {kind!r}")


# --------------------------------------------------------------------------
# exact one-step law


def transition_row(chain, x):
    """Exact one-step law from ``x`` as a list of ``(state, probability)``."""
    x = chain.validate(x)
    if isinstance(chain, RegularTree):
        w = 1.0 / chain.degree
        return [(y, w) for y in chain.neighbors(x)]
    if isinstance(chain, DriftedLine):
        return [(x + 1, chain.p), (x - 1, chain.q)]
    if isinstance(chain, Lattice3D):
        return [(y, 1.0 / 6.0) for y in chain.neighbors(x)]
    raise DomainError(f"unsupported chain {chain!r}")


def tree_distance(a, b):
    cp = 0
    for u, v in zip(a, b):
        if u != v:
            break
        cp += 1
    return len(a) + len(b) - 2 * cp


# --------------------------------------------------------------------------
# Green's function


def green_exact(chain, x, y):
    """Closed-form Green's function, or ``None`` where no closed form is shipped."""
    x = chain.validate(x)
    y = chain.validate(y)
    if isinstance(chain, RegularTree):
        d = chain.degree
        F = chain.first_passage
        return F ** tree_distance(x, y) * (d - 1) / (d - 2)
    if isinstance(chain, DriftedLine):
        # rational arithmetic so that p = 2/3 gives G(0, 0) = 3 exactly
        p = chain.rational_p
        q = 1 - p
        return float((q / p) ** max(x - y, 0) / (p - q))
    return None


def green_mc(chain, x, y, walks=100_000, horizon=200, rng=0, backend=None):
    """Monte-Carlo estimate of the expected number of visits to ``y`` within ``horizon`` steps.

    Returns ``(estimate, std_error)``.  Deterministic given the seed.
    """
    if walks < 1 or horizon < 1:
        raise DomainError("walks and horizon must be >= 1")
    x = chain.validate(x)
    y = chain.validate(y)
    rng = stream(rng)
    k = _backend.get(backend)
    if isinstance(chain, RegularTree):
        # distance to y is itself a Markov chain; visits to y are its visits to 0
        visits = k.walk_visits_tree(tree_distance(x, y), chain.degree, walks, horizon, rng)
    elif isinstance(chain, DriftedLine):
        visits = k.walk_visits_line(y - x, chain.p, walks, horizon, rng)
    elif isinstance(chain, Lattice3D):
        visits = k.walk_visits_lattice(tuple(b - a for a, b in zip(x, y)), walks, horizon, rng)
    else:
        raise DomainError(f"unsupported chain {chain!r}")
    visits = np.asarray(visits, dtype=np.float64)
    est = float(visits.mean())
    se = float(visits.std(ddof=1) / sqrt(walks)) if walks > 1 else float("nan")
    return est, se


# --------------------------------------------------------------------------
# spectral radius


def spectral_radius(chain):
    if isinstance(chain, RegularTree):
        d = chain.degree
        return 2.0 * sqrt(d - 1) / d
    if isinstance(chain, DriftedLine):
        return 2.0 * sqrt(chain.p * chain.q)
    if isinstance(chain, Lattice3D):
        return 1.0
    raise DomainError(f"unsupported chain {chain!r}")


def _killed_operator(chain, radius):
    """Transition operator killed outside a ball, as a sparse matrix.

    The tree is reduced to its distance-from-root chain, which has the same
    return probabilities and hence the same spectral radius.
    """
    R = int(radius)
    if isinstance(chain, RegularTree):
        d = chain.degree
        rows, cols, vals = [0], [1], [1.0]
        for r in range(1, R + 1):
            rows.append(r), cols.append(r - 1), vals.append(1.0 / d)
            if r + 1 <= R:
                rows.append(r), cols.append(r + 1), vals.append((d - 1) / d)
        n = R + 1
    elif isinstance(chain, DriftedLine):
        n = 2 * R + 1
        rows, cols, vals = [], [], []
        for i in range(n):
            if i + 1 < n:
                rows.append(i), cols.append(i + 1), vals.append(chain.p)
            if i - 1 >= 0:
                rows.append(i), cols.append(i - 1), vals.append(chain.q)
    elif isinstance(chain, Lattice3D):
        side = 2 * R + 1
        n = side**3
        idx = np.arange(n).reshape(side, side, side)
        rows, cols, vals = [], [], []
        for axis in range(3):
            for shift in (1, -1):
                src = np.moveaxis(idx, axis, 0)
                a = src[max(0, -shift): side - max(0, shift)]
                b = src[max(0, shift): side - max(0, -shift)]
                rows.append(a.ravel()), cols.append(b.ravel())
                vals.append(np.full(a.size, 1.0 / 6.0))
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        raise DomainError(f"unsupported chain {chain!r}")
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def truncated_spectral_radius(chain, radius=30, tol=1e-13, max_iter=1_000_000):
    """Power iteration for the top eigenvalue of the walk killed outside a ball.

    Iterates the lazy operator ``(I + P)/2`` (the chains are bipartite, so ``P``
    itself has eigenvalues ``+-lambda``) and returns the converged growth
    ratio mapped back to ``P``.  Increases to :func:`spectral_radius` as the
    radius grows.
    """
    P = _killed_operator(chain, radius)
    v = np.ones(P.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = 0.5 * (v + P @ v)
        new = float(np.linalg.norm(w))
        w /= new
        if abs(new - lam) < tol and np.max(np.abs(w - v)) < sqrt(tol):
            lam = new
            break
        lam, v = new, w
    return 2.0 * lam - 1.0


# --------------------------------------------------------------------------
# single trajectories


class TreePath(Sequence):
    """Tree trajectory stored as a persistent stack (O(horizon) memory)."""

    def __init__(self, nodes, parent, letter):
        self._nodes = nodes
        self._parent = parent
        self._letter = letter
        self._depth = self._compute_depths()

    def _compute_depths(self):
        depth = np.zeros(len(self._parent), dtype=np.int64)
        for i in range(1, len(self._parent)):
            depth[i] = depth[self._parent[i]] + 1
        return depth

    def __len__(self):
        return len(self._nodes)

    def depth(self, t):
        return int(self._depth[self._nodes[t]])

    def __getitem__(self, t):
        if isinstance(t, slice):
            return [self[i] for i in range(*t.indices(len(self)))]
        node = self._nodes[t]
        letters = []
        while node != 0:
            letters.append(self._letter[node])
            node = self._parent[node]
        return tuple(reversed(letters))


def simulate_walk(chain, start, horizon, rng=0):
    """Trajectory of ``horizon`` steps from ``start`` (``horizon + 1`` states)."""
    if horizon < 0:
        raise DomainError("horizon must be >= 0")
    start = chain.validate(start)
    rng = stream(rng)
    u = rng.random(horizon)
    if isinstance(chain, RegularTree):
        d = chain.degree
        parent, letter = [0], [-1]
        node = 0
        for a in start:
            parent.append(node), letter.append(a)
            node = len(parent) - 1
        nodes = [node]
        for j in (u * d).astype(np.int64).tolist():
            if node == 0:
                parent.append(0), letter.append(j)
                node = len(parent) - 1
            elif j == 0:
                node = parent[node]
            else:
                parent.append(node), letter.append(j - 1)
                node = len(parent) - 1
            nodes.append(node)
        return TreePath(nodes, parent, letter)
    if isinstance(chain, DriftedLine):
        steps = np.where(u < chain.p, 1, -1)
        return [start] + (start + np.cumsum(steps)).tolist()
    if isinstance(chain, Lattice3D):
        j = (u * 6).astype(np.int64)
        inc = np.zeros((horizon, 3), dtype=np.int64)
        inc[np.arange(horizon), j // 2] = np.where(j % 2 == 0, 1, -1)
        pos = np.asarray(start) + np.cumsum(inc, axis=0)
        return [start] + [tuple(r) for r in pos.tolist()]
    raise DomainError(f"unsupported chain {chain!r}")
