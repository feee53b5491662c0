"""Martin kernels, harmonic measures and harmonic extensions for the chain catalog.

Boundary points are never materialised as infinite objects.  A tree ray is
named by a finite word and continues with letter 0 forever; the clopen test
sets are cylinders (tree: all rays through a vertex; line: one endpoint;
lattice: the whole one-point boundary).
"""
from dataclasses import dataclass
from itertools import product
from math import sqrt

import numpy as np

from . import _backend
from .chains import DriftedLine, Lattice3D, RegularTree, green_exact, green_mc, tree_distance
from .errors import ClosedFormUnavailable, ConfigError, DomainError, EncodingError
from .rng import stream

__all__ = [
    "TreeRay",
    "LineEnd",
    "PLUS_INFINITY",
    "MINUS_INFINITY",
    "LatticeInfinity",
    "LATTICE_INFINITY",
    "TreeCylinder",
    "LineCylinder",
    "FullBoundary",
    "CompactificationPoint",
    "cylinder",
    "cylinder_family",
    "martin_kernel",
    "martin_kernel_mc",
    "harmonic_measure",
    "harmonic_measure_mc",
    "harmonic_extension",
    "harmonic_extension_mc",
    "compactification_distance",
    "ConstantOne",
    "CylinderExtension",
    "KernelFunction",
]

COMMITMENT_MARGIN = 20


# --------------------------------------------------------------------------
# boundary points


@dataclass(frozen=True)
class TreeRay:
    """The ray through ``prefix`` continued by letter 0 at every later step."""

    prefix: tuple = ()

    def __post_init__(self):
        # trailing zeros name the same ray; keep one canonical prefix
        p = tuple(int(a) for a in self.prefix)
        while p and p[-1] == 0:
            p = p[:-1]
        object.__setattr__(self, "prefix", p)

    def letter(self, i):
        return self.prefix[i] if i < len(self.prefix) else 0

    def word(self, n):
        return tuple(self.letter(i) for i in range(n))

    def __str__(self):
        return "ray[" + ".".join(map(str, self.prefix + (0,))) + "...]"


@dataclass(frozen=True)
class LineEnd:
    sign: int

    def __str__(self):
        return "+inf" if self.sign > 0 else "-inf"


PLUS_INFINITY = LineEnd(+1)
MINUS_INFINITY = LineEnd(-1)


@dataclass(frozen=True)
class LatticeInfinity:
    def __str__(self):
        return "1"


LATTICE_INFINITY = LatticeInfinity()


def _check_boundary(chain, xi):
    if isinstance(chain, RegularTree) and isinstance(xi, TreeRay):
        chain.validate(xi.prefix)
        return xi
    if isinstance(chain, DriftedLine) and isinstance(xi, LineEnd):
        return xi
    if isinstance(chain, Lattice3D) and isinstance(xi, LatticeInfinity):
        return xi
    raise EncodingError(f"{xi!r} is not a boundary point of {chain!r}")


def _is_boundary(obj):
    return isinstance(obj, (TreeRay, LineEnd, LatticeInfinity))


# --------------------------------------------------------------------------
# cylinders


@dataclass(frozen=True)
class TreeCylinder:
    """Rays through the vertex ``word``; interior shadow is the subtree below it."""

    word: tuple

    @property
    def depth(self):
        return len(self.word)

    @property
    def label(self):
        return "C[" + ".".join(map(str, self.word)) + "]"

    def shadow(self, codec, codes):
        k = len(self.word)
        return codec.ancestor(codes, k) == codec.encode_word(self.word)

    def mass_from(self, agg):
        return agg.mass(self.word)

    def contains(self, x):
        return tuple(x[: len(self.word)]) == self.word


@dataclass(frozen=True)
class LineCylinder:
    """One endpoint; interior shadow is ``x > 0`` for +inf and ``x <= 0`` for -inf."""

    sign: int

    depth = 1

    @property
    def label(self):
        return "C[+inf]" if self.sign > 0 else "C[-inf]"

    def shadow(self, codec, codes):
        codes = np.asarray(codes)
        return codes > 0 if self.sign > 0 else codes <= 0

    def contains(self, x):
        return x > 0 if self.sign > 0 else x <= 0


@dataclass(frozen=True)
class FullBoundary:
    depth = 0
    label = "C[all]"

    def shadow(self, codec, codes):
        return np.ones(np.shape(codes), dtype=bool)

    def contains(self, x):
        return True


def cylinder(chain, what):
    """Build a cylinder from a word, ``'+inf'``/``'-inf'`` or ``'all'``."""
    if isinstance(what, (TreeCylinder, LineCylinder, FullBoundary)):
        return _check_cylinder(chain, what)
    if what in ("all", "full", None):
        return FullBoundary()
    if isinstance(chain, RegularTree):
        if isinstance(what, str):
            what = tuple(int(a) for a in what.replace(",", ".").split(".") if a != "")
        word = chain.validate(what)
        if not word:
            raise EncodingError("tree cylinders need a nonempty word")
        return TreeCylinder(word)
    if isinstance(chain, DriftedLine):
        if what in ("+inf", "+", "plus", PLUS_INFINITY, +1):
            return LineCylinder(+1)
        if what in ("-inf", "-", "minus", MINUS_INFINITY, -1):
            return LineCylinder(-1)
    raise EncodingError(f"cannot build a cylinder of {chain!r} from {what!r}")


def _check_cylinder(chain, C):
    if isinstance(C, FullBoundary):
        return C
    if isinstance(chain, RegularTree) and isinstance(C, TreeCylinder):
        if not C.word:
            raise EncodingError("tree cylinders need a nonempty word")
        chain.validate(C.word)
        return C
    if isinstance(chain, DriftedLine) and isinstance(C, LineCylinder):
        return C
    raise EncodingError(f"{C!r} is not a cylinder of {chain!r}")


def cylinder_family(chain, depth=3):
    """All cylinders of depth ``1..depth`` (tree), both endpoints (line) or the full boundary."""
    if isinstance(chain, RegularTree):
        d = chain.degree
        out = []
        for k in range(1, depth + 1):
            for first in range(d):
                for rest in product(range(d - 1), repeat=k - 1):
                    out.append(TreeCylinder((first,) + rest))
        return out
    if isinstance(chain, DriftedLine):
        return [LineCylinder(+1), LineCylinder(-1)]
    return [FullBoundary()]


# --------------------------------------------------------------------------
# Martin kernel


def _ray_common_prefix(x, ray):
    k = 0
    for i, a in enumerate(x):
        if a != ray.letter(i):
            break
        k += 1
    return k


def martin_kernel(chain, x, target):
    """``K(x, target) = G(x, y)/G(o, y)`` and its boundary extension."""
    x = chain.validate(x)
    if isinstance(chain, RegularTree):
        F = chain.first_passage
        if _is_boundary(target):
            ray = _check_boundary(chain, target)
            return F ** (len(x) - 2 * _ray_common_prefix(x, ray))
        y = chain.validate(target)
        return F ** (tree_distance(x, y) - len(y))
    if isinstance(chain, DriftedLine):
        if _is_boundary(target):
            xi = _check_boundary(chain, target)
            return 1.0 if xi.sign > 0 else float((1 / chain.rational_p - 1) ** x)
        y = chain.validate(target)
        return green_exact(chain, x, y) / green_exact(chain, chain.origin, y)
    if isinstance(chain, Lattice3D):
        if _is_boundary(target):
            _check_boundary(chain, target)
            return 1.0
        chain.validate(target)
        raise ClosedFormUnavailable(
            "no closed-form lattice Green's function; use martin_kernel_mc"
        )
    raise DomainError(f"unsupported chain {chain!r}")


def martin_kernel_mc(chain, x, y, walks=100_000, horizon=10_000, rng=0):
    """Ratio of Monte-Carlo Green estimates with a delta-method standard error."""
    rng = stream(rng)
    gx, sx = green_mc(chain, x, y, walks, horizon, rng)
    go, so = green_mc(chain, chain.origin, y, walks, horizon, rng)
    ratio = gx / go
    return ratio, abs(ratio) * sqrt((sx / gx) ** 2 + (so / go) ** 2)


# --------------------------------------------------------------------------
# harmonic measure and extensions


def harmonic_measure(chain, C):
    """Law of the walk's limit point from the origin, evaluated on a cylinder."""
    C = _check_cylinder(chain, C)
    if isinstance(C, FullBoundary):
        return 1.0
    if isinstance(chain, RegularTree):
        d = chain.degree
        return chain.first_passage ** len(C.word) * (d - 1) / d
    if isinstance(chain, DriftedLine):
        return 1.0 if C.sign > 0 else 0.0
    raise DomainError(f"unsupported chain {chain!r}")


def harmonic_extension(chain, C, x):
    """``P_x(X_inf in C)``."""
    C = _check_cylinder(chain, C)
    x = chain.validate(x)
    if isinstance(C, FullBoundary):
        return 1.0
    if isinstance(chain, RegularTree):
        d = chain.degree
        F = chain.first_passage
        dist = tree_distance(x, C.word)
        if C.contains(x):
            return 1.0 - F**dist / d
        return F**dist * (d - 1) / d
    if isinstance(chain, DriftedLine):
        return 1.0 if C.sign > 0 else 0.0
    raise DomainError(f"unsupported chain {chain!r}")


def _committed_fraction(chain, C, start, walks, horizon, rng, margin, backend):
    if isinstance(C, FullBoundary):
        return np.ones(walks)
    k = _backend.get(backend)
    if isinstance(chain, RegularTree):
        d = chain.degree
        L = len(C.word)
        if horizon * (d - 2) / d < 2 * (L + margin + len(start)):
            raise ConfigError(
                f"horizon {horizon} too small to commit depth-{L} cylinders with margin {margin}",
                key="horizon",
            )
        depth, prefix = k.walk_tree_prefix(tuple(start), d, L, walks, horizon, rng)
        hit = np.all(prefix == np.asarray(C.word, dtype=np.int64), axis=1) & (depth >= L + margin)
        return hit.astype(np.float64)
    if isinstance(chain, DriftedLine):
        xT = k.walk_line_terminal(int(start), chain.p, walks, horizon, rng)
        return (xT > 0 if C.sign > 0 else xT <= 0).astype(np.float64)
    raise DomainError(f"unsupported chain {chain!r}")


def harmonic_measure_mc(chain, C, walks=100_000, horizon=400, rng=0,
                        margin=COMMITMENT_MARGIN, backend=None):
    """Fraction of walks from the origin whose terminal state classifies into ``C``.

    Returns ``(estimate, std_error)``.
    """
    return harmonic_extension_mc(chain, C, chain.origin, walks, horizon, rng, margin, backend)


def harmonic_extension_mc(chain, C, x, walks=100_000, horizon=400, rng=0,
                          margin=COMMITMENT_MARGIN, backend=None):
    C = _check_cylinder(chain, C)
    x = chain.validate(x)
    if walks < 1:
        raise DomainError("walks must be >= 1")
    hits = _committed_fraction(chain, C, x, walks, horizon, stream(rng), margin, backend)
    est = float(hits.mean())
    se = float(sqrt(est * (1.0 - est) / walks))
    return est, se


# --------------------------------------------------------------------------
# compactification metric


@dataclass(frozen=True)
class CompactificationPoint:
    chain: object
    point: object

    def __post_init__(self):
        if _is_boundary(self.point):
            _check_boundary(self.chain, self.point)
        else:
            object.__setattr__(self, "point", self.chain.validate(self.point))


def compactification_distance(a, b):
    """Ultrametric on the compactification (a diagnostic device only)."""
    if a.chain != b.chain:
        raise DomainError("points belong to different chains")
    if a.point == b.point:
        return 0.0
    chain = a.chain
    if isinstance(chain, RegularTree):
        u, v = a.point, b.point
        if isinstance(u, TreeRay) and isinstance(v, TreeRay):
            # distinct rays share a finite prefix
            i = 0
            while u.letter(i) == v.letter(i) and i <= max(len(u.prefix), len(v.prefix)):
                i += 1
            return 2.0**-i
        if isinstance(u, TreeRay):
            u, v = v, u
        if isinstance(v, TreeRay):
            return 2.0 ** -_ray_common_prefix(u, v)
        cp = (len(u) + len(v) - tree_distance(u, v)) // 2
        return 2.0**-cp
    if isinstance(chain, DriftedLine):
        def sign_mag(pt):
            if isinstance(pt, LineEnd):
                return pt.sign, float("inf")
            return (1 if pt > 0 else -1 if pt < 0 else 0), abs(pt)

        (su, mu), (sv, mv) = sign_mag(a.point), sign_mag(b.point)
        if su != sv:
            return 1.0
        return 2.0 ** -min(mu, mv)
    if isinstance(chain, Lattice3D):
        def norm(pt):
            return float("inf") if isinstance(pt, LatticeInfinity) else sum(abs(c) for c in pt)

        return 2.0 ** -min(norm(a.point), norm(b.point))
    raise DomainError(f"unsupported chain {chain!r}")


# --------------------------------------------------------------------------
# per-generation tree aggregates


class TreeAggregates:
    """Counts and ``F^depth``-weighted counts summed over subtrees of depth <= K.

    ``N[k][a]`` is the number of particles in the subtree of the depth-``k``
    vertex with level offset ``a`` and ``Z[k][a]`` the same sum weighted by
    ``F^depth``.  Every cylinder mass and every cylinder-extension pairing of
    depth <= K is a short combination of these tables.
    """

    def __init__(self, chain, codec, codes, counts, K):
        self.F = chain.first_passage
        self.d = chain.degree
        dep, A = codec.anc_offsets(codes, K)
        fc = np.asarray(counts, dtype=np.float64)
        wz = fc * np.power(self.F, dep.astype(np.float64))
        self.N = [np.array([fc.sum()])]
        self.Z = [np.array([wz.sum()])]
        for k in range(1, K + 1):
            a = A[k - 1]
            ok = a >= 0
            size = codec.level_size(k)
            self.N.append(np.bincount(a[ok], weights=fc[ok], minlength=size))
            self.Z.append(np.bincount(a[ok], weights=wz[ok], minlength=size))
        self.codec = codec

    def mass(self, word):
        return float(self.N[len(word)][self.codec.prefix_offsets(word)[-1]])

    def extension_pairing(self, word):
        """``sum_x count(x) h_w(x)`` with ``h_w`` the harmonic extension of ``C_w``."""
        F, d = self.F, self.d
        L = len(word)
        offs = self.codec.prefix_offsets(word)
        z = [float(self.Z[c][offs[c]]) for c in range(L + 1)]
        total = 0.0
        for c in range(L):
            total += (z[c] - z[c + 1]) * F ** (L - 2 * c) * (d - 1) / d
        return total + float(self.N[L][offs[L]]) - F ** (-L) * z[L] / d


# --------------------------------------------------------------------------
# harmonic-function handles (scalar and vectorised over state codes)


class ConstantOne:
    label = "h=1"

    def __call__(self, chain, x):
        return 1.0

    def values(self, chain, codec, codes):
        return np.ones(np.shape(codes))


@dataclass(frozen=True)
class CylinderExtension:
    """``x -> P_x(X_inf in C)`` for a cylinder ``C``."""

    C: object

    @property
    def label(self):
        return "h" + self.C.label[1:]

    @property
    def depth(self):
        return self.C.depth

    def __call__(self, chain, x):
        return harmonic_extension(chain, self.C, x)

    def pair_tree(self, agg):
        if isinstance(self.C, FullBoundary):
            return float(agg.N[0][0])
        return agg.extension_pairing(self.C.word)

    def values(self, chain, codec, codes):
        C = self.C
        codes = np.asarray(codes, dtype=np.int64)
        if isinstance(C, FullBoundary):
            return np.ones(codes.shape)
        if isinstance(chain, DriftedLine):
            return np.full(codes.shape, 1.0 if C.sign > 0 else 0.0)
        d = chain.degree
        F = chain.first_passage
        L = len(C.word)
        dep = codec.depth(codes)
        cp = np.zeros(codes.shape, dtype=np.int64)
        for k in range(1, L + 1):
            match = codec.ancestor(codes, k) == codec.encode_word(C.word[:k])
            cp += match & (cp == k - 1)
        dist = dep + L - 2 * cp
        Fd = np.power(F, dist.astype(np.float64))
        return np.where(cp == L, 1.0 - Fd / d, Fd * (d - 1) / d)


@dataclass(frozen=True)
class KernelFunction:
    """``x -> K(x, xi)`` for a boundary point ``xi``."""

    target: object

    @property
    def label(self):
        return f"K[{self.target}]"

    def __call__(self, chain, x):
        return martin_kernel(chain, x, self.target)

    def values(self, chain, codec, codes):
        codes = np.asarray(codes, dtype=np.int64)
        xi = _check_boundary(chain, self.target)
        if isinstance(chain, Lattice3D):
            return np.ones(codes.shape)
        if isinstance(chain, DriftedLine):
            if xi.sign > 0:
                return np.ones(codes.shape)
            return np.power(chain.q / chain.p, codes.astype(np.float64))
        if getattr(codec, "resolution", None) is not None:
            raise ConfigError("Martin kernel tracks need the unlumped tree")
        if codes.size == 0:
            return np.zeros(0)
        dep = codec.depth(codes)
        top = int(dep.max())
        ray_off = np.array([0] + [codec.level_offset(xi.word(k)) for k in range(1, top + 1)], dtype=np.int64)
        off = codes - codec.starts[dep]
        # largest k <= depth whose ancestor lies on the ray (monotone in k)
        lo = np.zeros(codes.shape, dtype=np.int64)
        hi = dep.copy()
        while np.any(lo < hi):
            mid = (lo + hi + 1) // 2
            on = (mid == 0) | (off // codec.pw[np.maximum(dep - mid, 0)] == ray_off[mid])
            lo = np.where(on, mid, lo)
            hi = np.where(on, hi, mid - 1)
        t = lo
        return np.power(chain.first_passage, (dep - 2 * t).astype(np.float64))
