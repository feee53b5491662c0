"""Integer encodings of chain states used by the particle engine.

The engine stores a population as two aligned int64 arrays (state codes,
counts).  Each codec maps states to codes, lists one-step transition rows in
a fixed destination order, and answers the geometric queries the observers
need (depth, ancestors) in vectorised form.

Tree vertices are numbered breadth first: the root is 0, the root's children
are ``1..d`` and the children of a vertex ``v >= 1`` are
``(v - 1)(d - 1) + d + 1 + a`` for ``a in 0..d-2``.

``TreeCodec(d, resolution=K)`` is the exact lumping of the tree walk that
keeps vertices up to depth ``K`` and forgets everything about deeper
vertices except their depth-``K`` ancestor and their depth.  Observables
that only look at cylinders of depth ``<= K`` (and at the root) have the same
law under the lumped chain, and the lumped population has O(K-ball x depth)
occupied states instead of O(particles).
"""
import numpy as np

from .errors import EncodingError

INT64_MAX = np.iinfo(np.int64).max


def conditional_split(probs):
    """Sequential-binomial split probabilities for rows of ``probs``.

    ``cond[..., j] = p_j / (1 - sum_{i<j} p_i)``; the last positive entry of
    each row is pinned to exactly 1 and padding (``p == 0``) stays 0.
    """
    probs = np.asarray(probs, dtype=np.float64)
    rem = 1.0 - np.cumsum(probs, axis=-1) + probs
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(probs > 0, probs / rem, 0.0)
    cond = np.minimum(cond, 1.0)
    pos = probs > 0
    # index of last positive entry in each row
    last = probs.shape[-1] - 1 - np.argmax(pos[..., ::-1], axis=-1)
    np.put_along_axis(cond, last[..., None], 1.0, axis=-1)
    return cond


class TreeCodec:
    kind = "tree"

    def __init__(self, degree, resolution=None):
        d = int(degree)
        self.d = d
        self.resolution = resolution
        # level starts S[k] = number of vertices of depth < k, while they fit
        starts = [0, 1]
        width = d
        while starts[-1] + width <= INT64_MAX // 2:
            starts.append(starts[-1] + width)
            width *= d - 1
        self.starts_py = starts
        self.starts = np.array(starts, dtype=np.int64)
        # deepest depth whose whole level is encodable
        self.max_depth = len(starts) - 2
        # (d-1)^j for every j a depth difference can take
        self.pw = np.array([(d - 1) ** j for j in range(len(starts))], dtype=np.int64)
        if resolution is not None:
            K = int(resolution)
            if K < 0 or K > self.max_depth - 1:
                raise EncodingError(f"resolution {K} out of range for degree {d}")
            self.K = K
            self.nK = 1 if K == 0 else d * (d - 1) ** (K - 1)
            self.lump0 = starts[K + 1]
            self.max_depth = (INT64_MAX - self.lump0) // self.nK + K
        self._table_size = 0
        self._offsets = {}
        probs = np.full(d, 1.0 / d)
        self._uniform_cond = conditional_split(probs)

    # ------------------------------------------------------------------ words
    def encode_state(self, word):
        return self.encode_word(word)

    def decode_state(self, code):
        return self.decode(code)

    def encode_word(self, word):
        d = self.d
        if len(word) > self.max_depth:
            raise EncodingError(f"word of length {len(word)} too deep to encode")
        if self.resolution is not None and len(word) > self.K:
            anc = self.encode_word(word[: self.K])
            return self.lump_code(anc, len(word))
        code = 0
        for i, a in enumerate(word):
            code = 1 + a if i == 0 else (code - 1) * (d - 1) + d + 1 + a
        return code

    def lump_code(self, anc, depth):
        return self.lump0 + (depth - self.K - 1) * self.nK + (anc - self.starts_py[self.K])

    def decode_vertex(self, code):
        """Word of a (non-lumped) vertex code."""
        code = int(code)
        d = self.d
        letters = []
        while code > d:
            q, a = divmod(code - d - 1, d - 1)
            letters.append(a)
            code = q + 1
        if code > 0:
            letters.append(code - 1)
        return tuple(reversed(letters))

    def decode(self, code):
        code = int(code)
        if self.resolution is not None and code >= self.lump0:
            off = code - self.lump0
            t, j = divmod(off, self.nK)
            return ("lumped", self.decode_vertex(self.starts_py[self.K] + j), self.K + 1 + t)
        return self.decode_vertex(code)

    # ------------------------------------------------------------- vectorised
    def _vertex_depth(self, codes):
        return np.searchsorted(self.starts, codes, side="right") - 1

    def _is_lumped(self, codes):
        if self.resolution is None:
            return np.zeros(codes.shape, dtype=bool)
        return codes >= self.lump0

    def depth(self, codes):
        codes = np.asarray(codes, dtype=np.int64)
        dep = self._vertex_depth(codes)
        if self.resolution is not None:
            lum = codes >= self.lump0
            if lum.any():
                dep = np.where(lum, self.K + 1 + (codes - self.lump0) // self.nK, dep)
        return dep

    def parent(self, codes):
        """Parent of plain vertex codes (root maps to itself)."""
        d = self.d
        codes = np.asarray(codes, dtype=np.int64)
        return np.where(codes > d, (codes - d - 1) // (d - 1) + 1, 0)

    def level_size(self, k):
        return 1 if k == 0 else self.d * (self.d - 1) ** (k - 1)

    def anc_offsets(self, codes, K):
        """Depth and depth-``k`` ancestor level offsets for ``k = 1..K``.

        Returns ``(depth, A)`` with ``A[k-1]`` the offset of the depth-``k``
        ancestor within its level, ``-1`` where the state is shallower.  Uses
        ``offset_k = offset_t // (d-1)^(t-k)`` (breadth-first numbering).
        """
        codes = np.asarray(codes, dtype=np.int64)
        dep = self.depth(codes)
        t = dep
        v = codes
        if self.resolution is not None:
            if K > self.K:
                raise EncodingError(f"ancestor depth {K} exceeds lumping resolution {self.K}")
            lum = codes >= self.lump0
            if lum.any():
                v = np.where(lum, self.starts_py[self.K] + (codes - self.lump0) % self.nK, codes)
                t = np.where(lum, self.K, dep)
        off = v - self.starts[t]
        A = np.full((K, codes.shape[0]), -1, dtype=np.int64)
        for k in range(1, K + 1):
            ok = t >= k
            A[k - 1, ok] = off[ok] // self.pw[t[ok] - k]
        return dep, A

    def ancestor(self, codes, k):
        """Code of the depth-``k`` ancestor; -1 where the state is shallower."""
        codes = np.asarray(codes, dtype=np.int64)
        if k == 0:
            return np.zeros(codes.shape, dtype=np.int64)
        _, A = self.anc_offsets(codes, k)
        a = A[k - 1]
        return np.where(a >= 0, self.starts_py[k] + a, -1)

    def level_offset(self, word):
        return self.encode_word(word) - self.starts_py[len(word)]

    def prefix_offsets(self, word):
        """Level offsets of every prefix of ``word``, the empty one first (memoised)."""
        word = tuple(word)
        out = self._offsets.get(word)
        if out is None:
            out = [0] + [self.level_offset(word[:k]) for k in range(1, len(word) + 1)]
            self._offsets[word] = out
        return out

    def children(self, codes, a):
        d = self.d
        codes = np.asarray(codes, dtype=np.int64)
        return np.where(codes == 0, 1 + a, (codes - 1) * (d - 1) + d + 1 + a)

    def rows(self, codes):
        """Destination codes and conditional split probabilities, shape (S, d)."""
        d = self.d
        codes = np.asarray(codes, dtype=np.int64)
        S = codes.shape[0]
        dest = np.empty((S, d), dtype=np.int64)
        if self.resolution is None:
            dest[:, 0] = np.where(codes == 0, 1, self.parent(codes))
            for a in range(d - 1):
                dest[:, a + 1] = np.where(codes == 0, a + 2, self.children(codes, a))
            cond = np.broadcast_to(self._uniform_cond, (S, d))
            return dest, np.ascontiguousarray(cond)
        # lumped codes are dense, so rows come from a table grown on demand
        top = int(codes.max()) + 1 if S else 0
        if top > self._table_size:
            size = max(top, 2 * self._table_size, 64)
            span = np.arange(size, dtype=np.int64)
            self._dest_table, self._cond_table = self._lumped_rows(span, np.empty((size, d), np.int64))
            self._table_size = size
        return self._dest_table[codes], self._cond_table[codes]

    def _lumped_rows(self, codes, dest):
        d, K = self.d, self.K
        S = codes.shape[0]
        probs = np.zeros((S, d))
        dep = self.depth(codes)
        lum = codes >= self.lump0
        shallow = ~lum & (dep < K)
        edge = ~lum & (dep == K)
        dest[:] = -1
        if shallow.any():
            c = codes[shallow]
            dest[shallow, 0] = np.where(c == 0, 1, self.parent(c))
            for a in range(d - 1):
                dest[shallow, a + 1] = np.where(c == 0, a + 2, self.children(c, a))
            probs[shallow] = 1.0 / d
        if edge.any():
            c = codes[edge]
            if K == 0:
                dest[edge, 0] = self.lump0
                probs[edge, 0] = 1.0
            else:
                dest[edge, 0] = self.parent(c)
                dest[edge, 1] = self.lump0 + (c - self.starts_py[K])
                probs[edge, 0] = 1.0 / d
                probs[edge, 1] = (d - 1) / d
        if lum.any():
            c = codes[lum]
            t = dep[lum]
            j = (c - self.lump0) % self.nK
            dest[lum, 0] = np.where(t - 1 == K, self.starts_py[K] + j, c - self.nK)
            dest[lum, 1] = c + self.nK
            probs[lum, 0] = 1.0 / d
            probs[lum, 1] = (d - 1) / d
        return dest, conditional_split(probs)


class LineCodec:
    kind = "line"

    def __init__(self, p):
        self.p = float(p)
        self._cond = conditional_split(np.array([self.p, 1.0 - self.p]))

    def encode_state(self, x):
        return int(x)

    def decode_state(self, code):
        return int(code)

    def rows(self, codes):
        codes = np.asarray(codes, dtype=np.int64)
        dest = np.stack([codes + 1, codes - 1], axis=1)
        cond = np.broadcast_to(self._cond, dest.shape)
        return dest, np.ascontiguousarray(cond)

    def depth(self, codes):
        return np.abs(np.asarray(codes, dtype=np.int64))


class LatticeCodec:
    kind = "lattice"
    BITS = 21
    OFFSET = 1 << 20

    def __init__(self):
        self._cond = conditional_split(np.full(6, 1.0 / 6.0))
        b = self.BITS
        self._steps = np.array(
            [1 << (2 * b), -(1 << (2 * b)), 1 << b, -(1 << b), 1, -1], dtype=np.int64
        )

    def encode_point(self, pt):
        x, y, z = pt
        o, b = self.OFFSET, self.BITS
        if max(abs(x), abs(y), abs(z)) >= o - 1:
            raise EncodingError(f"lattice point {pt} outside the encodable box")
        return ((x + o) << (2 * b)) | ((y + o) << b) | (z + o)

    def encode_state(self, pt):
        return self.encode_point(pt)

    def decode_state(self, code):
        return self.decode(code)

    def decode(self, code):
        code = int(code)
        o, b = self.OFFSET, self.BITS
        mask = (1 << b) - 1
        return ((code >> (2 * b)) - o, ((code >> b) & mask) - o, (code & mask) - o)

    def coords(self, codes):
        codes = np.asarray(codes, dtype=np.int64)
        o, b = self.OFFSET, self.BITS
        mask = (1 << b) - 1
        return ((codes >> (2 * b)) - o, ((codes >> b) & mask) - o, (codes & mask) - o)

    def rows(self, codes):
        codes = np.asarray(codes, dtype=np.int64)
        dest = codes[:, None] + self._steps[None, :]
        cond = np.broadcast_to(self._cond, dest.shape)
        return dest, np.ascontiguousarray(cond)

    def depth(self, codes):
        x, y, z = self.coords(codes)
        return np.abs(x) + np.abs(y) + np.abs(z)
