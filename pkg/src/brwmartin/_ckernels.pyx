# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled kernels; same draws in the same order as ``_pykernels``."""
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.stdint cimport int64_t
from libc.string cimport memset
from libcpp.algorithm cimport sort
from libcpp.pair cimport pair
from libcpp.vector cimport vector
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport binomial_t, random_binomial

import numpy as np

from .errors import PopulationOverflow

NAME = "cython"


cdef inline bitgen_t *_bitgen(rng) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline int64_t _split(bitgen_t *bg, binomial_t *b, int64_t rem, double c) noexcept nogil:
    if c >= 1.0:
        return rem
    if rem <= 0 or c <= 0.0:
        return 0
    return random_binomial(bg, c, rem, b)


def offspring_totals(const int64_t[::1] counts, const int64_t[::1] off_values,
                     const double[::1] off_cond, int64_t binom_n, double binom_p, rng):
    cdef Py_ssize_t S = counts.shape[0], m = off_values.shape[0], s, j
    cdef bitgen_t *bg = _bitgen(rng)
    cdef binomial_t b
    memset(&b, 0, sizeof(b))
    totals_arr = np.zeros(S, dtype=np.int64)
    cdef int64_t[::1] totals = totals_arr
    cdef int64_t[::1] rem
    cdef int64_t take
    with rng.bit_generator.lock:
        if binom_n > 0:
            with nogil:
                for s in range(S):
                    totals[s] = _split(bg, &b, counts[s] * binom_n, binom_p)
            return totals_arr
        rem_arr = np.array(counts, dtype=np.int64)
        rem = rem_arr
        with nogil:
            for j in range(m):
                for s in range(S):
                    take = _split(bg, &b, rem[s], off_cond[j])
                    rem[s] -= take
                    totals[s] += take * off_values[j]
    return totals_arr


def scatter(const int64_t[::1] totals, const int64_t[:, ::1] dest, const double[:, ::1] cond, rng):
    cdef Py_ssize_t S = dest.shape[0], D = dest.shape[1], s, j, i, n
    cdef bitgen_t *bg = _bitgen(rng)
    cdef binomial_t b
    memset(&b, 0, sizeof(b))
    rem_arr = np.array(totals, dtype=np.int64)
    cdef int64_t[::1] rem = rem_arr
    cdef int64_t take
    cdef vector[pair[int64_t, int64_t]] moved
    moved.reserve(S * D)
    with rng.bit_generator.lock:
        with nogil:
            for j in range(D):
                for s in range(S):
                    take = _split(bg, &b, rem[s], cond[s, j])
                    if take > 0:
                        rem[s] -= take
                        moved.push_back(pair[int64_t, int64_t](dest[s, j], take))
    with nogil:
        sort(moved.begin(), moved.end())
    n = 0
    for i in range(<Py_ssize_t> moved.size()):
        if i == 0 or moved[i].first != moved[i - 1].first:
            n += 1
    codes_arr = np.empty(n, dtype=np.int64)
    counts_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] codes = codes_arr
    cdef int64_t[::1] out = counts_arr
    n = -1
    with nogil:
        for i in range(<Py_ssize_t> moved.size()):
            if i == 0 or moved[i].first != moved[i - 1].first:
                n += 1
                codes[n] = moved[i].first
                out[n] = 0
            out[n] += moved[i].second
    return codes_arr, counts_arr


def brw_step(counts, dest, cond, off_values, off_cond, binom_n, binom_p, rng, cap, generation):
    totals = offspring_totals(counts, off_values, off_cond, binom_n, binom_p, rng)
    total = int(totals.sum(dtype=np.int64)) if totals.size else 0
    if total > cap:
        raise PopulationOverflow(generation, total, cap)
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return scatter(totals, dest, cond, rng)


# ---------------------------------------------------------------- walkers


def walk_visits_tree(int64_t r0, int d, Py_ssize_t walks, Py_ssize_t horizon, rng):
    cdef bitgen_t *bg = _bitgen(rng)
    r_arr = np.full(walks, r0, dtype=np.int64)
    visits_arr = np.zeros(walks, dtype=np.int64)
    cdef int64_t[::1] r = r_arr
    cdef int64_t[::1] visits = visits_arr
    cdef Py_ssize_t t, w
    cdef int64_t j
    for w in range(walks):
        visits[w] = r[w] == 0
    with rng.bit_generator.lock, nogil:
        for t in range(horizon):
            for w in range(walks):
                j = <int64_t> (bg.next_double(bg.state) * d)
                if r[w] == 0:
                    r[w] = 1
                elif j == 0:
                    r[w] -= 1
                else:
                    r[w] += 1
                if r[w] == 0:
                    visits[w] += 1
    return visits_arr


def walk_visits_line(int64_t target, double p, Py_ssize_t walks, Py_ssize_t horizon, rng):
    cdef bitgen_t *bg = _bitgen(rng)
    x_arr = np.zeros(walks, dtype=np.int64)
    visits_arr = np.full(walks, 1 if target == 0 else 0, dtype=np.int64)
    cdef int64_t[::1] x = x_arr
    cdef int64_t[::1] visits = visits_arr
    cdef Py_ssize_t t, w
    with rng.bit_generator.lock, nogil:
        for t in range(horizon):
            for w in range(walks):
                if bg.next_double(bg.state) < p:
                    x[w] += 1
                else:
                    x[w] -= 1
                if x[w] == target:
                    visits[w] += 1
    return visits_arr


def walk_visits_lattice(target, Py_ssize_t walks, Py_ssize_t horizon, rng):
    cdef bitgen_t *bg = _bitgen(rng)
    cdef int64_t tx = target[0], ty = target[1], tz = target[2]
    pos_arr = np.zeros((walks, 3), dtype=np.int64)
    visits_arr = np.full(walks, 1 if (tx == 0 and ty == 0 and tz == 0) else 0, dtype=np.int64)
    cdef int64_t[:, ::1] pos = pos_arr
    cdef int64_t[::1] visits = visits_arr
    cdef Py_ssize_t t, w
    cdef int j
    with rng.bit_generator.lock, nogil:
        for t in range(horizon):
            for w in range(walks):
                j = <int> (bg.next_double(bg.state) * 6)
                if j & 1:
                    pos[w, j >> 1] -= 1
                else:
                    pos[w, j >> 1] += 1
                if pos[w, 0] == tx and pos[w, 1] == ty and pos[w, 2] == tz:
                    visits[w] += 1
    return visits_arr


def walk_tree_prefix(start, int d, Py_ssize_t L, Py_ssize_t walks, Py_ssize_t horizon, rng):
    cdef bitgen_t *bg = _bitgen(rng)
    depth_arr = np.full(walks, len(start), dtype=np.int64)
    prefix_arr = np.full((walks, max(L, 1)), -1, dtype=np.int64)
    for i, a in enumerate(start[:L]):
        prefix_arr[:, i] = a
    cdef int64_t[::1] depth = depth_arr
    cdef int64_t[:, ::1] prefix = prefix_arr
    cdef Py_ssize_t t, w
    cdef int64_t j
    with rng.bit_generator.lock, nogil:
        for t in range(horizon):
            for w in range(walks):
                j = <int64_t> (bg.next_double(bg.state) * d)
                if depth[w] == 0:
                    if L > 0:
                        prefix[w, 0] = j
                    depth[w] = 1
                elif j == 0:
                    depth[w] -= 1
                else:
                    if depth[w] < L:
                        prefix[w, depth[w]] = j - 1
                    depth[w] += 1
    return depth_arr, prefix_arr[:, :L]


def walk_line_terminal(int64_t x0, double p, Py_ssize_t walks, Py_ssize_t horizon, rng):
    cdef bitgen_t *bg = _bitgen(rng)
    x_arr = np.full(walks, x0, dtype=np.int64)
    cdef int64_t[::1] x = x_arr
    cdef Py_ssize_t t, w
    with rng.bit_generator.lock, nogil:
        for t in range(horizon):
            for w in range(walks):
                if bg.next_double(bg.state) < p:
                    x[w] += 1
                else:
                    x[w] -= 1
    return x_arr
