"""Pure-numpy kernels; the reference backend.

Each function consumes random numbers in exactly the order the compiled
backend does (destination/support index outer, state or walker inner), so
both backends return bit-identical results for the same stream.
"""
import numpy as np

from .errors import PopulationOverflow

NAME = "python"


def _split_draw(rng, remaining, cond):
    """One sequential-binomial split column: draws only where 0 < cond < 1."""
    out = np.where(cond >= 1.0, remaining, 0)
    live = (remaining > 0) & (cond > 0.0) & (cond < 1.0)
    if live.any():
        out[live] = rng.binomial(remaining[live], cond[live])
    return out


def offspring_totals(counts, off_values, off_cond, binom_n, binom_p, rng):
    """Total offspring of ``counts[s]`` independent parents, per state."""
    counts = np.asarray(counts, dtype=np.int64)
    if binom_n > 0:
        trials = counts * binom_n
        return _split_draw(rng, trials, np.full(counts.shape, binom_p))
    totals = np.zeros_like(counts)
    remaining = counts.copy()
    m = len(off_values)
    for j in range(m):
        c = np.full(counts.shape, off_cond[j])
        take = _split_draw(rng, remaining, c)
        remaining -= take
        totals += take * off_values[j]
    return totals


def scatter(totals, dest, cond, rng):
    """Multinomial scatter of ``totals[s]`` over row ``s``; returns aggregated (codes, counts)."""
    S, D = dest.shape
    remaining = totals.copy()
    got = []
    for j in range(D):
        take = _split_draw(rng, remaining, cond[:, j])
        remaining -= take
        got.append(take)
    moved = np.stack(got, axis=1).ravel()
    flat = dest.ravel()
    keep = moved > 0
    flat, moved = flat[keep], moved[keep]
    if flat.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    codes, inv = np.unique(flat, return_inverse=True)
    out = np.zeros(codes.shape[0], dtype=np.int64)
    np.add.at(out, inv, moved)
    return codes, out


def brw_step(counts, dest, cond, off_values, off_cond, binom_n, binom_p, rng, cap, generation):
    totals = offspring_totals(counts, off_values, off_cond, binom_n, binom_p, rng)
    total = int(totals.sum(dtype=np.int64)) if totals.size else 0
    if total > cap:
        raise PopulationOverflow(generation, total, cap)
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return scatter(totals, dest, cond, rng)


# ---------------------------------------------------------------- walkers


def walk_visits_tree(r0, d, walks, horizon, rng):
    r = np.full(walks, r0, dtype=np.int64)
    visits = (r == 0).astype(np.int64)
    for _ in range(horizon):
        j = (rng.random(walks) * d).astype(np.int64)
        r = np.where(r == 0, 1, np.where(j == 0, r - 1, r + 1))
        visits += r == 0
    return visits


def walk_visits_line(target, p, walks, horizon, rng):
    x = np.zeros(walks, dtype=np.int64)
    visits = (x == target).astype(np.int64)
    for _ in range(horizon):
        x += np.where(rng.random(walks) < p, 1, -1)
        visits += x == target
    return visits


_LATTICE_STEP = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.int64)


def walk_visits_lattice(target, walks, horizon, rng):
    pos = np.zeros((walks, 3), dtype=np.int64)
    tgt = np.asarray(target, dtype=np.int64)
    visits = np.all(pos == tgt, axis=1).astype(np.int64)
    for _ in range(horizon):
        j = (rng.random(walks) * 6).astype(np.int64)
        pos += _LATTICE_STEP[j]
        visits += np.all(pos == tgt, axis=1)
    return visits


def walk_tree_prefix(start, d, L, walks, horizon, rng):
    """Terminal depth and first ``L`` letters of ``walks`` tree walks from ``start``."""
    depth = np.full(walks, len(start), dtype=np.int64)
    prefix = np.full((walks, max(L, 1)), -1, dtype=np.int64)
    for i, a in enumerate(start[:L]):
        prefix[:, i] = a
    rows = np.arange(walks)
    for _ in range(horizon):
        j = (rng.random(walks) * d).astype(np.int64)
        at_root = depth == 0
        up = ~at_root & (j == 0)
        down = ~up
        letter = np.where(at_root, j, j - 1)
        rec = down & (depth < L)
        prefix[rows[rec], depth[rec]] = letter[rec]
        depth = np.where(up, depth - 1, depth + 1)
    return depth, prefix[:, :L]


def walk_line_terminal(x0, p, walks, horizon, rng):
    x = np.full(walks, x0, dtype=np.int64)
    for _ in range(horizon):
        x += np.where(rng.random(walks) < p, 1, -1)
    return x
