import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brwmartin.chains import DriftedLine, Lattice3D, RegularTree, green_exact, transition_row
from brwmartin.errors import ClosedFormUnavailable, ConfigError, DomainError, EncodingError
from brwmartin.potential import (
    LATTICE_INFINITY,
    MINUS_INFINITY,
    PLUS_INFINITY,
    CompactificationPoint,
    ConstantOne,
    CylinderExtension,
    FullBoundary,
    KernelFunction,
    LineCylinder,
    TreeAggregates,
    TreeCylinder,
    TreeRay,
    compactification_distance,
    cylinder,
    cylinder_family,
    harmonic_extension,
    harmonic_extension_mc,
    harmonic_measure,
    harmonic_measure_mc,
    martin_kernel,
    martin_kernel_mc,
)

TREES = [RegularTree(3), RegularTree(4), RegularTree(5)]


# ---------------------------------------------------------------- Martin kernel


@pytest.mark.parametrize(
    "chain,targets",
    [(RegularTree(3), [(), (0, 1), TreeRay((2, 1)), TreeRay()]),
     (DriftedLine(2 / 3), [0, 5, -3, PLUS_INFINITY, MINUS_INFINITY]),
     (Lattice3D(), [LATTICE_INFINITY])],
    ids=["tree", "line", "lattice"],
)
def test_kernel_is_one_at_origin(chain, targets):
    for t in targets:
        assert martin_kernel(chain, chain.origin, t) == 1.0


def test_kernel_examples():
    assert martin_kernel(RegularTree(3), (0,), TreeRay((0, 1))) == 2.0
    assert martin_kernel(DriftedLine(2 / 3), 2, MINUS_INFINITY) == pytest.approx(0.25, abs=1e-15)
    assert martin_kernel(DriftedLine(2 / 3), 7, PLUS_INFINITY) == 1.0
    assert martin_kernel(Lattice3D(), (1, 2, 3), LATTICE_INFINITY) == 1.0


def test_line_boundary_kernel_is_a_green_ratio():
    chain = DriftedLine(2 / 3)
    for x in range(-5, 6):
        for m in (10, 20, 40):
            ratio = green_exact(chain, x, -m) / green_exact(chain, 0, -m)
            assert abs(ratio - martin_kernel(chain, x, MINUS_INFINITY)) <= 1e-12


@pytest.mark.parametrize("chain", TREES, ids=str)
def test_tree_kernel_consistency(chain, rng):
    for _ in range(50):
        x, y = chain.random_state(rng), chain.random_state(rng)
        assert abs(martin_kernel(chain, x, y) * green_exact(chain, (), y) - green_exact(chain, x, y)) <= 1e-12


@pytest.mark.parametrize("chain", TREES, ids=str)
def test_tree_boundary_kernel_is_a_limit_along_the_ray(chain, rng):
    for _ in range(30):
        x = chain.random_state(rng)
        ray = TreeRay(chain.random_state(rng, 3))
        # once the ray vertex is past the confluent the interior kernel is constant
        vals = [martin_kernel(chain, x, ray.word(n)) for n in range(len(x) + 4, len(x) + 8)]
        assert all(v == pytest.approx(martin_kernel(chain, x, ray), rel=1e-12) for v in vals)


def test_lattice_interior_kernel_has_no_closed_form():
    with pytest.raises(ClosedFormUnavailable):
        martin_kernel(Lattice3D(), (1, 0, 0), (0, 0, 1))


def test_kernel_mc_matches_closed_form():
    chain = RegularTree(3)
    est, se = martin_kernel_mc(chain, (1,), (1, 0), walks=40_000, horizon=200, rng=2)
    assert abs(est - martin_kernel(chain, (1,), (1, 0))) <= 3 * se


def test_boundary_point_validation():
    with pytest.raises(EncodingError):
        martin_kernel(RegularTree(3), (), TreeRay((0, 2)))
    with pytest.raises(EncodingError):
        martin_kernel(DriftedLine(0.7), 0, TreeRay())


# ------------------------------------------------------------ harmonic measure


def test_harmonic_measure_examples():
    tree = RegularTree(3)
    assert harmonic_measure(tree, TreeCylinder((1,))) == pytest.approx(1 / 3, abs=1e-15)
    assert harmonic_measure(tree, TreeCylinder((1, 0))) == pytest.approx(1 / 6, abs=1e-15)
    assert harmonic_measure(RegularTree(4), TreeCylinder((2, 1))) == pytest.approx(1 / 12, abs=1e-15)
    assert harmonic_measure(DriftedLine(0.9), LineCylinder(-1)) == 0.0
    assert harmonic_measure(DriftedLine(0.9), LineCylinder(+1)) == 1.0
    assert harmonic_measure(Lattice3D(), FullBoundary()) == 1.0


def first_step_stay_probability(d):
    """P_w(X_inf below w) by first-step analysis, without the closed form.

    From w the walk steps to a child with probability (d-1)/d; from a child
    it returns to w with probability F, otherwise it stays below w.  From the
    parent side it returns with probability F, otherwise it never does.
    Solve s = (d-1)/d (1 - F + F s) + (1/d) F s for s.
    """
    F = 1 / (d - 1)
    a = (d - 1) / d
    return a * (1 - F) / (1 - a * F - F / d)


@pytest.mark.parametrize("chain", TREES, ids=str)
def test_harmonic_measure_factorises_by_strong_markov(chain):
    d = chain.degree
    for C in cylinder_family(chain, 3):
        hit = chain.first_passage ** C.depth
        assert harmonic_measure(chain, C) == pytest.approx(hit * first_step_stay_probability(d), rel=1e-12)


@pytest.mark.parametrize("chain", TREES, ids=str)
def test_partition_additivity(chain):
    fam = cylinder_family(chain, 3)
    assert sum(harmonic_measure(chain, C) for C in fam if C.depth == 1) == pytest.approx(1.0, abs=1e-15)
    for C in fam:
        if C.depth < 3:
            kids = [TreeCylinder(C.word + (a,)) for a in range(chain.degree - 1)]
            total = sum(harmonic_measure(chain, K) for K in kids)
            assert abs(total - harmonic_measure(chain, C)) <= 1e-12


@pytest.mark.parametrize("chain,word,target", [(RegularTree(3), (1,), 1 / 3), (RegularTree(4), (2, 1), 1 / 12)])
def test_harmonic_measure_mc_examples(chain, word, target):
    est, se = harmonic_measure_mc(chain, TreeCylinder(word), walks=100_000, horizon=400, rng=6)
    assert abs(est - target) <= 3 * se


def test_harmonic_measure_mc_on_the_line():
    est, se = harmonic_measure_mc(DriftedLine(2 / 3), LineCylinder(+1), walks=10_000, horizon=1000, rng=1)
    assert est == 1.0 or abs(est - 1.0) <= 3 * se


def test_harmonic_measure_mc_family_small():
    chain = RegularTree(3)
    z = []
    for i, C in enumerate(cylinder_family(chain, 2)):
        est, se = harmonic_measure_mc(chain, C, walks=20_000, horizon=300, rng=i)
        z.append(abs(est - harmonic_measure(chain, C)) / se)
    assert max(z) <= 4 and sum(v > 3 for v in z) <= 1


def test_short_horizon_is_a_config_error():
    with pytest.raises(ConfigError):
        harmonic_measure_mc(RegularTree(3), TreeCylinder((0, 1, 1)), walks=10, horizon=50)


# ---------------------------------------------------------- harmonic extension


def test_harmonic_extension_examples():
    tree = RegularTree(3)
    w = (0, 1)
    assert harmonic_extension(tree, TreeCylinder(w), w) == pytest.approx(2 / 3, abs=1e-15)
    assert harmonic_extension(tree, TreeCylinder((2,)), ()) == pytest.approx(1 / 3, abs=1e-15)
    for chain, x in ((tree, (1, 1, 0)), (DriftedLine(0.7), -4), (Lattice3D(), (1, 1, 1))):
        assert harmonic_extension(chain, FullBoundary(), x) == 1.0


def test_harmonic_extension_mc_from_the_cylinder_vertex():
    tree = RegularTree(3)
    est, se = harmonic_extension_mc(tree, TreeCylinder((0, 1)), (0, 1), walks=50_000, horizon=300, rng=4)
    assert abs(est - 2 / 3) <= 3 * se


@pytest.mark.parametrize("chain", TREES, ids=str)
def test_harmonic_extension_is_harmonic_and_bounded(chain, rng):
    fam = cylinder_family(chain, 3)
    for _ in range(100):
        C = fam[int(rng.integers(len(fam)))]
        x = chain.random_state(rng, 6)
        h = harmonic_extension(chain, C, x)
        Ph = sum(p * harmonic_extension(chain, C, y) for y, p in transition_row(chain, x))
        assert abs(h - Ph) <= 1e-12
        assert 0.0 <= h <= 1.0
    for C in fam:
        assert harmonic_extension(chain, C, ()) == pytest.approx(harmonic_measure(chain, C), abs=1e-15)


# ---------------------------------------------------------------- cylinders


def test_cylinder_builders():
    tree = RegularTree(3)
    assert cylinder(tree, "0.1") == TreeCylinder((0, 1))
    assert cylinder(tree, "all") == FullBoundary()
    assert cylinder(DriftedLine(0.7), "-inf") == LineCylinder(-1)
    with pytest.raises(EncodingError):
        cylinder(tree, ())
    with pytest.raises(EncodingError):
        cylinder(tree, "0.2")
    with pytest.raises(EncodingError):
        cylinder(Lattice3D(), "0")
    assert len(cylinder_family(RegularTree(4), 3)) == 4 + 12 + 36
    assert len(cylinder_family(DriftedLine(0.7))) == 2
    assert cylinder_family(Lattice3D()) == [FullBoundary()]


def test_equal_depth_cylinders_are_disjoint(rng):
    chain = RegularTree(4)
    fam = [C for C in cylinder_family(chain, 2) if C.depth == 2]
    for _ in range(200):
        x = chain.random_state(rng, 6)
        assert sum(C.contains(x) for C in fam) == (1 if len(x) >= 2 else 0)


# ----------------------------------------------------------- compactification


def test_distance_examples():
    tree = RegularTree(3)
    P = lambda x: CompactificationPoint(tree, x)  # noqa: E731
    assert compactification_distance(P((0, 1)), P((0, 1))) == 0
    assert compactification_distance(P(()), P((2,))) == 1.0
    assert compactification_distance(P((0, 1, 1, 0)), P((0, 1, 1, 1, 1))) == 0.125
    assert compactification_distance(P(TreeRay((1,))), P(TreeRay((1, 0)))) == 0
    line = DriftedLine(0.7)
    assert compactification_distance(CompactificationPoint(line, PLUS_INFINITY),
                                     CompactificationPoint(line, MINUS_INFINITY)) == 1.0
    lat = Lattice3D()
    assert compactification_distance(CompactificationPoint(lat, LATTICE_INFINITY),
                                     CompactificationPoint(lat, LATTICE_INFINITY)) == 0
    with pytest.raises(DomainError):
        compactification_distance(P(()), CompactificationPoint(line, 0))


def random_point(chain, rng):
    if rng.random() < 0.3:
        if isinstance(chain, RegularTree):
            return CompactificationPoint(chain, TreeRay(chain.random_state(rng, 4)))
        return CompactificationPoint(chain, PLUS_INFINITY if rng.random() < 0.5 else MINUS_INFINITY)
    return CompactificationPoint(chain, chain.random_state(rng, 5))


@pytest.mark.parametrize("chain", [RegularTree(3), DriftedLine(0.7)], ids=str)
def test_distance_is_an_ultrametric(chain, rng):
    pts = [random_point(chain, rng) for _ in range(40)]
    dist = compactification_distance
    for a, b, c in itertools.islice(itertools.product(pts, repeat=3), 20_000):
        ab, bc, ac = dist(a, b), dist(b, c), dist(a, c)
        assert ab == dist(b, a) >= 0
        assert (ab == 0) == (a.point == b.point or _same_ray(a.point, b.point))
        assert ac <= max(ab, bc) + 1e-15


def _same_ray(u, v):
    if isinstance(u, TreeRay) and isinstance(v, TreeRay):
        n = max(len(u.prefix), len(v.prefix)) + 1
        return u.word(n) == v.word(n)
    return False


# --------------------------------------------------------- vectorised handles


def random_population(chain, rng, size, depth, codec):
    words = [chain.random_state(rng, depth) for _ in range(size)]
    codes = np.array([codec.encode_word(w) for w in words], dtype=np.int64)
    counts = rng.integers(1, 50, size=size)
    uniq, inv = np.unique(codes, return_inverse=True)
    merged = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(merged, inv, counts)
    return words, counts, uniq, merged


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([3, 4]), st.sampled_from([None, 2, 3]), st.integers(0, 10**6))
def test_aggregates_match_direct_sums(d, resolution, seed):
    chain = RegularTree(d)
    codec = chain.codec(resolution)
    rng = np.random.default_rng(seed)
    words, counts, codes, merged = random_population(chain, rng, 60, 8, codec)
    agg = TreeAggregates(chain, codec, codes, merged, 2)
    for C in cylinder_family(chain, 2):
        direct = sum(k for w, k in zip(words, counts) if C.contains(w))
        assert agg.mass(C.word) == direct
        h = CylinderExtension(C)
        pair = sum(k * h(chain, w) for w, k in zip(words, counts))
        assert CylinderExtension(C).pair_tree(agg) == pytest.approx(pair, rel=1e-10, abs=1e-10)
        assert np.dot(h.values(chain, codec, codes), merged) == pytest.approx(pair, rel=1e-10, abs=1e-10)
    assert CylinderExtension(FullBoundary()).pair_tree(agg) == counts.sum()


@pytest.mark.parametrize("chain", TREES, ids=str)
def test_kernel_values_match_scalar_kernel(chain, rng):
    codec = chain.codec()
    words = [chain.random_state(rng, 9) for _ in range(300)]
    codes = np.array([codec.encode_word(w) for w in words])
    for prefix in [(), (1,), (0, 1, 0), (2, 0, 1, 1)]:
        h = KernelFunction(TreeRay(prefix))
        want = [martin_kernel(chain, w, TreeRay(prefix)) for w in words]
        assert np.allclose(h.values(chain, codec, codes), want, rtol=1e-13, atol=0)


def test_kernel_values_need_the_unlumped_tree():
    chain = RegularTree(3)
    with pytest.raises(ConfigError):
        KernelFunction(TreeRay()).values(chain, chain.codec(2), np.array([0, 1]))


def test_line_and_lattice_handles():
    line = DriftedLine(0.75)
    codes = np.arange(-3, 4)
    assert np.allclose(KernelFunction(MINUS_INFINITY).values(line, line.codec(), codes), (1 / 3) ** codes)
    assert np.all(KernelFunction(PLUS_INFINITY).values(line, line.codec(), codes) == 1)
    assert np.all(CylinderExtension(LineCylinder(-1)).values(line, line.codec(), codes) == 0)
    lat = Lattice3D()
    assert np.all(KernelFunction(LATTICE_INFINITY).values(lat, lat.codec(), np.array([5, 9])) == 1)
    assert np.all(ConstantOne().values(lat, lat.codec(), np.array([5, 9])) == 1)
    assert ConstantOne().label == "h=1" and CylinderExtension(TreeCylinder((1,))).label == "h[1]"
