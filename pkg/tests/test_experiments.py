import itertools
import json
import warnings
from math import sqrt

import pytest

from brwmartin.brw import SupercriticalityWarning
from brwmartin.chains import DriftedLine, Lattice3D, RegularTree, transition_row
from brwmartin.errors import ConfigError
from brwmartin.experiments import (
    SUITES,
    Assertion,
    SuiteConfig,
    Verdict,
    default_config,
    finite_shadow_probability,
    run_suite,
    trajectory_table,
)
from brwmartin.offspring import deterministic, table
from brwmartin.potential import LineCylinder, TreeCylinder, cylinder_family

LAW = table({0: 0.25, 2: 0.75})


def by_name(verdict, fragment):
    hits = [a for a in verdict.assertions if fragment in a.name]
    assert len(hits) == 1, [a.name for a in verdict.assertions]
    return hits[0]


def quiet_run(cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupercriticalityWarning)
        return run_suite(cfg)


# ------------------------------------------------------------------ records


def test_assertion_relations():
    assert Assertion("a", 1.0, 1.2, "approx", 0.2, 0.1, "p").passed
    assert not Assertion("a", 1.0, 1.3, "approx", 0.2, 0.1, "p").passed
    assert not Assertion("a", 0.0, 0.5, "in", 0.5, 0, "p").passed
    assert Assertion("a", 0.2, 0.5, "in", 0.5, 0, "p").passed
    assert Assertion("a", 3, 4, "lt", 0, 0, "p").passed and not Assertion("a", 4, 4, "lt", 0, 0, "p").passed
    assert Assertion("a", 4, 4, "le", 0, 0, "p").passed
    assert Assertion("a", 5, 4, "gt", 0, 0, "p").passed and not Assertion("a", 4, 4, "gt", 0, 0, "p").passed
    assert Assertion("a", 4, 4, "ge", 0, 0, "p").passed
    with pytest.raises(ValueError):
        Assertion("a", 1, 1, "ne", 0, 0, "p")


def test_verdict_round_trip_and_overall_flag():
    ok = Assertion("x", 1.0, 1.0, "approx", 0.1, 0.05, "oracle")
    bad = Assertion("y", 2.0, 1.0, "lt", 0.0, 0.0, "suite definition", note="n")
    v = Verdict("demo", (ok, bad), (("seed", 3),), runtime=1.5)
    assert not v.passed and Verdict("demo", (ok,)).passed
    again = Verdict.from_dict(json.loads(v.to_text()))
    assert again == v and again.to_text() == v.to_text()
    assert "runtime" not in v.to_text()
    assert "[FAIL] y" in v.report()


@pytest.mark.parametrize("changes", [
    dict(suite="nope"), dict(replicas=0), dict(generations=-1), dict(seed=-4), dict(tolerance=0.0),
    dict(ray=(0, 2)), dict(chain="tree"), dict(replicas=2.5), dict(resolution=-1),
])
def test_suite_config_validation(changes):
    with pytest.raises(ConfigError):
        SuiteConfig(**changes)


def test_default_configs_cover_every_suite():
    for name in SUITES:
        cfg = default_config(name)
        assert cfg.suite == name and cfg.seed == 7
    with pytest.raises(ConfigError):
        default_config("unknown")
    with pytest.raises(ConfigError):
        run_suite(SuiteConfig())


def test_statistical_suites_need_thirty_replicas():
    with pytest.raises(ConfigError):
        run_suite(default_config("kesten_stigum", replicas=29))


def test_trajectory_table_shape():
    res = run_suite(default_config("kesten_stigum", replicas=40, generations=6))
    header, rows = res.tables["trajectories"]
    assert header[:4] == ["n", "replica", "total", "W_n"]
    assert len(rows) == 40 * 7
    assert trajectory_table([]) == ([], [])


# --------------------------------------------------------- exact shadow laws


def enumerate_walk(chain, n):
    """Law of X_n by summing over every path (brute force)."""
    law = {chain.origin: 1.0}
    for _ in range(n):
        nxt = {}
        for x, p in law.items():
            for y, q in transition_row(chain, x):
                nxt[y] = nxt.get(y, 0.0) + p * q
        law = nxt
    return law


@pytest.mark.parametrize("chain,n", [(RegularTree(3), 6), (RegularTree(4), 5), (DriftedLine(0.7), 9)], ids=str)
def test_shadow_probability_matches_enumeration(chain, n):
    law = enumerate_walk(chain, n)
    for C in cylinder_family(chain, 2):
        want = sum(p for x, p in law.items() if C.contains(x))
        assert finite_shadow_probability(chain, C, n) == pytest.approx(want, abs=1e-12)


def test_shadow_probability_tends_to_harmonic_measure():
    chain = RegularTree(3)
    C = TreeCylinder((1, 0))
    assert finite_shadow_probability(chain, C, 600) == pytest.approx(1 / 6, abs=1e-12)
    assert finite_shadow_probability(DriftedLine(0.9), LineCylinder(-1), 400) < 1e-12


# ------------------------------------------------------------------- suites


def test_kesten_stigum_small():
    res = run_suite(default_config("kesten_stigum", replicas=400, generations=12))
    assert res.verdict.passed, res.verdict.report()
    assert dict(res.verdict.metadata)["seed"] == 7


def test_kesten_stigum_deterministic_two():
    res = run_suite(default_config("kesten_stigum", offspring=deterministic(2), replicas=50, generations=10))
    header, rows = res.tables["trajectories"]
    W = [r[3] for r in rows]
    assert all(w == 1.0 for w in W)
    mean = by_name(res.verdict, "mean W")
    assert mean.observed == 1.0 and mean.std_error == 0.0 and mean.passed
    assert by_name(res.verdict, "extinction").observed == 0.0


def test_kesten_stigum_subcritical_dies_out():
    cfg = default_config("kesten_stigum", offspring=table({0: 0.75, 2: 0.25}), replicas=500, generations=20)
    res = quiet_run(cfg)
    ext = by_name(res.verdict, "extinction")
    assert ext.target == 1.0 and ext.passed and ext.observed > 0.99


def test_identity_small_tree():
    cfg = default_config("identity", replicas=600, generations=14, depth=1, resolution=1)
    res = run_suite(cfg)
    assert res.verdict.passed, res.verdict.report()
    limit = [a for a in res.verdict.assertions if a.name.startswith("mean mass")]
    exact = [a for a in res.verdict.assertions if "exact" in a.name]
    assert len(limit) == len(exact) == 3
    for a, b in zip(limit, exact):
        assert a.target == pytest.approx(1 / 3)
        # depth-1 shadows at n=14 miss only walks sitting at the root
        assert b.target == pytest.approx(1 / 3, abs=0.02) and b.target < 1 / 3
        assert a.tolerance == pytest.approx(b.tolerance + 1 / 3 - b.target)


def test_identity_line_minus_end():
    cfg = default_config("identity", chain=DriftedLine(2 / 3), offspring=table({1: 0.8, 2: 0.2}),
                         replicas=300, generations=20, resolution=None)
    res = run_suite(cfg)
    minus = by_name(res.verdict, "mean mass C[-inf]")
    assert minus.target == 0.0 and minus.passed


def test_support_small():
    res = run_suite(default_config("support", replicas=300))
    assert res.verdict.passed, res.verdict.report()
    assert res.tables["mean_mass"][0] == ["n", "mean_mass_nonpositive"]


def test_support_plain_walk():
    cfg = default_config("support", offspring=deterministic(1), replicas=2000, generations=30)
    res = quiet_run(cfg)
    rows = res.tables["mean_mass"][1]
    mass = [r[1] for r in rows]
    assert mass[1] > 0 and mass[-1] < mass[1]
    assert by_name(res.verdict, "single-walk").passed


def test_support_lattice_full_mass():
    cfg = default_config("support", chain=Lattice3D(), offspring=deterministic(16), generations=4,
                         replicas=30, cap=10**9)
    res = run_suite(cfg)
    assert res.verdict.passed and res.verdict.assertions[0].observed == 0.0


def test_support_rejects_trees():
    with pytest.raises(ConfigError):
        run_suite(default_config("support", chain=RegularTree(3)))


def test_phase_transition_deterministic_laws():
    cfg = default_config("phase_transition", offspring=deterministic(1), contrast=deterministic(2),
                         generations=40, replicas=60)
    res = quiet_run(cfg)
    assert res.verdict.passed, res.verdict.report()
    low = res.verdict.assertions[0]
    assert low.observed < 10
    high = res.verdict.assertions[1]
    # the root is occupied at every even generation, parity forbids odd ones
    assert high.observed == pytest.approx(11 / 21)


@pytest.mark.parametrize("offspring,contrast", [
    (table({1: 0.5, 2: 0.5}), deterministic(2)),
    (table({1: 0.9, 2: 0.1}), table({1: 0.8, 2: 0.2})),
    (table({1: 0.9, 2: 0.1}), table({1: 0.86, 2: 0.14})),
])
def test_phase_transition_rejects_bad_brackets(offspring, contrast):
    with pytest.raises(ConfigError):
        run_suite(default_config("phase_transition", offspring=offspring, contrast=contrast, replicas=30))


def test_phase_transition_needs_tree_and_contrast():
    with pytest.raises(ConfigError):
        run_suite(default_config("phase_transition", chain=DriftedLine(0.7)))
    with pytest.raises(ConfigError):
        run_suite(default_config("phase_transition", contrast=None))


def test_tail_example_small():
    res = run_suite(default_config("tail_example", replicas=300, gw_replicas=2000))
    assert res.verdict.passed, res.verdict.report()
    q = by_name(res.verdict, "strictly inside")
    assert 1e-3 < q.observed < 1 - 1e-3
    assert dict(res.verdict.metadata)["diagonal_step_probability"] == "1/6"


def diagonal_path_probability(N):
    """Brute force: probability that a single walk follows (n,0,0) for n = 1..N."""
    chain = Lattice3D()
    total = 0.0
    steps = [y for y, _ in transition_row(chain, (0, 0, 0))]
    for path in itertools.product(steps, repeat=N):
        pos = (0, 0, 0)
        ok = True
        for n, s in enumerate(path, 1):
            pos = tuple(a + b for a, b in zip(pos, s))
            ok &= pos == (n, 0, 0)
        total += ok * (1 / 6) ** N
    return total


def test_tail_example_plain_walk_control():
    N = 3
    assert diagonal_path_probability(N) == pytest.approx((1 / 6) ** N, abs=1e-15)
    cfg = default_config("tail_example", offspring=deterministic(1), generations=N, replicas=100_000,
                         gw_replicas=1000)
    res = quiet_run(cfg)
    alive = by_name(res.verdict, "D_n > 0")
    p = (1 / 6) ** N
    assert alive.target == pytest.approx(p, abs=1e-15)
    assert abs(alive.observed - p) <= 3 * sqrt(p * (1 - p) / 100_000)
    assert res.verdict.passed, res.verdict.report()


def test_tail_example_configuration_errors():
    with pytest.raises(ConfigError):
        run_suite(default_config("tail_example", chain=RegularTree(3)))
    with pytest.raises(ConfigError):
        run_suite(default_config("tail_example", offspring=LAW))


def test_martingale_small():
    res = run_suite(default_config("martingale", replicas=400, generations=12))
    assert res.verdict.passed, res.verdict.report()
    assert by_name(res.verdict, "negative control").observed > 4
    labels = {row[0] for row in res.tables["increments"][1]}
    assert "h=1" in labels and "K[ray[0...]]" in labels


def test_martingale_deterministic_constant_track():
    res = run_suite(default_config("martingale", offspring=deterministic(2), replicas=40, generations=10))
    one = by_name(res.verdict, "max |z| of increment means, h=1")
    assert one.observed == 0.0 and one.passed


def test_martingale_needs_generations_after_burn_in():
    with pytest.raises(ConfigError):
        run_suite(default_config("martingale", generations=7))


def test_discrepancy_small():
    res = run_suite(default_config("discrepancy", replicas=300, generations=22, start=6, window=4))
    names = [a.name for a in res.verdict.assertions]
    assert names[0] == "surviving replicas"
    assert not res.verdict.assertions[0].passed  # fewer than 500 survivors by design
    assert all(a.passed for a in res.verdict.assertions[1:]), res.verdict.report()


def test_suites_are_deterministic():
    cfg = default_config("kesten_stigum", replicas=60, generations=10, seed=11)
    a, b = run_suite(cfg), run_suite(cfg)
    assert a.verdict.to_text() == b.verdict.to_text()
    assert a.digests == b.digests and a.tables == b.tables
    c = run_suite(cfg.replace(seed=12))
    assert c.verdict.to_text() != a.verdict.to_text()


def test_workers_do_not_change_verdicts():
    cfg = default_config("martingale", replicas=60, generations=10)
    a = run_suite(cfg)
    b = run_suite(cfg.replace(workers=2))
    assert a.verdict.to_text() == b.verdict.to_text()


def test_identity_depth_one_follows_kesten_stigum():
    cfg = default_config("kesten_stigum", replicas=300, generations=12, seed=3)
    ks = run_suite(cfg)
    ident = run_suite(cfg.replace(suite="identity", depth=1, resolution=1))
    if by_name(ks.verdict, "mean W").passed:
        assert ident.verdict.passed, ident.verdict.report()
