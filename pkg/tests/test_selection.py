import itertools

import numpy as np
import pytest

import generators as G
from cics import (
    CapExceeded,
    DomainError,
    Instance,
    Matroid,
    brute_force_opt,
    chain_of_dist,
    commitment_gap,
    index_policy_value,
    make_dist,
    matroid_oracle,
    semilocal_compose,
    surrogate_bound,
    water_fill,
)
from cics.selection import _greedy, best_feasible_exhaustive, check_matroid_axioms
from cics.variants import PboiBox, build_pboi, pboi_semilocal_rule

M1 = chain_of_dist(make_dist([(2 / 3, 0.75), (4, 0.25)]), 1)
M2 = chain_of_dist(make_dist([(0.5, 0.25), (3, 0.75)]), 1 / 8)
B2 = PboiBox(make_dist([(1, 0.75), (8, 0.25)]), 1)


def test_oracle_examples():
    assert not matroid_oracle(Matroid.uniform(3, 1), {0}, 1)["augments"]
    assert matroid_oracle(Matroid.uniform(3, 2), {0}, 1)["augments"]
    assert not matroid_oracle(Matroid.partition([{0, 1}, {2}], (1, 1)), {0}, 1)["augments"]
    with pytest.raises(DomainError):
        matroid_oracle(Matroid.uniform(3, 1), set(), 5)


@pytest.mark.parametrize(
    "m",
    [Matroid.uniform(5, 2), Matroid.uniform(4, 0), Matroid.partition([{0, 2}, {1}, {3, 4, 5}], (1, 1, 2))],
)
def test_matroid_axioms(m):
    assert check_matroid_axioms(m)


def test_partition_validation():
    with pytest.raises(DomainError):
        Matroid.partition([{0}, {0, 1}], (1, 1))


def test_greedy_matches_exhaustive():
    rng = np.random.default_rng(80)
    for _ in range(40):
        n = int(rng.integers(1, 9))
        m = Matroid.uniform(n, int(rng.integers(0, n + 1))) if rng.random() < 0.5 else Matroid.partition(
            [list(range(0, n, 2)), list(range(1, n, 2))] if n > 1 else [[0]], (1, 2) if n > 1 else (1,)
        )
        w = [float(x) for x in rng.integers(-5, 10, size=n)]
        for mode in ("min", "max"):
            assert _greedy(w, m, mode) == pytest.approx(best_feasible_exhaustive(w, m, mode))


def test_index_policy_examples():
    assert index_policy_value([M1], Matroid.uniform(1, 1)) == pytest.approx(2.5)
    assert index_policy_value([M1, M2], Matroid.uniform(2, 1)) == pytest.approx(31 / 16)
    assert index_policy_value([M1, M2], Matroid.uniform(2, 2)) == pytest.approx(5)


def test_surrogate_bound_examples():
    W = [water_fill(M1).surrogate, water_fill(M2).surrogate]
    assert surrogate_bound(W, Matroid.uniform(2, 1)) == pytest.approx(31 / 16)
    assert surrogate_bound(W[:1], Matroid.uniform(1, 1)) == pytest.approx(2.5)
    assert surrogate_bound(W, Matroid.uniform(2, 0), "max") == 0


def test_monte_carlo_is_seeded_and_close():
    a = index_policy_value([M1, M2], Matroid.uniform(2, 1), method=("mc", 7, 4000))
    b = index_policy_value([M1, M2], Matroid.uniform(2, 1), method=("mc", 7, 4000))
    assert a == b
    assert a == pytest.approx(31 / 16, abs=0.05)


def test_brute_force_cap():
    with pytest.raises(CapExceeded):
        brute_force_opt(Instance([M1, M2], Matroid.uniform(2, 1)), cap=2)


def test_commit_trap():
    from test_cims import trap_mdp

    A1 = chain_of_dist(make_dist([(0, 0.5), (50, 0.5)]), 3)
    inst = Instance([A1, trap_mdp()], Matroid.uniform(2, 1))
    assert brute_force_opt(inst).value == pytest.approx(4.5)
    res = commitment_gap(inst)
    assert res.gap == pytest.approx(1.0)
    assert res.best[1].picks() == {(): 1, ((1, 1),): 0}


@pytest.mark.parametrize("mode", ["min", "max"])
def test_chain_instances_index_equals_bound_equals_opt(mode):
    rng = np.random.default_rng(81)
    for _ in range(25):
        n = int(rng.integers(1, 4))
        chains = [G.chain(rng, 3, 2) for _ in range(n)]
        m = G.uniform_matroid(rng, n)
        v = index_policy_value(chains, m, mode)
        assert v == pytest.approx(surrogate_bound([water_fill(c, mode).surrogate for c in chains], m, mode), abs=1e-9)
        assert v == pytest.approx(brute_force_opt(Instance(chains, m, mode)).value, abs=1e-9)


def test_chain_instance_gap_is_one():
    inst = Instance([M1, M2], Matroid.uniform(2, 1))
    assert commitment_gap(inst).gap == pytest.approx(1.0)


def test_partition_matroid_opt_matches_index():
    rng = np.random.default_rng(82)
    m = Matroid.partition([{0, 1}, {2}], (1, 1))
    for _ in range(10):
        chains = [G.chain(rng, 2, 2) for _ in range(3)]
        for mode in ("min", "max"):
            a = index_policy_value(chains, m, mode)
            b = brute_force_opt(Instance(chains, m, mode)).value
            assert a == pytest.approx(b, abs=1e-9)


def test_semilocal_compose_single_box():
    m = Matroid.uniform(1, 1)
    assert semilocal_compose([B2], m, [1.0]) == pytest.approx(2.75)
    opened = index_policy_value([chain_of_dist(B2.dist, B2.cost)], m, "max")
    assert semilocal_compose([B2], m, [0.0]) == pytest.approx(opened)


def test_semilocal_compose_two_b2():
    m = Matroid.uniform(2, 1)
    p = pboi_semilocal_rule(B2, 0.1)["p"]
    v = semilocal_compose([B2, B2], m, [p, p])
    opt = brute_force_opt(Instance([build_pboi(B2)] * 2, m, "max")).value
    assert v >= 0.582 * opt - 1e-9
    assert v <= opt + 1e-9


def test_semilocal_compose_mc_close_to_exact():
    m = Matroid.uniform(2, 1)
    exact = semilocal_compose([B2, B2], m, [0.3, 0.3])
    mc = semilocal_compose([B2, B2], m, [0.3, 0.3], method=("mc", 3, 20000))
    assert mc == pytest.approx(exact, rel=0.05)


def test_all_subsets_feasibility_consistent():
    m = Matroid.uniform(4, 2)
    for r in range(5):
        for S in itertools.combinations(range(4), r):
            assert m.independent_mask(sum(1 << i for i in S)) == (r <= 2)
