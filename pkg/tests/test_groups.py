import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from towerkernel.groups import (
    GroupSpec,
    ResourceCapError,
    TowerSpec,
    Word,
    abelianization,
    ball_count,
    convergence_diagnostic,
    dirichlet_contains,
    displacement_sandwich,
    enumerate_ball,
    identity_only,
    injectivity_radius,
    level_predicate,
    tower_index,
    tower_member,
    whole_group,
    word_to_matrix,
)
from towerkernel.hyperbolic import DISC, HALFPLANE, ModelPoint, apply, hyp_distance

words = st.lists(st.tuples(st.integers(0, 1), st.sampled_from([1, -1])), max_size=12).map(
    lambda ls: Word(tuple(ls)))


def test_word_parse_and_reduce():
    assert Word.parse("aA").is_identity()
    assert str(Word.parse("abBa")) == "aa"
    assert str(Word.parse("aB").inverse()) == "bA"
    assert Word.parse("") == Word.parse("1") == Word(())
    w = Word.parse("abAB")
    assert Word.from_codes(w.codes) == w
    assert len(Word.parse("a") ** -3) == 3


def test_ball_counts(schottky, cyc9):
    trivial = enumerate_ball(schottky, 0)
    assert len(trivial) == 1 and trivial.word(0).is_identity()
    assert len(enumerate_ball(schottky, 2)) == 17
    b = enumerate_ball(cyc9, 5)
    assert len(b) == 11
    assert sorted(abs(int(x)) for x in b.abel[:, 0]) == sorted([0] + [n for n in range(1, 6)] * 2)
    for r, L in ((2, 6), (3, 3), (1, 7)):
        assert ball_count(r, L) == len(enumerate_ball(schottky if r == 2 else
                                                      GroupSpec(DISC, schottky.generators[:1])
                                                      if r == 1 else _rank3(), L))


def _rank3():
    from towerkernel.hyperbolic import MoebiusMap
    r = math.sqrt(8.0)
    return GroupSpec(DISC, [MoebiusMap(3, r, r, 3, DISC), MoebiusMap(3, 1j * r, -1j * r, 3, DISC),
                            MoebiusMap(3, r * np.exp(0.5j), r * np.exp(-0.5j), 3, DISC)])


def test_ball_words_are_reduced_and_distinct(schottky):
    b = enumerate_ball(schottky, 4)
    seen = set()
    for i in range(len(b)):
        w = b.word(i)
        assert w.codes == b.codes[i]
        assert len(w) == b.lengths[i]
        seen.add(b.codes[i])
    assert len(seen) == len(b)


def test_ball_matrices_match_words(schottky):
    b = enumerate_ball(schottky, 3)
    for i in range(0, len(b), 7):
        assert b.matrix(i).isclose(word_to_matrix(schottky, b.word(i)), 1e-9)


def test_resource_cap(schottky):
    with pytest.raises(ResourceCapError):
        enumerate_ball(schottky, 20, cap=1000)


def test_word_to_matrix_inverse(schottky, rng):
    assert word_to_matrix(schottky, Word.parse("")).isclose(
        word_to_matrix(schottky, Word.parse("aA")))
    for _ in range(10):
        letters = tuple((int(g), int(s)) for g, s in zip(rng.integers(0, 2, 8),
                                                          rng.choice([1, -1], 8)))
        w = Word(letters)
        m = word_to_matrix(schottky, w)
        mi = word_to_matrix(schottky, w.inverse())
        ref = np.array(m.inverse().entries)
        scale = np.abs(ref).max()
        assert min(np.abs(np.array(mi.entries) - s * ref).max() for s in (1, -1)) < 1e-12 * scale


def test_abelianization():
    assert abelianization(Word.parse("abAB"), 2) == (0, 0)
    assert abelianization(Word.parse("aaaB"), 2) == (3, -1)


@given(words, words)
def test_abelianization_homomorphism(w, v):
    lhs = abelianization(w * v, 2)
    rhs = tuple(x + y for x, y in zip(abelianization(w, 2), abelianization(v, 2)))
    assert lhs == rhs


def test_tower_membership_and_index(cyc_tower):
    one = Word(())
    for j in range(1, 7):
        assert tower_member(cyc_tower, j, one)
    g8 = Word.parse("a") ** 8
    assert tower_member(cyc_tower, 3, g8) and not tower_member(cyc_tower, 4, g8)
    ab = TowerSpec("abelian_mod", (2, 4, 8), "commutator", rank=2)
    comm = Word.parse("abAB")
    assert all(tower_member(ab, j, comm) for j in (1, 2, 3))
    assert tower_member(ab, "top", comm)
    assert tower_index(cyc_tower, 3) == 8
    assert tower_index(ab, 2) == 16
    assert tower_index(ab, "top") == math.inf
    with pytest.raises(ValueError):
        tower_index(cyc_tower, 7)


def test_tower_spec_validation():
    with pytest.raises(ValueError):
        TowerSpec("cyclic_powers", (4, 6), rank=1)
    with pytest.raises(ValueError):
        TowerSpec("cyclic_powers", (2, 4), rank=2)
    with pytest.raises(ValueError):
        TowerSpec("abelian_mod", (2, 4), "trivial", rank=2)


def test_injectivity_radius_cyclic(cyc9, cyc_tower):
    x = ModelPoint(1j, HALFPLANE)
    tau, cert = injectivity_radius(cyc9, whole_group(), x, 4)
    assert cert and abs(tau - math.log(3)) < 1e-13
    prev = 0.0
    for j in range(1, 5):
        tj, cj = injectivity_radius(cyc9, level_predicate(cyc_tower, j), x, 40)
        assert cj and abs(tj - 2 ** (j - 1) * math.log(9)) < 1e-12 * tj
        assert tj >= prev
        prev = tj


def test_injectivity_radius_monotone_sampled(cyc9, cyc_tower, rng):
    for _ in range(5):
        x = ModelPoint(complex(rng.uniform(-1, 1), rng.uniform(0.2, 3)), HALFPLANE)
        taus = [injectivity_radius(cyc9, level_predicate(cyc_tower, j), x, 40)[0]
                for j in range(1, 6)]
        assert all(b >= a for a, b in zip(taus, taus[1:]))


def test_injectivity_radius_identity_only(cyc9):
    tau, _ = injectivity_radius(cyc9, identity_only(), ModelPoint(1j, HALFPLANE), 3)
    assert tau == math.inf


def test_dirichlet_domain(cyc9, rng):
    x = ModelPoint(1j, HALFPLANE)
    assert dirichlet_contains(cyc9, whole_group(), x, x, 4)
    assert not dirichlet_contains(cyc9, whole_group(), x, ModelPoint(9j, HALFPLANE), 4)
    tau = math.log(3)
    for _ in range(30):
        # points strictly inside B(x, tau)
        d = rng.uniform(0, 0.999 * tau)
        th = rng.uniform(0, 2 * math.pi)
        z = ModelPoint(math.tanh(d / 2) * np.exp(1j * th), DISC)
        assert dirichlet_contains(cyc9, whole_group(), x, z, 4)


def test_convergence_diagnostic(cyc9, schottky):
    diag = convergence_diagnostic(cyc9, 12)
    assert abs(diag.ratio - 1 / 9) < 0.01 / 9
    assert diag.likely_convergent
    assert len(diag.table()) == 13
    trivial = GroupSpec(DISC, [])
    assert np.all(convergence_diagnostic(trivial, 3).partial_sums == 0)
    sch = convergence_diagnostic(schottky, 8)
    assert sch.ratio < 1
    # regression baseline for the bundled Schottky pair
    assert abs(sch.ratio - 0.363) < 0.01


def test_displacement_sandwich(schottky, rng):
    ball = enumerate_ball(schottky, 6)
    for _ in range(10):
        z = complex(*rng.uniform(-0.6, 0.6, size=2))
        lo, mid, hi = displacement_sandwich(ball, z)
        assert np.all(lo <= mid * (1 + 1e-12)) and np.all(mid <= hi * (1 + 1e-12))


def test_orbit_distance_matches_hyp_distance(schottky):
    from towerkernel.groups import orbit_distances
    ball = enumerate_ball(schottky, 3)
    x = ModelPoint(0.2 - 0.1j, DISC)
    dist = orbit_distances(ball, x)
    for i in range(len(ball)):
        ref = hyp_distance(x, apply(ball.matrix(i), x))
        assert abs(dist[i] - ref) < 1e-10 * max(1, ref)
