import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermidecoh.fock import (
    ANNIHILATE,
    CREATE,
    SlaterDeterminant,
    apply_ladder,
    apply_string,
    bits,
    coherence_order,
    enumerate_determinants,
    enumerate_sz_sector,
    occupation_vector,
    popcount,
    spin_orbital,
    transition_descriptor,
)
from fermidecoh.validation import _list_phase


def det(m, *orbs):
    return SlaterDeterminant.from_orbitals(m, orbs)


def test_bit_helpers():
    assert popcount(0b101101) == 4
    assert bits(0b101101) == [0, 2, 3, 5]
    assert spin_orbital(3, 1) == 7


def test_determinant_validation_and_json():
    d = det(6, 0, 3, 5)
    assert d.n == 3 and d.orbitals == [0, 3, 5]
    assert occupation_vector(d) == [1, 0, 0, 1, 0, 1]
    assert SlaterDeterminant.from_json(d.to_json()) == d
    with pytest.raises(ValueError):
        SlaterDeterminant(3, 0b1000)
    with pytest.raises(ValueError):
        det(4, 1, 1)
    with pytest.raises(ValueError):
        det(4, 4)


# hand-derived ladder actions
@pytest.mark.parametrize(
    "start, orbital, kind, expected",
    [
        ((1,), 0, CREATE, (1, (0, 1))),
        ((0,), 1, CREATE, (-1, (0, 1))),
        ((0, 1), 1, ANNIHILATE, (-1, (0,))),
        ((0, 1), 0, ANNIHILATE, (1, (1,))),
        ((0, 2, 3), 1, CREATE, (-1, (0, 1, 2, 3))),
        ((0,), 0, CREATE, None),
        ((0, 1), 2, ANNIHILATE, None),
    ],
)
def test_apply_ladder_examples(start, orbital, kind, expected):
    got = apply_ladder(det(4, *start), orbital, kind)
    if expected is None:
        assert got is None
    else:
        assert got == (expected[0], det(4, *expected[1]))


def test_apply_ladder_rejects_bad_input():
    with pytest.raises(ValueError):
        apply_ladder(det(4, 0), 4, CREATE)
    with pytest.raises(ValueError):
        apply_ladder(det(4, 0), 1, "raise")


def _apply_sum(state, ops):
    out = {}
    for d, c in state.items():
        r = apply_string(d, ops)
        if r is not None:
            out[r[1]] = out.get(r[1], 0) + r[0] * c
    return {d: c for d, c in out.items() if c}


@pytest.mark.parametrize("i, j", list(itertools.product(range(4), repeat=2)))
def test_canonical_anticommutators(i, j):
    # {c_i, c^+_j} = delta_ij and {c_i, c_j} = 0 on every basis state of M = 4
    for n in range(5):
        for d in enumerate_determinants(4, n):
            a = _apply_sum({d: 1}, [(i, ANNIHILATE), (j, CREATE)])
            b = _apply_sum({d: 1}, [(j, CREATE), (i, ANNIHILATE)])
            total = {k: a.get(k, 0) + b.get(k, 0) for k in set(a) | set(b)}
            total = {k: v for k, v in total.items() if v}
            assert total == ({d: 1} if i == j else {})
            a = _apply_sum({d: 1}, [(i, ANNIHILATE), (j, ANNIHILATE)])
            b = _apply_sum({d: 1}, [(j, ANNIHILATE), (i, ANNIHILATE)])
            assert all(a.get(k, 0) + b.get(k, 0) == 0 for k in set(a) | set(b))


def test_coherence_order_examples():
    assert coherence_order(det(4, 0, 1), det(4, 0, 1)) == 0
    assert coherence_order(det(4, 0, 1), det(4, 0, 2)) == 1
    assert coherence_order(det(4, 0, 1), det(4, 2, 3)) == 2
    with pytest.raises(ValueError):
        coherence_order(det(4, 0), det(4, 0, 1))
    with pytest.raises(ValueError):
        coherence_order(det(4, 0), det(5, 0))


def test_descriptor_two_particle_example():
    # Phi1 = c1+ c2+|0>, Phi2 = c3+ c4+, Phi3 = c1+ c4+, Phi4 = c2+ c3+ (1-based labels):
    # Phi4 = -c3+ c1 Phi1 and Phi2 = c3+ c1 Phi3
    phi1, phi2, phi3, phi4 = det(4, 0, 1), det(4, 2, 3), det(4, 0, 3), det(4, 1, 2)
    d = transition_descriptor(phi1, phi4)
    assert (d.order, d.created, d.destroyed, d.phase) == (1, (2,), (0,), -1)
    d = transition_descriptor(phi3, phi2)
    assert (d.order, d.created, d.destroyed, d.phase) == (1, (2,), (0,), 1)
    assert transition_descriptor(phi1, phi1) is None


def test_descriptor_three_particle_example():
    # Phi3 = c5+ c2 c4+ c1 Phi1 and Phi4 = c5+ c2 c4+ c1 Phi2 (1-based labels)
    phi1, phi2, phi3, phi4 = det(6, 0, 1, 2), det(6, 0, 1, 5), det(6, 2, 3, 4), det(6, 3, 4, 5)
    ops = [(4, CREATE), (1, ANNIHILATE), (3, CREATE), (0, ANNIHILATE)]
    assert apply_string(phi1, ops) == (1, phi3)
    assert apply_string(phi2, ops) == (1, phi4)
    d = transition_descriptor(phi1, phi3)
    assert d.order == 2 and d.created == (3, 4) and d.destroyed == (0, 1)
    assert apply_string(phi1, d.operator_string()) == (d.phase, phi3)
    assert transition_descriptor(det(6, 0, 1, 2), det(6, 3, 4, 5)) is None


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 10).flatmap(lambda m: st.tuples(
    st.just(m),
    st.sets(st.integers(0, m - 1), min_size=1, max_size=m - 1),
    st.randoms(use_true_random=False),
)))
def test_descriptor_reconstructs_target(case):
    m, occ, rnd = case
    a = det(m, *sorted(occ))
    others = [d for d in enumerate_determinants(m, len(occ)) if 0 < coherence_order(d, a) <= 2]
    if not others:
        return
    b = rnd.choice(others)
    d = transition_descriptor(a, b)
    assert apply_string(a, d.operator_string()) == (d.phase, b)
    assert _list_phase(a, d.operator_string()) == (d.phase, b.occ)
    # the reverse transition carries the same phase
    assert transition_descriptor(b, a).phase == d.phase


def test_enumeration_sizes():
    assert len(enumerate_determinants(8, 4)) == 70
    sector = enumerate_sz_sector(4, 2, 2)
    assert len(sector) == 36
    assert all(sum(1 for o in d.orbitals if o % 2 == 0) == 2 for d in sector)
    assert [d.occ for d in sector] == sorted(d.occ for d in sector)
