import cmath
import math

import pytest
from hypothesis import given, strategies as st

from windeq.errors import ZeroPositiveSequence
from windeq.phasor import (
    DqPair,
    SequenceSet,
    abc_to_sequence,
    from_polar,
    orient_dq,
    sequence_to_abc,
    wrap_angle,
)


def deg(x):
    return math.radians(x)


class TestFortescue:
    def test_balanced_set_is_pure_positive(self):
        seq = abc_to_sequence(
            from_polar(1, 0), from_polar(1, deg(-120)), from_polar(1, deg(120))
        )
        assert seq.pos == pytest.approx(1 + 0j, abs=1e-12)
        assert seq.neg == pytest.approx(0j, abs=1e-12)
        assert seq.zero == pytest.approx(0j, abs=1e-12)

    def test_reversed_rotation_is_pure_negative(self):
        seq = abc_to_sequence(
            from_polar(1, 0), from_polar(1, deg(120)), from_polar(1, deg(-120))
        )
        assert seq.pos == pytest.approx(0j, abs=1e-12)
        assert seq.neg == pytest.approx(1 + 0j, abs=1e-12)
        assert seq.zero == pytest.approx(0j, abs=1e-12)

    def test_single_energised_phase_splits_evenly(self):
        # (a + 0 + 0)/3 lands in every component
        seq = abc_to_sequence(1 + 0j, 0j, 0j)
        third = 1 / 3 + 0j
        assert seq.pos == pytest.approx(third, abs=1e-12)
        assert seq.neg == pytest.approx(third, abs=1e-12)
        assert seq.zero == pytest.approx(third, abs=1e-12)


phasors = st.builds(
    complex,
    st.floats(-2, 2, allow_nan=False),
    st.floats(-2, 2, allow_nan=False),
)


@given(phasors, phasors, phasors)
def test_fortescue_round_trip(a, b, c):
    back = sequence_to_abc(abc_to_sequence(a, b, c))
    for original, recovered in zip((a, b, c), back):
        assert abs(original - recovered) < 1e-12


class TestOrientDq:
    def test_positive_q_component_forced_to_zero(self):
        udq_pos, _, theta = orient_dq(SequenceSet(pos=from_polar(0.6, deg(30))))
        assert udq_pos == DqPair(pytest.approx(0.6), 0.0)
        assert udq_pos.q == 0.0
        assert theta == pytest.approx(deg(30))

    def test_aligned_negative_stays_on_d_axis(self):
        _, udq_neg, _ = orient_dq(SequenceSet(pos=1 + 0j, neg=0.2 + 0j))
        assert udq_neg.d == pytest.approx(0.2, abs=1e-12)
        assert udq_neg.q == pytest.approx(0.0, abs=1e-12)

    def test_common_angle_cancels(self):
        _, udq_neg, _ = orient_dq(
            SequenceSet(pos=from_polar(0.5, deg(90)), neg=from_polar(0.2, deg(90)))
        )
        assert udq_neg.d == pytest.approx(0.2, abs=1e-12)
        assert udq_neg.q == pytest.approx(0.0, abs=1e-12)

    def test_vanishing_positive_sequence_rejected(self):
        with pytest.raises(ZeroPositiveSequence):
            orient_dq(SequenceSet(pos=1e-10 + 0j, neg=0.3 + 0j))


@given(phasors, st.floats(-math.pi, math.pi))
def test_negative_magnitude_invariant_under_common_rotation(neg, phi):
    pos = from_polar(1.0, 0.3)
    base = orient_dq(SequenceSet(pos=pos, neg=neg))[1]
    spin = cmath.exp(1j * phi)
    rotated = orient_dq(SequenceSet(pos=pos * spin, neg=neg * spin))[1]
    assert rotated.magnitude == pytest.approx(base.magnitude, abs=1e-12)
    # the full dq pair is invariant, not just its magnitude
    assert rotated.d == pytest.approx(base.d, abs=1e-9)
    assert rotated.q == pytest.approx(base.q, abs=1e-9)


@given(st.floats(0, 3, allow_nan=False), st.floats(-10, 10, allow_nan=False))
def test_polar_round_trip(mag, ang):
    z = from_polar(mag, ang)
    assert abs(abs(z) - mag) < 1e-12
    if mag > 1e-6:
        assert abs(from_polar(abs(z), cmath.phase(z)) - z) < 1e-12


def test_wrap_angle_half_open_interval():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.5) == pytest.approx(0.5)
    assert -math.pi < wrap_angle(123.456) <= math.pi


def test_negative_magnitude_rejected():
    with pytest.raises(ValueError):
        from_polar(-1.0, 0.0)
