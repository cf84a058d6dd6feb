"""Complex phasor arithmetic, symmetrical components and dq decomposition.

Per-unit convention used throughout the package: voltages, currents and
powers are per-unit on the machine (or system) base and power is the plain
dq dot product, p = u_d*i_d + u_q*i_q.  The 3/2 factor of peak-valued SI
phasors is absorbed into the base quantities.  Angles are radians wrapped
to (-pi, pi].
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ZeroPositiveSequence

#: Fortescue rotation operator, 1 at 120 degrees.
ALPHA = cmath.exp(2j * math.pi / 3)

_ORIENT_EPS = 1e-9


def from_polar(magnitude: float, angle: float) -> complex:
    """Build a phasor from magnitude and angle (radians)."""
    if magnitude < 0.0:
        raise ValueError("phasor magnitude must be >= 0")
    return cmath.rect(magnitude, angle)


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


class DqPair(NamedTuple):
    """Real dq components in the positive-sequence voltage oriented frame."""

    d: float
    q: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.d, self.q)


@dataclass(frozen=True)
class SequenceSet:
    """Positive/negative/zero sequence phasors at one bus.

    Inside the wind farm the zero component is identically 0; it only
    carries information on the grid side of the interface transformer.
    """

    pos: complex = 0j
    neg: complex = 0j
    zero: complex = 0j


def abc_to_sequence(a: complex, b: complex, c: complex) -> SequenceSet:
    """Fortescue transform of three phase phasors."""
    pos = (a + ALPHA * b + ALPHA * ALPHA * c) / 3.0
    neg = (a + ALPHA * ALPHA * b + ALPHA * c) / 3.0
    zero = (a + b + c) / 3.0
    return SequenceSet(pos=pos, neg=neg, zero=zero)


def sequence_to_abc(seq: SequenceSet) -> tuple[complex, complex, complex]:
    """Inverse Fortescue transform."""
    a2 = ALPHA * ALPHA
    a_ph = seq.pos + seq.neg + seq.zero
    b_ph = a2 * seq.pos + ALPHA * seq.neg + seq.zero
    c_ph = ALPHA * seq.pos + a2 * seq.neg + seq.zero
    return a_ph, b_ph, c_ph


def orient_dq(seq: SequenceSet) -> tuple[DqPair, DqPair, float]:
    """Decompose a sequence set in the positive-voltage oriented frame.

    The frame angle is the positive-sequence voltage angle, so the positive
    pair is (|pos|, 0) exactly.  The negative phasor is rotated by -theta
    into the same frame.  Raises :class:`ZeroPositiveSequence` when the
    positive magnitude is too small to define an orientation.
    """
    mag = abs(seq.pos)
    if mag < _ORIENT_EPS:
        raise ZeroPositiveSequence(
            f"positive-sequence magnitude {mag:.3e} below {_ORIENT_EPS:.0e}"
        )
    theta = cmath.phase(seq.pos)
    neg = seq.neg * cmath.exp(-1j * theta)
    return DqPair(mag, 0.0), DqPair(neg.real, neg.imag), theta
