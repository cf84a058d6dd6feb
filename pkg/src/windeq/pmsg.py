"""Quasi-static sequence-domain model of one PMSG grid-side unit.

The machine is represented as a controlled current source behind its
grid-side converter.  Machine-side power is the wind-power curve value held
constant while a fault is on; the DC link is a lumped energy-balance ODE
with a hysteretic chopper and a PI voltage controller that outputs a power
demand (the applied d-axis current is demand divided by terminal voltage).
Two negative-sequence control strategies are supported: one reduces the
grid-voltage unbalance, the other cancels the double-frequency oscillation
of the output active power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, NamedTuple

from .errors import DegenerateSequenceVoltages, NonFiniteState, OutOfRange
from .phasor import DqPair, SequenceSet, orient_dq

#: Minimum accepted U+ - U- for the oscillation-mitigating law.
EPS_D = 0.02

#: Upper edge of the reactive-support voltage band; above it the unit is
#: considered unstressed and injects no extra reactive current.
SUPPORT_BAND_TOP = 0.9

#: Post-fault d-axis voltage used for recovery targets, taken as exactly 1.
U_D_NOMINAL = 1.0

_U_FLOOR = 0.05
_TINY = 1e-12


class Strategy(Enum):
    """Negative-sequence control strategy of the grid-side converter."""

    MITIGATE_UNBALANCE = 1
    MITIGATE_OSCILLATION = 2


class Mode(Enum):
    NORMAL = "normal"
    FAULT = "fault"
    RECOVERY = "recovery"


@dataclass(frozen=True)
class PmsgParams:
    """Nameplate and control constants of one PMSG.

    All electrical quantities are per-unit on the machine base ``s_rated``.
    ``ramp_k`` is the maximum post-fault recovery rate of the d-axis
    current.  The DC-link constants model a lumped energy balance; they are
    defaults, not manufacturer data, and are freely configurable.
    """

    s_rated: float = 1.5          # MVA
    i_n: float = 1.0              # rated current, p.u.
    i_max: float = 1.1            # converter current limit, p.u.
    k_pos: float = 2.0            # positive-sequence reactive current factor
    k_neg: float = 2.0            # negative-sequence reactive current factor
    ramp_k: float = 1.0           # recovery rate limit, p.u./s
    v_cut_in: float = 3.0         # m/s
    v_rated: float = 12.0         # m/s
    x_stator: float = 0.10        # p.u.
    r_stator: float = 0.01        # p.u.
    h_turbine: float = 4.0        # s
    h_generator: float = 0.9      # s
    c_dc: float = 0.1             # DC-link capacitance constant, p.u.*s
    v_dc_ref: float = 1.0         # p.u.
    chopper_on: float = 1.10      # p.u., chopper latch-on threshold
    chopper_off: float = 1.05     # p.u., chopper latch-off threshold
    pi_kp: float = 5.0            # DC-voltage controller proportional gain
    pi_ki: float = 50.0           # DC-voltage controller integral gain
    relief_gain: float = 2.0      # machine-side back-off per p.u. of DC overvoltage

    def __post_init__(self):
        if not 0.0 < self.i_n <= self.i_max:
            raise ValueError("require 0 < i_n <= i_max")
        if self.k_pos < 0.0 or self.k_neg < 0.0:
            raise ValueError("reactive current factors must be >= 0")
        if not self.v_cut_in < self.v_rated:
            raise ValueError("require v_cut_in < v_rated")
        if not self.chopper_off < self.chopper_on:
            raise ValueError("require chopper_off < chopper_on")
        for name in ("s_rated", "ramp_k", "h_turbine", "h_generator", "c_dc", "v_dc_ref"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")


#: Control constants that must be identical across members of one cluster.
SHARED_CONTROL_FIELDS = (
    "i_n",
    "i_max",
    "k_pos",
    "k_neg",
    "ramp_k",
    "v_cut_in",
    "v_rated",
    "c_dc",
    "v_dc_ref",
    "chopper_on",
    "chopper_off",
    "pi_kp",
    "pi_ki",
    "relief_gain",
)


@dataclass
class PmsgState:
    """Evolving quasi-static state of one PMSG."""

    v_dc: float = 1.0
    i_d_pos: float = 0.0          # last applied positive-sequence d current
    pi_integral: float = 0.0      # accumulated power demand of the DC-voltage loop
    chopper_active: bool = False
    p0: float = 0.0               # pre-fault active power
    i_d0: float = 0.0             # pre-fault d current, p0 / U_D_NOMINAL
    mode: Mode = Mode.NORMAL
    recovery_elapsed: float = 0.0 # time since ramp recovery started


class CurrentRefs(NamedTuple):
    """Positive and negative sequence dq current references."""

    idq_pos: DqPair
    idq_neg: DqPair


def initial_state(p0: float, params: PmsgParams, u_terminal: float = 1.0) -> PmsgState:
    """Steady-state operating point for a given pre-fault power."""
    return PmsgState(
        v_dc=params.v_dc_ref,
        i_d_pos=p0 / max(u_terminal, _U_FLOOR),
        pi_integral=p0,
        chopper_active=False,
        p0=p0,
        i_d0=p0 / U_D_NOMINAL,
        mode=Mode.NORMAL,
        recovery_elapsed=0.0,
    )


# ---------------------------------------------------------------------------
# wind power curve
# ---------------------------------------------------------------------------

def wind_power(v_w: float, params: PmsgParams) -> float:
    """Active power (p.u.) produced at wind speed ``v_w`` (m/s).

    Zero below cut-in, cubic up to rated speed, rated power above (pitch
    control plateau).  Monotone non-decreasing.
    """
    if v_w < 0.0:
        raise ValueError("wind speed must be >= 0")
    if v_w < params.v_cut_in:
        return 0.0
    if v_w >= params.v_rated:
        return 1.0
    return (v_w / params.v_rated) ** 3


def inverse_wind_power(p: float, params: PmsgParams) -> float:
    """Wind speed whose curve value is ``p``, clamped to [cut-in, rated]."""
    if p > 1.0 + 1e-12 or p < 0.0:
        raise OutOfRange(f"power {p} outside the wind power curve range [0, 1]")
    v = params.v_rated * min(p, 1.0) ** (1.0 / 3.0)
    return min(max(v, params.v_cut_in), params.v_rated)


# ---------------------------------------------------------------------------
# current reference laws
# ---------------------------------------------------------------------------

def current_refs_strategy1(
    udq_pos: DqPair, udq_neg: DqPair, i_dref1: float, params: PmsgParams
) -> CurrentRefs:
    """Unbalance-mitigating references with converter capacity priority.

    The negative-sequence reactive current has grid-code priority, then the
    positive reactive injection, then active current from the remaining
    capacity.  ``i_dref1`` is the active current asked for by the DC-link
    voltage control.
    """
    u_pos = udq_pos.magnitude
    i_q_demand = max(0.0, params.k_pos * (SUPPORT_BAND_TOP - u_pos) * params.i_n)
    i_d_neg = -params.k_neg * udq_neg.q * params.i_n
    i_q_neg = params.k_neg * udq_neg.d * params.i_n
    i_neg_mag = math.hypot(i_d_neg, i_q_neg)

    if i_neg_mag >= params.i_max:
        scale = params.i_max / i_neg_mag
        return CurrentRefs(
            DqPair(0.0, 0.0), DqPair(i_d_neg * scale, i_q_neg * scale)
        )

    remaining = params.i_max - i_neg_mag
    if i_q_demand >= remaining:
        return CurrentRefs(DqPair(0.0, remaining), DqPair(i_d_neg, i_q_neg))

    i_d_max = math.sqrt(max(remaining * remaining - i_q_demand * i_q_demand, 0.0))
    i_d = min(max(i_dref1, 0.0), i_d_max)
    return CurrentRefs(DqPair(i_d, i_q_demand), DqPair(i_d_neg, i_q_neg))


def current_refs_strategy2(
    udq_pos: DqPair, udq_neg: DqPair, p0: float, params: PmsgParams
) -> CurrentRefs:
    """Oscillation-cancelling references.

    Delivers min(pre-fault power, capacity-limited maximum) as pure DC
    active power; the double-frequency power components are zero by
    construction.  Raises :class:`DegenerateSequenceVoltages` when the
    sequence magnitudes are too close.
    """
    u_pos = udq_pos.magnitude
    u_neg = udq_neg.magnitude
    if u_pos - u_neg < EPS_D:
        raise DegenerateSequenceVoltages(
            f"U+ - U- = {u_pos - u_neg:.4f} below {EPS_D}"
        )
    denom = u_pos * u_pos - u_neg * u_neg
    p_max = (u_pos - u_neg) * params.i_max
    p_ref = min(max(p0, 0.0), p_max)
    c = p_ref / denom
    return CurrentRefs(
        DqPair(c * udq_pos.d, c * udq_pos.q),
        DqPair(-c * udq_neg.d, -c * udq_neg.q),
    )


def max_active_current_strategy1(u_pos: float, u_neg: float, params: PmsgParams) -> float:
    """Largest d-axis current available after the reactive obligations.

    Zero when the converter capacity is exhausted by the reactive
    injections alone.
    """
    i_q = max(0.0, params.k_pos * (SUPPORT_BAND_TOP - u_pos) * params.i_n)
    remaining = params.i_max - params.k_neg * u_neg * params.i_n
    if remaining <= 0.0 or remaining <= i_q:
        return 0.0
    return math.sqrt(remaining * remaining - i_q * i_q)


def limited_d_current_strategy2(u_pos: float, u_neg: float, params: PmsgParams) -> float:
    """d-axis current applied when the oscillation-cancelling law saturates."""
    if u_pos - u_neg < EPS_D:
        raise DegenerateSequenceVoltages(
            f"U+ - U- = {u_pos - u_neg:.4f} below {EPS_D}"
        )
    return u_pos * params.i_max / (u_pos + u_neg)


def ramp_limit(i_prev: float, i_target: float, rate: float, h: float) -> float:
    """Rate-limit an upward current move; downward moves pass through."""
    if h <= 0.0 or rate <= 0.0:
        raise ValueError("ramp_limit requires h > 0 and rate > 0")
    if i_target <= i_prev:
        return i_target
    return min(i_target, i_prev + rate * h)


# ---------------------------------------------------------------------------
# DC link
# ---------------------------------------------------------------------------

def dc_link_step(
    state: PmsgState, p_in: float, p_out: float, h: float, params: PmsgParams
) -> PmsgState:
    """Advance the DC-link energy balance one explicit Euler step.

    The chopper latches on at ``chopper_on`` and off at ``chopper_off``;
    while active it dissipates the (non-negative) input surplus so the
    capacitor voltage cannot run away.
    """
    if h <= 0.0:
        raise ValueError("step size must be > 0")
    if state.v_dc <= 0.0:
        raise NonFiniteState(f"DC voltage {state.v_dc} not positive")

    active = state.chopper_active
    if state.v_dc >= params.chopper_on:
        active = True
    elif state.v_dc <= params.chopper_off:
        active = False

    p_chopper = max(p_in - p_out, 0.0) if active else 0.0
    v_new = state.v_dc + h * (p_in - p_chopper - p_out) / (params.c_dc * state.v_dc)
    if not math.isfinite(v_new) or not 0.0 < v_new <= 10.0:
        raise NonFiniteState(f"DC voltage left (0, 10]: {v_new}")
    return replace(state, v_dc=v_new, chopper_active=active)


# ---------------------------------------------------------------------------
# one quasi-static step
# ---------------------------------------------------------------------------

RampRateFn = Callable[[float], float]


def _prospective_mode(state: PmsgState, u_pos: float) -> Mode:
    if state.mode is Mode.NORMAL:
        return Mode.FAULT if u_pos < SUPPORT_BAND_TOP else Mode.NORMAL
    if state.mode is Mode.FAULT:
        if u_pos >= SUPPORT_BAND_TOP:
            if state.i_d_pos < state.i_d0 - _TINY:
                return Mode.RECOVERY
            return Mode.NORMAL
        return Mode.FAULT
    # recovery is interrupted by a new dip, otherwise it runs to completion
    if u_pos < SUPPORT_BAND_TOP:
        return Mode.FAULT
    return Mode.RECOVERY


def _resolve_refs(
    state: PmsgState,
    seq_voltage: SequenceSet,
    strategy: Strategy,
    h: float,
    params: PmsgParams,
    ramp_rate_fn: RampRateFn | None,
):
    """Shared algebraic core of injection_currents and turbine_step."""
    udq_pos, udq_neg, theta = orient_dq(seq_voltage)
    u_pos = udq_pos.d
    mode = _prospective_mode(state, u_pos)

    if strategy is Strategy.MITIGATE_UNBALANCE:
        err = state.v_dc - params.v_dc_ref
        demand = min(max(params.pi_kp * err + state.pi_integral, 0.0), 1.0)
        i_dref1 = demand / max(u_pos, _U_FLOOR)
        refs = current_refs_strategy1(udq_pos, udq_neg, i_dref1, params)
    else:
        err = state.v_dc - params.v_dc_ref
        i_dref1 = math.inf  # the oscillation law does not use the DC loop
        refs = current_refs_strategy2(udq_pos, udq_neg, state.p0, params)

    i_target = refs.idq_pos.d
    if mode is Mode.RECOVERY:
        if i_target <= state.i_d_pos + _TINY and state.i_d_pos >= state.i_d0 - _TINY:
            mode = Mode.NORMAL  # no upward pressure left, recovery complete
        else:
            elapsed = state.recovery_elapsed if state.mode is Mode.RECOVERY else 0.0
            rate = ramp_rate_fn(elapsed) if ramp_rate_fn is not None else params.ramp_k
            i_apply = ramp_limit(state.i_d_pos, i_target, rate, h)
            if i_apply != i_target:
                refs = CurrentRefs(DqPair(i_apply, refs.idq_pos.q), refs.idq_neg)

    return refs, udq_pos, udq_neg, theta, mode, i_dref1, err


def _to_network_frame(refs: CurrentRefs, theta: float) -> SequenceSet:
    rot = complex(math.cos(theta), math.sin(theta))
    pos = complex(refs.idq_pos.d, refs.idq_pos.q) * rot
    neg = complex(refs.idq_neg.d, refs.idq_neg.q) * rot
    return SequenceSet(pos=pos, neg=neg)


def injection_currents(
    state: PmsgState,
    seq_voltage: SequenceSet,
    strategy: Strategy,
    h: float,
    params: PmsgParams,
    ramp_rate_fn: RampRateFn | None = None,
) -> tuple[SequenceSet, CurrentRefs]:
    """Algebraic current response at a candidate terminal voltage.

    Used inside the per-step network solve; identical to the currents that
    :func:`turbine_step` will apply at the same voltage, but without
    advancing any state.
    """
    refs, _, _, theta, _, _, _ = _resolve_refs(
        state, seq_voltage, strategy, h, params, ramp_rate_fn
    )
    return _to_network_frame(refs, theta), refs


def turbine_step(
    state: PmsgState,
    seq_voltage: SequenceSet,
    strategy: Strategy,
    h: float,
    params: PmsgParams,
    ramp_rate_fn: RampRateFn | None = None,
) -> tuple[PmsgState, SequenceSet]:
    """Advance one PMSG by one step at the given terminal voltage.

    Returns the new state and the injected sequence currents in the network
    frame.  Mode transitions are voltage driven: a dip below the support
    band enters fault operation, restoration enters ramp recovery when the
    applied current is below its pre-fault value.
    """
    refs, udq_pos, udq_neg, theta, mode, i_dref1, err = _resolve_refs(
        state, seq_voltage, strategy, h, params, ramp_rate_fn
    )

    p_out = (
        udq_pos.d * refs.idq_pos.d
        + udq_pos.q * refs.idq_pos.q
        + udq_neg.d * refs.idq_neg.d
        + udq_neg.q * refs.idq_neg.q
    )
    if mode is Mode.FAULT:
        p_in = state.p0
    else:
        # machine side backs off on DC overvoltage (pitch/MPPT relief)
        relief = params.relief_gain * max(state.v_dc - params.v_dc_ref, 0.0)
        p_in = state.p0 * max(1.0 - relief, 0.0)

    dc = dc_link_step(state, p_in, p_out, h, params)

    pi_integral = state.pi_integral
    if strategy is Strategy.MITIGATE_UNBALANCE:
        clamped = refs.idq_pos.d < i_dref1 - _TINY
        if not (clamped and err > 0.0):
            pi_integral = min(max(pi_integral + params.pi_ki * err * h, 0.0), 1.0)

    if mode is Mode.RECOVERY:
        elapsed = (state.recovery_elapsed + h) if state.mode is Mode.RECOVERY else h
    else:
        elapsed = 0.0

    new_state = PmsgState(
        v_dc=dc.v_dc,
        i_d_pos=refs.idq_pos.d,
        pi_integral=pi_integral,
        chopper_active=dc.chopper_active,
        p0=state.p0,
        i_d0=state.i_d0,
        mode=mode,
        recovery_elapsed=elapsed,
    )
    return new_state, _to_network_frame(refs, theta)


# ---------------------------------------------------------------------------
# static injection laws used by the collector-network voltage solvers
# ---------------------------------------------------------------------------

def static_negative_current(u_neg: complex, params: PmsgParams) -> complex:
    """Negative-sequence current injected at terminal voltage ``u_neg``.

    The unbalance-mitigating law is a pure shunt: the injected current is
    j*K-*I_N times the terminal phasor (magnitude capped at the converter
    limit), which absorbs reactive power proportional to the squared
    negative voltage.
    """
    mag = abs(u_neg)
    if mag == 0.0:
        return 0j
    b = min(params.k_neg * params.i_n, params.i_max / mag)
    return 1j * b * u_neg


def static_positive_current(
    u_pos: complex,
    u_neg_mag: float,
    p0: float,
    strategy: Strategy,
    params: PmsgParams,
) -> complex:
    """Positive-sequence current injected at terminal voltage ``u_pos``.

    Uses the steady operating assumption that the DC-voltage loop asks for
    the pre-fault power, i.e. an active current of p0 / U+.
    """
    mag = abs(u_pos)
    if mag < _U_FLOOR:
        raise ZeroDivisionError("positive terminal voltage below usable floor")
    udq_pos = DqPair(mag, 0.0)
    udq_neg = DqPair(u_neg_mag, 0.0)
    if strategy is Strategy.MITIGATE_UNBALANCE:
        refs = current_refs_strategy1(udq_pos, udq_neg, p0 / mag, params)
    else:
        refs = current_refs_strategy2(udq_pos, udq_neg, p0, params)
    return complex(refs.idq_pos.d, refs.idq_pos.q) * (u_pos / mag)
