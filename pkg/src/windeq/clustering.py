"""Analytic clustering of PMSG active-power response under asymmetrical dips.

Two critical pre-fault powers split the response into three classes:

* Cluster I   - the converter has capacity to restore the pre-fault DC
  active power while the dip is on.
* Cluster II  - capacity limited during the dip, but the applied d-axis
  current exceeds its pre-fault value, so power overshoots at clearance
  and settles back without a ramp.
* Cluster III - capacity limited with the d-axis current below its
  pre-fault value at clearance, so the recovery is rate limited.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from . import pmsg
from .errors import OutOfRange
from .phasor import DqPair
from .pmsg import PmsgParams, Strategy


class Cluster(Enum):
    I = "I"
    II = "II"
    III = "III"


@dataclass(frozen=True)
class CriticalPowers:
    """Critical pre-fault powers and the matching critical wind speeds."""

    p_cri1: float
    p_cri2: float
    v_cri1: float
    v_cri2: float


@dataclass(frozen=True)
class ClusterAssignment:
    turbine_id: str
    cluster: Cluster
    criticals: CriticalPowers
    p0: float


def _wind_speeds(p_cri1: float, p_cri2: float, params: PmsgParams) -> tuple[float, float]:
    v1 = pmsg.inverse_wind_power(min(max(p_cri1, 0.0), 1.0), params)
    v2 = pmsg.inverse_wind_power(min(max(p_cri2, 0.0), 1.0), params)
    return v1, v2


def critical_powers_strategy1(
    udq_pos: DqPair, u_neg_mag: float, params: PmsgParams
) -> CriticalPowers:
    """Critical powers under the unbalance-mitigating control.

    With the converter at its limit the deliverable DC power during the dip
    is i_dmax * U+; after clearance the voltage is nominal, so the second
    critical power is i_dmax itself, capped at rated power.
    """
    i_dmax = pmsg.max_active_current_strategy1(udq_pos.magnitude, u_neg_mag, params)
    p_cri1 = i_dmax * udq_pos.d
    p_cri2 = min(i_dmax * pmsg.U_D_NOMINAL, 1.0)
    v1, v2 = _wind_speeds(p_cri1, p_cri2, params)
    return CriticalPowers(p_cri1=p_cri1, p_cri2=p_cri2, v_cri1=v1, v_cri2=v2)


def critical_powers_strategy2(
    u_pos_mag: float, u_neg_mag: float, params: PmsgParams
) -> CriticalPowers:
    """Critical powers under the oscillation-cancelling control."""
    p_cri1 = (u_pos_mag - u_neg_mag) * params.i_max
    i_dcri2 = pmsg.limited_d_current_strategy2(u_pos_mag, u_neg_mag, params)
    p_cri2 = min(i_dcri2 * pmsg.U_D_NOMINAL, 1.0)
    v1, v2 = _wind_speeds(p_cri1, p_cri2, params)
    return CriticalPowers(p_cri1=p_cri1, p_cri2=p_cri2, v_cri1=v1, v_cri2=v2)


def critical_powers(
    strategy: Strategy, u_pos_mag: float, u_neg_mag: float, params: PmsgParams
) -> CriticalPowers:
    """Dispatch on strategy with magnitude inputs (oriented frame, U_q+ = 0)."""
    if strategy is Strategy.MITIGATE_UNBALANCE:
        return critical_powers_strategy1(DqPair(u_pos_mag, 0.0), u_neg_mag, params)
    return critical_powers_strategy2(u_pos_mag, u_neg_mag, params)


def assign_cluster(
    v_w: float,
    criticals: CriticalPowers,
    params: PmsgParams,
    turbine_id: str = "",
) -> ClusterAssignment:
    """Label one turbine by comparing its pre-fault power to the criticals.

    Boundary ties go to the higher-numbered (more limited) cluster.
    """
    p0 = pmsg.wind_power(v_w, params)
    if p0 < criticals.p_cri1:
        cluster = Cluster.I
    elif p0 < criticals.p_cri2:
        cluster = Cluster.II
    else:
        cluster = Cluster.III
    return ClusterAssignment(
        turbine_id=turbine_id, cluster=cluster, criticals=criticals, p0=p0
    )


@dataclass(frozen=True)
class BoundaryPoint:
    u_pos: float
    u_neg: float
    v_cri1: float
    v_cri2: float
    strategy: int


def boundary_surface(
    strategy: Strategy,
    u_neg_fixed: float,
    u_pos_values: Sequence[float],
    params: PmsgParams,
) -> list[BoundaryPoint]:
    """Sample the critical wind-speed curves over a positive-voltage grid.

    The curves are clamped to [cut-in, rated] wind speed by construction.
    For the oscillation-cancelling strategy the grid must stay on the
    usable side of the degenerate line U+ = U-.
    """
    rows: list[BoundaryPoint] = []
    for u_pos in u_pos_values:
        if strategy is Strategy.MITIGATE_OSCILLATION and u_pos - u_neg_fixed < pmsg.EPS_D:
            raise OutOfRange(
                f"u_pos={u_pos} within eps of u_neg={u_neg_fixed} for strategy 2"
            )
        crit = critical_powers(strategy, u_pos, u_neg_fixed, params)
        rows.append(
            BoundaryPoint(
                u_pos=u_pos,
                u_neg=u_neg_fixed,
                v_cri1=crit.v_cri1,
                v_cri2=crit.v_cri2,
                strategy=strategy.value,
            )
        )
    return rows
