"""Equivalent-machine construction for the three response clusters.

Clusters I and II aggregate with the capacity-weighted method.  Cluster III
members each recover their d-axis current at the shared rate limit but for
individually different durations, so their sum is piecewise linear with a
decreasing slope; the equivalent machine reproduces it exactly through a
multi-segment ramp-rate schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import pmsg
from .clustering import Cluster, ClusterAssignment
from .collector import FeederTopology, VoltageSolution, equivalent_collector_impedance
from .errors import EmptyCluster, HeterogeneousParams, NotClusterThree
from .pmsg import PmsgParams, Strategy

_MERGE_TOL = 1e-6
_MARGIN_TOL = 1e-9


def capacity_weighted_params(members: Sequence[PmsgParams]) -> PmsgParams:
    """Aggregate nameplate parameters of one cluster.

    Ratings add, stator impedances combine in parallel (which reduces to
    X/N for identical members), inertia constants average, and all control
    constants carry over unchanged.  Members whose control constants differ
    cannot share one equivalent machine.
    """
    if not members:
        raise EmptyCluster("cannot aggregate an empty member list")
    first = members[0]
    for other in members[1:]:
        for name in pmsg.SHARED_CONTROL_FIELDS:
            a, b = getattr(first, name), getattr(other, name)
            if not math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9):
                raise HeterogeneousParams(
                    f"members differ in {name}: {a} vs {b}"
                )

    s_eq = sum(m.s_rated for m in members)

    def parallel(values: list[float]) -> float:
        if any(v == 0.0 for v in values):
            return 0.0
        return 1.0 / sum(1.0 / v for v in values)

    return replace(
        first,
        s_rated=s_eq,
        x_stator=parallel([m.x_stator for m in members]),
        r_stator=parallel([m.r_stator for m in members]),
        h_turbine=sum(m.h_turbine for m in members) / len(members),
        h_generator=sum(m.h_generator for m in members) / len(members),
    )


def _limited_d_current(
    u_pos: float, u_neg: float, strategy: Strategy, params: PmsgParams
) -> float:
    if strategy is Strategy.MITIGATE_UNBALANCE:
        return pmsg.max_active_current_strategy1(u_pos, u_neg, params)
    return pmsg.limited_d_current_strategy2(u_pos, u_neg, params)


def recovery_durations(
    members: Sequence[tuple[float, float, float]],
    strategy: Strategy,
    params: PmsgParams,
) -> list[float]:
    """Ramp durations of ramp-recovery members, sorted ascending.

    Each member is (wind speed, U+ magnitude, U- magnitude).  The duration
    is the gap between the pre-fault d current and the capacity-limited d
    current at the dip voltages, divided by the recovery rate limit.
    """
    durations: list[float] = []
    for v_w, u_pos, u_neg in members:
        i_d0 = pmsg.wind_power(v_w, params) / pmsg.U_D_NOMINAL
        i_dcri2 = _limited_d_current(u_pos, u_neg, strategy, params)
        if i_d0 <= i_dcri2:
            raise NotClusterThree(
                f"member has no recovery margin: i_d0={i_d0:.4f} <= i_dcri2={i_dcri2:.4f}"
            )
        durations.append((i_d0 - i_dcri2) / params.ramp_k)
    return sorted(durations)


@dataclass(frozen=True)
class RampSchedule:
    """Piecewise-constant recovery-rate limit of the equivalent machine.

    ``rates[j]`` applies on the interval ending at ``breakpoints[j]`` (the
    first interval starts at clearance); after the last breakpoint the
    limit stays at ``tail_rate`` so the voltage-loop overshoot remains rate
    limited.  Rates are expressed as sums of per-member rates: with N
    members still recovering the limit is N times the member rate, dropping
    by the breakpoint multiplicity as members finish.
    """

    breakpoints: tuple[float, ...]
    rates: tuple[float, ...]
    tail_rate: float

    def __post_init__(self):
        if len(self.breakpoints) != len(self.rates):
            raise ValueError("one rate per breakpoint interval required")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    def rate_at(self, t: float) -> float:
        for b, rate in zip(self.breakpoints, self.rates):
            if t < b:
                return rate
        return self.tail_rate

    def rise_until(self, t: float) -> float:
        """Integral of the rate limit from 0 to t (uncapped)."""
        rise = 0.0
        prev = 0.0
        for b, rate in zip(self.breakpoints, self.rates):
            if t <= b:
                return rise + rate * (t - prev)
            rise += rate * (b - prev)
            prev = b
        return rise + self.tail_rate * (t - prev)


def ramp_schedule(t_sorted: Sequence[float], k: float) -> RampSchedule:
    """Build the multi-segment schedule from sorted member durations.

    Near-equal durations merge into one breakpoint and the rate drops by
    the multiplicity.  The first interval runs at N*k for N members; the
    tail holds the single-member rate k.
    """
    if not t_sorted:
        raise ValueError("at least one duration required")
    if any(t2 < t1 for t1, t2 in zip(t_sorted, t_sorted[1:])):
        raise ValueError("durations must be sorted ascending")
    n = len(t_sorted)
    breakpoints: list[float] = []
    multiplicities: list[int] = []
    for t in t_sorted:
        if breakpoints and t - breakpoints[-1] <= _MERGE_TOL:
            multiplicities[-1] += 1
        else:
            breakpoints.append(t)
            multiplicities.append(1)
    rates: list[float] = []
    remaining = n
    for mult in multiplicities:
        rates.append(remaining * k)
        remaining -= mult
    return RampSchedule(
        breakpoints=tuple(breakpoints), rates=tuple(rates), tail_rate=k
    )


def ramp_trajectory(
    schedule: RampSchedule,
    i_start: float,
    i_target: float,
    times: Sequence[float],
) -> np.ndarray:
    """Analytic rate-limited trajectory from ``i_start`` toward ``i_target``."""
    gap = max(i_target - i_start, 0.0)
    out = np.empty(len(times))
    for idx, t in enumerate(times):
        out[idx] = i_start + min(schedule.rise_until(t), gap) if t > 0 else i_start
    return out


@dataclass(frozen=True)
class EquivalentMachine:
    """One aggregated machine of the reduced farm."""

    machine_id: str
    cluster: Cluster | None            # None for the whole-farm single machine
    params: PmsgParams                 # aggregated; s_rated is the cluster total
    p0: float                          # p.u. on the aggregated base
    wind_speed: float                  # equilibrium speed matching p0 where possible
    z_eq: complex                      # equivalent collector impedance, system base
    member_ids: tuple[str, ...]
    schedule: RampSchedule | None = None
    recovery_rates: tuple[float, ...] | None = None  # per interval + tail, own base

    def ramp_rate_fn(self):
        """Time-varying recovery rate limit in this machine's own base."""
        if self.schedule is None or self.recovery_rates is None:
            return None
        breakpoints = self.schedule.breakpoints
        rates = self.recovery_rates

        def rate(elapsed: float) -> float:
            for b, r in zip(breakpoints, rates):
                if elapsed < b:
                    return r
            return rates[-1]

        return rate


@dataclass(frozen=True)
class EquivalentFarm:
    """Up to three aggregated machines plus their collector impedances."""

    machines: tuple[EquivalentMachine, ...]
    strategy: Strategy
    s_total_mva: float
    u_pcc_pos: complex                 # operating point the farm was built at
    u_pcc_neg: complex

    def __post_init__(self):
        total = sum(m.params.s_rated for m in self.machines)
        if not math.isclose(total, self.s_total_mva, rel_tol=1e-9):
            raise ValueError("aggregated ratings must preserve the farm total")


def _eqbase_recovery_rates(
    durations: Sequence[float],
    member_ratings: Sequence[float],
    breakpoints: Sequence[float],
    k: float,
) -> tuple[float, ...]:
    """Schedule rates converted to the aggregated machine's own p.u. base.

    The summed member current slope is k times the capacity share of the
    members still recovering; the tail keeps the mean member share, which
    for equal ratings is k/N.
    """
    s_eq = sum(member_ratings)
    rates = []
    for b in breakpoints:
        share = sum(
            s for t, s in zip(durations, member_ratings) if t >= b - _MERGE_TOL
        )
        rates.append(k * share / s_eq)
    rates.append(k * (s_eq / len(member_ratings)) / s_eq)
    return tuple(rates)


def _equivalent_machine(
    machine_id: str,
    cluster: Cluster | None,
    member_ids: Sequence[str],
    solution: VoltageSolution,
    wind_speeds: Mapping[str, float],
    strategy: Strategy,
    params_by_node: Mapping[str, PmsgParams],
    with_schedule: bool,
) -> EquivalentMachine:
    members = [params_by_node[nid] for nid in member_ids]
    params_eq = capacity_weighted_params(members)
    z_eq = equivalent_collector_impedance(
        [solution.pos.voltages[nid] for nid in member_ids],
        [solution.pos.injections[nid] for nid in member_ids],
        solution.u_pcc_pos,
    )
    p_abs = sum(
        pmsg.wind_power(wind_speeds[nid], params_by_node[nid]) * params_by_node[nid].s_rated
        for nid in member_ids
    )
    p0_eq = p_abs / params_eq.s_rated
    curve_floor = pmsg.wind_power(params_eq.v_cut_in, params_eq)
    v_eq = pmsg.inverse_wind_power(min(max(p0_eq, curve_floor), 1.0), params_eq)

    schedule = None
    rates_eq = None
    if with_schedule:
        tuples = [
            (
                wind_speeds[nid],
                abs(solution.pos.voltages[nid]),
                abs(solution.neg.voltages[nid]),
            )
            for nid in member_ids
        ]
        durations = recovery_durations(tuples, strategy, params_eq)
        schedule = ramp_schedule(durations, params_eq.ramp_k)
        rates_eq = _eqbase_recovery_rates(
            durations,
            [params_by_node[nid].s_rated for nid in member_ids],
            schedule.breakpoints,
            params_eq.ramp_k,
        )

    return EquivalentMachine(
        machine_id=machine_id,
        cluster=cluster,
        params=params_eq,
        p0=p0_eq,
        wind_speed=v_eq,
        z_eq=z_eq,
        member_ids=tuple(member_ids),
        schedule=schedule,
        recovery_rates=rates_eq,
    )


def build_equivalent_farm(
    assignments: Sequence[ClusterAssignment],
    solution: VoltageSolution,
    topology: FeederTopology,
    wind_speeds: Mapping[str, float],
    strategy: Strategy,
    params_by_node: Mapping[str, PmsgParams],
) -> EquivalentFarm:
    """Aggregate per-cluster machines from a solved operating point.

    Empty clusters are omitted.  A nominal cluster-III member whose
    capacity-limited current already reaches its pre-fault value (possible
    only in the rated-power boundary sliver) has nothing to ramp and is
    aggregated with cluster II instead.
    """
    assigned_ids = {a.turbine_id for a in assignments}
    if assigned_ids != set(topology.turbine_ids):
        raise ValueError("assignments must cover exactly the farm's turbines")

    groups: dict[Cluster, list[str]] = {c: [] for c in Cluster}
    for a in assignments:
        cluster = a.cluster
        if cluster is Cluster.III:
            u_pos = abs(solution.pos.voltages[a.turbine_id])
            u_neg = abs(solution.neg.voltages[a.turbine_id])
            i_dcri2 = _limited_d_current(
                u_pos, u_neg, strategy, params_by_node[a.turbine_id]
            )
            if a.p0 / pmsg.U_D_NOMINAL <= i_dcri2 + _MARGIN_TOL:
                cluster = Cluster.II
        groups[cluster].append(a.turbine_id)

    machines = []
    for cluster in (Cluster.I, Cluster.II, Cluster.III):
        ids = groups[cluster]
        if not ids:
            continue
        machines.append(
            _equivalent_machine(
                f"EQ-{cluster.value}",
                cluster,
                ids,
                solution,
                wind_speeds,
                strategy,
                params_by_node,
                with_schedule=cluster is Cluster.III,
            )
        )

    return EquivalentFarm(
        machines=tuple(machines),
        strategy=strategy,
        s_total_mva=sum(params_by_node[nid].s_rated for nid in topology.turbine_ids),
        u_pcc_pos=solution.u_pcc_pos,
        u_pcc_neg=solution.u_pcc_neg,
    )


def build_single_machine_farm(
    solution: VoltageSolution,
    topology: FeederTopology,
    wind_speeds: Mapping[str, float],
    strategy: Strategy,
    params_by_node: Mapping[str, PmsgParams],
) -> EquivalentFarm:
    """Whole-farm single-machine aggregate (the traditional baseline)."""
    machine = _equivalent_machine(
        "EQ-ALL",
        None,
        list(topology.turbine_ids),
        solution,
        wind_speeds,
        strategy,
        params_by_node,
        with_schedule=False,
    )
    return EquivalentFarm(
        machines=(machine,),
        strategy=strategy,
        s_total_mva=machine.params.s_rated,
        u_pcc_pos=solution.u_pcc_pos,
        u_pcc_neg=solution.u_pcc_neg,
    )
