"""External grid as a sequence-domain Thevenin source with fault shunts.

The grid is a voltage source behind per-sequence impedances; the wind farm
connects to the faulted bus through its interface transformer.  Standard
asymmetrical faults are applied at the grid-side bus by the classic series
or parallel interconnection of the sequence networks, with the farm's
injected currents superposed as Norton sources.  A delta winding on the
farm side keeps zero-sequence quantities out of the farm.

The module also hosts the outer iteration that finds the fault-on PCC
voltage of an anticipated contingency: guess the PCC voltage, solve the
collector network, cluster, build the reduced farm, simulate the
contingency with it, and read back the PCC voltage just before clearance
until the guess reproduces itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .aggregation import EquivalentFarm, build_equivalent_farm
from .clustering import assign_cluster, critical_powers
from .collector import solve_terminal_voltages
from .errors import NoConvergence, SingularNetwork
from .phasor import SequenceSet

_SINGULAR_EPS = 1e-12


class FaultKind(Enum):
    NONE = "none"
    LG = "lg"
    LL = "ll"
    LLG = "llg"
    THREE_PHASE = "3ph"


@dataclass(frozen=True)
class TheveninGrid:
    """Sequence-network reduction of the external system at the fault bus."""

    emf: complex = 1.0 + 0j
    z1: complex = 0.01 + 0.12j
    z2: complex = 0.01 + 0.12j
    z0: complex = 0.0 + 0.08j
    z_transformer: complex = 0.004 + 0.06j
    delta_winding: bool = True  # farm-side delta blocks zero sequence

    def __post_init__(self):
        if abs(self.z1) <= _SINGULAR_EPS:
            raise ValueError("positive-sequence source impedance must be nonzero")


@dataclass(frozen=True)
class FaultSpec:
    """One shunt fault at the grid-side bus.

    ``z_fault`` is the per-phase fault impedance, ``z_ground`` an extra
    common ground-return impedance (used by ground faults).
    """

    kind: FaultKind
    z_fault: complex = 0j
    z_ground: complex = 0j
    t_start: float = 0.5
    t_clear: float = 0.8

    def __post_init__(self):
        if self.t_start >= self.t_clear:
            raise ValueError("fault must clear after it starts")
        if self.z_fault.real < 0.0 or self.z_ground.real < 0.0:
            raise ValueError("fault impedances need a non-negative resistive part")


def fault_sequence_voltages(
    grid: TheveninGrid,
    fault: FaultSpec | None,
    farm_injection: SequenceSet,
) -> SequenceSet:
    """PCC sequence voltages for a given fault state and farm injection.

    The farm currents (positive into the grid) flow through the interface
    transformer into the faulted bus, so the PCC rides above the fault-bus
    voltage by the transformer drop.  ``fault=None`` (or kind NONE) gives
    the unfaulted operating voltage.
    """
    i_pos = farm_injection.pos
    i_neg = farm_injection.neg

    # open-circuit (pre-fault-shunt) voltages at the faulted bus
    v1_oc = grid.emf + grid.z1 * i_pos
    v2_oc = grid.z2 * i_neg
    v0_oc = 0j

    kind = FaultKind.NONE if fault is None else fault.kind
    zf = 0j if fault is None else fault.z_fault
    zg = 0j if fault is None else fault.z_ground

    if kind is FaultKind.NONE:
        v1, v2, v0 = v1_oc, v2_oc, v0_oc
    elif kind is FaultKind.THREE_PHASE:
        # each live sequence network loaded by the fault impedance
        v1 = v1_oc * zf / (grid.z1 + zf) if abs(zf) > 0 else 0j
        v2 = v2_oc * zf / (grid.z2 + zf) if abs(zf) > 0 else 0j
        v0 = v0_oc
    elif kind is FaultKind.LG:
        z_loop = grid.z1 + grid.z2 + grid.z0 + 3.0 * (zf + zg)
        if abs(z_loop) <= _SINGULAR_EPS:
            raise SingularNetwork("line-ground fault loop impedance is zero")
        i_f = (v1_oc + v2_oc + v0_oc) / z_loop
        v1 = v1_oc - grid.z1 * i_f
        v2 = v2_oc - grid.z2 * i_f
        v0 = v0_oc - grid.z0 * i_f
    elif kind is FaultKind.LL:
        z_loop = grid.z1 + grid.z2 + zf
        if abs(z_loop) <= _SINGULAR_EPS:
            raise SingularNetwork("line-line fault loop impedance is zero")
        i_f = (v1_oc - v2_oc) / z_loop
        v1 = v1_oc - grid.z1 * i_f
        v2 = v2_oc + grid.z2 * i_f
        v0 = v0_oc
    elif kind is FaultKind.LLG:
        # unknowns: sequence currents into the fault; equal fault-point
        # voltages behind the per-phase impedance, zero current sum
        z1f = grid.z1 + zf
        z2f = grid.z2 + zf
        z0f = grid.z0 + zf + 3.0 * zg
        a = np.array(
            [
                [z1f, -z2f, 0.0],
                [0.0, z2f, -z0f],
                [1.0, 1.0, 1.0],
            ],
            dtype=complex,
        )
        b = np.array([v1_oc - v2_oc, v2_oc - v0_oc, 0.0], dtype=complex)
        try:
            currents = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise SingularNetwork("double-line-ground interconnection singular") from exc
        i1, i2, i0 = currents
        v1 = v1_oc - grid.z1 * i1
        v2 = v2_oc - grid.z2 * i2
        v0 = v0_oc - grid.z0 * i0
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown fault kind {kind}")

    u_pcc_pos = v1 + grid.z_transformer * i_pos
    u_pcc_neg = v2 + grid.z_transformer * i_neg
    u_pcc_zero = 0j if grid.delta_winding else v0
    return SequenceSet(pos=u_pcc_pos, neg=u_pcc_neg, zero=u_pcc_zero)


@dataclass(frozen=True)
class IterationRecord:
    u_pos_in: float
    u_neg_in: float
    u_pos_out: float
    u_neg_out: float


@dataclass
class PccIterationResult:
    """Converged PCC sequence voltages of an anticipated contingency."""

    u_pcc_pos: complex
    u_pcc_neg: complex
    iterations: int
    history: tuple[IterationRecord, ...] = field(default_factory=tuple)
    converged: bool = False


def _solve_and_cluster(scenario, u_pos_mag: float, u_neg_mag: float):
    farm = scenario.farm
    solution = solve_terminal_voltages(
        farm.topology,
        complex(u_pos_mag),
        complex(u_neg_mag),
        farm.wind_speeds,
        scenario.strategy,
        farm.params,
        scenario.sigma1,
        weights=farm.weights,
    )
    assignments = []
    for nid in farm.topology.turbine_ids:
        crit = critical_powers(
            scenario.strategy,
            abs(solution.pos.voltages[nid]),
            abs(solution.neg.voltages[nid]),
            farm.params[nid],
        )
        assignments.append(
            assign_cluster(farm.wind_speeds[nid], crit, farm.params[nid], turbine_id=nid)
        )
    return solution, assignments


def solve_clustering_indicators(scenario, u_pos_mag: float, u_neg_mag: float):
    """Terminal voltages and cluster labels at a given PCC voltage."""
    return _solve_and_cluster(scenario, u_pos_mag, u_neg_mag)


def iterate_pcc_voltage(
    scenario,
    sigma2: float | None = None,
    max_outer: int = 20,
) -> tuple[PccIterationResult, EquivalentFarm]:
    """Outer fixed point on the fault-on PCC voltage.

    Starts from the flat guess, builds the reduced farm for the current
    guess, simulates the contingency with it, and reads the PCC sequence
    magnitudes at the last step before clearance.  Converged when both
    magnitudes change by less than ``sigma2``; the returned farm is rebuilt
    at the converged voltages.
    """
    from . import engine  # deferred: the engine simulates the reduced farm

    tol = scenario.sigma2 if sigma2 is None else sigma2
    farm = scenario.farm
    u_pos_mag, u_neg_mag = scenario.flat_start
    history: list[IterationRecord] = []

    for iteration in range(1, max_outer + 1):
        solution, assignments = _solve_and_cluster(scenario, u_pos_mag, u_neg_mag)
        eq_farm = build_equivalent_farm(
            assignments,
            solution,
            farm.topology,
            farm.wind_speeds,
            scenario.strategy,
            farm.params,
        )
        trace = engine.simulate(
            engine.Model.THREE_MACHINE,
            scenario,
            equivalent=eq_farm,
            t_stop=scenario.fault.t_clear,
        )
        new_pos, new_neg = trace.preclearance_pcc()
        history.append(IterationRecord(u_pos_mag, u_neg_mag, new_pos, new_neg))

        if abs(new_pos - u_pos_mag) < tol and abs(new_neg - u_neg_mag) < tol:
            solution, assignments = _solve_and_cluster(scenario, new_pos, new_neg)
            final_farm = build_equivalent_farm(
                assignments,
                solution,
                farm.topology,
                farm.wind_speeds,
                scenario.strategy,
                farm.params,
            )
            result = PccIterationResult(
                u_pcc_pos=complex(new_pos),
                u_pcc_neg=complex(new_neg),
                iterations=iteration,
                history=tuple(history),
                converged=True,
            )
            return result, final_farm

        u_pos_mag, u_neg_mag = new_pos, new_neg

    raise NoConvergence(
        "PCC voltage iteration did not settle",
        iterations=max_outer,
        residual=max(
            abs(history[-1].u_pos_out - history[-1].u_pos_in),
            abs(history[-1].u_neg_out - history[-1].u_neg_in),
        ),
        history=tuple(history),
    )
