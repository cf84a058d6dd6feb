"""windeq: PMSG wind-farm simulation and dynamic equivalencing.

Simulates PMSG-based wind farms under asymmetrical grid faults in the
sequence/phasor domain, classifies turbines into three analytically derived
response clusters, builds reduced one- to three-machine equivalents
(including a multi-segment slope-recovery machine) and validates them
against the per-turbine detailed model.
"""

from .aggregation import (
    EquivalentFarm,
    EquivalentMachine,
    RampSchedule,
    build_equivalent_farm,
    build_single_machine_farm,
    capacity_weighted_params,
    ramp_schedule,
    ramp_trajectory,
    recovery_durations,
)
from .clustering import (
    Cluster,
    ClusterAssignment,
    CriticalPowers,
    assign_cluster,
    boundary_surface,
    critical_powers,
    critical_powers_strategy1,
    critical_powers_strategy2,
)
from .collector import (
    Feeder,
    FeederTopology,
    VoltageSolution,
    equivalent_collector_impedance,
    incidence_matrix,
    solve_negative_sequence_voltages,
    solve_positive_sequence_voltages,
    solve_terminal_voltages,
)
from .engine import (
    ComparisonReport,
    Model,
    Scenario,
    Trace,
    compare_models,
    dc_component,
    rmse_percent,
    simulate,
)
from .farm import Farm, generate_farm
from .grid import (
    FaultKind,
    FaultSpec,
    PccIterationResult,
    TheveninGrid,
    fault_sequence_voltages,
    iterate_pcc_voltage,
)
from .phasor import (
    DqPair,
    SequenceSet,
    abc_to_sequence,
    from_polar,
    orient_dq,
    sequence_to_abc,
    wrap_angle,
)
from .pmsg import (
    CurrentRefs,
    Mode,
    PmsgParams,
    PmsgState,
    Strategy,
    current_refs_strategy1,
    current_refs_strategy2,
    dc_link_step,
    initial_state,
    inverse_wind_power,
    ramp_limit,
    turbine_step,
    wind_power,
)

__version__ = "0.1.0"
