"""Fixed-step quasi-static phasor simulation of a farm against the grid.

Each step resolves the network algebraically: turbine injections respond to
their terminal voltages through the control laws, the feeder sweeps map
injections to terminal voltages, and the grid fault solve maps the total
farm current to the PCC voltage.  The resulting fixed point is iterated to
tolerance (with automatic under-relaxation fallback), then machine states
advance one step.  Everything is deterministic: identical scenarios produce
bit-identical traces.

Because the engine works in phasors, the double-frequency power ripple of
unbalanced operation is reconstructed analytically from the sequence
quantities for the trace output.
"""

from __future__ import annotations

import cmath
import csv
import logging
import math
import time as _time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import pmsg
from .aggregation import EquivalentFarm, build_single_machine_farm
from .collector import Feeder, FeederTopology, _sweep, solve_terminal_voltages
from .errors import MisalignedTraces, NoConvergence, WindeqError
from .farm import Farm
from .grid import FaultSpec, TheveninGrid, fault_sequence_voltages
from .phasor import SequenceSet
from .pmsg import CurrentRefs, PmsgParams, Strategy

logger = logging.getLogger("windeq.engine")

_DAMPING_LADDER = (1.0, 0.6, 0.35)
_NET_MAX_ITER = 120


class Model(Enum):
    DETAILED = "dm"
    THREE_MACHINE = "tm"
    SINGLE_MACHINE = "sm"


@dataclass(frozen=True)
class Scenario:
    """Everything one simulation needs."""

    farm: Farm
    grid: TheveninGrid
    fault: FaultSpec
    strategy: Strategy
    h: float = 1e-3
    t_end: float = 2.0
    sigma1: float = 1e-6
    sigma2: float = 5e-3
    frequency_hz: float = 50.0
    flat_start: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("step size must be > 0")
        if self.t_end <= self.fault.t_clear:
            raise ValueError("t_end must lie beyond the fault clearance")
        if self.sigma1 <= 0.0 or self.sigma2 <= 0.0:
            raise ValueError("solver tolerances must be > 0")


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------

@dataclass
class Trace:
    """Uniform-grid time series of one simulation."""

    time: np.ndarray
    p: np.ndarray
    q: np.ndarray
    p_dc: np.ndarray
    u_pcc_pos: np.ndarray
    u_pcc_neg: np.ndarray
    machine_ids: tuple[str, ...]
    i_d_pos: np.ndarray  # (n_samples, n_machines), machine-base p.u.
    fault_span: tuple[float, float]

    @property
    def h(self) -> float:
        return float(self.time[1] - self.time[0])

    def preclearance_index(self) -> int:
        idx = int(round(self.fault_span[1] / self.h)) - 1
        return max(min(idx, len(self.time) - 1), 0)

    def preclearance_pcc(self) -> tuple[float, float]:
        """PCC sequence magnitudes at the last step before clearance."""
        idx = self.preclearance_index()
        return float(self.u_pcc_pos[idx]), float(self.u_pcc_neg[idx])

    def to_csv(self, path: str | Path) -> None:
        header = ["time", "p", "q", "p_dc", "u_pcc_pos", "u_pcc_neg"]
        header += [f"i_d__{mid}" for mid in self.machine_ids]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(len(self.time)):
                row = [
                    repr(float(self.time[i])),
                    repr(float(self.p[i])),
                    repr(float(self.q[i])),
                    repr(float(self.p_dc[i])),
                    repr(float(self.u_pcc_pos[i])),
                    repr(float(self.u_pcc_neg[i])),
                ]
                row += [repr(float(v)) for v in self.i_d_pos[i]]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path: str | Path, fault_span: tuple[float, float] = (0.0, 0.0)) -> "Trace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader]
        data = np.asarray(rows)
        machine_ids = tuple(name[len("i_d__"):] for name in header[6:])
        return cls(
            time=data[:, 0],
            p=data[:, 1],
            q=data[:, 2],
            p_dc=data[:, 3],
            u_pcc_pos=data[:, 4],
            u_pcc_neg=data[:, 5],
            machine_ids=machine_ids,
            i_d_pos=data[:, 6:],
            fault_span=fault_span,
        )


# ---------------------------------------------------------------------------
# simulation farm assembly
# ---------------------------------------------------------------------------

class _SimUnit:
    """One simulated machine: parameters, base scaling and mutable state."""

    __slots__ = ("uid", "params", "weight", "p0", "state", "ramp_rate_fn")

    def __init__(self, uid, params, weight, p0, ramp_rate_fn=None):
        self.uid = uid
        self.params = params
        self.weight = weight
        self.p0 = p0
        self.state = pmsg.initial_state(p0, params)
        self.ramp_rate_fn = ramp_rate_fn


def _detailed_units(scenario: Scenario) -> tuple[FeederTopology, list[_SimUnit]]:
    farm = scenario.farm
    weights = farm.weights
    units = [
        _SimUnit(
            nid,
            farm.params[nid],
            weights[nid],
            pmsg.wind_power(farm.wind_speeds[nid], farm.params[nid]),
        )
        for nid in farm.turbine_ids
    ]
    return farm.topology, units


def _equivalent_units(
    equivalent: EquivalentFarm, system_base_mva: float
) -> tuple[FeederTopology, list[_SimUnit]]:
    feeders = []
    units = []
    for machine in equivalent.machines:
        feeders.append(Feeder(nodes=(machine.machine_id,), impedances=(machine.z_eq,)))
        units.append(
            _SimUnit(
                machine.machine_id,
                machine.params,
                machine.params.s_rated / system_base_mva,
                machine.p0,
                ramp_rate_fn=machine.ramp_rate_fn(),
            )
        )
    return FeederTopology(feeders=tuple(feeders)), units


def _single_machine_equivalent(scenario: Scenario) -> EquivalentFarm:
    """Whole-farm aggregate built from the pre-fault operating point."""
    farm = scenario.farm
    solution = solve_terminal_voltages(
        farm.topology,
        complex(scenario.flat_start[0]),
        complex(scenario.flat_start[1]),
        farm.wind_speeds,
        scenario.strategy,
        farm.params,
        scenario.sigma1,
        weights=farm.weights,
    )
    return build_single_machine_farm(
        solution, farm.topology, farm.wind_speeds, scenario.strategy, farm.params
    )


# ---------------------------------------------------------------------------
# per-step network fixed point
# ---------------------------------------------------------------------------

@dataclass
class _NetSolve:
    pcc: SequenceSet
    tpos: dict[str, complex]
    tneg: dict[str, complex]
    refs: dict[str, CurrentRefs]
    total_pos: complex
    total_neg: complex
    iterations: int


def _network_pass(units, topology, grid, fault, tpos, tneg, h, strategy):
    inj_pos: dict[str, complex] = {}
    inj_neg: dict[str, complex] = {}
    refs: dict[str, CurrentRefs] = {}
    for unit in units:
        currents, r = pmsg.injection_currents(
            unit.state,
            SequenceSet(pos=tpos[unit.uid], neg=tneg[unit.uid]),
            strategy,
            h,
            unit.params,
            unit.ramp_rate_fn,
        )
        inj_pos[unit.uid] = currents.pos * unit.weight
        inj_neg[unit.uid] = currents.neg * unit.weight
        refs[unit.uid] = r
    total = SequenceSet(pos=sum(inj_pos.values()), neg=sum(inj_neg.values()))
    pcc = fault_sequence_voltages(grid, fault, total)
    new_tpos: dict[str, complex] = {}
    new_tneg: dict[str, complex] = {}
    for feeder in topology.feeders:
        new_tpos.update(_sweep(feeder, pcc.pos, inj_pos))
        new_tneg.update(_sweep(feeder, pcc.neg, inj_neg))
    return pcc, new_tpos, new_tneg, refs, total


def _network_fixed_point(
    units, topology, grid, fault, warm_pos, warm_neg, h, tol, strategy, damping, max_iter
) -> _NetSolve:
    tpos = dict(warm_pos)
    tneg = dict(warm_neg)
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        pcc, new_tpos, new_tneg, refs, total = _network_pass(
            units, topology, grid, fault, tpos, tneg, h, strategy
        )
        residual = 0.0
        for nid in tpos:
            u_p = damping * new_tpos[nid] + (1.0 - damping) * tpos[nid]
            u_n = damping * new_tneg[nid] + (1.0 - damping) * tneg[nid]
            residual = max(residual, abs(u_p - tpos[nid]), abs(u_n - tneg[nid]))
            tpos[nid] = u_p
            tneg[nid] = u_n
        if residual < tol:
            pcc, tpos, tneg, refs, total = _network_pass(
                units, topology, grid, fault, tpos, tneg, h, strategy
            )
            return _NetSolve(
                pcc=pcc,
                tpos=tpos,
                tneg=tneg,
                refs=refs,
                total_pos=total.pos,
                total_neg=total.neg,
                iterations=iteration,
            )
    raise NoConvergence(
        "per-step network fixed point stalled", iterations=max_iter, residual=residual
    )


def _solve_network(units, topology, grid, fault, warm_pos, warm_neg, h, tol, strategy):
    last: NoConvergence | None = None
    for damping in _DAMPING_LADDER:
        try:
            return _network_fixed_point(
                units, topology, grid, fault, warm_pos, warm_neg, h, tol, strategy,
                damping, _NET_MAX_ITER,
            )
        except NoConvergence as exc:
            last = exc
    raise last


# ---------------------------------------------------------------------------
# main entry points
# ---------------------------------------------------------------------------

def _snap_to_grid(t: float, h: float, label: str) -> int:
    idx = int(round(t / h))
    if abs(idx * h - t) > 1e-9:
        logger.warning("%s=%.6f s is off the step grid, snapped to %.6f s", label, t, idx * h)
    return idx


def _with_time_context(exc: WindeqError, t: float) -> WindeqError:
    if exc.args:
        exc.args = (f"simulation time {t:.4f} s: {exc.args[0]}",) + exc.args[1:]
    else:
        exc.args = (f"simulation time {t:.4f} s",)
    return exc


def simulate(
    model: Model,
    scenario: Scenario,
    equivalent: EquivalentFarm | None = None,
    *,
    t_stop: float | None = None,
) -> Trace:
    """Run one model of the scenario and return its trace.

    ``model`` selects the per-turbine detailed farm, the three-machine
    cluster equivalent (built through the PCC iteration when not supplied),
    or the traditional single-machine aggregate.  ``t_stop`` truncates the
    run early; it is used by the PCC iteration, which only needs the
    fault-on portion.
    """
    if model is Model.DETAILED:
        topology, units = _detailed_units(scenario)
    elif model is Model.THREE_MACHINE:
        if equivalent is None:
            from .grid import iterate_pcc_voltage

            _, equivalent = iterate_pcc_voltage(scenario)
        topology, units = _equivalent_units(equivalent, scenario.farm.system_base_mva)
    elif model is Model.SINGLE_MACHINE:
        if equivalent is None:
            equivalent = _single_machine_equivalent(scenario)
        topology, units = _equivalent_units(equivalent, scenario.farm.system_base_mva)
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown model {model}")

    h = scenario.h
    fault = scenario.fault
    i_start = _snap_to_grid(fault.t_start, h, "t_start")
    i_clear = _snap_to_grid(fault.t_clear, h, "t_clear")
    if i_clear <= i_start:
        raise ValueError("fault window collapsed onto the step grid")
    t_last = scenario.t_end if t_stop is None else min(t_stop, scenario.t_end)
    n_samples = int(round(t_last / h)) + 1

    warm_pos = {u.uid: complex(scenario.flat_start[0]) for u in units}
    warm_neg = {u.uid: complex(scenario.flat_start[1]) for u in units}

    # settle the pre-fault operating point so t=0 is an exact equilibrium
    net0 = _solve_network(
        units, topology, grid=scenario.grid, fault=None,
        warm_pos=warm_pos, warm_neg=warm_neg, h=h, tol=scenario.sigma1,
        strategy=scenario.strategy,
    )
    for unit in units:
        unit.state.i_d_pos = net0.refs[unit.uid].idq_pos.d
    warm_pos, warm_neg = net0.tpos, net0.tneg

    t_arr = np.empty(n_samples)
    p_arr = np.empty(n_samples)
    q_arr = np.empty(n_samples)
    upos_arr = np.empty(n_samples)
    uneg_arr = np.empty(n_samples)
    id_arr = np.empty((n_samples, len(units)))
    two_omega = 2.0 * math.tau * scenario.frequency_hz

    for i in range(n_samples):
        t = i * h
        active = fault if i_start <= i < i_clear else None
        try:
            net = _solve_network(
                units, topology, scenario.grid, active,
                warm_pos, warm_neg, h, scenario.sigma1, scenario.strategy,
            )
        except WindeqError as exc:
            raise _with_time_context(exc, t)

        s_pos = net.pcc.pos * net.total_pos.conjugate()
        s_neg = net.pcc.neg * net.total_neg.conjugate()
        ripple_p = net.pcc.pos * net.total_neg + net.pcc.neg * net.total_pos
        ripple_q = net.pcc.pos * net.total_neg - net.pcc.neg * net.total_pos
        spin = cmath.exp(1j * two_omega * t)
        t_arr[i] = t
        p_arr[i] = s_pos.real + s_neg.real + (ripple_p * spin).real
        q_arr[i] = s_pos.imag - s_neg.imag + (ripple_q * spin).imag
        upos_arr[i] = abs(net.pcc.pos)
        uneg_arr[i] = abs(net.pcc.neg)
        for k, unit in enumerate(units):
            id_arr[i, k] = net.refs[unit.uid].idq_pos.d

        warm_pos, warm_neg = net.tpos, net.tneg
        for unit in units:
            try:
                unit.state, _ = pmsg.turbine_step(
                    unit.state,
                    SequenceSet(pos=net.tpos[unit.uid], neg=net.tneg[unit.uid]),
                    scenario.strategy,
                    h,
                    unit.params,
                    unit.ramp_rate_fn,
                )
            except WindeqError as exc:
                raise _with_time_context(exc, t)

    return Trace(
        time=t_arr,
        p=p_arr,
        q=q_arr,
        p_dc=dc_component(p_arr, h, scenario.frequency_hz),
        u_pcc_pos=upos_arr,
        u_pcc_neg=uneg_arr,
        machine_ids=tuple(u.uid for u in units),
        i_d_pos=id_arr,
        fault_span=(i_start * h, i_clear * h),
    )


def dc_component(series: np.ndarray, h: float, frequency_hz: float = 50.0) -> np.ndarray:
    """Centered sliding mean over one fundamental period.

    The window spans an exact period where possible, which nulls the
    double-frequency ripple; at the edges the window shrinks.
    """
    n = len(series)
    window = max(int(round(1.0 / (frequency_hz * h))), 1)
    if window >= n:
        return np.full(n, float(np.mean(series)))
    half_lo = window // 2
    half_hi = window - half_lo
    csum = np.concatenate(([0.0], np.cumsum(series)))
    idx = np.arange(n)
    lo = np.maximum(idx - half_lo, 0)
    hi = np.minimum(idx + half_hi, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def rmse_percent(
    test: Trace,
    reference: Trace,
    field_name: str,
    window: tuple[float, float],
    base: float,
) -> float:
    """Windowed RMS error between two traces, percent of ``base``."""
    if test.time.shape != reference.time.shape or not np.array_equal(
        test.time, reference.time
    ):
        raise MisalignedTraces("traces are not on the same time grid")
    t_a, t_b = window
    mask = (test.time >= t_a - 1e-12) & (test.time <= t_b + 1e-12)
    if not mask.any():
        raise MisalignedTraces(f"window {window} selects no samples")
    diff = getattr(test, field_name)[mask] - getattr(reference, field_name)[mask]
    return float(np.sqrt(np.mean(diff * diff)) / base * 100.0)


# ---------------------------------------------------------------------------
# model comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelRun:
    model: str
    wall_time_s: float
    build_time_s: float
    rmse_p_pct: float | None
    rmse_q_pct: float | None
    trace_file: str | None = None


@dataclass(frozen=True)
class ComparisonReport:
    """Wall times and equivalence errors of the three models.

    RMS errors are normalised by the total farm rating and taken from
    fault start to the end of the simulation; the reference is always the
    detailed model on the identical event sequence.
    """

    runs: tuple[ModelRun, ...]
    window: tuple[float, float]
    base_pu: float
    rmse_definition: str
    pcc_iterations: int

    def to_json_dict(self) -> dict:
        return {
            "rmse_definition": self.rmse_definition,
            "window_s": list(self.window),
            "base_pu": self.base_pu,
            "pcc_iterations": self.pcc_iterations,
            "models": {
                run.model: {
                    "wall_time_s": run.wall_time_s,
                    "build_time_s": run.build_time_s,
                    "rmse_p_pct": run.rmse_p_pct,
                    "rmse_q_pct": run.rmse_q_pct,
                    "trace_file": run.trace_file,
                }
                for run in self.runs
            },
        }


def compare_models(
    scenario: Scenario, out_dir: str | Path | None = None
) -> tuple[ComparisonReport, dict[str, Trace]]:
    """Run detailed, three-machine and single-machine models side by side."""
    from .grid import iterate_pcc_voltage

    t0 = _time.perf_counter()
    dm = simulate(Model.DETAILED, scenario)
    dm_time = _time.perf_counter() - t0

    t0 = _time.perf_counter()
    pcc_result, tm_farm = iterate_pcc_voltage(scenario)
    tm_build = _time.perf_counter() - t0
    t0 = _time.perf_counter()
    tm = simulate(Model.THREE_MACHINE, scenario, equivalent=tm_farm)
    tm_time = _time.perf_counter() - t0

    t0 = _time.perf_counter()
    sm_farm = _single_machine_equivalent(scenario)
    sm_build = _time.perf_counter() - t0
    t0 = _time.perf_counter()
    sm = simulate(Model.SINGLE_MACHINE, scenario, equivalent=sm_farm)
    sm_time = _time.perf_counter() - t0

    window = (dm.fault_span[0], scenario.t_end)
    base = scenario.farm.rating_pu
    traces = {"dm": dm, "tm": tm, "sm": sm}

    files: dict[str, str | None] = {"dm": None, "tm": None, "sm": None}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, tr in traces.items():
            path = out / f"trace_{name}.csv"
            tr.to_csv(path)
            files[name] = str(path)

    runs = (
        ModelRun("dm", dm_time, 0.0, None, None, files["dm"]),
        ModelRun(
            "tm",
            tm_time,
            tm_build,
            rmse_percent(tm, dm, "p", window, base),
            rmse_percent(tm, dm, "q", window, base),
            files["tm"],
        ),
        ModelRun(
            "sm",
            sm_time,
            sm_build,
            rmse_percent(sm, dm, "p", window, base),
            rmse_percent(sm, dm, "q", window, base),
            files["sm"],
        ),
    )
    report = ComparisonReport(
        runs=runs,
        window=window,
        base_pu=base,
        rmse_definition=(
            "sqrt(mean((model - detailed)^2)) / total farm rating * 100, "
            "fault start to simulation end"
        ),
        pcc_iterations=pcc_result.iterations,
    )
    return report, traces
