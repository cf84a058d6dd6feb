"""Independent reference computations used to check the library.

These deliberately avoid the code paths they verify: the network oracle
solves the exact nodal equations with a dense root finder built on the
explicit incidence matrix, the instantaneous-power oracle reconstructs
three-phase waveforms, and the single-turbine runner drives one machine
against a stiff voltage source.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from windeq import pmsg
from windeq.collector import FeederTopology, incidence_matrix
from windeq.phasor import SequenceSet, sequence_to_abc
from windeq.pmsg import Mode, PmsgParams, Strategy


def dense_root_solution(
    topology: FeederTopology,
    u_pcc: complex,
    inject_fn,
) -> dict[str, complex]:
    """Solve U = U_pcc + C Z C^T I(U) per feeder with a dense root finder."""
    result: dict[str, complex] = {}
    for feeder in topology.feeders:
        n = len(feeder.nodes)
        c = incidence_matrix(feeder).astype(float)
        z = np.diag(np.asarray(feeder.impedances, dtype=complex))
        czc = c @ z @ c.T

        def residual(x):
            v = x[:n] + 1j * x[n:]
            inj = np.array([inject_fn(nid, v[k]) for k, nid in enumerate(feeder.nodes)])
            target = u_pcc + czc @ inj
            diff = v - target
            return np.concatenate([diff.real, diff.imag])

        x0 = np.concatenate([np.full(n, u_pcc.real), np.full(n, u_pcc.imag)])
        sol = scipy.optimize.root(residual, x0, method="hybr", tol=1e-13)
        assert sol.success, sol.message
        v = sol.x[:n] + 1j * sol.x[n:]
        for k, nid in enumerate(feeder.nodes):
            result[nid] = complex(v[k])
    return result


def instantaneous_pq(
    u_seq: SequenceSet, i_seq: SequenceSet, t: float, frequency_hz: float
) -> tuple[float, float]:
    """Instantaneous p, q from reconstructed three-phase waveforms."""
    omega = math.tau * frequency_hz
    ua, ub, uc = sequence_to_abc(u_seq)
    ia, ib, ic = sequence_to_abc(i_seq)
    spin = cmath.exp(1j * omega * t)
    u_abc = [(ph * spin).real for ph in (ua, ub, uc)]
    i_abc = [(ph * spin).real for ph in (ia, ib, ic)]
    alpha = cmath.exp(2j * math.pi / 3)
    u_vec = (2.0 / 3.0) * (u_abc[0] + alpha * u_abc[1] + alpha * alpha * u_abc[2])
    i_vec = (2.0 / 3.0) * (i_abc[0] + alpha * i_abc[1] + alpha * alpha * i_abc[2])
    # per-unit space-vector power; the 3/2 of SI peak phasors is in the base,
    # so a balanced 1.0 pu voltage and current give exactly 1.0 pu power
    s = u_vec * i_vec.conjugate()
    return s.real, s.imag


def march_detailed(scenario, t_until: float):
    """Advance the detailed engine to ``t_until`` and return the last solve.

    Drives the same per-step machinery as the detailed trace (the runs are
    deterministic, so the returned network state equals the trace's), but
    exposes the per-turbine terminal voltages, which the trace does not
    carry.
    """
    from windeq.engine import _detailed_units, _solve_network

    topology, units = _detailed_units(scenario)
    h = scenario.h
    warm_pos = {u.uid: 1.0 + 0j for u in units}
    warm_neg = {u.uid: 0j for u in units}
    net = _solve_network(
        units, topology, scenario.grid, None, warm_pos, warm_neg, h,
        scenario.sigma1, scenario.strategy,
    )
    for unit in units:
        unit.state.i_d_pos = net.refs[unit.uid].idq_pos.d
    warm_pos, warm_neg = net.tpos, net.tneg

    i_start = int(round(scenario.fault.t_start / h))
    i_clear = int(round(scenario.fault.t_clear / h))
    n = int(round(t_until / h))
    for i in range(n + 1):
        active = scenario.fault if i_start <= i < i_clear else None
        net = _solve_network(
            units, topology, scenario.grid, active, warm_pos, warm_neg, h,
            scenario.sigma1, scenario.strategy,
        )
        warm_pos, warm_neg = net.tpos, net.tneg
        if i == n:
            break
        for unit in units:
            unit.state, _ = pmsg.turbine_step(
                unit.state,
                SequenceSet(pos=net.tpos[unit.uid], neg=net.tneg[unit.uid]),
                scenario.strategy, h, unit.params,
            )
    return net, units


@dataclass
class TurbineRun:
    """Single-machine response against a stiff terminal voltage."""

    time: np.ndarray
    p_dc: np.ndarray        # analytic DC active power
    i_d: np.ndarray         # applied positive-sequence d current
    modes: list[Mode]
    i_fault_end: int        # index of last sample with the dip applied
    u_pos_fault: float = 0.0
    u_neg_fault: float = 0.0


def run_single_turbine(
    u_pos_fault: float,
    u_neg_fault: float,
    v_w: float,
    strategy: Strategy,
    params: PmsgParams,
    *,
    h: float = 1e-3,
    t_fault_on: float = 0.05,
    fault_duration: float = 0.4,
    t_tail: float = 1.3,
) -> TurbineRun:
    p0 = pmsg.wind_power(v_w, params)
    state = pmsg.initial_state(p0, params)
    healthy = SequenceSet(pos=1.0 + 0j)
    dipped = SequenceSet(pos=complex(u_pos_fault), neg=complex(u_neg_fault))

    i_on = int(round(t_fault_on / h))
    i_off = int(round((t_fault_on + fault_duration) / h))
    n = i_off + int(round(t_tail / h))

    times = np.empty(n)
    p_dc = np.empty(n)
    i_d = np.empty(n)
    modes: list[Mode] = []
    for i in range(n):
        voltage = dipped if i_on <= i < i_off else healthy
        _, refs = pmsg.injection_currents(state, voltage, strategy, h, params)
        u_mag = abs(voltage.pos)
        u_neg = abs(voltage.neg)
        # oriented frame with a real dip voltage: u_dq = (mag, 0) both sequences
        p_dc[i] = u_mag * refs.idq_pos.d + u_neg * refs.idq_neg.d
        i_d[i] = refs.idq_pos.d
        times[i] = i * h
        state, _ = pmsg.turbine_step(state, voltage, strategy, h, params)
        modes.append(state.mode)
    return TurbineRun(
        time=times,
        p_dc=p_dc,
        i_d=i_d,
        modes=modes,
        i_fault_end=i_off - 1,
        u_pos_fault=u_pos_fault,
        u_neg_fault=u_neg_fault,
    )
