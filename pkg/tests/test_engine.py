import dataclasses
import logging
import math

import numpy as np
import pytest

from windeq.engine import (
    Model,
    Trace,
    compare_models,
    dc_component,
    rmse_percent,
    simulate,
)
from windeq.errors import MisalignedTraces
from windeq.grid import FaultKind, FaultSpec
from windeq.phasor import SequenceSet, from_polar

import cases
import oracles


@pytest.fixture(scope="module")
def ll_trace():
    return simulate(Model.DETAILED, cases.small_scenario())


class TestDcComponent:
    def test_constant_unchanged(self):
        series = np.full(200, 0.7)
        out = dc_component(series, 1e-3, 50.0)
        assert np.allclose(out, 0.7, atol=1e-14)

    def test_double_frequency_ripple_nulled(self):
        t = np.arange(1500) * 1e-3
        series = np.sin(2 * math.pi * 100.0 * t + 0.4)
        out = dc_component(series, 1e-3, 50.0)
        interior = out[20:-20]
        # window spans the ripple period exactly: attenuation beyond 40 dB
        assert np.max(np.abs(interior)) < 1e-2

    def test_constant_recovered_under_ripple(self):
        t = np.arange(2000) * 1e-3
        series = 1.0 + 0.02 * np.sin(2 * math.pi * 100.0 * t + 1.1)
        out = dc_component(series, 1e-3, 50.0)
        assert np.max(np.abs(out - 1.0)) < 1e-2


class TestRmse:
    def _trace(self, values):
        n = len(values)
        return Trace(
            time=np.arange(n) * 1e-3,
            p=np.asarray(values, dtype=float),
            q=np.zeros(n),
            p_dc=np.zeros(n),
            u_pcc_pos=np.ones(n),
            u_pcc_neg=np.zeros(n),
            machine_ids=(),
            i_d_pos=np.zeros((n, 0)),
            fault_span=(0.0, 1e-3),
        )

    def test_identical_traces_zero(self):
        a = self._trace([0.5] * 100)
        assert rmse_percent(a, a, "p", (0.0, 0.09), 1.0) == 0.0

    def test_constant_offset_closed_form(self):
        a = self._trace([0.51] * 100)
        b = self._trace([0.50] * 100)
        assert rmse_percent(a, b, "p", (0.0, 0.09), 1.0) == pytest.approx(1.0)

    def test_misaligned_grids_rejected(self):
        a = self._trace([0.5] * 100)
        b = self._trace([0.5] * 101)
        with pytest.raises(MisalignedTraces):
            rmse_percent(a, b, "p", (0.0, 0.09), 1.0)

    def test_empty_window_rejected(self):
        a = self._trace([0.5] * 100)
        with pytest.raises(MisalignedTraces):
            rmse_percent(a, a, "p", (5.0, 6.0), 1.0)


class TestSimulateBasics:
    def test_no_fault_traces_flat(self):
        scenario = cases.small_scenario(FaultKind.NONE, t_end=1.0)
        trace = simulate(Model.DETAILED, scenario)
        assert np.ptp(trace.p) < 1e-9
        assert np.ptp(trace.q) < 1e-9
        assert np.ptp(trace.u_pcc_pos) < 1e-9
        assert np.all(trace.u_pcc_neg < 1e-12)

    def test_fault_window_dips_voltage(self, ll_trace):
        t = ll_trace.time
        during = (t >= 0.31) & (t < 0.59)
        before = t < 0.29
        assert ll_trace.u_pcc_pos[during].max() < 0.7
        assert ll_trace.u_pcc_neg[during].min() > 0.2
        assert ll_trace.u_pcc_pos[before].min() > 0.95

    def test_power_recovers_to_pre_fault(self, ll_trace):
        assert ll_trace.p[-1] == pytest.approx(ll_trace.p[0], abs=2e-3)

    def test_power_sanity(self, ll_trace):
        rating = 1.0  # system base is the farm total
        assert np.all(ll_trace.p_dc <= rating + 1e-6)
        assert np.max(np.abs(ll_trace.q)) < 1.2 * rating

    def test_per_machine_current_within_converter_limit(self, ll_trace):
        assert np.max(ll_trace.i_d_pos) <= 1.1 + 1e-9

    def test_ripple_present_during_unbalance_only(self, ll_trace):
        t = ll_trace.time
        during = (t >= 0.35) & (t < 0.59)
        ripple = ll_trace.p[during] - ll_trace.p_dc[during]
        assert np.max(np.abs(ripple)) > 0.01
        before = t < 0.28
        assert np.max(np.abs(ll_trace.p[before] - ll_trace.p_dc[before])) < 1e-9

    def test_deterministic_reruns(self):
        scenario = cases.small_scenario(t_end=0.9)
        a = simulate(Model.DETAILED, scenario)
        b = simulate(Model.DETAILED, scenario)
        assert np.array_equal(a.p, b.p)
        assert np.array_equal(a.q, b.q)
        assert np.array_equal(a.i_d_pos, b.i_d_pos)

    def test_event_snapping_warns(self, caplog):
        scenario = cases.small_scenario(t_end=0.9)
        off_grid = dataclasses.replace(
            scenario,
            fault=dataclasses.replace(scenario.fault, t_start=0.30042, t_clear=0.6),
        )
        with caplog.at_level(logging.WARNING, logger="windeq.engine"):
            simulate(Model.DETAILED, off_grid)
        assert any("snapped" in rec.message for rec in caplog.records)

    def test_step_halving_first_order(self):
        base = cases.small_scenario(t_end=1.0)
        fine = dataclasses.replace(base, h=5e-4)
        tr_h = simulate(Model.DETAILED, base)
        tr_h2 = simulate(Model.DETAILED, fine)
        # compare the DC power on the shared grid; differences stay small
        # and shrink with the step, consistent with a first-order scheme
        p_h = tr_h.p_dc
        p_h2 = tr_h2.p_dc[::2]
        err = float(np.sqrt(np.mean((p_h - p_h2) ** 2)))
        assert err < 5e-3


class TestRippleReconstruction:
    def test_matches_waveform_oracle(self, ll_trace):
        """Synthesised double-frequency power matches a waveform computation."""
        scenario = cases.small_scenario()
        # rebuild the phasors the engine saw at one fault-on instant by
        # reading the PCC voltage and total current back from the trace
        # via an independent re-solve of that step
        from windeq.engine import _detailed_units, _solve_network

        topology, units = _detailed_units(scenario)
        # march states to the middle of the fault window
        h = scenario.h
        warm_pos = {u.uid: 1.0 + 0j for u in units}
        warm_neg = {u.uid: 0j for u in units}
        import windeq.pmsg as pmsg_mod

        net = _solve_network(
            units, topology, scenario.grid, None, warm_pos, warm_neg, h,
            scenario.sigma1, scenario.strategy,
        )
        for unit in units:
            unit.state.i_d_pos = net.refs[unit.uid].idq_pos.d
        warm_pos, warm_neg = net.tpos, net.tneg
        i_start = int(round(scenario.fault.t_start / h))
        for i in range(i_start + 60):
            active = scenario.fault if i >= i_start else None
            net = _solve_network(
                units, topology, scenario.grid, active, warm_pos, warm_neg, h,
                scenario.sigma1, scenario.strategy,
            )
            warm_pos, warm_neg = net.tpos, net.tneg
            for unit in units:
                unit.state, _ = pmsg_mod.turbine_step(
                    unit.state,
                    SequenceSet(pos=net.tpos[unit.uid], neg=net.tneg[unit.uid]),
                    scenario.strategy, h, unit.params,
                )

        u_seq = SequenceSet(pos=net.pcc.pos, neg=net.pcc.neg)
        i_seq = SequenceSet(pos=net.total_pos, neg=net.total_neg)
        s_pos = net.pcc.pos * net.total_pos.conjugate()
        s_neg = net.pcc.neg * net.total_neg.conjugate()
        ripple_p = net.pcc.pos * net.total_neg + net.pcc.neg * net.total_pos
        ripple_q = net.pcc.pos * net.total_neg - net.pcc.neg * net.total_pos
        for t in np.linspace(0.0, 0.02, 9):
            spin = complex(math.cos(2 * math.tau * 50.0 * t), math.sin(2 * math.tau * 50.0 * t))
            p_model = s_pos.real + s_neg.real + (ripple_p * spin).real
            q_model = s_pos.imag - s_neg.imag + (ripple_q * spin).imag
            p_wave, q_wave = oracles.instantaneous_pq(u_seq, i_seq, t, 50.0)
            assert p_model == pytest.approx(p_wave, abs=1e-9)
            assert q_model == pytest.approx(q_wave, abs=1e-9)


class TestModels:
    def test_equivalents_share_pre_fault_steady_state(self):
        # both reduced models carry the same aggregate operating point; the
        # residual difference is the equivalent-impedance linearisation (the
        # three-machine farm is built at the fault-on point, the single
        # machine pre-fault), which stays at the 1e-4 level at desk scale
        scenario = cases.small_scenario(t_end=1.0)
        tm = simulate(Model.THREE_MACHINE, scenario)
        sm = simulate(Model.SINGLE_MACHINE, scenario)
        pre = scenario.fault.t_start - 2 * scenario.h
        idx = int(pre / scenario.h)
        assert tm.p[idx] == pytest.approx(sm.p[idx], abs=2e-4)
        assert tm.q[idx] == pytest.approx(sm.q[idx], abs=2e-4)

    def test_compare_models_report(self, tmp_path):
        scenario = cases.small_scenario(t_end=1.0)
        report, traces = compare_models(scenario, out_dir=tmp_path)
        by_name = {run.model: run for run in report.runs}
        assert by_name["dm"].rmse_p_pct is None
        assert by_name["tm"].rmse_p_pct >= 0.0
        assert by_name["sm"].rmse_p_pct >= by_name["tm"].rmse_p_pct
        for name in ("dm", "tm", "sm"):
            assert (tmp_path / f"trace_{name}.csv").exists()

    def test_trace_csv_round_trip(self, tmp_path, ll_trace):
        path = tmp_path / "trace.csv"
        ll_trace.to_csv(path)
        back = Trace.from_csv(path, fault_span=ll_trace.fault_span)
        assert np.array_equal(back.time, ll_trace.time)
        assert np.array_equal(back.p, ll_trace.p)
        assert np.array_equal(back.i_d_pos, ll_trace.i_d_pos)
        assert back.machine_ids == ll_trace.machine_ids
