"""Zero-operand detection, the window monitor, and gating economics."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abisim.engine import Engine, Word
from abisim.sparsity import SparsityMonitor, detect, gate_effect, monitor_step


def make_engine(sp_act=1, window=None, bit_wid=4):
    e = Engine()
    e.set_field("bit_elser", "bp_ep")
    e.set_field("bit_wid", bit_wid)
    e.set_field("dis_stage", "st2,st4,s,th")
    if window is not None:
        e.set_field("sp_window", window)
    e.set_field("sp_act", sp_act)
    return e


def load_operands(e, mems, regs):
    for b, (m, r) in enumerate(zip(mems, regs)):
        e.load_mem(b, 0, Word(m))
        e.load_reg(b, Word(r))


class TestDetect:
    def test_zero_on_memory_side(self):
        assert detect([0, 3], [5, 7], True) == [True, False]

    def test_detector_off_means_no_flags(self):
        assert detect([0, 0], [0, 0], False) == [False, False]

    def test_zero_on_register_side(self):
        assert detect([1], [0], True) == [True]


class TestGateEffect:
    def test_gated_bank_loses_stage_events(self):
        events = [{"st1_shift": 16, "st2_add": 2, "st3_add": 1, "st0_and": 16}]
        gated = gate_effect([True], events)
        assert gated == [{"st1_shift": 0, "st2_add": 0, "st3_add": 0,
                          "st0_and": 16}]

    def test_unflagged_bank_unchanged(self):
        events = [{"st1_shift": 16, "st3_add": 1}]
        assert gate_effect([False], events) == events


class TestMonitor:
    def test_quiet_window_shuts_down(self):
        m = SparsityMonitor(window=4)
        for _ in range(4):
            monitor_step(m, False)
        assert not m.detector_on
        assert m.shutdown_cycle == 4

    def test_single_event_keeps_detector_alive(self):
        m = SparsityMonitor(window=4)
        for flag in (False, True, False, False):
            monitor_step(m, flag)
        assert m.detector_on
        assert m.sp_cnt == 0  # window boundary resets the count

    def test_count_update_rule(self):
        m = SparsityMonitor(window=100, sp_cnt=5)
        monitor_step(m, True)
        assert m.sp_cnt == 6
        monitor_step(m, False)
        assert m.sp_cnt == 6


@given(st.lists(st.booleans(), min_size=1, max_size=60))
@settings(max_examples=200)
def test_count_equals_events_within_window(flags):
    m = SparsityMonitor(window=100)
    for flag in flags:
        monitor_step(m, flag)
    assert m.sp_cnt == sum(flags)
    assert m.cycle_in_window == len(flags)


class TestEngineIntegration:
    def test_auto_shutdown_at_window_boundary(self):
        e = make_engine(window=7)
        load_operands(e, [1] * 8, [2] * 8)  # dense: no sparsity ever
        for i in range(7):
            res = e.fused_op(0)
            assert res.events["sp_detect"] == 8
        assert not e.monitor.detector_on
        assert not e.regs.sp_act  # the enable is cleared too
        res = e.fused_op(0)
        assert res.events.get("sp_detect", 0) == 0
        assert e.monitor.dump()["shutdown_cycle"] == 7

    def test_rearm_after_shutdown(self):
        e = make_engine(window=2)
        load_operands(e, [1] * 8, [2] * 8)
        e.fused_op(0)
        e.fused_op(0)
        assert not e.regs.sp_act
        e.set_field("sp_act", 1)
        assert e.monitor.detector_on
        res = e.fused_op(0)
        assert res.events["sp_detect"] == 8

    def test_numerical_transparency(self):
        import random

        rnd = random.Random(43)
        for _ in range(60):
            mems = [rnd.choice([0, 0, 1, -3, 5]) for _ in range(8)]
            regs = [rnd.choice([0, 2, -1, 7]) for _ in range(8)]
            outs = []
            for sp in (0, 1):
                e = make_engine(sp_act=sp)
                load_operands(e, mems, regs)
                res = e.fused_op(0)
                outs.append((res.raw_sum, res.scaled, res.th_out))
            assert outs[0] == outs[1]

    def test_half_zero_operands_halve_stage_energy(self):
        def stage_energy(sp, mems):
            e = make_engine(sp_act=sp)
            load_operands(e, mems, [3] * 8)
            res = e.fused_op(0)
            price = e.table.energy
            return sum(res.events.get(k, 0) * price[k]
                       for k in ("st1_shift", "st2_add", "st3_add"))

        dense = stage_energy(1, [1] * 8)
        half = stage_energy(1, [1, 0] * 4)
        assert half == pytest.approx(dense / 2)

    def test_net_benefit_crossover(self):
        """Detection pays off above some sparsity level and costs below it."""
        def total_energy(sp_act, zero_banks):
            e = make_engine(sp_act=sp_act)
            mems = [0] * zero_banks + [1] * (8 - zero_banks)
            load_operands(e, mems, [3] * 8)
            for _ in range(50):
                e.fused_op(0)
            price = e.table.energy
            return sum(n * price[k] for k, n in e.log.counts.items())

        assert total_energy(1, 0) > total_energy(0, 0)  # dense: pure overhead
        assert total_energy(1, 7) < total_energy(0, 7)  # sparse: net win
