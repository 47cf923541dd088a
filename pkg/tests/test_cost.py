"""Event pricing, latencies, the baseline expansion, and run comparison."""

import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abisim.cost import (BaselineModel, CostTable, DEFAULT_ENERGY, account,
                         compare, default_table, load_calibration,
                         simulate_baseline, CSV_COLUMNS)
from abisim.engine import Engine, EventLog, TraceOp, Word
from abisim.errors import ComparisonError, RangeError, SchemaError

REPO = Path(__file__).resolve().parent.parent


def fused_trace(n, level="rf", bit_wid=8, banks=8):
    return [TraceOp(kind="fused", level=level, bit_wid=bit_wid, bit_mode="bp",
                    elem_mode="ep", banks=banks, scaler=False,
                    thresholded=False) for _ in range(n)]


def run_fused(level):
    e = Engine()
    e.set_field("nrf_m", level)
    e.set_field("dis_stage", "st2,st4,s,th")
    for b in range(8):
        e.load_mem(b, 0, Word(1))
        e.load_reg(b, Word(1))
    e.fused_op(0)
    return e


class TestCostTable:
    def test_missing_class_rejected(self):
        bad = dict(DEFAULT_ENERGY)
        bad.pop("ca_add")
        with pytest.raises(SchemaError):
            CostTable(bad)

    def test_extra_class_rejected(self):
        bad = dict(DEFAULT_ENERGY, mystery=1.0)
        with pytest.raises(SchemaError):
            CostTable(bad)

    def test_negative_price_rejected(self):
        bad = dict(DEFAULT_ENERGY, write=-1.0)
        with pytest.raises(RangeError):
            CostTable(bad)

    def test_unknown_event_priced(self):
        with pytest.raises(SchemaError):
            default_table().price("warp_drive")


class TestAccount:
    def test_empty_log(self):
        rep = account(EventLog(), {}, default_table())
        assert rep.cycles == 0 and rep.energy == 0

    def test_nrf_fused_op_takes_two_cycles(self):
        assert run_fused("rf").log.cycles == 2

    def test_l1_fused_op_takes_four_cycles(self):
        assert run_fused("l1").log.cycles == 4

    def test_l2_fused_op_takes_ten_cycles(self):
        assert run_fused("l2").log.cycles == 10

    def test_linearity(self):
        e = run_fused("rf")
        rep = account(e.log, {}, default_table())
        doubled = EventLog()
        doubled.counts.update(e.log.counts)
        doubled.counts.update(e.log.counts)
        rep2 = account(doubled, {}, default_table())
        assert rep2.energy == pytest.approx(2 * rep.energy)

    def test_monotonicity(self):
        e = run_fused("rf")
        rep = account(e.log, {}, default_table())
        e.log.add("st4_mul", 5)
        assert account(e.log, {}, default_table()).energy >= rep.energy

    def test_op_count_follows_precision(self):
        rep2 = account_trace(fused_trace(1, bit_wid=2))
        rep8 = account_trace(fused_trace(1, bit_wid=8))
        assert rep2.op_count == 4 * rep8.op_count


def account_trace(trace):
    log = EventLog()
    log.trace.extend(trace)
    return account(log, {}, default_table())


def engine_energy_per_equivalent_op(bit_wid):
    e = Engine()
    e.set_field("bit_wid", bit_wid)
    e.set_field("dis_stage", "st2,st4,s,th")
    mag = (1 << (bit_wid - 1)) - 1
    for b in range(8):
        e.load_mem(b, 0, Word(mag))
        e.load_reg(b, Word(mag))
    e.fused_op(0)
    rep = account(e.log, {}, default_table())
    return rep.energy / rep.op_count


class TestPrecisionScaling:
    def test_int2_cheaper_than_int8_per_equivalent_op(self):
        assert (engine_energy_per_equivalent_op(2)
                < engine_energy_per_equivalent_op(8))


class TestBaseline:
    def test_expansion_covers_the_four_fused_roles(self):
        model = BaselineModel()
        assert model.instrs_for(fused_trace(1)[0]) >= 4

    def test_default_expansion_count(self):
        # 2 loads + 1 vector MAC + 7 reduction adds + 1 threshold op
        assert BaselineModel().instrs_for(fused_trace(1)[0]) == 11

    def test_no_engine_events_in_baseline(self):
        rep = simulate_baseline(fused_trace(3), default_table())
        assert all(not k.startswith(("st", "ca", "scale", "th", "lwsm", "sp"))
                   for k in rep.events)

    def test_pipeline_fill_added_once(self):
        one = simulate_baseline(fused_trace(1), default_table()).cycles
        two = simulate_baseline(fused_trace(2), default_table()).cycles
        assert one == 11 + 3
        assert two - one == 11

    def test_softmax_expansion(self):
        trace = [TraceOp(kind="lwsm", level="rf", bit_wid=8, bit_mode="bp",
                         elem_mode="ep", banks=8, scaler=False,
                         thresholded=True, n=5)]
        rep = simulate_baseline(trace, default_table())
        assert rep.events["base_instr_fetch_decode"] == 20


class TestCompare:
    def test_identical_reports_give_unity(self):
        rep = account_trace(fused_trace(4))
        rep.cycles = 10
        rep.energy = 5.0
        import copy

        other = copy.deepcopy(rep)
        summary = compare({"base": rep, "abi": other, "abi_sp_off": other})
        assert summary["speedup_abi"] == 1.0
        assert summary["sparsity_savings"] == 1.0
        assert summary["speedup_combined"] == 2.0  # two equal engines

    def test_mismatched_runs_rejected(self):
        a = account_trace(fused_trace(1))
        b = account_trace(fused_trace(1))
        a.cycles = b.cycles = 1
        b.workload = "other"
        with pytest.raises(ComparisonError):
            compare({"base": a, "abi": b})


class TestCalibration:
    def test_shipped_file_matches_builtin_defaults(self):
        table, baseline = load_calibration(REPO / "calibration.json")
        assert dict(table.energy) == DEFAULT_ENERGY
        assert baseline == BaselineModel()

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cal.json"
        path.write_text(json.dumps({"energy": DEFAULT_ENERGY, "oops": 1}))
        with pytest.raises(SchemaError):
            load_calibration(path)

    def test_csv_row_matches_columns(self):
        rep = account_trace(fused_trace(2))
        assert len(rep.to_csv_row()) == len(CSV_COLUMNS)


@given(st.integers(1, 16), st.sampled_from(["bs", "bp"]),
       st.sampled_from(["es", "ep"]), st.sampled_from(["rf", "l1", "l2"]))
@settings(max_examples=120)
def test_latency_model(bit_wid, bm, em, level):
    from abisim.engine import BitMode, ElemMode, MemLevel

    table = default_table()
    cycles = table.fused_latency(MemLevel(level), BitMode(bm), ElemMode(em),
                                 bit_wid, 8)
    base = {"rf": 2, "l1": 4, "l2": 10}[level]
    expected = base
    if bm == "bs":
        expected += -(-bit_wid // 4) - 1
    if em == "es":
        expected += 7
    assert cycles == expected
