"""Pipeline stages and the fused operation, checked against exact arithmetic."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abisim.engine import BitMode, ElemMode, Engine, Stage, Word
from abisim.errors import (AccumulatorOverflowError, ConfigError,
                           DivideByZeroError, ResolutionError)
from abisim.rce import (central_add, scale, st0_partials, st1_shift,
                        st2_st3_accumulate, st4_multiply, threshold, trunc_div)

MODES = ("bs_es", "bs_ep", "bp_es", "bp_ep")


def make_engine(banks=8, bit_wid=4, mode="bp_ep", dis="st4,s,th", **kw):
    e = Engine(banks=banks, **kw)
    e.set_field("bit_elser", mode)
    e.set_field("bit_wid", bit_wid)
    e.set_field("dis_stage", dis)
    return e


def load_operands(e, mems, regs, width=16, spin=False):
    for b, (m, r) in enumerate(zip(mems, regs)):
        if spin:
            e.load_mem(b, 0, Word.spin(m))
            e.load_reg(b, Word.spin(r))
        else:
            e.load_mem(b, 0, Word(m, width))
            e.load_reg(b, Word(r, width))


class TestSt0:
    def test_three_times_two_plane(self):
        # 3 = 0b11 against 2 = 0b10: both rows read 0b10
        plane = st0_partials([3], [2], 2)
        assert [[plane.bit(0, k, l) for l in range(2)] for k in range(2)] == \
            [[0, 1], [0, 1]]
        assert plane.signs == (1,)

    def test_zero_annihilates(self):
        plane = st0_partials([0], [3], 2)
        assert plane.rows == ((0, 0),)
        assert plane.signs == (0,)

    def test_spin_times_spin(self):
        plane = st0_partials([-1], [-1], 1)
        assert plane.bit(0, 0, 0) == 1
        assert plane.signs == (1,)

    def test_resolution_error(self):
        with pytest.raises(ResolutionError):
            st0_partials([4], [1], 2)  # 0b100 does not fit two bits


class TestSt1:
    def test_weighted_contributions(self):
        # 3*2: active contributions 2 and 4, summing to 6
        plane = st0_partials([3], [2], 2)
        contribs = st1_shift(plane)[0]
        assert sorted(c for c in contribs if c) == [2, 4]
        assert sum(contribs) == 3 * 2

    def test_raising_width_enables_higher_shift_paths(self):
        # 4 = 0b100 needs the shift-2 path: masked out at 2 bits wide
        with pytest.raises(ResolutionError):
            st0_partials([4], [1], 2)
        plane = st0_partials([4], [1], 3)
        assert st1_shift(plane)[0] == [0, 0, 4]

    def test_single_bit_only_unshifted_path(self):
        plane = st0_partials([1], [1], 1)
        assert st1_shift(plane)[0] == [1]

    def test_disabled_shifting_keeps_only_weight_one_path(self):
        plane = st0_partials([3], [3], 2)
        assert st1_shift(plane, enabled=False)[0] == [1, 0]


class TestSt2St3:
    def test_bs_and_bp_agree(self):
        plane = st0_partials([3], [2], 2)
        shifted = st1_shift(plane)
        bs = st2_st3_accumulate(shifted, list(plane.signs), BitMode.BS,
                                frozenset())
        bp = st2_st3_accumulate(shifted, list(plane.signs), BitMode.BP,
                                frozenset({Stage.ST2}))
        assert bs == bp == [6]

    def test_bs_and_bp_cycles_differ(self):
        results = {}
        for mode in ("bs_ep", "bp_ep"):
            e = make_engine(banks=8, bit_wid=8, mode=mode,
                            dis="st4,s,th" if mode == "bs_ep" else "st2,st4,s,th")
            load_operands(e, [3] * 8, [2] * 8)
            results[mode] = e.fused_op(0)
        assert results["bs_ep"].raw_sum == results["bp_ep"].raw_sum == 48
        assert results["bs_ep"].cycles == 3  # two 4-bit groups serialize
        assert results["bp_ep"].cycles == 2

    def test_disabled_st3_gates_output(self):
        plane = st0_partials([3], [2], 2)
        out = st2_st3_accumulate(st1_shift(plane), list(plane.signs),
                                 BitMode.BP, frozenset({Stage.ST2, Stage.ST3}))
        assert out == [0]

    def test_spin_bank_products(self):
        plane = st0_partials([-1] * 8, [-1] * 8, 1)
        out = st2_st3_accumulate(st1_shift(plane), list(plane.signs),
                                 BitMode.BP, frozenset({Stage.ST2}))
        assert out == [1] * 8


class TestSt4:
    def test_multiply(self):
        assert st4_multiply([1], Word(3), frozenset()) == [3]

    def test_pass_through_when_disabled(self):
        assert st4_multiply([7], None, frozenset({Stage.ST4})) == [7]

    def test_sign_product(self):
        assert st4_multiply([-2], Word(-2), frozenset()) == [4]

    def test_requires_reg2(self):
        with pytest.raises(ConfigError):
            st4_multiply([1], None, frozenset())


class TestCentralAdd:
    def test_parallel_reduces_in_one_cycle(self):
        assert central_add([1] * 8, ElemMode.EP) == (8, 1)

    def test_serial_reduces_one_bank_per_cycle(self):
        assert central_add([1] * 8, ElemMode.ES) == (8, 8)

    def test_zeros(self):
        assert central_add([0] * 8, ElemMode.EP)[0] == 0


class TestScaler:
    def test_captures(self):
        assert scale(8, Word(2), True) == 4
        assert scale(8, Word(4), True) == 2

    def test_identity(self):
        assert scale(123, Word(1), True) == 123

    def test_disabled_passthrough(self):
        assert scale(9, None, False) == 9

    def test_zero_divisor(self):
        with pytest.raises(DivideByZeroError):
            scale(8, Word(0), True)

    def test_truncates_toward_zero(self):
        assert scale(-7, Word(2), True) == -3
        assert scale(7, Word(-2), True) == -3
        assert trunc_div(-9, 4) == -2


class TestThreshold:
    def test_relu(self):
        assert threshold(-3, "relu") == (0, None)
        assert threshold(5, "relu") == (5, None)

    def test_compare_with_l1_side_channel(self):
        out, l1 = threshold(-8, "cmp", 0)
        assert (out, l1) == (-1, 8)
        assert threshold(0, "cmp", 0)[0] == 1  # ties resolve to +1

    def test_bypass(self):
        assert threshold(5, "off") == (5, None)


class TestExecuteFused:
    def test_cnn_capture(self):
        e = make_engine(dis="st2,st4,s,th")
        load_operands(e, [-1] * 8, [-1] * 8, width=4)
        res = e.fused_op(0)
        assert res.raw_sum == res.th_out == 8
        assert res.cycles == 2

    def test_gcn_capture_with_scaler(self):
        e = make_engine(dis="st2,st4,th")
        load_operands(e, [1] * 8, [1] * 8, width=4)
        e.load_reg2(Word(4))
        res = e.fused_op(0)
        assert (res.raw_sum, res.scaled) == (8, 2)

    def test_all_zero_operands_gated_under_detection(self):
        e = make_engine(dis="st2,st4,s,th")
        e.set_field("sp_act", 1)
        load_operands(e, [0] * 8, [5] * 8, width=4)
        res = e.fused_op(0)
        assert res.raw_sum == 0
        assert res.gated_banks == 8
        for stage_evt in ("st1_shift", "st2_add", "st3_add"):
            assert res.events.get(stage_evt, 0) == 0
        assert res.events["st0_and"] > 0  # detection never gates St0

    def test_mode_invariance(self):
        values = None
        for mode in MODES:
            dis = "st4,s,th" + (",st2" if mode.startswith("bp") else "")
            e = make_engine(bit_wid=8, mode=mode, dis=dis)
            load_operands(e, [17, -42, 3, 0, -128, 127, 9, -9],
                          [5, 5, -11, 99, 2, -2, 0, 111])
            res = e.fused_op(0)
            if values is None:
                values = (res.raw_sum, res.scaled, res.th_out)
            assert (res.raw_sum, res.scaled, res.th_out) == values

    def test_gating_soundness_disabled_stage_logs_nothing(self):
        e = make_engine(bit_wid=4, mode="bs_ep", dis="st1,st4,s,th")
        load_operands(e, [3] * 8, [3] * 8, width=4)
        res = e.fused_op(0)
        assert res.events.get("st1_shift", 0) == 0
        # only the unshifted bit path remains: 3*3 has bit0*bit0 = 1
        assert res.raw_sum == 8

    def test_scaler_threshold_composition_is_identity(self):
        e = make_engine(dis="st2,st4,th")
        load_operands(e, [2] * 8, [3] * 8, width=4)
        e.load_reg2(Word(1))  # identity scale
        res = e.fused_op(0, th_override="off")
        assert res.th_out == res.raw_sum == 48

    def test_accumulator_overflow_raises(self):
        e = make_engine(bit_wid=16, dis="st2,s,th")
        load_operands(e, [32767] * 8, [32767] * 8)
        e.load_reg2(Word(32767))
        with pytest.raises(AccumulatorOverflowError):
            e.fused_op(0)

    def test_tiling_accumulates_across_ops(self):
        e = make_engine(dis="st2,st4,s,th")
        load_operands(e, [1] * 8, [2] * 8, width=4)
        e.fused_op(0, acc=True)
        e.fused_op(0, acc=True)
        res = e.reduce_op(th_override="off")
        assert res.th_out == 32

    def test_th_override_relu(self):
        e = make_engine(dis="st2,st4,s,th")
        load_operands(e, [-1] * 8, [1] * 8, width=4)
        assert e.fused_op(0, th_override="relu").th_out == 0


@st.composite
def _operand_case(draw):
    banks = draw(st.sampled_from([1, 2, 4, 8]))
    bit_wid = draw(st.sampled_from([1, 2, 3, 4, 5, 8, 12, 16]))
    mode = draw(st.sampled_from(MODES))
    st4 = draw(st.booleans())
    spin = bit_wid == 1 and draw(st.booleans())
    if spin:
        mems = draw(st.lists(st.sampled_from([-1, 1]), min_size=banks,
                             max_size=banks))
        regs = draw(st.lists(st.sampled_from([-1, 1]), min_size=banks,
                             max_size=banks))
    else:
        lo, hi = ((0, 1) if bit_wid == 1
                  else (-(1 << (bit_wid - 1)), (1 << (bit_wid - 1)) - 1))
        mems = draw(st.lists(st.integers(lo, hi), min_size=banks, max_size=banks))
        regs = draw(st.lists(st.integers(lo, hi), min_size=banks, max_size=banks))
    reg2 = draw(st.integers(-7, 7)) if st4 else None
    return banks, bit_wid, mode, spin, mems, regs, reg2


@given(_operand_case())
@settings(max_examples=300, deadline=None)
def test_oracle_equivalence_randomized(case):
    banks, bit_wid, mode, spin, mems, regs, reg2 = case
    dis = "s,th" + ("" if reg2 is not None else ",st4") + \
        (",st2" if mode.startswith("bp") else "")
    e = make_engine(banks=banks, bit_wid=bit_wid, mode=mode, dis=dis)
    width = 1 if (spin or bit_wid == 1) else 16
    load_operands(e, mems, regs, width=width, spin=spin)
    if reg2 is not None:
        e.load_reg2(Word(reg2))
    expected = sum(m * r * (reg2 if reg2 is not None else 1)
                   for m, r in zip(mems, regs))
    res = e.fused_op(0, spin=spin)
    assert res.raw_sum == expected


@given(_operand_case())
@settings(max_examples=150, deadline=None)
def test_masking_width_increase_preserves_results(case):
    banks, bit_wid, mode, spin, mems, regs, reg2 = case
    if bit_wid >= 16 or spin:
        return
    dis = "s,th" + ("" if reg2 is not None else ",st4") + \
        (",st2" if mode.startswith("bp") else "")
    outputs = []
    for w in (bit_wid, bit_wid + 1, 16):
        e = make_engine(banks=banks, bit_wid=w, mode=mode, dis=dis)
        load_operands(e, mems, regs, width=16)
        if reg2 is not None:
            e.load_reg2(Word(reg2))
        outputs.append(e.fused_op(0).raw_sum)
    assert outputs[0] == outputs[1] == outputs[2]
