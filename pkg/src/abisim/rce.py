"""The five-stage reconfigurable compute engine plus central adder, scaler
and thresholding.

Stage semantics for one fused operation:

* St0 builds per-bank partial-product planes: AND of the memory read's
  magnitude bit planes with the operand register's.  Signs are split off
  before the plane (sign-magnitude), so the plane itself is unsigned.
* St1 weights plane entry (k, l) by 2**(k+l); shifter paths at indices
  at or above ``bit_wid`` are masked.
* St2/St3 accumulate.  Bit-serial mode walks the plane in groups of four
  bit rows through the single active St2 register (one group per cycle);
  bit-parallel mode bypasses St2 and sums combinationally.
* St4 multiplies each bank's partial result by REG''.
* The central adder reduces across banks (element-serial: one bank per
  cycle; element-parallel: one cycle), the scaler divides by REG'' with
  truncation toward zero, and the thresholding block applies ReLU, a
  sign comparison (with an L1-norm side channel), softmax staging, or
  nothing.

Numeric results never depend on the serial/parallel mode choices; only
cycles and event counts do.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .engine import (
    BS_GROUP_BITS,
    MAX_WIDTH,
    BitMode,
    ElemMode,
    Engine,
    EventLog,
    Stage,
    TraceOp,
    Word,
    check_i32,
)
from .errors import ConfigError, DivideByZeroError, ResolutionError
from .sparsity import detect, monitor_step


def _sgn(v: int) -> int:
    return (v > 0) - (v < 0)


def trunc_div(a: int, b: int) -> int:
    """Integer division truncating toward zero (hardware scaler rule)."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def bit_groups(bit_wid: int) -> int:
    """Number of 4-bit plane groups a bit-serial pass needs."""
    return -(-bit_wid // BS_GROUP_BITS)


@dataclass(frozen=True)
class PartialProductPlane:
    """Per-bank AND planes, stored as one row integer per memory-bit index.

    Row k packs the bits p[k][l] = bit_k(|mem|) AND bit_l(|reg|) for
    l = 0..bit_wid-1, i.e. ``rows[b][k] = |reg_b|`` masked to bit_wid bits
    when bit k of |mem_b| is set, else 0.
    """

    rows: tuple[tuple[int, ...], ...]
    signs: tuple[int, ...]
    bit_wid: int

    def bit(self, bank: int, k: int, l: int) -> int:
        return (self.rows[bank][k] >> l) & 1


def st0_partials(mem_vals: list[int], reg_vals: list[int], bit_wid: int) -> PartialProductPlane:
    """Stage 0: AND the magnitude bit planes of each bank pair."""
    if len(mem_vals) != len(reg_vals):
        raise ConfigError("memory read and operand register lengths differ")
    limit = (1 << bit_wid) - 1
    rows = []
    signs = []
    for m, r in zip(mem_vals, reg_vals):
        if abs(m) > limit or abs(r) > limit:
            raise ResolutionError(
                f"operand magnitude exceeds {bit_wid}-bit resolution: ({m}, {r})"
            )
        mm, rm = abs(m), abs(r)
        rows.append(tuple((rm if (mm >> k) & 1 else 0) for k in range(bit_wid)))
        signs.append(_sgn(m) * _sgn(r))
    return PartialProductPlane(tuple(rows), tuple(signs), bit_wid)


def st1_shift(plane: PartialProductPlane, enabled: bool = True) -> list[list[int]]:
    """Stage 1: weight row k by 2**k (the row already carries the 2**l sum).

    Disabled shifting leaves only the unshifted k = l = 0 path alive, which
    is the single-bit configuration's data path.
    """
    out = []
    for rows in plane.rows:
        if enabled:
            out.append([rows[k] << k for k in range(plane.bit_wid)])
        else:
            out.append([rows[0] & 1] + [0] * (plane.bit_wid - 1))
    return out


def st2_st3_accumulate(shifted: list[list[int]], signs: list[int],
                       bit_mode: BitMode, dis_stage: frozenset[Stage]) -> list[int]:
    """Stages 2+3: sum each bank's weighted partials into one signed value.

    The grouping walked in bit-serial mode changes cycles and event counts
    only; the sum is the same in both modes.  A disabled St3 gates the
    bank outputs to zero.
    """
    per_bank = []
    for contribs, sign in zip(shifted, signs):
        if Stage.ST3 in dis_stage:
            per_bank.append(0)
            continue
        if bit_mode is BitMode.BS and Stage.ST2 not in dis_stage:
            total = 0
            for g in range(bit_groups(len(contribs))):
                total += sum(contribs[g * BS_GROUP_BITS:(g + 1) * BS_GROUP_BITS])
        else:
            total = sum(contribs)
        # two's-complement chains wrap transiently; only the settled
        # register value must fit
        per_bank.append(check_i32(sign * total, "St3 accumulator"))
    return per_bank


def st4_multiply(per_bank: list[int], reg2: Word | None,
                 dis_stage: frozenset[Stage], spin: bool = False) -> list[int]:
    """Stage 4: element-serial multiply by REG''; pass-through when disabled."""
    if Stage.ST4 in dis_stage:
        return list(per_bank)
    if reg2 is None:
        raise ConfigError("St4 enabled but REG'' is not loaded")
    r2 = reg2.decode(spin)
    return [check_i32(v * r2, "St4 product") for v in per_bank]


def central_add(per_bank: list[int], elem_mode: ElemMode) -> tuple[int, int]:
    """Cross-bank reduction.  Returns (sum, cycles this reduction takes)."""
    total = check_i32(sum(per_bank), "central adder")
    cycles = len(per_bank) if elem_mode is ElemMode.ES else 1
    return total, cycles


def scale(raw_sum: int, reg2: Word | None, enabled: bool, spin: bool = False) -> int:
    """Scaler: divide by REG'' with truncation toward zero."""
    if not enabled:
        return raw_sum
    if reg2 is None:
        raise ConfigError("scaler enabled but REG'' is not loaded")
    divisor = reg2.decode(spin)
    if divisor == 0:
        raise DivideByZeroError("scaler divisor is zero")
    return trunc_div(raw_sum, divisor)


def resolve_th_mode(regs, th_override: str | None = None) -> str:
    """Pick one of off/relu/cmp/sm from the registers or a per-op override."""
    if th_override is not None:
        if th_override not in ("off", "relu", "cmp", "sm"):
            raise ConfigError(f"bad threshold override {th_override!r}")
        return th_override
    if not regs.enabled(Stage.TH):
        return "off"
    if regs.th_act:
        return "relu"
    if regs.sm_act:
        return "sm"
    return "cmp"


def threshold(scaled: int, mode: str, compare_ref: int = 0) -> tuple[int, int | None]:
    """Thresholding block.  Returns (output, L1-norm contribution or None).

    Compare mode emits +1 when ``scaled >= compare_ref`` (ties resolve to
    +1) and exposes |scaled - compare_ref| for L1-norm accumulation.
    """
    if mode == "relu":
        return max(0, scaled), None
    if mode == "cmp":
        return (1 if scaled >= compare_ref else -1), abs(scaled - compare_ref)
    return scaled, None  # off / sm: value passes unchanged


@dataclass(frozen=True)
class RceResult:
    """Outcome of one fused or reduce operation."""

    raw_sum: int
    scaled: int
    th_out: int
    l1_contrib: int | None
    cycles: int
    events: dict
    gated_banks: int = 0


def _finalize(engine: Engine, op_log: EventLog, *, spin: bool,
              compare_ref: int, th_override: str | None) -> tuple[int, int, int | None]:
    regs = engine.regs
    total = engine.acc
    engine.acc = 0
    scaler_on = regs.enabled(Stage.S)
    scaled = scale(total, engine.opregs.reg2, scaler_on, spin)
    if scaler_on:
        op_log.add("scale_div")
    mode = resolve_th_mode(regs, th_override)
    out, l1 = threshold(scaled, mode, compare_ref)
    if mode in ("relu", "cmp"):
        op_log.add("th_cmp")
    if mode == "sm":
        engine.lwsm_buf.append(scaled)
    engine.result = out
    return scaled, out, l1


def execute_fused(engine: Engine, word_index: int, *, acc: bool = False,
                  spin: bool = False, compare_ref: int = 0,
                  th_override: str | None = None) -> RceResult:
    """Run one fused load-MAC-reduce-threshold operation.

    ``acc=True`` accumulates the central adder output into the running
    accumulator and skips scaling/thresholding (tiling support); the final
    op of a tile group runs with ``acc=False`` to emit the result.
    """
    regs = engine.regs
    B = engine.banks
    w = regs.bit_wid
    bit_mode, elem_mode = regs.bit_elser
    op_log = EventLog()

    words = engine.memory.read(word_index, op_log)
    mem_vals = [wd.decode(spin) for wd in words]
    reg_vals = [wd.decode(spin) for wd in engine.opregs.reg]

    # Per-access sparsity detection; gated banks skip St1-St3 entirely.
    detector_on = regs.sp_act and engine.monitor.detector_on
    sp_en = detect(mem_vals, reg_vals, detector_on)
    if detector_on:
        op_log.add("sp_detect", B)
        monitor_step(engine.monitor, any(sp_en))
        if not engine.monitor.detector_on:
            engine.regs = replace(regs, sp_act=False)
            regs = engine.regs

    groups = bit_groups(w)
    if regs.enabled(Stage.ST0):
        plane = st0_partials(mem_vals, reg_vals, w)
        op_log.add("st0_and", B * w * w)
    else:
        plane = PartialProductPlane(tuple(((0,) * w,) * B), (0,) * B, w)

    shifted = st1_shift(plane, enabled=regs.enabled(Stage.ST1))
    bs_active = bit_mode is BitMode.BS and regs.enabled(Stage.ST2)
    per_bank: list[int] = []
    for b in range(B):
        if sp_en[b]:
            per_bank.append(0)
            continue
        if regs.enabled(Stage.ST1):
            op_log.add("st1_shift", MAX_WIDTH if bit_mode is BitMode.BP
                       else BS_GROUP_BITS * groups)
        if bs_active:
            op_log.add("st2_add", groups)
        if regs.enabled(Stage.ST3):
            op_log.add("st3_add", groups if bit_mode is BitMode.BS else 1)
        val = st2_st3_accumulate([shifted[b]], [plane.signs[b]], bit_mode,
                                 regs.dis_stage)[0]
        per_bank.append(val)

    per_bank = st4_multiply(per_bank, engine.opregs.reg2, regs.dis_stage, spin)
    if regs.enabled(Stage.ST4):
        op_log.add("st4_mul", B)

    if regs.enabled(Stage.CA):
        raw, _ = central_add(per_bank, elem_mode)
        op_log.add("ca_add", max(0, B - 1))
    else:
        raw = 0
    engine.acc = check_i32(engine.acc + raw, "running accumulator")

    if acc:
        scaled, out, l1 = raw, raw, None
    else:
        scaled, out, l1 = _finalize(engine, op_log, spin=spin,
                                    compare_ref=compare_ref,
                                    th_override=th_override)

    cycles = engine.table.fused_latency(regs.nrf_m, bit_mode, elem_mode, w, B)
    op_log.cycles = cycles
    engine.log.merge(op_log)
    engine.log.trace.append(TraceOp(
        kind="fused", level=regs.nrf_m.value, bit_wid=w,
        bit_mode=bit_mode.value, elem_mode=elem_mode.value, banks=B,
        scaler=regs.enabled(Stage.S) and not acc,
        thresholded=resolve_th_mode(regs, th_override) != "off" and not acc))
    return RceResult(raw_sum=raw, scaled=scaled, th_out=out, l1_contrib=l1,
                     cycles=cycles, events=dict(op_log.counts),
                     gated_banks=sum(sp_en))


def execute_reduce(engine: Engine, *, compare_ref: int = 0,
                   th_override: str | None = None) -> RceResult:
    """Reduce-only op: finalize the running accumulator through CA/S/TH."""
    regs = engine.regs
    bit_mode, elem_mode = regs.bit_elser
    op_log = EventLog()
    raw = engine.acc
    op_log.add("ca_add")
    scaled, out, l1 = _finalize(engine, op_log, spin=False,
                                compare_ref=compare_ref, th_override=th_override)
    cycles = engine.table.fused_latency(regs.nrf_m, bit_mode, elem_mode,
                                        regs.bit_wid, engine.banks)
    op_log.cycles = cycles
    engine.log.merge(op_log)
    engine.log.trace.append(TraceOp(
        kind="reduce", level=regs.nrf_m.value, bit_wid=regs.bit_wid,
        bit_mode=bit_mode.value, elem_mode=elem_mode.value, banks=engine.banks,
        scaler=regs.enabled(Stage.S),
        thresholded=resolve_th_mode(regs, th_override) != "off"))
    return RceResult(raw_sum=raw, scaled=scaled, th_out=out, l1_contrib=l1,
                     cycles=cycles, events=dict(op_log.counts))
