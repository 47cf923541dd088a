"""Engine state: configuration registers, fixed-point words, banked memory.

Everything downstream (pipeline, sparsity monitor, ISA executor, workloads)
reads the types defined here.  All arithmetic is exact Python integers; the
engine never touches floating point.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import (
    AccumulatorOverflowError,
    AddressError,
    ConfigError,
    EmptyValueError,
    RangeError,
    SchemaError,
)

INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1

#: Hardware datapath width: operands are at most INT16.
MAX_WIDTH = 16

#: Bit-serial mode moves this many bit planes per cycle through St2.
BS_GROUP_BITS = 4


class MemLevel(Enum):
    RF = "rf"
    L1 = "l1"
    L2 = "l2"


class BitMode(Enum):
    BS = "bs"  # bit-serial: operand bit planes in groups of 4
    BP = "bp"  # bit-parallel: full plane in one pass, St2 bypassed


class ElemMode(Enum):
    ES = "es"  # element-serial: central adder reduces one bank per cycle
    EP = "ep"  # element-parallel: all banks reduced at once


class Stage(Enum):
    ST0 = "st0"
    ST1 = "st1"
    ST2 = "st2"
    ST3 = "st3"
    ST4 = "st4"
    CA = "ca"
    S = "s"
    TH = "th"


#: Stages the per-access sparsity gate shuts off (detection never gates St0).
GATED_STAGES = (Stage.ST1, Stage.ST2, Stage.ST3)

DEFAULT_CAPACITIES = {MemLevel.RF: 64, MemLevel.L1: 1024, MemLevel.L2: 8192}
DEFAULT_BANKS = 8


def check_i32(value: int, what: str = "accumulator") -> int:
    if not INT32_MIN <= value <= INT32_MAX:
        raise AccumulatorOverflowError(f"{what} overflows 32 bits: {value}")
    return value


@dataclass(frozen=True)
class Word:
    """One stored operand: two's-complement integer plus its container width.

    Width-1 words hold a raw bit in {0, 1}.  Workloads that store spins
    declare the interpretation map sigma = 2*b - 1 by passing ``spin=True``
    to the fused op; ``decode`` applies it.
    """

    value: int
    width: int = MAX_WIDTH

    def __post_init__(self):
        if not 1 <= self.width <= MAX_WIDTH:
            raise RangeError(f"word width {self.width} not in [1, {MAX_WIDTH}]")
        if self.width == 1:
            if self.value not in (0, 1):
                raise RangeError(
                    "width-1 words store raw bits {0,1}; "
                    "encode a spin sigma as (sigma + 1) // 2"
                )
        else:
            lo = -(1 << (self.width - 1))
            hi = (1 << (self.width - 1)) - 1
            if not lo <= self.value <= hi:
                raise RangeError(
                    f"value {self.value} not representable in {self.width} bits"
                )

    @classmethod
    def spin(cls, sigma: int) -> "Word":
        """Encode a spin in {-1, +1} as a width-1 word."""
        if sigma not in (-1, 1):
            raise RangeError(f"spin must be -1 or +1, got {sigma}")
        return cls((sigma + 1) // 2, 1)

    def decode(self, spin_map: bool = False) -> int:
        """Numeric value; width-1 words map through 2b-1 when spin_map is set."""
        if spin_map and self.width == 1:
            return 2 * self.value - 1
        return self.value


def _parse_bit_elser(value) -> tuple[BitMode, ElemMode]:
    if isinstance(value, tuple) and len(value) == 2:
        bm, em = value
        if isinstance(bm, BitMode) and isinstance(em, ElemMode):
            return (bm, em)
    if isinstance(value, str):
        parts = value.lower().replace(",", "_").split("_")
        if len(parts) == 2:
            try:
                return (BitMode(parts[0]), ElemMode(parts[1]))
            except ValueError:
                pass
    raise ConfigError(f"bit_elser must be one of bs_es/bs_ep/bp_es/bp_ep, got {value!r}")


def _parse_stages(value) -> frozenset[Stage]:
    if isinstance(value, str):
        value = [] if value.lower() in ("", "none") else value.split(",")
    try:
        return frozenset(Stage(str(v).lower()) if not isinstance(v, Stage) else v for v in value)
    except (ValueError, TypeError):
        raise ConfigError(f"bad stage set {value!r}") from None


def _parse_flag(name: str, value) -> bool:
    if value in (True, False):
        return bool(value)
    if value in (0, 1):
        return bool(value)
    raise RangeError(f"{name} must be 0 or 1, got {value!r}")


@dataclass(frozen=True)
class ProgRegs:
    """Programmable configuration registers shared by the whole engine.

    ``dis_stage`` covers the per-stage disables: the five pipeline stages
    plus the central adder, scaler and thresholding block.  Bit-parallel
    mode always forces St2 into the set (it is bypassed by construction).
    """

    sp_act: bool = False
    th_act: bool = False
    sm_act: bool = False
    nrf_m: MemLevel = MemLevel.RF
    bit_elser: tuple[BitMode, ElemMode] = (BitMode.BP, ElemMode.EP)
    bit_wid: int = 8
    dis_stage: frozenset[Stage] = frozenset({Stage.ST2, Stage.ST4, Stage.S, Stage.TH})
    sp_window: int = 512

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 1 <= self.bit_wid <= MAX_WIDTH:
            raise RangeError(f"bit_wid {self.bit_wid} not in [1, {MAX_WIDTH}]")
        if not 1 <= self.sp_window <= (1 << 16):
            raise RangeError(f"sp_window {self.sp_window} not in [1, 65536]")
        if self.th_act and self.sm_act:
            raise ConfigError("th_act and sm_act are mutually exclusive")
        if self.bit_elser[0] is BitMode.BP and Stage.ST2 not in self.dis_stage:
            raise ConfigError("bit-parallel mode requires St2 disabled")

    def enabled(self, stage: Stage) -> bool:
        return stage not in self.dis_stage

    def describe(self) -> dict:
        return {
            "sp_act": self.sp_act,
            "th_act": self.th_act,
            "sm_act": self.sm_act,
            "nrf_m": self.nrf_m.value,
            "bit_elser": f"{self.bit_elser[0].value}_{self.bit_elser[1].value}",
            "bit_wid": self.bit_wid,
            "dis_stage": sorted(s.value for s in self.dis_stage),
            "sp_window": self.sp_window,
        }


_PROGREG_FIELDS = {f.name for f in fields(ProgRegs)}

# dis_stage is applied last: the BP write re-adds St2 to whatever disable
# set was in force, so mode must be settled before the set is written
_PROGREG_APPLY_ORDER = ("sp_act", "th_act", "sm_act", "nrf_m", "bit_elser",
                        "bit_wid", "sp_window", "dis_stage")


def set_prog_reg(regs: ProgRegs, field_name: str, value) -> ProgRegs:
    """Return a copy of ``regs`` with one field updated and re-validated.

    Derived constraints are re-applied: selecting bit-parallel mode adds
    St2 to ``dis_stage`` (and keeps it there on later dis_stage writes).
    """
    if field_name not in _PROGREG_FIELDS:
        raise ConfigError(f"unknown configuration register {field_name!r}")
    if field_name in ("sp_act", "th_act", "sm_act"):
        value = _parse_flag(field_name, value)
    elif field_name == "nrf_m":
        try:
            value = value if isinstance(value, MemLevel) else MemLevel(str(value).lower())
        except ValueError:
            raise ConfigError(f"nrf_m must be rf/l1/l2, got {value!r}") from None
    elif field_name == "bit_elser":
        value = _parse_bit_elser(value)
    elif field_name == "dis_stage":
        value = _parse_stages(value)
    elif field_name in ("bit_wid", "sp_window"):
        if not isinstance(value, int) or isinstance(value, bool):
            raise RangeError(f"{field_name} must be an integer, got {value!r}")
    updated = replace(regs, **{field_name: value})
    # BP bypasses St2 structurally; keep the disable in sync.
    if updated.bit_elser[0] is BitMode.BP and Stage.ST2 not in updated.dis_stage:
        updated = replace(updated, dis_stage=updated.dis_stage | {Stage.ST2})
    updated.validate()
    return updated


@dataclass(frozen=True)
class TraceOp:
    """One issued operation, as recorded for the baseline expansion."""

    kind: str  # "fused" | "reduce" | "lwsm"
    level: str
    bit_wid: int
    bit_mode: str
    elem_mode: str
    banks: int
    scaler: bool
    thresholded: bool
    n: int = 0  # element count for lwsm applications


class EventLog:
    """Append-only counters of priced hardware events plus the op trace."""

    def __init__(self):
        self.counts: Counter[str] = Counter()
        self.cycles: int = 0
        self.trace: list[TraceOp] = []
        self.outputs: list[int] = []

    def add(self, kind: str, n: int = 1) -> None:
        if n:
            self.counts[kind] += n

    def total_events(self) -> int:
        return sum(self.counts.values())

    def merge(self, other: "EventLog") -> None:
        self.counts.update(other.counts)
        self.cycles += other.cycles


class BankedMemory:
    """One memory level: B banks of equal-length word arrays.

    A read is a broadcast: it returns one word per bank and logs exactly
    one read event of the level's class.
    """

    def __init__(self, level: MemLevel, banks: Sequence[Sequence[Word]]):
        self.level = level
        self.banks = [list(b) for b in banks]
        if not self.banks:
            raise ConfigError("memory needs at least one bank")
        w = len(self.banks[0])
        if any(len(b) != w for b in self.banks):
            raise ConfigError("all banks must have the same length")

    @classmethod
    def zeros(cls, level: MemLevel, nbanks: int, words: int) -> "BankedMemory":
        if nbanks < 1 or words < 1:
            raise ConfigError("banks and words_per_bank must be >= 1")
        return cls(level, [[Word(0)] * words for _ in range(nbanks)])

    @property
    def nbanks(self) -> int:
        return len(self.banks)

    @property
    def words_per_bank(self) -> int:
        return len(self.banks[0])

    def read(self, word_index: int, log: EventLog | None = None) -> list[Word]:
        if not 0 <= word_index < self.words_per_bank:
            raise AddressError(
                f"word index {word_index} out of range [0, {self.words_per_bank})"
            )
        if log is not None:
            log.add(f"{self.level.value}_read")
        return [bank[word_index] for bank in self.banks]

    def write(self, bank: int, word_index: int, word: Word,
              log: EventLog | None = None) -> None:
        if not 0 <= bank < self.nbanks:
            raise AddressError(f"bank {bank} out of range [0, {self.nbanks})")
        if not 0 <= word_index < self.words_per_bank:
            raise AddressError(
                f"word index {word_index} out of range [0, {self.words_per_bank})"
            )
        self.banks[bank][word_index] = word
        if log is not None:
            log.add("write")


@dataclass
class OperandRegs:
    """Stationary-side operand vector (one word per bank) plus REG''."""

    reg: list[Word]
    reg2: Word | None = None

    @classmethod
    def zeros(cls, nbanks: int) -> "OperandRegs":
        return cls([Word(0)] * nbanks, None)


ENGINE_CONFIG_KEYS = _PROGREG_FIELDS | {"banks", "words_per_bank", "level_capacities"}


class Engine:
    """One near-memory compute engine instance.

    Owns the configuration registers, the three memory levels, the operand
    registers, the sparsity monitor and the event log.  Instances are
    self-contained; use each from a single thread at a time.
    """

    def __init__(self, regs: ProgRegs | None = None, *, banks: int = DEFAULT_BANKS,
                 level_capacities: Mapping[MemLevel, int] | None = None,
                 table=None):
        from .cost import default_table  # local import: cost depends on this module
        from .sparsity import SparsityMonitor

        if banks < 1:
            raise ConfigError("banks must be >= 1")
        self.regs = regs if regs is not None else ProgRegs()
        self.banks = banks
        caps = dict(DEFAULT_CAPACITIES)
        if level_capacities:
            caps.update(level_capacities)
        self.mems = {lvl: BankedMemory.zeros(lvl, banks, caps[lvl]) for lvl in MemLevel}
        self.opregs = OperandRegs.zeros(banks)
        self.table = table if table is not None else default_table()
        self.monitor = SparsityMonitor(window=self.regs.sp_window,
                                       detector_on=self.regs.sp_act)
        self.log = EventLog()
        self.acc = 0
        self.result: int | None = None
        self.lwsm_buf: list[int] = []

    # -- configuration ----------------------------------------------------

    @classmethod
    def from_config(cls, config: Mapping, *, table=None) -> "Engine":
        """Build an engine from a JSON-style dict.  Unknown keys are errors."""
        unknown = set(config) - ENGINE_CONFIG_KEYS
        if unknown:
            raise SchemaError(f"unknown engine config keys: {sorted(unknown)}")
        regs = ProgRegs()
        for name in _PROGREG_APPLY_ORDER:
            if name in config:
                regs = set_prog_reg(regs, name, config[name])
        caps = {}
        if "level_capacities" in config:
            raw = config["level_capacities"]
            bad = set(raw) - {lvl.value for lvl in MemLevel}
            if bad:
                raise SchemaError(f"unknown memory levels: {sorted(bad)}")
            caps = {MemLevel(k): int(v) for k, v in raw.items()}
        if "words_per_bank" in config:
            caps.setdefault(MemLevel.RF, int(config["words_per_bank"]))
        return cls(regs, banks=int(config.get("banks", DEFAULT_BANKS)),
                   level_capacities=caps, table=table)

    @classmethod
    def from_config_file(cls, path, *, table=None) -> "Engine":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_config(json.load(fh), table=table)

    def set_field(self, field_name: str, value) -> None:
        """Program one configuration register (the PRSET path)."""
        self.regs = set_prog_reg(self.regs, field_name, value)
        if field_name == "sp_act":
            if self.regs.sp_act:
                self.monitor.rearm(self.regs.sp_window)
            else:
                self.monitor.detector_on = False
        elif field_name == "sp_window":
            self.monitor.rearm(self.regs.sp_window, keep_state=not self.regs.sp_act)

    # -- memory and registers ---------------------------------------------

    @property
    def memory(self) -> BankedMemory:
        return self.mems[self.regs.nrf_m]

    def load_mem(self, bank: int, word_index: int, word: Word) -> None:
        self.memory.write(bank, word_index, word, self.log)

    def load_reg(self, bank: int, word: Word) -> None:
        if not 0 <= bank < self.banks:
            raise AddressError(f"bank {bank} out of range [0, {self.banks})")
        self.opregs.reg[bank] = word
        self.log.add("write")

    def load_reg2(self, word: Word) -> None:
        self.opregs.reg2 = word
        self.log.add("write")

    # -- compute -----------------------------------------------------------

    def fused_op(self, word_index: int, *, acc: bool = False, spin: bool = False,
                 compare_ref: int = 0, th_override: str | None = None):
        from .rce import execute_fused

        return execute_fused(self, word_index, acc=acc, spin=spin,
                             compare_ref=compare_ref, th_override=th_override)

    def reduce_op(self, *, compare_ref: int = 0, th_override: str | None = None):
        from .rce import execute_reduce

        return execute_reduce(self, compare_ref=compare_ref, th_override=th_override)

    def push_scores(self, values: Iterable[int]) -> None:
        """Stage values into the thresholding block's softmax buffer."""
        self.lwsm_buf.extend(int(v) for v in values)

    def apply_lwsm(self, frac_bits: int = 8):
        """Run the lightweight softmax over the staged scores and clear them."""
        from .lwsm import lwsm, normalize_scores

        if not self.lwsm_buf:
            raise EmptyValueError("no scores staged for softmax")
        raws = normalize_scores(self.lwsm_buf, frac_bits)
        result = lwsm(raws, frac_bits=frac_bits, log=self.log)
        n = len(raws)
        self.log.cycles += n
        self.log.trace.append(TraceOp(
            kind="lwsm", level=self.regs.nrf_m.value, bit_wid=self.regs.bit_wid,
            bit_mode=self.regs.bit_elser[0].value,
            elem_mode=self.regs.bit_elser[1].value,
            banks=self.banks, scaler=False, thresholded=True, n=n))
        self.lwsm_buf.clear()
        return result

    # -- introspection ------------------------------------------------------

    def describe(self) -> dict:
        d = self.regs.describe()
        d["banks"] = self.banks
        return d

    def snapshot(self) -> dict:
        return {
            "regs": self.regs.describe(),
            "acc": self.acc,
            "result": self.result,
            "monitor": self.monitor.dump(),
        }
