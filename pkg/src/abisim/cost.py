"""Event pricing, cycle accounting, baseline GPU model, and run comparison.

Cycle model
-----------
A fused op (VMACRT or VRED) costs the base latency of the memory level it
computes at (RF: 2 cycles, L1: 4, L2: 10) plus mode penalties: bit-serial
adds ceil(bit_wid/4) - 1 cycles, element-serial adds B - 1.  Register and
memory preloads (PRSET/LDM/LDR) are scan-in/configuration traffic and cost
no cycles; they do log write events, so their energy is charged.  Softmax
applications cost one cycle per element.

Baseline model
--------------
The baseline GPU executes the same kernels as plain instruction streams.
Every fused-op-equivalent expands to loads + a vector MAC + (B-1)
reduction adds + a threshold/bookkeeping op, issued at one instruction per
cycle through a pipeline of configurable depth.  Softmax expands to a
fixed instruction count per element.  Energy is charged per instruction
(fetch/decode), per ALU op, and per register-file access; loads also pay
the read at the data's memory level.

All energy prices live in ``calibration.json`` and are model calibration,
not measured truth; only the ratios the acceptance suite checks are
meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .engine import BS_GROUP_BITS, EventLog, MemLevel, BitMode, ElemMode, TraceOp
from .errors import ComparisonError, RangeError, SchemaError

ENERGY_CLASSES = (
    "rf_read", "l1_read", "l2_read", "write",
    "st0_and", "st1_shift", "st2_add", "st3_add", "st4_mul",
    "ca_add", "scale_div", "th_cmp", "lwsm_op", "sp_detect",
    "base_instr_fetch_decode", "base_alu_mac", "base_rf_access",
)

DEFAULT_ENERGY = {
    "rf_read": 4.0,
    "l1_read": 8.0,
    "l2_read": 20.0,
    "write": 0.1,
    "st0_and": 0.01,
    "st1_shift": 0.1,
    "st2_add": 0.05,
    "st3_add": 0.2,
    "st4_mul": 0.6,
    "ca_add": 0.2,
    "scale_div": 0.5,
    "th_cmp": 0.3,
    "lwsm_op": 0.1,
    "sp_detect": 0.35,
    "base_instr_fetch_decode": 6.0,
    "base_alu_mac": 2.0,
    "base_rf_access": 1.0,
}

DEFAULT_FUSED_CYCLES = {"rf": 2, "l1": 4, "l2": 10}

#: Ops are counted as 8-bit-equivalent MACs: one fused op over B banks at
#: bit_wid w counts B * 8 / w ops (lower precision packs more ops per access).
OP_REFERENCE_BITS = 8


@dataclass(frozen=True)
class CostTable:
    """Per-event energy prices and per-level fused-op latencies."""

    energy: Mapping[str, float]
    fused_base_cycles: Mapping[str, int] = field(
        default_factory=lambda: dict(DEFAULT_FUSED_CYCLES))

    def __post_init__(self):
        missing = set(ENERGY_CLASSES) - set(self.energy)
        extra = set(self.energy) - set(ENERGY_CLASSES)
        if missing or extra:
            raise SchemaError(
                f"cost table keys mismatch: missing={sorted(missing)} "
                f"extra={sorted(extra)}")
        for k, v in self.energy.items():
            if v < 0:
                raise RangeError(f"energy price {k} must be >= 0, got {v}")
        if set(self.fused_base_cycles) != {"rf", "l1", "l2"}:
            raise SchemaError("fused_base_cycles needs exactly rf/l1/l2")
        for k, v in self.fused_base_cycles.items():
            if not isinstance(v, int) or v < 1:
                raise RangeError(f"latency {k} must be an integer >= 1, got {v}")

    def price(self, kind: str) -> float:
        try:
            return self.energy[kind]
        except KeyError:
            raise SchemaError(f"unknown event class {kind!r}") from None

    def fused_latency(self, level: MemLevel, bit_mode: BitMode,
                      elem_mode: ElemMode, bit_wid: int, banks: int) -> int:
        cycles = self.fused_base_cycles[level.value]
        if bit_mode is BitMode.BS:
            cycles += -(-bit_wid // BS_GROUP_BITS) - 1
        if elem_mode is ElemMode.ES:
            cycles += banks - 1
        return cycles


def default_table() -> CostTable:
    return CostTable(dict(DEFAULT_ENERGY))


@dataclass(frozen=True)
class BaselineModel:
    """Instruction expansion of one fused-op-equivalent on the baseline GPU."""

    loads_per_op: int = 2
    macs_per_op: int = 1
    threshold_ops: int = 1
    instr_latency: int = 4  # pipeline depth; issue rate is cpi
    cpi: int = 1
    softmax_instrs_per_elem: int = 4

    def __post_init__(self):
        if min(self.loads_per_op, self.macs_per_op, self.threshold_ops) < 0:
            raise RangeError("instruction counts must be >= 0")
        if self.instr_latency < 1 or self.cpi < 1:
            raise RangeError("instr_latency and cpi must be >= 1")

    def instrs_for(self, op: TraceOp) -> int:
        if op.kind == "lwsm":
            return self.softmax_instrs_per_elem * op.n
        n = self.loads_per_op + self.macs_per_op + (op.banks - 1) + self.threshold_ops
        if n < 4:
            raise RangeError("baseline expansion must cover the four fused roles")
        return n


CSV_COLUMNS = ("run_id", "kind", "workload", "seed", "level", "bit_wid",
               "mode", "cycles", "energy", "op_count", "gops_per_energy",
               "oracle_match")


@dataclass
class RunReport:
    """Aggregated cycles/energy/ops accounting of one run."""

    run_id: str
    kind: str  # "abi" | "base"
    workload: str
    seed: int | None
    level: str
    bit_wid: int
    mode: str
    cycles: int
    energy: float
    op_count: float
    events: dict
    config: dict
    outputs: list | None = None
    monitor: dict | None = None
    oracle_match: bool | None = None
    details: dict | None = None

    @property
    def gops_per_energy(self) -> float:
        return self.op_count / self.energy if self.energy else 0.0

    def to_dict(self) -> dict:
        d = {
            "schema_version": 1,
            "run_id": self.run_id,
            "kind": self.kind,
            "workload": self.workload,
            "seed": self.seed,
            "level": self.level,
            "bit_wid": self.bit_wid,
            "mode": self.mode,
            "cycles": self.cycles,
            "energy": round(self.energy, 6),
            "op_count": round(self.op_count, 6),
            "gops_per_energy": round(self.gops_per_energy, 9),
            "events": {k: self.events[k] for k in sorted(self.events)},
            "config": self.config,
        }
        if self.outputs is not None:
            d["outputs"] = list(self.outputs)
        if self.monitor is not None:
            d["monitor"] = self.monitor
        if self.oracle_match is not None:
            d["oracle_match"] = self.oracle_match
        if self.details is not None:
            d["details"] = self.details
        return d

    def to_csv_row(self) -> list:
        return [self.run_id, self.kind, self.workload,
                "" if self.seed is None else self.seed,
                self.level, self.bit_wid, self.mode, self.cycles,
                round(self.energy, 6), round(self.op_count, 6),
                round(self.gops_per_energy, 9),
                "" if self.oracle_match is None else int(self.oracle_match)]


def _op_count(trace: Sequence[TraceOp]) -> float:
    ops = 0.0
    for op in trace:
        if op.kind == "fused":
            ops += op.banks * OP_REFERENCE_BITS / op.bit_wid
    return ops


def account(log: EventLog, config: Mapping, table: CostTable, *,
            run_id: str = "run", kind: str = "abi", workload: str = "-",
            seed: int | None = None, level: str = "rf", bit_wid: int = 8,
            mode: str = "bp_ep") -> RunReport:
    """Price an event log into a run report (deterministic linear pricing)."""
    energy = 0.0
    for evt, count in log.counts.items():
        energy += table.price(evt) * count
    return RunReport(run_id=run_id, kind=kind, workload=workload, seed=seed,
                     level=level, bit_wid=bit_wid, mode=mode,
                     cycles=log.cycles, energy=energy,
                     op_count=_op_count(log.trace),
                     events=dict(log.counts), config=dict(config),
                     outputs=list(log.outputs) if log.outputs else None)


def simulate_baseline(trace: Sequence[TraceOp], table: CostTable,
                      model: BaselineModel | None = None, *,
                      run_id: str = "base", workload: str = "-",
                      seed: int | None = None, config: Mapping | None = None) -> RunReport:
    """Expand a fused-op trace into baseline instructions and price them."""
    model = model or BaselineModel()
    events = EventLog()
    total_instrs = 0
    level = trace[0].level if trace else "rf"
    bit_wid = trace[0].bit_wid if trace else 8
    for op in trace:
        n = model.instrs_for(op)
        total_instrs += n
        events.add("base_instr_fetch_decode", n)
        if op.kind == "lwsm":
            events.add("base_alu_mac", n)
            events.add("base_rf_access", 2 * n)
            continue
        events.add(f"{op.level}_read", model.loads_per_op)
        events.add("base_rf_access", model.loads_per_op)          # load write-back
        events.add("base_alu_mac", model.macs_per_op)
        events.add("base_rf_access", 3 * model.macs_per_op)       # 2 reads + 1 write
        events.add("base_alu_mac", op.banks - 1)
        events.add("base_rf_access", 2 * (op.banks - 1))
        events.add("base_alu_mac", model.threshold_ops)
        events.add("base_rf_access", 2 * model.threshold_ops)
    events.cycles = model.cpi * total_instrs
    if total_instrs:
        events.cycles += model.instr_latency - model.cpi  # pipeline fill
    energy = sum(table.price(evt) * cnt for evt, cnt in events.counts.items())
    return RunReport(run_id=run_id, kind="base", workload=workload, seed=seed,
                     level=level, bit_wid=bit_wid, mode="base",
                     cycles=events.cycles, energy=energy,
                     op_count=_op_count(trace), events=dict(events.counts),
                     config=dict(config or {"model": "baseline"}),
                     details={"instructions": total_instrs})


def combine_reports(base: RunReport, abi: RunReport) -> dict:
    """Model base+engine running in parallel: perfect work split, max-combined.

    With the optimal split fraction the two sides finish together, so the
    combined time is Ta*Tb/(Ta+Tb) and the energies mix by the same
    fractions.
    """
    ta, tb = abi.cycles, base.cycles
    if ta <= 0 or tb <= 0:
        raise ComparisonError("cannot combine empty runs")
    f = tb / (ta + tb)  # fraction of the work handed to the engine
    cycles = max(f * ta, (1 - f) * tb)
    energy = f * abi.energy + (1 - f) * base.energy
    return {"cycles": cycles, "energy": energy, "work_fraction_abi": f}


def compare(reports: Mapping[str, RunReport]) -> dict:
    """Speedup/efficiency/sparsity-savings summary across paired runs.

    Expects keys ``base`` and ``abi`` (plus optional ``abi_sp_off``); all
    reports must come from the same workload and seed.
    """
    try:
        base = reports["base"]
        abi = reports["abi"]
    except KeyError as exc:
        raise ComparisonError(f"missing report {exc}") from None
    for name, rep in reports.items():
        if rep is None:
            continue
        if (rep.workload, rep.seed) != (base.workload, base.seed):
            raise ComparisonError(
                f"report {name!r} is from {rep.workload}/{rep.seed}, "
                f"expected {base.workload}/{base.seed}")
    combined = combine_reports(base, abi)
    sp_off = reports.get("abi_sp_off")
    summary = {
        "workload": base.workload,
        "seed": base.seed,
        "speedup_abi": base.cycles / abi.cycles,
        "speedup_combined": base.cycles / combined["cycles"],
        "energy_efficiency_abi": (abi.gops_per_energy / base.gops_per_energy
                                  if base.gops_per_energy else 0.0),
        "sparsity_savings": (sp_off.energy / abi.energy
                             if sp_off is not None and abi.energy else None),
        "cycles": {"base": base.cycles, "abi": abi.cycles,
                   "combined": combined["cycles"]},
        "energy": {"base": round(base.energy, 6), "abi": round(abi.energy, 6),
                   "combined": round(combined["energy"], 6)},
    }
    return summary


def load_calibration(path) -> tuple[CostTable, BaselineModel]:
    """Read the shipped calibration file (strict keys)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    allowed = {"energy", "fused_base_cycles", "baseline"}
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"unknown calibration keys: {sorted(unknown)}")
    if "energy" not in doc:
        raise SchemaError("calibration must define energy prices")
    table = CostTable(doc["energy"],
                      doc.get("fused_base_cycles", dict(DEFAULT_FUSED_CYCLES)))
    baseline = BaselineModel(**doc.get("baseline", {}))
    return table, baseline
