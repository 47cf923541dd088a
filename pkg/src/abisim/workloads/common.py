"""Workload spec parsing and the shared benchmark runner.

A workload spec maps a problem instance onto engine programs and pairs it
with an exact reference implementation.  ``run_benchmark`` executes the
engine run, the paired sparsity-off run (to witness numerical
transparency), the reference, and the baseline-GPU expansion, returning
all reports for comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping

from ..cost import BaselineModel, CostTable, account, simulate_baseline
from ..engine import DEFAULT_CAPACITIES, Engine, MemLevel
from ..errors import ComparisonError, SchemaError

SPEC_KEYS = {"type", "dims", "seed", "sparsity", "bit_wid", "mode", "schedule", "level"}
WORKLOAD_TYPES = ("cnn", "ising", "lp", "gcn", "attn")


@dataclass(frozen=True)
class WorkloadSpec:
    """Problem description loaded from JSON."""

    type: str
    dims: Mapping[str, int]
    seed: int
    sparsity: float = 0.0
    bit_wid: int = 8
    mode: str = "bp_ep"
    schedule: Mapping = field(default_factory=dict)
    level: str = "auto"

    def __post_init__(self):
        if self.type not in WORKLOAD_TYPES:
            raise SchemaError(f"unknown workload type {self.type!r}")
        if not 0.0 <= self.sparsity < 1.0:
            raise SchemaError(f"sparsity {self.sparsity} not in [0, 1)")
        if self.level not in ("auto", "rf", "l1", "l2"):
            raise SchemaError(f"level must be auto/rf/l1/l2, got {self.level!r}")

    @classmethod
    def from_json(cls, doc: Mapping) -> "WorkloadSpec":
        unknown = set(doc) - SPEC_KEYS
        if unknown:
            raise SchemaError(f"unknown workload spec keys: {sorted(unknown)}")
        missing = {"type", "dims", "seed"} - set(doc)
        if missing:
            raise SchemaError(f"workload spec missing keys: {sorted(missing)}")
        return cls(type=doc["type"], dims=dict(doc["dims"]), seed=int(doc["seed"]),
                   sparsity=float(doc.get("sparsity", 0.0)),
                   bit_wid=int(doc.get("bit_wid", 8)),
                   mode=str(doc.get("mode", "bp_ep")),
                   schedule=dict(doc.get("schedule", {})),
                   level=str(doc.get("level", "auto")))

    @classmethod
    def from_file(cls, path) -> "WorkloadSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _module_for(workload_type: str):
    from . import attention, cnn, gcn, ising, lp

    return {"cnn": cnn, "ising": ising, "lp": lp, "gcn": gcn,
            "attn": attention}[workload_type]


def pick_level(stationary_words: int, level: str) -> MemLevel:
    """Smallest memory level whose banks hold the stationary operand."""
    if level != "auto":
        return MemLevel(level)
    for lvl in (MemLevel.RF, MemLevel.L1, MemLevel.L2):
        if stationary_words <= DEFAULT_CAPACITIES[lvl]:
            return lvl
    raise SchemaError(f"stationary footprint {stationary_words} exceeds L2")


@dataclass
class BenchResult:
    spec: WorkloadSpec
    abi: "RunReport"
    base: "RunReport"
    abi_sp_off: "RunReport"
    outputs: dict
    oracle_outputs: dict
    oracle_match: bool


def _run_once(spec: WorkloadSpec, module, inst, table: CostTable,
              level: MemLevel, sp_act: bool) -> tuple[Engine, dict]:
    engine = Engine(table=table)
    engine.set_field("nrf_m", level.value)
    engine.set_field("sp_act", 1 if sp_act else 0)
    outputs = module.run(inst, engine)
    return engine, outputs


def run_benchmark(spec: WorkloadSpec, table: CostTable,
                  baseline: BaselineModel | None = None, *,
                  sp_act: bool | None = None,
                  level: str | None = None,
                  mode: str | None = None) -> BenchResult:
    """Engine run + transparency pair + reference + baseline expansion."""
    if mode is not None:
        spec = replace(spec, mode=mode)
    if level is not None:
        spec = replace(spec, level=level)
    module = _module_for(spec.type)
    inst = module.build(spec)
    mem_level = pick_level(module.stationary_words(inst), spec.level)
    detector = spec.sparsity > 0.0 if sp_act is None else sp_act

    engine, outputs = _run_once(spec, module, inst, table, mem_level, detector)
    engine_off, outputs_off = _run_once(spec, module, inst, table, mem_level, False)
    if outputs != outputs_off:
        raise ComparisonError(
            "sparsity gating changed numeric outputs; engine is broken")
    oracle_outputs = module.oracle(inst)
    match = outputs == oracle_outputs

    run_id = f"{spec.type}-{spec.seed:04d}"
    common = dict(workload=spec.type, seed=spec.seed)
    abi = account(engine.log, engine.describe(), table, run_id=run_id,
                  level=mem_level.value, bit_wid=spec.bit_wid, mode=spec.mode,
                  **common)
    abi.monitor = engine.monitor.dump()
    abi.oracle_match = match
    abi.details = module.details(inst, outputs)
    abi_off = account(engine_off.log, engine_off.describe(), table,
                      run_id=run_id + "-spoff", level=mem_level.value,
                      bit_wid=spec.bit_wid, mode=spec.mode, **common)
    base = simulate_baseline(engine.log.trace, table, baseline,
                             run_id=run_id + "-base", **common)
    return BenchResult(spec=spec, abi=abi, base=base, abi_sp_off=abi_off,
                       outputs=outputs, oracle_outputs=oracle_outputs,
                       oracle_match=match)
