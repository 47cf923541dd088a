"""Ratio-band checks tying the shipped calibration to the hardware ratios.

The absolute energy prices in ``calibration.json`` are model calibration.
What the model must reproduce are six measured ratios, each checked as a
band here: engine-vs-baseline speedup (and the parallel combination) on
all five benchmark workloads, the bit-parallel vs bit-serial single-bit
energy penalty, the L2-vs-L1 misplacement penalty, the dynamic-resolution
saving on the Ising norm phase, and the sparsity-gating saving at high
operand sparsity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .cost import BaselineModel, CostTable, compare
from .workloads import WorkloadSpec, run_benchmark

#: The five desk-scale benchmark workloads (mirrored in configs/*.json).
BENCH_SPECS = {
    "cnn": WorkloadSpec(type="cnn", dims={"height": 6, "width": 6, "kernel": 3},
                        seed=11, sparsity=0.25, bit_wid=4, mode="bp_ep",
                        schedule={"relu": 1, "label": 1}),
    "ising": WorkloadSpec(type="ising", dims={"n": 16}, seed=5, bit_wid=1,
                          mode="bs_ep", schedule={"sweeps": 12, "epsilon": 0}),
    "lp": WorkloadSpec(type="lp", dims={"n": 8}, seed=3, bit_wid=8,
                       mode="bp_ep", schedule={"iterations": 24}),
    "gcn": WorkloadSpec(type="gcn",
                        dims={"nodes": 8, "feat_in": 8, "feat_out": 4},
                        seed=9, sparsity=0.7, bit_wid=4, mode="bp_ep"),
    "attn": WorkloadSpec(type="attn", dims={"seq": 4, "dim": 8}, seed=13,
                         bit_wid=4, mode="bp_ep"),
}


@dataclass(frozen=True)
class BandResult:
    name: str
    value: float
    lo: float
    hi: float

    @property
    def ok(self) -> bool:
        return self.lo <= self.value <= self.hi

    def to_dict(self) -> dict:
        return {"name": self.name, "value": round(self.value, 6),
                "lo": self.lo, "hi": self.hi, "ok": self.ok}

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return (f"{status} {self.name}: {self.value:.3f} "
                f"in [{self.lo}, {self.hi}]")


def check_bands(table: CostTable, baseline: BaselineModel | None = None) -> list[BandResult]:
    baseline = baseline or BaselineModel()
    results: list[BandResult] = []

    for name, spec in BENCH_SPECS.items():
        bench = run_benchmark(spec, table, baseline)
        summary = compare({"base": bench.base, "abi": bench.abi,
                           "abi_sp_off": bench.abi_sp_off})
        results.append(BandResult(f"speedup[{name}]",
                                  summary["speedup_abi"], 3.0, 6.0))
        results.append(BandResult(f"combined_speedup[{name}]",
                                  summary["speedup_combined"], 6.0, 16.0))
        if name == "gcn":
            results.append(BandResult("sparsity_savings[gcn@0.7]",
                                      summary["sparsity_savings"], 1.3, 1.8))

    # Single-bit compute: bit-parallel burns the full shifter array while
    # bit-serial activates one 4-bit slice; both element-serial.
    ising = BENCH_SPECS["ising"]
    e_bp = run_benchmark(ising, table, baseline, mode="bp_es", sp_act=False).abi.energy
    e_bs = run_benchmark(ising, table, baseline, mode="bs_es", sp_act=False).abi.energy
    results.append(BandResult("bp_vs_bs_1bit_energy", e_bp / e_bs, 1.5, 1.9))

    # A problem that fits L1 but runs at L2 pays the transfer premium.
    lp = BENCH_SPECS["lp"]
    e_l1 = run_benchmark(lp, table, baseline, level="l1", sp_act=False).abi.energy
    e_l2 = run_benchmark(lp, table, baseline, level="l2", sp_act=False).abi.energy
    results.append(BandResult("l2_vs_l1_misplacement", e_l2 / e_l1, 1.2, 1.6))

    # Dynamic resolution: the norm phase at 2 bits vs locked to the
    # coupling width.  Same spins either way, so energies are comparable.
    r3 = WorkloadSpec(type="ising", dims={"n": 16}, seed=7, bit_wid=8,
                      mode="bs_ep", schedule={"sweeps": 6, "norm_bit_wid": 2})
    r3_fixed = replace(r3, schedule={"sweeps": 6, "norm_bit_wid": 8})
    e_dyn = run_benchmark(r3, table, baseline, sp_act=False).abi.energy
    e_fix = run_benchmark(r3_fixed, table, baseline, sp_act=False).abi.energy
    results.append(BandResult("r3_dynamic_resolution", e_fix / e_dyn, 1.1, 1.4))

    return results
