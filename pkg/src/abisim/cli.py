"""Batch front-end: assemble/run programs, benchmark workloads, compare
against the baseline model, sweep seeds, and check the calibration bands.

Every subcommand emits a machine-readable JSON report (plus CSV where a
tabular form exists).  Reports are byte-reproducible for a given seed;
``--no-timestamp`` drops the only non-deterministic field, and tests rely
on that.  Exit codes: 0 success, 1 any error (one machine-parsable line on
stderr), 2 oracle mismatch in ``bench``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from .calibrate import check_bands
from .cost import (BaselineModel, CSV_COLUMNS, account, compare,
                   default_table, load_calibration, simulate_baseline)
from .engine import Engine
from .errors import AbisimError
from .isa import assemble_file, run as run_program
from .lwsm import lwsm_error_sweep
from .workloads import WorkloadSpec, run_benchmark

ENV_CONFIG = "ABISIM_CONFIG"


def _emit(doc: dict, out: str | None, no_timestamp: bool) -> None:
    if not no_timestamp:
        doc = dict(doc)
        doc["timestamp"] = datetime.now(timezone.utc).isoformat()
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_csv(rows: list[list], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)


def _load_tables(args) -> tuple:
    if getattr(args, "calibration", None):
        return load_calibration(args.calibration)
    return default_table(), BaselineModel()


def _cmd_run(args) -> int:
    table, _ = _load_tables(args)
    program = assemble_file(args.program)
    config = args.config or os.environ.get(ENV_CONFIG)
    engine = (Engine.from_config_file(config, table=table) if config
              else Engine(table=table))
    engine = run_program(program, engine)
    report = account(engine.log, engine.describe(), table,
                     run_id=Path(args.program).stem, kind="abi",
                     workload="program", level=engine.regs.nrf_m.value,
                     bit_wid=engine.regs.bit_wid,
                     mode=f"{engine.regs.bit_elser[0].value}_{engine.regs.bit_elser[1].value}")
    report.monitor = engine.monitor.dump()
    doc = report.to_dict()
    doc["config"]["program"] = Path(args.program).name
    _emit(doc, args.out, args.no_timestamp)
    return 0


def _bench_result(args):
    table, baseline = _load_tables(args)
    spec = WorkloadSpec.from_file(args.spec)
    if args.workload and args.workload != spec.type:
        raise AbisimError(
            f"--workload {args.workload} does not match spec type {spec.type}")
    if args.seed is not None:
        from dataclasses import replace
        spec = replace(spec, seed=args.seed)
    return spec, run_benchmark(spec, table, baseline)


def _cmd_bench(args) -> int:
    _, result = _bench_result(args)
    _emit(result.abi.to_dict(), args.out, args.no_timestamp)
    if not result.oracle_match:
        sys.stderr.write(f"error: OracleMismatch: {result.spec.type} "
                         f"seed={result.spec.seed}\n")
        return 2
    return 0


def _cmd_compare(args) -> int:
    _, result = _bench_result(args)
    summary = compare({"base": result.base, "abi": result.abi,
                       "abi_sp_off": result.abi_sp_off})
    doc = {"schema_version": 1, "kind": "compare"}
    doc.update(summary)
    for key in ("speedup_abi", "speedup_combined", "energy_efficiency_abi",
                "sparsity_savings"):
        if isinstance(doc.get(key), float):
            doc[key] = round(doc[key], 6)
    doc["cycles"] = {k: round(v, 3) for k, v in doc["cycles"].items()}
    _emit(doc, args.out, args.no_timestamp)
    return 0


def _cmd_sweep(args) -> int:
    table, baseline = _load_tables(args)
    base_spec = WorkloadSpec.from_file(args.spec)
    from dataclasses import replace

    runs = []
    rows = []
    for seed in range(args.seeds):
        spec = replace(base_spec, seed=seed)
        result = run_benchmark(spec, table, baseline)
        runs.append(result.abi.to_dict())
        rows.append(result.abi.to_csv_row())
        rows.append(result.base.to_csv_row())
    runs.sort(key=lambda r: r["run_id"])
    rows.sort(key=lambda r: (r[0], r[1]))
    doc = {"schema_version": 1, "kind": "sweep", "workload": base_spec.type,
           "seeds": args.seeds, "runs": runs}
    _emit(doc, args.out, args.no_timestamp)
    if args.csv:
        _emit_csv(rows, args.csv)
    return 0


def _cmd_lwsm_stats(args) -> int:
    record = lwsm_error_sweep(args.n, args.trials, args.seed, args.frac_bits)
    doc = {"schema_version": 1, "kind": "lwsm-stats"}
    doc.update(record)
    doc["mean_abs_err"] = round(doc["mean_abs_err"], 9)
    doc["max_ratio"] = round(doc["max_ratio"], 9)
    doc["min_ratio"] = round(doc["min_ratio"], 9)
    doc["argmax_agreement"] = round(doc["argmax_agreement"], 6)
    doc["octave_separated"]["agreement"] = round(
        doc["octave_separated"]["agreement"], 6)
    _emit(doc, args.out, args.no_timestamp)
    return 0


def _cmd_calibrate_check(args) -> int:
    table, baseline = _load_tables(args)
    bands = check_bands(table, baseline)
    for band in bands:
        print(band.line())
    doc = {"schema_version": 1, "kind": "calibrate-check",
           "ok": all(b.ok for b in bands),
           "bands": [b.to_dict() for b in bands]}
    if args.out:
        _emit(doc, args.out, args.no_timestamp)
    return 0 if doc["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abisim",
        description="near-memory compute engine simulator and benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, calibration=True):
        p.add_argument("--out", help="write the JSON report here (default stdout)")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the timestamp for byte-reproducible reports")
        if calibration:
            p.add_argument("--calibration",
                           help="calibration JSON (default: built-in table)")

    p = sub.add_parser("run", help="assemble and execute an .abi program")
    p.add_argument("program")
    p.add_argument("--config", help=f"engine config JSON (or ${ENV_CONFIG})")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="run a workload against its oracle")
    p.add_argument("--workload", help="expected workload type (sanity check)")
    p.add_argument("--spec", required=True, help="workload spec JSON")
    p.add_argument("--seed", type=int, help="override the spec seed")
    common(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("compare", help="engine vs baseline vs parallel combination")
    p.add_argument("--workload")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", help="run one workload across seeds 0..N-1")
    p.add_argument("--spec", required=True)
    p.add_argument("--seeds", type=int, default=8)
    p.add_argument("--csv", help="also write a CSV table here")
    common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("lwsm-stats", help="approximate-softmax accuracy sweep")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--frac-bits", type=int, default=8)
    common(p, calibration=False)
    p.set_defaults(func=_cmd_lwsm_stats)

    p = sub.add_parser("calibrate-check",
                       help="assert the six calibration ratio bands")
    common(p)
    p.set_defaults(func=_cmd_calibrate_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: FileNotFound: {exc.filename or exc}\n")
        return 1
    except AbisimError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
