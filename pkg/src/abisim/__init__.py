"""abisim: deterministic functional and cycle/energy simulator for a
reconfigurable near-register-file/near-cache compute engine."""

from .engine import (BitMode, ElemMode, Engine, EventLog, MemLevel, ProgRegs,
                     Stage, Word, set_prog_reg)
from .cost import (BaselineModel, CostTable, RunReport, account, compare,
                   default_table, load_calibration, simulate_baseline)
from .isa import assemble, disassemble, run as run_program
from .lwsm import LwsmFixed, find_first_one, lwsm, lwsm_error_sweep, normalize_scores
from .rce import RceResult, execute_fused, execute_reduce
from .sparsity import SparsityMonitor, detect, monitor_step
from .workloads import WorkloadSpec, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "BaselineModel", "BitMode", "CostTable", "ElemMode", "Engine", "EventLog",
    "LwsmFixed", "MemLevel", "ProgRegs", "RceResult", "RunReport",
    "SparsityMonitor", "Stage", "Word", "WorkloadSpec", "account", "assemble",
    "compare", "default_table", "detect", "disassemble", "execute_fused",
    "execute_reduce", "find_first_one", "load_calibration", "lwsm",
    "lwsm_error_sweep", "monitor_step", "normalize_scores", "run_benchmark",
    "run_program", "set_prog_reg", "simulate_baseline",
]
