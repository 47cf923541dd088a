"""Application mappings onto the engine, each paired with an exact oracle."""

from .common import BenchResult, WorkloadSpec, pick_level, run_benchmark

__all__ = ["BenchResult", "WorkloadSpec", "pick_level", "run_benchmark"]
