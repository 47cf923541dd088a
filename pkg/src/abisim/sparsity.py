"""Per-access zero-operand detection and the programmable-window monitor.

Detection looks at the decoded operand values of every bank pair on each
fused-op issue.  A zero on either side raises that bank's SpEn flag, which
gates St1-St3 for the access (the product is zero anyway, so gating never
changes numbers).  The monitor counts SpEn activity over a programmable
window; a full window with no activity shuts the detector down until the
configuration register is explicitly re-armed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


def detect(mem_vals: list[int], reg_vals: list[int], detector_on: bool) -> list[bool]:
    """Per-bank SpEn flags: true when either operand of the bank is zero."""
    if len(mem_vals) != len(reg_vals):
        raise ConfigError("memory read and operand register lengths differ")
    if not detector_on:
        return [False] * len(mem_vals)
    return [m == 0 or r == 0 for m, r in zip(mem_vals, reg_vals)]


def gate_effect(sp_en: list[bool], bank_events: list[dict]) -> list[dict]:
    """Reference gating rule: zero the St1-St3 event counts of flagged banks."""
    gated = []
    for en, ev in zip(sp_en, bank_events):
        if en:
            ev = {k: (0 if k in ("st1_shift", "st2_add", "st3_add") else v)
                  for k, v in ev.items()}
        gated.append(dict(ev))
    return gated


@dataclass
class SparsityMonitor:
    """Window counter deciding whether detection is worth its own power.

    One monitor cycle is one fused-op issue.  ``sp_cnt`` follows the
    update rule: +1 on any SpEn in the access, unchanged otherwise.  At a
    window boundary with ``sp_cnt == 0`` the detector shuts itself down.
    """

    window: int = 512
    detector_on: bool = True
    sp_cnt: int = 0
    cycle_in_window: int = 0
    sp_en_last: bool = False
    windows_elapsed: int = 0
    shutdown_cycle: int | None = None
    total_cycles: int = 0

    def rearm(self, window: int | None = None, keep_state: bool = False) -> None:
        if window is not None:
            self.window = window
        if not keep_state:
            self.detector_on = True
            self.sp_cnt = 0
            self.cycle_in_window = 0
            self.sp_en_last = False
            self.shutdown_cycle = None

    def dump(self) -> dict:
        return {
            "sp_cnt": self.sp_cnt,
            "detector_on": self.detector_on,
            "windows_elapsed": self.windows_elapsed,
            "shutdown_cycle": self.shutdown_cycle,
        }


def monitor_step(m: SparsityMonitor, any_sp_en: bool) -> SparsityMonitor:
    """Advance the monitor by one access cycle; may auto-shutdown detection."""
    if not m.detector_on:
        return m
    m.total_cycles += 1
    m.cycle_in_window += 1
    m.sp_en_last = any_sp_en
    if any_sp_en:
        m.sp_cnt += 1
    if m.cycle_in_window >= m.window:
        m.windows_elapsed += 1
        quiet = m.sp_cnt == 0
        m.sp_cnt = 0
        m.cycle_in_window = 0
        if quiet:
            m.detector_on = False
            m.shutdown_cycle = m.total_cycles
    return m
