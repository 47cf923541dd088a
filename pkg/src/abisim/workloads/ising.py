"""Ising solver: coupling-stationary local-field evaluation, sequential
sign updates, and a reduced-resolution L1-norm convergence phase.

Couplings live in memory (row per site: one word index, neighbor per
bank), spins stream through the operand registers as width-1 spin-encoded
words.  The thresholding block's compare mode performs the sign update
(ties resolve to +1).  After each sweep the spin-change vector is written
back and its L1 norm accumulated through the compare mode's |value - ref|
side channel, one element per fused op, at a reduced bit width - the
dynamic-resolution path.

The default topology is a toroidal king's graph: every spin couples to
its eight nearest neighbours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..engine import Engine, Word
from ..errors import SchemaError
from .common import WorkloadSpec

KING_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1),
                (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass
class IsingInstance:
    n: int
    side: int
    couplings: list[list[int]]  # dense symmetric, zero diagonal
    neighbors: list[list[int]]  # 8 neighbor ids per site, fixed order
    sigma0: list[int]
    bit_wid: int
    norm_bit_wid: int
    sweeps: int
    epsilon: int
    mode: str


def king_neighbors(side: int) -> list[list[int]]:
    nbrs = []
    for r in range(side):
        for c in range(side):
            row = []
            for dr, dc in KING_OFFSETS:
                row.append(((r + dr) % side) * side + (c + dc) % side)
            nbrs.append(row)
    return nbrs


def build(spec: WorkloadSpec) -> IsingInstance:
    n = int(spec.dims["n"])
    side = math.isqrt(n)
    if side * side != n or side < 3:
        raise SchemaError(f"king's-graph spin count must be a square >= 9, got {n}")
    rng = np.random.default_rng(spec.seed)
    neighbors = king_neighbors(side)
    couplings = [[0] * n for _ in range(n)]
    mag = (1 << (spec.bit_wid - 1)) - 1 if spec.bit_wid > 1 else 1
    for i in range(n):
        for j in neighbors[i]:
            if j > i:
                if spec.bit_wid == 1:
                    val = int(rng.choice((-1, 1)))
                else:
                    val = 0
                    while val == 0:
                        val = int(rng.integers(-mag, mag + 1))
                if spec.sparsity > 0 and rng.random() < spec.sparsity:
                    val = 0
                couplings[i][j] = couplings[j][i] = val
    sigma0 = [int(s) for s in rng.choice((-1, 1), size=n)]
    return IsingInstance(
        n=n, side=side, couplings=couplings, neighbors=neighbors,
        sigma0=sigma0, bit_wid=spec.bit_wid,
        norm_bit_wid=int(spec.schedule.get("norm_bit_wid", 2)),
        sweeps=int(spec.schedule.get("sweeps", 16)),
        epsilon=int(spec.schedule.get("epsilon", 0)),
        mode=spec.mode)


def build_ferromagnet(side: int, seed: int = 0) -> IsingInstance:
    """All-plus couplings on the king's graph; ground state is uniform."""
    n = side * side
    rng = np.random.default_rng(seed)
    neighbors = king_neighbors(side)
    couplings = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in neighbors[i]:
            couplings[i][j] = 1
    sigma0 = [int(s) for s in rng.choice((-1, 1), size=n)]
    return IsingInstance(n=n, side=side, couplings=couplings,
                         neighbors=neighbors, sigma0=sigma0, bit_wid=1,
                         norm_bit_wid=2, sweeps=32, epsilon=0, mode="bs_ep")


def stationary_words(inst: IsingInstance) -> int:
    return inst.n + -(-inst.n // 8)


def oracle_field(inst: IsingInstance, sigma: list[int], i: int) -> int:
    return sum(inst.couplings[i][j] * sigma[j] for j in range(inst.n))


def oracle_energy(inst: IsingInstance, sigma: list[int]) -> int:
    total = 0
    for i in range(inst.n):
        for j in range(i + 1, inst.n):
            total += inst.couplings[i][j] * sigma[i] * sigma[j]
    return -total


def oracle(inst: IsingInstance) -> dict:
    """Reference dynamics: same sequential updates in exact arithmetic."""
    sigma = list(inst.sigma0)
    energies = [oracle_energy(inst, sigma)]
    l1_trace = []
    sweeps_run = 0
    for _ in range(inst.sweeps):
        prev = list(sigma)
        for i in range(inst.n):
            h = oracle_field(inst, sigma, i)
            sigma[i] = 1 if h >= 0 else -1
        l1 = sum(abs(s - p) for s, p in zip(sigma, prev))
        sweeps_run += 1
        energies.append(oracle_energy(inst, sigma))
        l1_trace.append(l1)
        if l1 <= inst.epsilon:
            break
    return {"sigma": sigma, "energy_trace": energies, "l1_trace": l1_trace,
            "sweeps_run": sweeps_run}


def _coupling_word(inst: IsingInstance, value: int) -> Word:
    if inst.bit_wid == 1:
        # zero couplings cannot use the spin encoding; widen those words
        return Word.spin(value) if value in (-1, 1) else Word(0)
    return Word(int(value))


def configure(inst: IsingInstance, engine: Engine) -> None:
    engine.set_field("bit_elser", inst.mode)
    engine.set_field("bit_wid", inst.bit_wid)
    dis = "st4,s" if inst.mode.startswith("bs") else "st2,st4,s"
    engine.set_field("dis_stage", dis)
    for i in range(inst.n):
        for b, j in enumerate(inst.neighbors[i]):
            engine.load_mem(b, i, _coupling_word(inst, inst.couplings[i][j]))


def local_field_engine(inst: IsingInstance, engine: Engine,
                       sigma: list[int], i: int):
    """One fused op: H_i into the compare block; returns its RceResult."""
    for b, j in enumerate(inst.neighbors[i]):
        engine.load_reg(b, Word.spin(sigma[j]))
    return engine.fused_op(i, spin=True, compare_ref=0)


def _norm_phase(inst: IsingInstance, engine: Engine, delta: list[int]) -> int:
    """L1 norm of the spin-change vector at the reduced bit width."""
    engine.set_field("bit_wid", inst.norm_bit_wid)
    base = inst.n  # delta vector lives above the coupling rows
    for i, d in enumerate(delta):
        engine.load_mem(i % engine.banks, base + i // engine.banks, Word(int(d)))
    total = 0
    for i in range(inst.n):
        hot = i % engine.banks
        for b in range(engine.banks):
            engine.load_reg(b, Word(1 if b == hot else 0))
        res = engine.fused_op(base + i // engine.banks, spin=False, compare_ref=0)
        total += res.l1_contrib
    engine.set_field("bit_wid", inst.bit_wid)
    return total


def run(inst: IsingInstance, engine: Engine) -> dict:
    configure(inst, engine)
    sigma = list(inst.sigma0)
    energies = [oracle_energy(inst, sigma)]
    l1_trace = []
    sweeps_run = 0
    for _ in range(inst.sweeps):
        prev = list(sigma)
        for i in range(inst.n):
            res = local_field_engine(inst, engine, sigma, i)
            sigma[i] = res.th_out
        delta = [s - p for s, p in zip(sigma, prev)]
        l1 = _norm_phase(inst, engine, delta)
        sweeps_run += 1
        energies.append(oracle_energy(inst, sigma))
        l1_trace.append(l1)
        if l1 <= inst.epsilon:
            break
    return {"sigma": sigma, "energy_trace": energies, "l1_trace": l1_trace,
            "sweeps_run": sweeps_run}


def details(inst: IsingInstance, outputs: dict) -> dict:
    return {"spins": inst.n, "sweeps_run": outputs["sweeps_run"],
            "converged": (outputs["l1_trace"][-1] <= inst.epsilon
                          if outputs["l1_trace"] else False),
            "final_energy": outputs["energy_trace"][-1]}
