"""Lightweight softmax: division replaced by a difference of leading-one
bit positions, output decoded as a power of two.

The block works on positive fixed-point values representing 1+x.  For an
input vector the running sum is formed, the leading-one position of each
element and of the sum are found, and each output probability is
2**(position_i - position_sum).  Because 2**floor(log2 v) lies in
(v/2, v], every output is within a factor of two of the exact ratio
raw_i / sum(raw), and when every value and the sum are powers of two the
result is exact.

Workload scores enter through :func:`normalize_scores`, which subtracts
the row maximum and divides by the power-of-two-rounded range, pinning
the winning score at x = 1 so its leading-one position sits one octave
above the rest.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .errors import AccumulatorOverflowError, EmptyValueError, RangeError

INT32_MAX = (1 << 31) - 1


@dataclass(frozen=True)
class LwsmFixed:
    """Positive fixed-point input value with its fractional scale."""

    raw: int
    frac_bits: int = 8

    def __post_init__(self):
        if not 1 <= self.frac_bits <= 14:
            raise RangeError(f"frac_bits {self.frac_bits} not in [1, 14]")
        if self.raw < 1:
            raise RangeError(f"lwsm input must be positive, got {self.raw}")


def find_first_one(raw: int) -> int:
    """Position of the most significant set bit, i.e. floor(log2(raw))."""
    if raw <= 0:
        raise EmptyValueError(f"no set bit in {raw}")
    return raw.bit_length() - 1


@dataclass(frozen=True)
class LwsmResult:
    shifts: tuple[int, ...]
    probs: tuple[float, ...]
    argmax: int
    positions: tuple[int, ...]
    sum_position: int
    upd_cnt: int

    def prob_fixed(self, index: int, frac_bits: int = 8) -> int:
        """Probability quantized to ``frac_bits`` fractional bits."""
        shift = self.shifts[index]
        if shift < -frac_bits:
            return 0
        return 1 << (frac_bits + shift)

    def probs_fixed(self, frac_bits: int = 8) -> list[int]:
        return [self.prob_fixed(i, frac_bits) for i in range(len(self.shifts))]


def lwsm(values: Sequence[int | LwsmFixed], frac_bits: int = 8,
         log=None) -> LwsmResult:
    """Approximate softmax over positive fixed-point values.

    Ties in leading-one position resolve to the lowest index, for the
    argmax and throughout.  Logs one summation, one find-first and one
    decode event per element (plus the sum's find-first) when ``log`` is
    given.
    """
    raws = [v.raw if isinstance(v, LwsmFixed) else int(v) for v in values]
    if not raws:
        raise EmptyValueError("empty input vector")
    positions = [find_first_one(v) for v in raws]
    upd_cnt = sum(raws)
    if upd_cnt > INT32_MAX:
        raise AccumulatorOverflowError(f"summation overflows 32 bits: {upd_cnt}")
    sum_position = find_first_one(upd_cnt)
    shifts = tuple(p - sum_position for p in positions)
    probs = tuple(2.0 ** s for s in shifts)
    argmax = max(range(len(shifts)), key=lambda i: (shifts[i], -i))
    if log is not None:
        log.add("lwsm_op", 3 * len(raws) + 1)
    return LwsmResult(shifts=shifts, probs=probs, argmax=argmax,
                      positions=tuple(positions), sum_position=sum_position,
                      upd_cnt=upd_cnt)


def normalize_scores(scores: Sequence[int], frac_bits: int = 8) -> list[int]:
    """Map integer scores onto the 1+x fixed-point domain, x in [0, 1].

    The row maximum is subtracted and the remainder divided by the
    power-of-two rounding of the score range, so the maximum lands exactly
    on raw = 2**(frac_bits+1) and everything else in [2**frac_bits,
    2**(frac_bits+1)).  Division truncates, so scores very close to the
    maximum may collide with it; that quantization is the only source of
    argmax disagreement with the exact ratio.
    """
    if not scores:
        raise EmptyValueError("empty score vector")
    vals = [int(s) for s in scores]
    mx = max(vals)
    rng = mx - min(vals)
    r = (rng - 1).bit_length() if rng > 0 else 0  # 2**r >= rng
    top = 1 << (frac_bits + 1)
    return [top - (((mx - v) << frac_bits) >> r) for v in vals]


def _exact_ratio(raws: Sequence[int]) -> list[float]:
    total = sum(raws)
    return [v / total for v in raws]


def lwsm_error_sweep(n: int, trials: int, seed: int, frac_bits: int = 8) -> dict:
    """Accuracy statistics of the position-difference softmax.

    Each trial draws an integer score vector (log-spread scores; one trial
    in ten is a two-level vector with a single dominant score), runs it
    through the normalization and the approximate softmax, and compares
    element-wise against the exact ratio over the same 1+x values.
    Deterministic for a given seed.
    """
    if n < 2:
        raise RangeError(f"sweep needs n >= 2, got {n}")
    rng = random.Random(seed)
    agree = 0
    octave_total = 0
    octave_agree = 0
    abs_err_sum = 0.0
    abs_err_count = 0
    min_ratio = float("inf")
    max_ratio = 0.0
    hist = {"(0.5,0.75]": 0, "(0.75,1)": 0, "1": 0, "(1,1.5]": 0, "(1.5,2)": 0}
    for _ in range(trials):
        if rng.random() < 0.1:
            base = rng.randrange(0, 4096)
            gap = 1 << rng.randrange(4, 12)
            scores = [base] * n
            scores[rng.randrange(n)] = base + gap
        else:
            scores = [int(2 ** (rng.random() * 13.0)) - 1 for _ in range(n)]
        raws = normalize_scores(scores, frac_bits)
        res = lwsm(raws, frac_bits)
        exact = _exact_ratio(raws)
        exact_argmax = max(range(n), key=lambda i: (raws[i], -i))
        if res.argmax == exact_argmax:
            agree += 1
        second = sorted(raws)[-2]
        if max(raws) >= 2 * second:
            octave_total += 1
            if res.argmax == exact_argmax:
                octave_agree += 1
        for p, e in zip(res.probs, exact):
            ratio = p / e
            min_ratio = min(min_ratio, ratio)
            max_ratio = max(max_ratio, ratio)
            abs_err_sum += abs(p - e)
            abs_err_count += 1
            if ratio == 1.0:
                hist["1"] += 1
            elif ratio <= 0.75:
                hist["(0.5,0.75]"] += 1
            elif ratio < 1.0:
                hist["(0.75,1)"] += 1
            elif ratio <= 1.5:
                hist["(1,1.5]"] += 1
            else:
                hist["(1.5,2)"] += 1
    return {
        "n": n,
        "trials": trials,
        "seed": seed,
        "frac_bits": frac_bits,
        "argmax_agreement": agree / trials if trials else 1.0,
        "mean_abs_err": abs_err_sum / abs_err_count if abs_err_count else 0.0,
        "max_ratio": max_ratio,
        "min_ratio": min_ratio,
        "octave_separated": {
            "count": octave_total,
            "agreement": (octave_agree / octave_total) if octave_total else 1.0,
        },
        "ratio_histogram": hist,
    }
