"""Convolution layer mapped weight-stationary onto the engine.

Kernel taps live in memory (bank = tap index mod B), the activation patch
of each output pixel streams through the operand registers.  A 3x3 kernel
needs two fused ops per pixel: eight taps in the first, the ninth in a
residual op, finalized by a reduce with optional ReLU.  The optional label
stage runs the lightweight softmax over the flattened output map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import Engine, Word
from ..lwsm import lwsm, normalize_scores
from .common import WorkloadSpec


@dataclass
class ConvInstance:
    image: list[list[int]]
    kernel: list[list[int]]
    stride: int
    relu: bool
    label: bool
    bit_wid: int
    mode: str


def build(spec: WorkloadSpec) -> ConvInstance:
    rng = np.random.default_rng(spec.seed)
    h = int(spec.dims["height"])
    w = int(spec.dims["width"])
    k = int(spec.dims["kernel"])
    stride = int(spec.dims.get("stride", 1))
    mag = max(1, (1 << (spec.bit_wid - 1)) - 1)
    image = rng.integers(-mag, mag + 1, size=(h, w))
    if spec.sparsity > 0:
        image[rng.random(size=(h, w)) < spec.sparsity] = 0
    kernel = rng.integers(-mag, mag + 1, size=(k, k))
    return ConvInstance(image=image.tolist(), kernel=kernel.tolist(),
                        stride=stride,
                        relu=bool(spec.schedule.get("relu", 1)),
                        label=bool(spec.schedule.get("label", 0)),
                        bit_wid=spec.bit_wid, mode=spec.mode)


def stationary_words(inst: ConvInstance) -> int:
    k2 = len(inst.kernel) ** 2
    return -(-k2 // 8)


def _out_shape(inst: ConvInstance) -> tuple[int, int]:
    k = len(inst.kernel)
    oh = (len(inst.image) - k) // inst.stride + 1
    ow = (len(inst.image[0]) - k) // inst.stride + 1
    return oh, ow


def oracle(inst: ConvInstance) -> dict:
    """Direct nested-loop convolution, the engine-independent reference."""
    k = len(inst.kernel)
    oh, ow = _out_shape(inst)
    pre = [[0] * ow for _ in range(oh)]
    for oy in range(oh):
        for ox in range(ow):
            total = 0
            for ky in range(k):
                for kx in range(k):
                    total += (inst.image[oy * inst.stride + ky][ox * inst.stride + kx]
                              * inst.kernel[ky][kx])
            pre[oy][ox] = total
    out = [[max(0, v) for v in row] for row in pre] if inst.relu else [r[:] for r in pre]
    label = None
    if inst.label:
        flat = [v for row in out for v in row]
        label = lwsm(normalize_scores(flat)).argmax
    return {"pre": pre, "map": out, "label": label}


def run(inst: ConvInstance, engine: Engine) -> dict:
    k = len(inst.kernel)
    taps = [inst.kernel[t // k][t % k] for t in range(k * k)]
    tiles = -(-len(taps) // engine.banks)
    engine.set_field("bit_elser", inst.mode)
    engine.set_field("bit_wid", inst.bit_wid)
    engine.set_field("th_act", 1 if inst.relu else 0)
    dis = "st2,st4,s" if inst.mode.startswith("bp") else "st4,s"
    engine.set_field("dis_stage", dis if inst.relu else dis + ",th")
    for t, w in enumerate(taps):
        engine.load_mem(t % engine.banks, t // engine.banks, Word(int(w)))

    oh, ow = _out_shape(inst)
    pre = [[0] * ow for _ in range(oh)]
    out = [[0] * ow for _ in range(oh)]
    for oy in range(oh):
        for ox in range(ow):
            patch = [inst.image[oy * inst.stride + t // k][ox * inst.stride + t % k]
                     for t in range(k * k)]
            for g in range(tiles):
                for b in range(engine.banks):
                    t = g * engine.banks + b
                    act = patch[t] if t < len(patch) else 0
                    engine.load_reg(b, Word(int(act)))
                engine.fused_op(g, acc=True)
            res = engine.reduce_op(th_override="relu" if inst.relu else "off")
            pre[oy][ox] = res.scaled
            out[oy][ox] = res.th_out
    label = None
    if inst.label:
        engine.push_scores([v for row in out for v in row])
        label = engine.apply_lwsm().argmax
    return {"pre": pre, "map": out, "label": label}


def details(inst: ConvInstance, outputs: dict) -> dict:
    return {"out_shape": list(_out_shape(inst)), "relu": inst.relu,
            "label": outputs["label"]}
