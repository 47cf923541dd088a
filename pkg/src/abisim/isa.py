"""Mini instruction set, text assembler, disassembler and executor.

Grammar: one instruction per line, ``OPCODE field=value ...``.  Values are
decimal, 0x/0b literals, enum words (``relu``, ``l1``, ``bs_ep``, stage
lists like ``st2,st4,s``), or ``@label`` references.  ``#`` starts a
comment; a bare ``name:`` line defines a label bound to the next
instruction index.  Programs must end with HALT.

Opcodes::

    PRSET  field=value          program one configuration register
    LDM    bank= addr= val= [width=]   write a word at the current level
    LDR    bank= val= [width=]         load one operand-register bank
    LDR2   val= [width=]               load REG'' (St4 multiplier / scaler divisor)
    VMACRT addr= [acc=] [spin=] [cmp=] [th=]   fused load-MAC-reduce-threshold
    VRED   [cmp=] [th=]                reduce-only: finalize the accumulator
    STOUT  [bank= addr=]               emit last result (optionally store it)
    HALT

``th`` overrides the thresholding mode for one instruction
(relu/cmp/sm/off); ``acc=1`` accumulates without finalizing; ``spin=1``
decodes width-1 words as spins.  Loads and PRSET model configuration
scan-in: they cost no cycles but their write events are charged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import Engine, Word
from .errors import (
    AssemblyError,
    BadOperand,
    ExecutionError,
    UnknownOpcode,
    UnterminatedProgram,
)

_INT_FIELDS = {"bank", "addr", "val", "width", "acc", "spin", "cmp"}
_ENUM_FIELDS = {"th": ("relu", "cmp", "sm", "off")}

# field name -> required? per opcode
OPCODES: dict[str, dict[str, bool]] = {
    "PRSET": {},  # validated separately: exactly one ProgRegs field
    "LDM": {"bank": True, "addr": True, "val": True, "width": False},
    "LDR": {"bank": True, "val": True, "width": False},
    "LDR2": {"val": True, "width": False},
    "VMACRT": {"addr": True, "acc": False, "spin": False, "cmp": False, "th": False},
    "VRED": {"cmp": False, "th": False},
    "STOUT": {"bank": False, "addr": False},
    "HALT": {},
}

_PRSET_FIELDS = ("sp_act", "th_act", "sm_act", "nrf_m", "bit_elser",
                 "bit_wid", "dis_stage", "sp_window")


@dataclass(frozen=True)
class Instruction:
    opcode: str
    operands: dict
    line: int

    def format(self) -> str:
        parts = [self.opcode]
        for k in sorted(self.operands):
            parts.append(f"{k}={self.operands[k]}")
        return " ".join(parts)


@dataclass
class Program:
    instructions: list[Instruction]
    symbols: dict[str, int] = field(default_factory=dict)
    source_lines: list[int] = field(default_factory=list)


def _parse_value(opcode: str, key: str, text: str, symbols: dict[str, int],
                 line: int):
    if text.startswith("@"):
        name = text[1:]
        if name not in symbols:
            raise BadOperand(f"unknown label {name!r}", line)
        return symbols[name]
    if opcode == "PRSET":
        # PRSET values keep their surface form; the engine parses them.
        if key in ("bit_wid", "sp_window", "sp_act", "th_act", "sm_act"):
            try:
                return int(text, 0)
            except ValueError:
                raise BadOperand(f"{key} needs an integer, got {text!r}", line) from None
        return text
    if key in _ENUM_FIELDS:
        if text not in _ENUM_FIELDS[key]:
            raise BadOperand(
                f"{key} must be one of {'/'.join(_ENUM_FIELDS[key])}, got {text!r}",
                line)
        return text
    if key in _INT_FIELDS:
        try:
            return int(text, 0)
        except ValueError:
            raise BadOperand(f"{key} needs an integer, got {text!r}", line) from None
    raise BadOperand(f"unknown operand {key!r} for {opcode}", line)


def assemble(source: str) -> Program:
    """Assemble text into a Program; raises on the first error with its line."""
    instructions: list[Instruction] = []
    symbols: dict[str, int] = {}
    lines: list[int] = []
    for lineno, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if text.endswith(":") and " " not in text:
            label = text[:-1]
            if not label.isidentifier():
                raise BadOperand(f"bad label {label!r}", lineno)
            symbols[label] = len(instructions)
            continue
        parts = text.split()
        opcode = parts[0].upper()
        if opcode not in OPCODES:
            raise UnknownOpcode(f"unknown opcode {parts[0]!r}", lineno)
        spec = OPCODES[opcode]
        operands: dict = {}
        for token in parts[1:]:
            if "=" not in token:
                raise BadOperand(f"operands are field=value, got {token!r}", lineno)
            key, value = token.split("=", 1)
            if opcode == "PRSET":
                if key not in _PRSET_FIELDS:
                    raise BadOperand(f"unknown configuration register {key!r}", lineno)
            elif key not in spec:
                raise BadOperand(f"unknown operand {key!r} for {opcode}", lineno)
            if key in operands:
                raise BadOperand(f"duplicate operand {key!r}", lineno)
            operands[key] = _parse_value(opcode, key, value, symbols, lineno)
        if opcode == "PRSET":
            if len(operands) != 1:
                raise BadOperand("PRSET takes exactly one field=value", lineno)
        else:
            missing = [k for k, req in spec.items() if req and k not in operands]
            if missing:
                raise BadOperand(f"{opcode} missing operands {missing}", lineno)
        if opcode == "STOUT" and ("bank" in operands) != ("addr" in operands):
            raise BadOperand("STOUT takes both bank and addr, or neither", lineno)
        instructions.append(Instruction(opcode, operands, lineno))
        lines.append(lineno)
    if not instructions or instructions[-1].opcode != "HALT":
        raise UnterminatedProgram("program must end with HALT",
                                  lines[-1] if lines else None)
    return Program(instructions, symbols, lines)


def disassemble(program: Program) -> str:
    """Canonical text form; assembling it again yields the same program."""
    index_to_labels: dict[int, list[str]] = {}
    for name, idx in program.symbols.items():
        index_to_labels.setdefault(idx, []).append(name)
    out = []
    for i, inst in enumerate(program.instructions):
        for name in sorted(index_to_labels.get(i, [])):
            out.append(f"{name}:")
        out.append(inst.format())
    for name in sorted(index_to_labels.get(len(program.instructions), [])):
        out.append(f"{name}:")
    return "\n".join(out) + "\n"


def assemble_file(path) -> Program:
    with open(path, "r", encoding="utf-8") as fh:
        return assemble(fh.read())


def run(program: Program, engine: Engine | None = None) -> Engine:
    """Execute a program sequentially on an engine (a fresh one by default).

    Runtime failures raise ExecutionError carrying the instruction index
    and an engine snapshot.
    """
    engine = engine if engine is not None else Engine()
    for index, inst in enumerate(program.instructions):
        op = inst.operands
        try:
            if inst.opcode == "HALT":
                break
            elif inst.opcode == "PRSET":
                ((name, value),) = op.items()
                engine.set_field(name, value)
            elif inst.opcode == "LDM":
                width = op.get("width", engine.regs.bit_wid)
                engine.load_mem(op["bank"], op["addr"], Word(op["val"], width))
            elif inst.opcode == "LDR":
                width = op.get("width", engine.regs.bit_wid)
                engine.load_reg(op["bank"], Word(op["val"], width))
            elif inst.opcode == "LDR2":
                width = op.get("width", engine.regs.bit_wid)
                engine.load_reg2(Word(op["val"], width))
            elif inst.opcode == "VMACRT":
                engine.fused_op(op["addr"], acc=bool(op.get("acc", 0)),
                                spin=bool(op.get("spin", 0)),
                                compare_ref=op.get("cmp", 0),
                                th_override=op.get("th"))
            elif inst.opcode == "VRED":
                engine.reduce_op(compare_ref=op.get("cmp", 0),
                                 th_override=op.get("th"))
            elif inst.opcode == "STOUT":
                if engine.result is None:
                    raise ExecutionError("STOUT before any result", index,
                                         engine.snapshot())
                if "bank" in op:
                    engine.load_mem(op["bank"], op["addr"],
                                    Word(engine.result))
                engine.log.outputs.append(engine.result)
        except ExecutionError:
            raise
        except Exception as exc:
            raise ExecutionError(str(exc), index, engine.snapshot()) from exc
    return engine
