"""Core SSA intermediate representation.

Values are immutable ``(id, type)`` handles; operations, blocks and regions
are plain mutable containers assembled by builders and rewritten by passes.
The structural verifier reports malformed modules as a list of diagnostics
instead of raising, and the printer produces a deterministic textual form
consumed by golden tests and the CLI.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterator, Union


# ---------------------------------------------------------------------------
# Types


class IRType:
    """Base class for value types. Concrete types are frozen and hashable."""

    @property
    def spelling(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.spelling


@dataclass(frozen=True)
class F32Type(IRType):
    @property
    def spelling(self) -> str:
        return "f32"


@dataclass(frozen=True)
class IndexType(IRType):
    @property
    def spelling(self) -> str:
        return "index"


@dataclass(frozen=True)
class MemRefF32Type(IRType):
    """Dynamically sized rank-1 buffer of f32 (a pre-lowering pointer stand-in)."""

    @property
    def spelling(self) -> str:
        return "memref<-1xf32>"


@dataclass(frozen=True)
class RVVVecF32M1Type(IRType):
    """One vector register of f32 lanes at LMUL=1."""

    @property
    def spelling(self) -> str:
        return "!rvv.vfloat32m1"


@dataclass(frozen=True)
class EmitCPtrType(IRType):
    elem: IRType

    def __post_init__(self) -> None:
        if not isinstance(self.elem, F32Type):
            raise ValueError("only f32 element pointers are supported")

    @property
    def spelling(self) -> str:
        return f"!emitc.ptr<{self.elem.spelling}>"


@dataclass(frozen=True)
class EmitCOpaqueType(IRType):
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("opaque type text must be non-empty")

    @property
    def spelling(self) -> str:
        return f'!emitc.opaque<"{self.text}">'


F32 = F32Type()
INDEX = IndexType()
MEMREF_F32 = MemRefF32Type()
RVV_VEC_F32M1 = RVVVecF32M1Type()
PTR_F32 = EmitCPtrType(F32)
VREG_OPAQUE = EmitCOpaqueType("vfloat32m1_t")

AttrValue = Union[int, float, str, IRType]


# ---------------------------------------------------------------------------
# IR containers


@dataclass(frozen=True)
class ValueRef:
    """An SSA value handle. Ids are assigned at construction and never reused."""

    id: int
    type: IRType


@dataclass
class Block:
    args: list[ValueRef] = field(default_factory=list)
    ops: list["OperationNode"] = field(default_factory=list)


@dataclass
class Region:
    blocks: list[Block] = field(default_factory=list)


@dataclass
class OperationNode:
    dialect: str
    name: str
    operands: list[ValueRef] = field(default_factory=list)
    results: list[ValueRef] = field(default_factory=list)
    attributes: dict[str, AttrValue] = field(default_factory=dict)
    regions: list[Region] = field(default_factory=list)

    @property
    def full_name(self) -> str:
        return f"{self.dialect}.{self.name}"

    def is_a(self, dialect: str, name: str) -> bool:
        return self.dialect == dialect and self.name == name


@dataclass
class ModuleIR:
    """Top-level container: an ordered list of functions plus the value table."""

    functions: list[OperationNode] = field(default_factory=list)
    values: dict[int, ValueRef] = field(default_factory=dict)
    next_id: int = 0

    def new_value(self, ty: IRType) -> ValueRef:
        v = ValueRef(self.next_id, ty)
        self.next_id += 1
        self.values[v.id] = v
        return v

    def retype_value(self, old: ValueRef, new_type: IRType) -> ValueRef:
        """Re-type an existing value in place, keeping its number."""
        new = ValueRef(old.id, new_type)
        self.values[old.id] = new
        return new


def clone_module(module: ModuleIR) -> ModuleIR:
    return copy.deepcopy(module)


# ---------------------------------------------------------------------------
# Walking helpers


def walk_ops(module: ModuleIR) -> Iterator[OperationNode]:
    """Yield every operation in the module in pre-order."""
    for fn in module.functions:
        yield fn
        yield from _walk_nested(fn)


def _walk_nested(op: OperationNode) -> Iterator[OperationNode]:
    for region in op.regions:
        for block in region.blocks:
            for nested in block.ops:
                yield nested
                yield from _walk_nested(nested)


def substitute_operands(module: ModuleIR, mapping: dict[ValueRef, ValueRef]) -> None:
    """Replace operand uses across the whole module (definitions untouched)."""
    if not mapping:
        return
    for op in walk_ops(module):
        for i, v in enumerate(op.operands):
            repl = mapping.get(v)
            if repl is not None:
                op.operands[i] = repl


def dialect_census(module: ModuleIR) -> dict[str, int]:
    census: dict[str, int] = {}
    for op in walk_ops(module):
        census[op.dialect] = census.get(op.dialect, 0) + 1
    return census


def function_entry(fn: OperationNode) -> Block:
    return fn.regions[0].blocks[0]


def function_type_spelling(params: list[ValueRef]) -> str:
    args = ", ".join(v.type.spelling for v in params)
    return f"({args}) -> ()"


# ---------------------------------------------------------------------------
# Verifier


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def verify(module: ModuleIR) -> list[Diagnostic]:
    """Structural checking. Returns diagnostics; never raises on bad IR."""
    from .dialects import get_registry

    registry = get_registry()
    diags: list[Diagnostic] = []
    defined: dict[int, str] = {}
    def_ops: dict[int, OperationNode] = {}

    def define(v: ValueRef, path: str) -> None:
        if v.id in defined:
            diags.append(Diagnostic(path, f"value %{v.id} defined twice (first at {defined[v.id]})"))
        else:
            defined[v.id] = path

    def check_block(block: Block, scope: list[set[int]], path: str, owner: OperationNode | None) -> None:
        local: set[int] = set()
        for arg in block.args:
            define(arg, path)
            local.add(arg.id)
        for idx, op in enumerate(block.ops):
            op_path = f"{path}/ops[{idx}]({op.full_name})"
            if op.is_a("scf", "yield") and idx != len(block.ops) - 1:
                diags.append(Diagnostic(op_path, "scf.yield must be the final operation of its block"))
            for oi, operand in enumerate(op.operands):
                if not any(operand.id in s for s in scope) and operand.id not in local:
                    diags.append(Diagnostic(op_path, f"operand {oi} (%{operand.id}) used before definition"))
                elif module.values.get(operand.id) is not None and module.values[operand.id].type != operand.type:
                    diags.append(
                        Diagnostic(
                            op_path,
                            f"operand {oi} (%{operand.id}) has stale type "
                            f"{operand.type.spelling} (table says {module.values[operand.id].type.spelling})",
                        )
                    )
            for res in op.results:
                define(res, op_path)
                local.add(res.id)
                def_ops[res.id] = op
            check_op(op, op_path)
            for region in op.regions:
                if len(region.blocks) != 1:
                    diags.append(Diagnostic(op_path, f"region must contain exactly 1 block, has {len(region.blocks)}"))
                for rb in region.blocks:
                    check_block(rb, scope + [local], op_path, op)

    def check_op(op: OperationNode, path: str) -> None:
        sig = registry.lookup(op.dialect, op.name)
        if sig is None:
            diags.append(Diagnostic(path, f"unregistered operation {op.full_name}"))
            return
        if sig.num_operands is not None and len(op.operands) != sig.num_operands:
            diags.append(Diagnostic(path, f"expected {sig.num_operands} operands, got {len(op.operands)}"))
            return
        if sig.num_results is not None and len(op.results) != sig.num_results:
            diags.append(Diagnostic(path, f"expected {sig.num_results} results, got {len(op.results)}"))
            return
        if len(op.regions) != sig.num_regions:
            diags.append(Diagnostic(path, f"expected {sig.num_regions} regions, got {len(op.regions)}"))
            return
        for key, (kinds, required) in sig.attrs.items():
            if key not in op.attributes:
                if required:
                    diags.append(Diagnostic(path, f"missing attribute '{key}'"))
            elif not isinstance(op.attributes[key], kinds):
                diags.append(Diagnostic(path, f"attribute '{key}' has wrong kind"))
        for key in op.attributes:
            if key not in sig.attrs:
                diags.append(Diagnostic(path, f"unknown attribute '{key}'"))
        if sig.operand_patterns is not None:
            for i, (pat, operand) in enumerate(zip(sig.operand_patterns, op.operands)):
                if not _pattern_matches(pat, operand.type):
                    diags.append(
                        Diagnostic(path, f"operand {i} has type {operand.type.spelling}, expected {_pattern_name(pat)}")
                    )
        if sig.result_patterns is not None:
            for i, (pat, res) in enumerate(zip(sig.result_patterns, op.results)):
                if not _pattern_matches(pat, res.type):
                    diags.append(
                        Diagnostic(path, f"result {i} has type {res.type.spelling}, expected {_pattern_name(pat)}")
                    )
        if sig.verify_extra is not None:
            for msg in sig.verify_extra(op, def_ops):
                diags.append(Diagnostic(path, msg))

    for fi, fn in enumerate(module.functions):
        path = f"@{fn.attributes.get('sym_name', f'functions[{fi}]')}"
        if not fn.is_a("func", "func"):
            diags.append(Diagnostic(path, f"top-level operation must be func.func, got {fn.full_name}"))
            continue
        check_op(fn, path)
        if len(fn.regions) == 1 and len(fn.regions[0].blocks) == 1:
            body = fn.regions[0].blocks[0]
            check_block(body, [], path, fn)
            if not body.ops or not body.ops[-1].is_a("func", "return"):
                diags.append(Diagnostic(path, "function body must end with func.return"))
        else:
            diags.append(Diagnostic(path, "func.func must have exactly one region with one block"))
    return diags


def _pattern_matches(pat, ty: IRType) -> bool:
    if pat is ANY_TYPE:
        return True
    if isinstance(pat, tuple):
        return ty in pat
    return ty == pat


def _pattern_name(pat) -> str:
    if pat is ANY_TYPE:
        return "any"
    if isinstance(pat, tuple):
        return " or ".join(t.spelling for t in pat)
    return pat.spelling


ANY_TYPE = object()


# ---------------------------------------------------------------------------
# Printer


def print_ir(module: ModuleIR) -> str:
    if not module.functions:
        return "module { }\n"
    lines = ["module {"]
    for fn in module.functions:
        _print_func(fn, lines, indent=2)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _print_func(fn: OperationNode, lines: list[str], indent: int) -> None:
    pad = " " * indent
    entry = fn.regions[0].blocks[0]
    args = ", ".join(f"%{v.id}: {v.type.spelling}" for v in entry.args)
    lines.append(f"{pad}func.func @{fn.attributes.get('sym_name', '?')}({args}) {{")
    for op in entry.ops:
        _print_op(op, lines, indent + 2)
    lines.append(f"{pad}}}")


def _print_op(op: OperationNode, lines: list[str], indent: int) -> None:
    pad = " " * indent
    head = ""
    if op.results:
        head = ", ".join(f"%{v.id}" for v in op.results) + " = "
    operands = ", ".join(f"%{v.id}" for v in op.operands)
    attrs = ""
    if op.attributes:
        parts = [f"{k} = {_print_attr(v)}" for k, v in sorted(op.attributes.items())]
        attrs = " {" + ", ".join(parts) + "}"
    in_types = ", ".join(v.type.spelling for v in op.operands)
    if len(op.results) == 1:
        out_types = op.results[0].type.spelling
    else:
        out_types = "(" + ", ".join(v.type.spelling for v in op.results) + ")"
    line = f"{pad}{head}{op.full_name}({operands}){attrs} : ({in_types}) -> {out_types}"
    if not op.regions:
        lines.append(line)
        return
    lines.append(line + " {")
    for region in op.regions:
        for block in region.blocks:
            if block.args:
                bargs = ", ".join(f"%{v.id}: {v.type.spelling}" for v in block.args)
                lines.append(f"{pad}  ^({bargs}):")
            for nested in block.ops:
                _print_op(nested, lines, indent + 2)
    lines.append(f"{pad}}}")


def _print_attr(v: AttrValue) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return f'"{v}"'
    return v.spelling
