"""C source emission from fully lowered (func + emitc) modules.

Every operation becomes one statement; values are named ``v{N}`` (loop
induction variables ``i{N}``) after their SSA number, so emission is
deterministic byte-for-byte. Pointer parameters that are never stored
through are declared ``const``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import (
    F32,
    INDEX,
    PTR_F32,
    Block,
    EmitCOpaqueType,
    EmitCPtrType,
    IRType,
    ModuleIR,
    OperationNode,
    ValueRef,
    walk_ops,
)

VSE32_CALLEE = "__riscv_vse32_v_f32m1"


class EmitError(Exception):
    """The module cannot be rendered as C."""


@dataclass(frozen=True)
class EmitOptions:
    include_header: str = "rvv_compat.h"
    indent: int = 2


@dataclass(frozen=True)
class CSourceUnit:
    includes: tuple[str, ...]
    functions: tuple[str, ...]
    text: str


def _ctype(ty: IRType, *, const: bool = False) -> str:
    if ty == INDEX:
        return "size_t"
    if ty == F32:
        return "float"
    if isinstance(ty, EmitCPtrType):
        return "const float*" if const else "float*"
    if isinstance(ty, EmitCOpaqueType):
        return ty.text
    raise EmitError(f"type {ty.spelling} has no C rendering; run the lowering pipeline first")


def _literal(value: int | float, ty: IRType) -> str:
    if ty == INDEX:
        return str(value)
    return f"{value!r}f"


class _FunctionEmitter:
    def __init__(self, fn: OperationNode, defs: dict[int, OperationNode], options: EmitOptions):
        self.fn = fn
        self.defs = defs
        self.options = options
        self.names: dict[int, str] = {}
        self.const_ptrs: set[int] = set()
        self.fused_assigns: set[int] = set()
        self.lines: list[str] = []

    # -- analysis ----------------------------------------------------------

    def _ptr_root(self, v: ValueRef) -> ValueRef:
        while True:
            src = self.defs.get(v.id)
            if src is not None and src.is_a("emitc", "add"):
                v = src.operands[0]
            else:
                return v

    def _analyze_const_params(self) -> None:
        entry = self.fn.regions[0].blocks[0]
        stored_roots: set[int] = set()
        for op in walk_ops_fn(self.fn):
            if op.is_a("emitc", "call_opaque") and op.attributes.get("callee") == VSE32_CALLEE:
                stored_roots.add(self._ptr_root(op.operands[0]).id)
        for arg in entry.args:
            if isinstance(arg.type, EmitCPtrType) and arg.id not in stored_roots:
                self.const_ptrs.add(arg.id)

    def _name_values(self) -> None:
        entry = self.fn.regions[0].blocks[0]
        for arg in entry.args:
            self.names[arg.id] = f"v{arg.id}"
        for op in walk_ops_fn(self.fn):
            for res in op.results:
                self.names[res.id] = f"v{res.id}"
            if op.is_a("emitc", "for"):
                induction = op.regions[0].blocks[0].args[0]
                self.names[induction.id] = f"i{induction.id}"

    def _is_const_ptr(self, v: ValueRef) -> bool:
        return self._ptr_root(v).id in self.const_ptrs

    # -- rendering -----------------------------------------------------------

    def emit(self) -> str:
        self._name_values()
        self._analyze_const_params()
        entry = self.fn.regions[0].blocks[0]
        if entry.args:
            params = ", ".join(
                f"{_ctype(a.type, const=a.id in self.const_ptrs)} {self.names[a.id]}" for a in entry.args
            )
        else:
            params = "void"
        head = f"void {self.fn.attributes['sym_name']}({params})"
        self._emit_block_body(entry, self.options.indent, top_level=True)
        if not self.lines:
            return head + " { }\n"
        return head + " {\n" + "\n".join(self.lines) + "\n}\n"

    def _emit_block_body(self, block: Block, indent: int, *, top_level: bool = False) -> None:
        pad = " " * indent
        for idx, op in enumerate(block.ops):
            if op.is_a("func", "return"):
                if not (top_level and idx == len(block.ops) - 1):
                    raise EmitError("func.return may only terminate the function body")
                continue
            if op.is_a("emitc", "for"):
                lb, ub, step = (self.names[v.id] for v in op.operands)
                body = op.regions[0].blocks[0]
                ind = self.names[body.args[0].id]
                self.lines.append(f"{pad}for (size_t {ind} = {lb}; {ind} < {ub}; {ind} += {step}) {{")
                self._emit_block_body(body, indent + self.options.indent)
                self.lines.append(f"{pad}}}")
                continue
            stmt = self._statement(op, block, idx)
            if stmt is not None:
                self.lines.append(pad + stmt)

    def _statement(self, op: OperationNode, block: Block, idx: int) -> str | None:
        n = lambda v: self.names[v.id]
        if op.is_a("emitc", "constant"):
            res = op.results[0]
            return f"{_ctype(res.type)} {n(res)} = {_literal(op.attributes['value'], res.type)};"
        if op.is_a("emitc", "variable"):
            res = op.results[0]
            decl = _ctype(res.type)
            init = op.attributes.get("init")
            nxt = block.ops[idx + 1] if idx + 1 < len(block.ops) else None
            if nxt is not None and nxt.is_a("emitc", "assign") and nxt.operands[0].id == res.id:
                self.fused_assigns.add(id(nxt))
                return f"{decl} {n(res)} = {n(nxt.operands[1])};"
            if init is not None:
                return f"{decl} {n(res)} = {_literal(init, res.type)};"
            return f"{decl} {n(res)};"
        if op.is_a("emitc", "assign"):
            if id(op) in self.fused_assigns:
                return None
            return f"{n(op.operands[0])} = {n(op.operands[1])};"
        if op.is_a("emitc", "add"):
            res = op.results[0]
            const = isinstance(res.type, EmitCPtrType) and self._is_const_ptr(res)
            return f"{_ctype(res.type, const=const)} {n(res)} = {n(op.operands[0])} + {n(op.operands[1])};"
        if op.is_a("emitc", "mul"):
            res = op.results[0]
            return f"{_ctype(res.type)} {n(res)} = {n(op.operands[0])} * {n(op.operands[1])};"
        if op.is_a("emitc", "subscript"):
            res = op.results[0]
            return f"{_ctype(res.type)} {n(res)} = {n(op.operands[0])}[{n(op.operands[1])}];"
        if op.is_a("emitc", "call_opaque"):
            call = f"{op.attributes['callee']}({', '.join(n(v) for v in op.operands)})"
            if op.results:
                res = op.results[0]
                return f"{_ctype(res.type)} {n(res)} = {call};"
            return f"{call};"
        raise EmitError(f"operation {op.full_name} has no C rendering; run the lowering pipeline first")


def walk_ops_fn(fn: OperationNode):
    """Pre-order walk of one function's operations."""
    def visit(op: OperationNode):
        for region in op.regions:
            for block in region.blocks:
                for nested in block.ops:
                    yield nested
                    yield from visit(nested)
    yield from visit(fn)


def emit_c(module: ModuleIR, options: EmitOptions = EmitOptions()) -> CSourceUnit:
    """Render a lowered module; raises EmitError on non-emitc operations."""
    defs: dict[int, OperationNode] = {}
    for op in walk_ops(module):
        if op.dialect not in ("func", "emitc"):
            raise EmitError(
                f"module still contains {op.full_name}; run the lowering pipeline first"
            )
        for res in op.results:
            defs[res.id] = op
    functions = tuple(_FunctionEmitter(fn, defs, options).emit() for fn in module.functions)
    includes = (f'"{options.include_header}"',)
    text = "".join(f"#include {h}\n" for h in includes) + "\n" + "\n".join(functions)
    return CSourceUnit(includes, functions, text)


KERNEL_FN_TYPEDEF = (
    "typedef void (*ukernel_fn)(size_t, const float*, const float*, float*, size_t);"
)


def emit_kernel_set(entries, options: EmitOptions = EmitOptions()) -> CSourceUnit:
    """Render a complete kernel family plus its dispatch table.

    ``entries`` pairs each kernel config with its lowered module; the family
    must cover every tile from 1x1 to mr x nr so the table has no holes.
    """
    if not entries:
        raise EmitError("cannot emit an empty kernel set")
    max_mr = max(cfg.mr for cfg, _ in entries)
    max_nr = max(cfg.nr for cfg, _ in entries)
    by_tile = {(cfg.mr, cfg.nr): mod for cfg, mod in entries}
    if len(by_tile) != len(entries):
        raise EmitError("duplicate kernel tile in family")
    missing = [
        (mr, nr)
        for mr in range(1, max_mr + 1)
        for nr in range(1, max_nr + 1)
        if (mr, nr) not in by_tile
    ]
    if missing:
        raise EmitError(f"kernel family is missing tiles: {missing[:4]}...")

    functions: list[str] = []
    for mr in range(1, max_mr + 1):
        for nr in range(1, max_nr + 1):
            unit = emit_c(by_tile[(mr, nr)], options)
            functions.extend(unit.functions)

    rows = []
    for mr in range(1, max_mr + 1):
        row = ", ".join(f"ukernel_{mr}x{nr}_f32" for nr in range(1, max_nr + 1))
        rows.append(f"  {{{row}}},")
    table = (
        f"{KERNEL_FN_TYPEDEF}\n\n"
        f"const ukernel_fn ukernels[{max_mr}][{max_nr}] = {{\n" + "\n".join(rows) + "\n};\n"
    )
    includes = (f'"{options.include_header}"',)
    text = "".join(f"#include {h}\n" for h in includes) + "\n" + "\n".join(list(functions) + [table])
    return CSourceUnit(includes, tuple(functions), text)
