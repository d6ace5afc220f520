"""Lowering passes and the fixed pipeline.

Order is fixed: buffer parameters become pointers, index arithmetic moves to
the emitc namespace, counted loops with iter-args become mutable locals plus
an imperative loop, and finally the vector ops become opaque intrinsic calls.
Each pass leaves a verifiable module; re-running any pass on its own output
performs zero rewrites.
"""

from __future__ import annotations

from .dialects import OpBuilder
from .ir import (
    INDEX,
    MEMREF_F32,
    PTR_F32,
    RVV_VEC_F32M1,
    VREG_OPAQUE,
    Diagnostic,
    ModuleIR,
    OperationNode,
    ValueRef,
    clone_module,
    function_entry,
    function_type_spelling,
    substitute_operands,
    verify,
    walk_ops,
)
from .rewriting import PassResult, PatternError, Replacement, RewritePattern, apply_patterns

VLE32_INTRINSIC = "__riscv_vle32_v_f32m1"
VSE32_INTRINSIC = "__riscv_vse32_v_f32m1"
VFMACC_INTRINSIC = "__riscv_vfmacc_vf_f32m1"


# ---------------------------------------------------------------------------
# memref -> emitc (parameter retyping)


def pass_memref_to_emitc(module: ModuleIR) -> PassResult:
    """Retype buffer-typed function parameters to element pointers."""
    work = clone_module(module)
    mapping: dict[ValueRef, ValueRef] = {}
    rewrites = 0
    for fn in work.functions:
        entry = function_entry(fn)
        for i, arg in enumerate(entry.args):
            if arg.type == MEMREF_F32:
                new = work.retype_value(arg, PTR_F32)
                entry.args[i] = new
                mapping[arg] = new
                rewrites += 1
        fn.attributes["function_type"] = function_type_spelling(entry.args)
    substitute_operands(work, mapping)
    diags = verify(work)
    for op in walk_ops(work):
        for res in op.results:
            if res.type == MEMREF_F32:
                diags.append(Diagnostic(op.full_name, f"buffer-typed value %{res.id} produced by a non-parameter"))
    return PassResult(work, rewrites, diags)


# ---------------------------------------------------------------------------
# arith -> emitc (1:1 renames)


class _ArithToEmitC(RewritePattern):
    _renames = {"constant": "constant", "addi": "add", "muli": "mul"}

    def match(self, op: OperationNode) -> bool:
        return op.dialect == "arith" and op.name in self._renames

    def rewrite(self, op: OperationNode, module: ModuleIR) -> Replacement:
        ops: list[OperationNode] = []
        b = OpBuilder(module, ops)
        old = op.results[0]
        if op.name == "constant":
            new = b.emitc_const(op.attributes["value"], old.type)
        elif op.name == "addi":
            new = b.emitc_add(op.operands[0], op.operands[1], INDEX)
        else:
            new = b.emitc_mul(op.operands[0], op.operands[1])
        return Replacement(ops, {old: new})


def pass_arith_to_emitc(module: ModuleIR) -> PassResult:
    return apply_patterns(module, [_ArithToEmitC()])


# ---------------------------------------------------------------------------
# scf -> emitc (iter-args become mutable locals)


def _substitute_in_ops(ops: list[OperationNode], mapping: dict[ValueRef, ValueRef]) -> None:
    for op in ops:
        for i, v in enumerate(op.operands):
            repl = mapping.get(v)
            if repl is not None:
                op.operands[i] = repl
        for region in op.regions:
            for block in region.blocks:
                _substitute_in_ops(block.ops, mapping)


class _ScfForToEmitC(RewritePattern):
    """Lower a counted loop: one mutable local per iter-arg, assigned before
    the loop and at what used to be the yield; the loop itself becomes
    imperative. Vector-typed state takes the opaque C spelling."""

    def match(self, op: OperationNode) -> bool:
        return op.is_a("scf", "for")

    def rewrite(self, op: OperationNode, module: ModuleIR) -> Replacement:
        lb, ub, step = op.operands[:3]
        inits = op.operands[3:]
        body = op.regions[0].blocks[0]
        if not body.ops or not body.ops[-1].is_a("scf", "yield"):
            raise PatternError("scf.for body must terminate with scf.yield")
        induction, iter_args = body.args[0], body.args[1:]

        ops: list[OperationNode] = []
        b = OpBuilder(module, ops)
        locals_: list[ValueRef] = []
        for init, arg in zip(inits, iter_args):
            ty = VREG_OPAQUE if arg.type == RVV_VEC_F32M1 else arg.type
            var = b.emitc_variable(ty)
            b.emitc_assign(var, init)
            locals_.append(var)

        inner_map = dict(zip(iter_args, locals_))
        body_ops = body.ops[:-1]
        yield_op = body.ops[-1]
        _substitute_in_ops(body_ops + [yield_op], inner_map)

        tail: list[OperationNode] = []
        tb = OpBuilder(module, tail)
        for var, val in zip(locals_, yield_op.operands):
            tb.emitc_assign(var, val)

        b.emitc_for(lb, ub, step, induction, body_ops + tail)
        return Replacement(ops, dict(zip(op.results, locals_)))


def pass_scf_to_emitc(module: ModuleIR) -> PassResult:
    return apply_patterns(module, [_ScfForToEmitC()])


# ---------------------------------------------------------------------------
# rvv -> emitc (opaque intrinsic calls)


def _require_pointer(op: OperationNode, operand_index: int) -> ValueRef:
    mem = op.operands[operand_index]
    if mem.type != PTR_F32:
        raise PatternError(
            f"{op.full_name} still addresses a {mem.type.spelling} operand; "
            "the buffer-parameter lowering must run first"
        )
    return mem


class _VleToCall(RewritePattern):
    def match(self, op: OperationNode) -> bool:
        return op.is_a("rvv", "vle32_v_f32m1Op")

    def rewrite(self, op: OperationNode, module: ModuleIR) -> Replacement:
        mem = _require_pointer(op, 0)
        _, offset, avl = op.operands
        ops: list[OperationNode] = []
        b = OpBuilder(module, ops)
        ptr = b.emitc_add(mem, offset, PTR_F32)
        call = b.emitc_call(VLE32_INTRINSIC, [ptr, avl], VREG_OPAQUE)
        return Replacement(ops, {op.results[0]: call.results[0]})


class _VseToCall(RewritePattern):
    def match(self, op: OperationNode) -> bool:
        return op.is_a("rvv", "vse32_v_f32m1Op")

    def rewrite(self, op: OperationNode, module: ModuleIR) -> Replacement:
        mem = _require_pointer(op, 1)
        vec, _, offset, avl = op.operands
        ops: list[OperationNode] = []
        b = OpBuilder(module, ops)
        ptr = b.emitc_add(mem, offset, PTR_F32)
        b.emitc_call(VSE32_INTRINSIC, [ptr, vec, avl])
        return Replacement(ops)


class _VfmaccToCall(RewritePattern):
    def match(self, op: OperationNode) -> bool:
        return op.is_a("rvv", "vfmacc_vf_f32m1Op")

    def rewrite(self, op: OperationNode, module: ModuleIR) -> Replacement:
        mem = _require_pointer(op, 1)
        vd, _, offset, vs, avl = op.operands
        ops: list[OperationNode] = []
        b = OpBuilder(module, ops)
        scalar = b.emitc_subscript(mem, offset)
        call = b.emitc_call(VFMACC_INTRINSIC, [vd, scalar, vs, avl], VREG_OPAQUE)
        return Replacement(ops, {op.results[0]: call.results[0]})


def pass_rvv_to_emitc(module: ModuleIR) -> PassResult:
    result = apply_patterns(module, [_VleToCall(), _VseToCall(), _VfmaccToCall()])
    work = result.module
    # Any leftover vector-typed values (e.g. function parameters in hand-built
    # modules) take the opaque C spelling so the module is emitc-only.
    mapping: dict[ValueRef, ValueRef] = {}
    retypes = 0
    for op in walk_ops(work):
        for i, res in enumerate(op.results):
            if res.type == RVV_VEC_F32M1:
                op.results[i] = work.retype_value(res, VREG_OPAQUE)
                mapping[res] = op.results[i]
                retypes += 1
        for region in op.regions:
            for block in region.blocks:
                for j, arg in enumerate(block.args):
                    if arg.type == RVV_VEC_F32M1:
                        block.args[j] = work.retype_value(arg, VREG_OPAQUE)
                        mapping[arg] = block.args[j]
                        retypes += 1
    substitute_operands(work, mapping)
    diags = verify(work) if retypes else result.diagnostics
    return PassResult(work, result.rewrites_applied + retypes, diags)


# ---------------------------------------------------------------------------
# Pipeline


PIPELINE = (
    ("memref", pass_memref_to_emitc),
    ("arith", pass_arith_to_emitc),
    ("scf", pass_scf_to_emitc),
    ("rvv", pass_rvv_to_emitc),
)

STAGE_NAMES = ("built",) + tuple(name for name, _ in PIPELINE)


def run_pipeline(module: ModuleIR, until: str = "rvv") -> PassResult:
    """Run the pass sequence, stopping early at ``until`` or on diagnostics."""
    if until not in STAGE_NAMES:
        raise ValueError(f"unknown stage {until!r}; expected one of {STAGE_NAMES}")
    work = clone_module(module)
    total = 0
    if until == "built":
        return PassResult(work, 0, verify(work))
    for name, pass_fn in PIPELINE:
        result = pass_fn(work)
        work = result.module
        total += result.rewrites_applied
        if result.diagnostics:
            return PassResult(work, total, result.diagnostics)
        if name == until:
            break
    return PassResult(work, total, [])
