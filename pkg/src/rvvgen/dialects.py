"""Operation signatures for the func, arith, scf, rvv and emitc namespaces.

Each signature records operand/result arity and type patterns plus an
optional structural check. The registry is built once by :func:`register_all`
and is immutable afterwards; the verifier and the builders consult it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .ir import (
    ANY_TYPE,
    F32,
    INDEX,
    MEMREF_F32,
    PTR_F32,
    RVV_VEC_F32M1,
    VREG_OPAQUE,
    AttrValue,
    Block,
    IRType,
    ModuleIR,
    OperationNode,
    Region,
    ValueRef,
)

# A vector-register value is spelled !rvv.vfloat32m1 when built and
# !emitc.opaque<"vfloat32m1_t"> once loop state has been lowered; the two
# spellings denote the same register class and are interchangeable between
# passes.
VREG_CLASS = (RVV_VEC_F32M1, VREG_OPAQUE)
MEM_CLASS = (MEMREF_F32, PTR_F32)


def is_vreg(ty: IRType) -> bool:
    return ty in VREG_CLASS


@dataclass(frozen=True)
class OpSignature:
    dialect: str
    name: str
    num_operands: Optional[int]  # None means variadic
    num_results: Optional[int]
    num_regions: int = 0
    operand_patterns: Optional[tuple] = None
    result_patterns: Optional[tuple] = None
    attrs: dict[str, tuple[tuple, bool]] = field(default_factory=dict)
    verify_extra: Optional[Callable[[OperationNode, dict[int, OperationNode]], list[str]]] = None

    @property
    def full_name(self) -> str:
        return f"{self.dialect}.{self.name}"


class DialectRegistry:
    def __init__(self) -> None:
        self._sigs: dict[tuple[str, str], OpSignature] = {}
        self._frozen = False

    def register(self, sig: OpSignature) -> None:
        if self._frozen:
            raise RuntimeError("registry is immutable after register_all()")
        key = (sig.dialect, sig.name)
        if key in self._sigs:
            raise RuntimeError(f"duplicate registration of {sig.full_name}")
        self._sigs[key] = sig

    def freeze(self) -> None:
        self._frozen = True

    def lookup(self, dialect: str, name: str) -> Optional[OpSignature]:
        return self._sigs.get((dialect, name))

    def ops_in(self, dialect: str) -> list[OpSignature]:
        return [s for (d, _), s in self._sigs.items() if d == dialect]


# ---------------------------------------------------------------------------
# Structural checks beyond arity/type patterns


def _check_constant(op: OperationNode, _defs) -> list[str]:
    value = op.attributes.get("value")
    if not op.results:
        return []
    ty = op.results[0].type
    if ty == INDEX and not isinstance(value, int):
        return ["index constant requires an int value"]
    if ty == F32 and not isinstance(value, float):
        return ["f32 constant requires a float value"]
    return []


def _check_assign(op: OperationNode, defs: dict[int, OperationNode]) -> list[str]:
    out = []
    target, value = op.operands
    src = defs.get(target.id)
    if src is None or not src.is_a("emitc", "variable"):
        out.append("assign target must be the result of an emitc.variable")
    if target.type != value.type and not (is_vreg(target.type) and is_vreg(value.type)):
        out.append(f"assign type mismatch: {target.type.spelling} vs {value.type.spelling}")
    return out


def _check_add(op: OperationNode, _defs) -> list[str]:
    a, b = (v.type for v in op.operands)
    r = op.results[0].type
    if (a, b, r) == (INDEX, INDEX, INDEX):
        return []
    if (a, b, r) == (PTR_F32, INDEX, PTR_F32):
        return []
    return ["emitc.add must be index+index->index or ptr+index->ptr"]


def _check_scf_for(op: OperationNode, _defs) -> list[str]:
    out = []
    iters = op.operands[3:]
    if len(op.results) != len(iters):
        out.append(f"scf.for declares {len(iters)} iter-args but has {len(op.results)} results")
    else:
        for i, (res, init) in enumerate(zip(op.results, iters)):
            if res.type != init.type:
                out.append(f"scf.for result {i} type differs from its iter-arg init")
    if op.regions and op.regions[0].blocks:
        body = op.regions[0].blocks[0]
        if len(body.args) != 1 + len(iters):
            out.append(f"scf.for body must have {1 + len(iters)} block args, has {len(body.args)}")
        else:
            if body.args[0].type != INDEX:
                out.append("scf.for induction variable must be index-typed")
            for i, (arg, init) in enumerate(zip(body.args[1:], iters)):
                if arg.type != init.type:
                    out.append(f"scf.for iter block arg {i} type differs from its init")
        if not body.ops or not body.ops[-1].is_a("scf", "yield"):
            out.append("scf.for body must terminate with scf.yield")
        else:
            yielded = body.ops[-1].operands
            if len(yielded) != len(iters):
                out.append(f"scf.for declares {len(iters)} iter-args but yields {len(yielded)} values")
            else:
                for i, (y, init) in enumerate(zip(yielded, iters)):
                    if y.type != init.type:
                        out.append(f"scf.for yielded value {i} type differs from its iter-arg")
    return out


def _check_emitc_for(op: OperationNode, _defs) -> list[str]:
    out = []
    if op.regions and op.regions[0].blocks:
        body = op.regions[0].blocks[0]
        if len(body.args) != 1 or body.args[0].type != INDEX:
            out.append("emitc.for body must have exactly one index block arg")
        if body.ops and body.ops[-1].is_a("scf", "yield"):
            out.append("emitc.for is imperative and must not yield")
    return out


def _check_vfmacc(op: OperationNode, _defs) -> list[str]:
    vd, _, _, vs, _ = op.operands
    res = op.results[0]
    if not (is_vreg(vd.type) and is_vreg(vs.type) and is_vreg(res.type)):
        return ["vfmacc vd, vs and result must all be vector-register values"]
    return []


def _check_call_opaque(op: OperationNode, _defs) -> list[str]:
    if len(op.results) > 1:
        return ["call_opaque supports at most one result"]
    return []


# ---------------------------------------------------------------------------
# Registration


def register_all() -> DialectRegistry:
    """Build the registry for all five namespaces used by the pipeline."""
    r = DialectRegistry()

    r.register(OpSignature(
        "func", "func", num_operands=0, num_results=0, num_regions=1,
        attrs={"sym_name": ((str,), True), "function_type": ((str,), True)},
    ))
    r.register(OpSignature("func", "return", num_operands=0, num_results=0))

    r.register(OpSignature(
        "arith", "constant", num_operands=0, num_results=1,
        result_patterns=((INDEX, F32),),
        attrs={"value": ((int, float), True)},
        verify_extra=_check_constant,
    ))
    r.register(OpSignature(
        "arith", "addi", num_operands=2, num_results=1,
        operand_patterns=(INDEX, INDEX), result_patterns=(INDEX,),
    ))
    r.register(OpSignature(
        "arith", "muli", num_operands=2, num_results=1,
        operand_patterns=(INDEX, INDEX), result_patterns=(INDEX,),
    ))

    r.register(OpSignature(
        "scf", "for", num_operands=None, num_results=None, num_regions=1,
        verify_extra=_check_scf_for,
    ))
    r.register(OpSignature("scf", "yield", num_operands=None, num_results=0))

    r.register(OpSignature(
        "rvv", "vle32_v_f32m1Op", num_operands=3, num_results=1,
        operand_patterns=(MEM_CLASS, INDEX, INDEX),
        result_patterns=(VREG_CLASS,),
    ))
    r.register(OpSignature(
        "rvv", "vse32_v_f32m1Op", num_operands=4, num_results=0,
        operand_patterns=(VREG_CLASS, MEM_CLASS, INDEX, INDEX),
    ))
    r.register(OpSignature(
        "rvv", "vfmacc_vf_f32m1Op", num_operands=5, num_results=1,
        operand_patterns=(VREG_CLASS, MEM_CLASS, INDEX, VREG_CLASS, INDEX),
        result_patterns=(VREG_CLASS,),
        verify_extra=_check_vfmacc,
    ))

    r.register(OpSignature(
        "emitc", "constant", num_operands=0, num_results=1,
        result_patterns=((INDEX, F32),),
        attrs={"value": ((int, float), True)},
        verify_extra=_check_constant,
    ))
    r.register(OpSignature(
        "emitc", "variable", num_operands=0, num_results=1,
        attrs={"init": ((int, float), False)},
    ))
    r.register(OpSignature(
        "emitc", "assign", num_operands=2, num_results=0,
        verify_extra=_check_assign,
    ))
    r.register(OpSignature(
        "emitc", "subscript", num_operands=2, num_results=1,
        operand_patterns=(MEM_CLASS, INDEX), result_patterns=(F32,),
    ))
    r.register(OpSignature(
        "emitc", "add", num_operands=2, num_results=1, verify_extra=_check_add,
    ))
    r.register(OpSignature(
        "emitc", "mul", num_operands=2, num_results=1,
        operand_patterns=(INDEX, INDEX), result_patterns=(INDEX,),
    ))
    r.register(OpSignature(
        "emitc", "call_opaque", num_operands=None, num_results=None,
        attrs={"callee": ((str,), True)},
        verify_extra=_check_call_opaque,
    ))
    r.register(OpSignature(
        "emitc", "for", num_operands=3, num_results=0, num_regions=1,
        operand_patterns=(INDEX, INDEX, INDEX),
        verify_extra=_check_emitc_for,
    ))

    r.freeze()
    return r


_REGISTRY: Optional[DialectRegistry] = None


def get_registry() -> DialectRegistry:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = register_all()
    return _REGISTRY


# ---------------------------------------------------------------------------
# Builder


class OpBuilder:
    """Constructs registered operations, appending them to a target op list.

    Result values are allocated from the module so numbering stays globally
    unique. Helpers return the result value (or the op itself when it has
    none).
    """

    def __init__(self, module: ModuleIR, into: list[OperationNode]):
        self.module = module
        self.into = into

    def _emit(self, dialect: str, name: str, operands: list[ValueRef],
              result_types: list[IRType], attributes: Optional[dict[str, AttrValue]] = None,
              regions: Optional[list[Region]] = None) -> OperationNode:
        sig = get_registry().lookup(dialect, name)
        if sig is None:
            raise ValueError(f"cannot build unregistered operation {dialect}.{name}")
        op = OperationNode(
            dialect, name,
            operands=list(operands),
            results=[self.module.new_value(t) for t in result_types],
            attributes=dict(attributes or {}),
            regions=list(regions or []),
        )
        self.into.append(op)
        return op

    # func ----------------------------------------------------------------
    def func_return(self) -> OperationNode:
        return self._emit("func", "return", [], [])

    # arith ---------------------------------------------------------------
    def const_index(self, value: int) -> ValueRef:
        return self._emit("arith", "constant", [], [INDEX], {"value": value}).results[0]

    def const_f32(self, value: float) -> ValueRef:
        return self._emit("arith", "constant", [], [F32], {"value": value}).results[0]

    def addi(self, a: ValueRef, b: ValueRef) -> ValueRef:
        return self._emit("arith", "addi", [a, b], [INDEX]).results[0]

    def muli(self, a: ValueRef, b: ValueRef) -> ValueRef:
        return self._emit("arith", "muli", [a, b], [INDEX]).results[0]

    # scf -----------------------------------------------------------------
    def scf_for(self, lb: ValueRef, ub: ValueRef, step: ValueRef,
                iter_inits: list[ValueRef]) -> tuple[OperationNode, ValueRef, list[ValueRef], "OpBuilder"]:
        """Open a counted loop; returns (op, induction var, iter args, body builder)."""
        induction = self.module.new_value(INDEX)
        iter_args = [self.module.new_value(v.type) for v in iter_inits]
        body = Block(args=[induction] + iter_args, ops=[])
        op = self._emit("scf", "for", [lb, ub, step] + list(iter_inits),
                        [v.type for v in iter_inits], regions=[Region([body])])
        return op, induction, iter_args, OpBuilder(self.module, body.ops)

    def scf_yield(self, values: list[ValueRef]) -> OperationNode:
        return self._emit("scf", "yield", list(values), [])

    # rvv -----------------------------------------------------------------
    def vle32(self, mem: ValueRef, offset: ValueRef, avl: ValueRef) -> ValueRef:
        return self._emit("rvv", "vle32_v_f32m1Op", [mem, offset, avl], [RVV_VEC_F32M1]).results[0]

    def vse32(self, vec: ValueRef, mem: ValueRef, offset: ValueRef, avl: ValueRef) -> OperationNode:
        return self._emit("rvv", "vse32_v_f32m1Op", [vec, mem, offset, avl], [])

    def vfmacc(self, vd: ValueRef, mem: ValueRef, offset: ValueRef,
               vs: ValueRef, avl: ValueRef) -> ValueRef:
        return self._emit("rvv", "vfmacc_vf_f32m1Op", [vd, mem, offset, vs, avl],
                          [vd.type]).results[0]

    # emitc ---------------------------------------------------------------
    def emitc_const(self, value: int | float, ty: IRType) -> ValueRef:
        return self._emit("emitc", "constant", [], [ty], {"value": value}).results[0]

    def emitc_variable(self, ty: IRType) -> ValueRef:
        return self._emit("emitc", "variable", [], [ty]).results[0]

    def emitc_assign(self, target: ValueRef, value: ValueRef) -> OperationNode:
        return self._emit("emitc", "assign", [target, value], [])

    def emitc_subscript(self, base: ValueRef, index: ValueRef) -> ValueRef:
        return self._emit("emitc", "subscript", [base, index], [F32]).results[0]

    def emitc_add(self, a: ValueRef, b: ValueRef, ty: IRType) -> ValueRef:
        return self._emit("emitc", "add", [a, b], [ty]).results[0]

    def emitc_mul(self, a: ValueRef, b: ValueRef) -> ValueRef:
        return self._emit("emitc", "mul", [a, b], [INDEX]).results[0]

    def emitc_call(self, callee: str, args: list[ValueRef],
                   result_type: Optional[IRType] = None) -> OperationNode:
        results = [result_type] if result_type is not None else []
        return self._emit("emitc", "call_opaque", list(args), results, {"callee": callee})

    def emitc_for(self, lb: ValueRef, ub: ValueRef, step: ValueRef,
                  induction: ValueRef, body_ops: list[OperationNode]) -> OperationNode:
        body = Block(args=[induction], ops=list(body_ops))
        return self._emit("emitc", "for", [lb, ub, step], [], regions=[Region([body])])


def make_function(module: ModuleIR, name: str, param_types: list[IRType]) -> tuple[OperationNode, list[ValueRef], OpBuilder]:
    """Create a func.func with an entry block; returns (op, params, body builder)."""
    from .ir import function_type_spelling

    params = [module.new_value(t) for t in param_types]
    entry = Block(args=params, ops=[])
    fn = OperationNode(
        "func", "func",
        attributes={"sym_name": name, "function_type": function_type_spelling(params)},
        regions=[Region([entry])],
    )
    module.functions.append(fn)
    return fn, params, OpBuilder(module, entry.ops)
