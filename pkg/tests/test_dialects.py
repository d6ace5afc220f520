"""Operation registry contents, signature checking, and the op builder."""

from __future__ import annotations

import pytest

from rvvgen.dialects import (
    MEM_CLASS,
    VREG_CLASS,
    DialectRegistry,
    OpBuilder,
    OpSignature,
    get_registry,
    is_vreg,
    make_function,
    register_all,
)
from rvvgen.ir import (
    F32,
    INDEX,
    MEMREF_F32,
    PTR_F32,
    RVV_VEC_F32M1,
    VREG_OPAQUE,
    ModuleIR,
    function_entry,
    verify,
)

EXPECTED_OPS = {
    "func": {"func", "return"},
    "arith": {"constant", "addi", "muli"},
    "scf": {"for", "yield"},
    "rvv": {"vle32_v_f32m1Op", "vse32_v_f32m1Op", "vfmacc_vf_f32m1Op"},
    "emitc": {"constant", "variable", "assign", "subscript", "add", "mul",
              "call_opaque", "for"},
}


def test_registry_contents_frozen():
    reg = get_registry()
    for dialect, names in EXPECTED_OPS.items():
        assert {sig.name for sig in reg.ops_in(dialect)} == names
    assert sum(len(v) for v in EXPECTED_OPS.values()) == 18


def test_exactly_three_vector_ops():
    assert len(get_registry().ops_in("rvv")) == 3


def test_vfmacc_signature_shape():
    sig = get_registry().lookup("rvv", "vfmacc_vf_f32m1Op")
    assert sig is not None
    assert sig.num_operands == 5
    assert sig.num_results == 1


def test_load_store_signature_shapes():
    reg = get_registry()
    vle = reg.lookup("rvv", "vle32_v_f32m1Op")
    vse = reg.lookup("rvv", "vse32_v_f32m1Op")
    assert (vle.num_operands, vle.num_results) == (3, 1)
    assert (vse.num_operands, vse.num_results) == (4, 0)


def test_lookup_unknown_returns_none():
    reg = get_registry()
    assert reg.lookup("rvv", "nope") is None
    assert reg.lookup("nope", "nope") is None


def test_duplicate_registration_rejected():
    reg = DialectRegistry()
    sig = OpSignature("x", "y", 0, 0, 0)
    reg.register(sig)
    with pytest.raises(RuntimeError):
        reg.register(OpSignature("x", "y", 0, 0, 0))


def test_frozen_registry_rejects_registration():
    reg = register_all()
    with pytest.raises(RuntimeError):
        reg.register(OpSignature("x", "y", 0, 0, 0))


def test_get_registry_is_a_singleton():
    assert get_registry() is get_registry()


def test_vector_register_class():
    assert is_vreg(RVV_VEC_F32M1) and is_vreg(VREG_OPAQUE)
    assert not is_vreg(F32) and not is_vreg(PTR_F32)
    assert set(VREG_CLASS) == {RVV_VEC_F32M1, VREG_OPAQUE}
    assert set(MEM_CLASS) == {MEMREF_F32, PTR_F32}


# -- builder ----------------------------------------------------------------

def test_builder_rejects_unregistered_op():
    mod = ModuleIR()
    _, _params, fb = make_function(mod, "f", [])
    with pytest.raises(ValueError):
        fb._emit("nope", "nope", [], [])


def test_make_function_sets_symbol_and_type():
    mod = ModuleIR()
    fn, params, _fb = make_function(mod, "k", [INDEX, MEMREF_F32])
    assert fn.attributes["sym_name"] == "k"
    assert fn.attributes["function_type"] == "(index, memref<-1xf32>) -> ()"
    assert [p.type for p in params] == [INDEX, MEMREF_F32]
    assert function_entry(fn).args == params


def test_builder_ops_verify_clean():
    mod = ModuleIR()
    _, params, fb = make_function(mod, "k", [INDEX, MEMREF_F32])
    off = fb.const_index(0)
    avl = fb.const_index(4)
    vec = fb.vle32(params[1], off, avl)
    acc = fb.vfmacc(vec, params[1], off, vec, avl)
    fb.vse32(acc, params[1], off, avl)
    fb.func_return()
    assert verify(mod) == []


def test_verifier_flags_wrong_operand_type():
    mod = ModuleIR()
    _, params, fb = make_function(mod, "k", [INDEX, MEMREF_F32])
    bad_avl = fb.const_f32(4.0)
    fb.vle32(params[1], fb.const_index(0), bad_avl)
    fb.func_return()
    diags = verify(mod)
    assert any("vle32" in d.path or "vle32" in d.message for d in diags)


def test_verifier_flags_assign_to_non_variable():
    mod = ModuleIR()
    _, _params, fb = make_function(mod, "f", [])
    a = fb.emitc_const(1, INDEX)
    b = fb.emitc_const(2, INDEX)
    fb.emitc_assign(a, b)  # target is a constant, not an emitc.variable
    fb.func_return()
    assert any("variable" in d.message for d in verify(mod))


def test_verifier_accepts_assign_to_variable():
    mod = ModuleIR()
    _, _params, fb = make_function(mod, "f", [])
    var = fb.emitc_variable(INDEX)
    fb.emitc_assign(var, fb.emitc_const(1, INDEX))
    fb.func_return()
    assert verify(mod) == []


def test_verifier_flags_pointer_displacement_type():
    mod = ModuleIR()
    _, _params, fb = make_function(mod, "f", [])
    a = fb.emitc_const(1.0, F32)
    fb.emitc_add(a, a, F32)  # neither index+index nor ptr+index
    fb.func_return()
    assert any("add" in d.path or "add" in d.message for d in verify(mod))


def test_builder_loop_carries_iter_args():
    mod = ModuleIR()
    _, params, fb = make_function(mod, "f", [INDEX])
    zero, one = fb.const_index(0), fb.const_index(1)
    init = fb.const_index(5)
    for_op, induction, iters, bb = fb.scf_for(zero, params[0], one, [init])
    assert induction.type == INDEX
    assert len(iters) == 1 and iters[0].type == INDEX
    assert for_op.operands == [zero, params[0], one, init]
    assert len(for_op.results) == 1
    nxt = bb.addi(iters[0], one)
    bb.scf_yield([nxt])
    fb.func_return()
    assert verify(mod) == []


def test_builder_call_with_and_without_result():
    mod = ModuleIR()
    _, _params, fb = make_function(mod, "f", [])
    avl = fb.emitc_const(4, INDEX)
    call = fb.emitc_call("__riscv_vle32_v_f32m1", [avl], RVV_VEC_F32M1)
    assert call.attributes["callee"] == "__riscv_vle32_v_f32m1"
    assert len(call.results) == 1
    stmt = fb.emitc_call("__riscv_vse32_v_f32m1", [avl])
    assert stmt.results == []
    fb.func_return()
    assert verify(mod) == []
