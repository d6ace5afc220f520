"""Shared helpers: op counting, loop-body extraction, and an index-arithmetic
interpreter used as the oracle for kernel memory-access offsets."""

from __future__ import annotations

from collections import Counter

import pytest

from rvvgen.ir import ModuleIR, OperationNode, function_entry, walk_ops
from rvvgen.kernel_builder import KernelConfig, build_microkernel
from rvvgen.lowering import run_pipeline


def op_counts(module: ModuleIR) -> dict[str, int]:
    return dict(Counter(op.full_name for op in walk_ops(module)))


def find_ops(module: ModuleIR, full_name: str) -> list[OperationNode]:
    return [op for op in walk_ops(module) if op.full_name == full_name]


def loop_body_ops(module: ModuleIR, loop_name: str = "scf.for") -> list[OperationNode]:
    """Ops inside the single counted loop of a one-function module."""
    loops = find_ops(module, loop_name)
    assert len(loops) == 1, f"expected one {loop_name}, found {len(loops)}"
    return loops[0].regions[0].blocks[0].ops


def interpret_accesses(module: ModuleIR, *, ld_c: int, k_val: int):
    """Evaluate the kernel's index arithmetic over concrete values.

    Returns one (stage, kind, param_index, offset, avl) tuple per vector
    memory access, where stage is "prologue"/"body"/"epilogue", kind is
    "load"/"fma"/"store", and param_index identifies which function
    parameter the access displaces (1=A pack, 2=B pack, 3=C tile).
    """
    fn = module.functions[0]
    entry = function_entry(fn)
    params = entry.args
    env = {params[0].id: 10 ** 6, params[4].id: ld_c}
    param_ix = {p.id: i for i, p in enumerate(params)}
    accesses = []

    def run(ops, stage):
        for idx, op in enumerate(ops):
            nm = op.full_name
            if nm == "arith.constant":
                env[op.results[0].id] = op.attributes["value"]
            elif nm == "arith.addi":
                env[op.results[0].id] = env[op.operands[0].id] + env[op.operands[1].id]
            elif nm == "arith.muli":
                env[op.results[0].id] = env[op.operands[0].id] * env[op.operands[1].id]
            elif nm == "rvv.vle32_v_f32m1Op":
                mem, off, avl = op.operands
                accesses.append((stage, "load", param_ix[mem.id], env[off.id], env[avl.id]))
            elif nm == "rvv.vfmacc_vf_f32m1Op":
                _vd, mem, off, _vs, avl = op.operands
                accesses.append((stage, "fma", param_ix[mem.id], env[off.id], env[avl.id]))
            elif nm == "rvv.vse32_v_f32m1Op":
                _vec, mem, off, avl = op.operands
                accesses.append((stage, "store", param_ix[mem.id], env[off.id], env[avl.id]))
            elif nm == "scf.for":
                body = op.regions[0].blocks[0]
                env[body.args[0].id] = k_val
                run(body.ops, "body")
                run(ops[idx + 1:], "epilogue")
                return

    run(entry.ops, "prologue")
    return accesses


@pytest.fixture(scope="session")
def kernel_8x4():
    return build_microkernel(KernelConfig(8, 4, vlen_bits=256))


@pytest.fixture(scope="session")
def lowered_8x4(kernel_8x4):
    result = run_pipeline(kernel_8x4)
    assert result.diagnostics == []
    return result.module
