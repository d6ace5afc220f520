"""GEMM micro-kernel generator for RISC-V Vector targets.

Builds tile-update kernels as SSA IR, lowers them through a fixed pass
pipeline to a C-shaped dialect, emits portable C99/C11 source using RVV 1.0
intrinsics, and wraps kernel families in a blocked-GEMM test bench that runs
on hosts without the V extension via a scalar emulation shim.
"""

__version__ = "0.1.0"

from .c_emitter import CSourceUnit, EmitError, EmitOptions, emit_c, emit_kernel_set
from .harness import (
    BenchCase,
    BlockingParams,
    HarnessError,
    default_blocking,
    default_cases,
    generate_driver,
    generate_main,
    generate_makefile,
    generate_naive_ref,
    write_testbench,
)
from .ir import ModuleIR, dialect_census, print_ir, verify
from .kernel_builder import (
    ConfigError,
    GemmShape,
    KernelConfig,
    RegisterPlan,
    build_family,
    build_microkernel,
    plan_registers,
)
from .lowering import (
    pass_arith_to_emitc,
    pass_memref_to_emitc,
    pass_rvv_to_emitc,
    pass_scf_to_emitc,
    run_pipeline,
)
from .rewriting import PassResult, PatternError, RewritePattern, apply_patterns

__all__ = [
    "BenchCase",
    "BlockingParams",
    "CSourceUnit",
    "ConfigError",
    "EmitError",
    "EmitOptions",
    "GemmShape",
    "HarnessError",
    "KernelConfig",
    "ModuleIR",
    "PassResult",
    "PatternError",
    "RegisterPlan",
    "RewritePattern",
    "apply_patterns",
    "build_family",
    "build_microkernel",
    "default_blocking",
    "default_cases",
    "dialect_census",
    "emit_c",
    "emit_kernel_set",
    "generate_driver",
    "generate_main",
    "generate_makefile",
    "generate_naive_ref",
    "pass_arith_to_emitc",
    "pass_memref_to_emitc",
    "pass_rvv_to_emitc",
    "pass_scf_to_emitc",
    "plan_registers",
    "print_ir",
    "run_pipeline",
    "verify",
    "write_testbench",
]
