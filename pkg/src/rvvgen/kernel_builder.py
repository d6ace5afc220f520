"""Micro-kernel construction: configuration, register planning, IR assembly.

A kernel ``ukernel_{mr}x{nr}_f32(kc, Ac, Bc, C, ldC)`` computes a column-major
``mr x nr`` tile update ``C += Ac * Bc`` over a depth-``kc`` packed panel pair:
``Ac`` holds element ``(i, k)`` at ``k*mr + i`` and ``Bc`` holds ``(k, j)`` at
``k*nr + j``. The ``mr`` rows are spread across ``ceil(mr / lanes)`` vector
registers; B elements are read as scalars by the FMA, never loaded into a
vector register.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dialects import make_function
from .ir import INDEX, MEMREF_F32, ModuleIR, ValueRef

SUPPORTED_VLEN_BITS = (128, 256, 512)
MAX_TILE_DIM = 64


class ConfigError(ValueError):
    """Rejected kernel configuration."""


@dataclass(frozen=True)
class KernelConfig:
    mr: int
    nr: int
    dtype: str = "f32"
    vlen_bits: int = 256

    def __post_init__(self) -> None:
        if not 1 <= self.mr <= MAX_TILE_DIM:
            raise ConfigError(f"mr must be in [1, {MAX_TILE_DIM}], got {self.mr}")
        if not 1 <= self.nr <= MAX_TILE_DIM:
            raise ConfigError(f"nr must be in [1, {MAX_TILE_DIM}], got {self.nr}")
        if self.vlen_bits not in SUPPORTED_VLEN_BITS:
            raise ConfigError(f"vlen_bits must be one of {SUPPORTED_VLEN_BITS}, got {self.vlen_bits}")


@dataclass(frozen=True)
class RegisterPlan:
    elems_per_vreg: int
    num_a_regs: int
    vl: tuple[int, ...]
    num_acc_regs: int
    fmas_per_iter: int


@dataclass(frozen=True)
class GemmShape:
    m: int
    n: int
    k: int

    def __post_init__(self) -> None:
        if min(self.m, self.n, self.k) < 1:
            raise ConfigError(f"shape dims must be >= 1, got {self.m}x{self.n}x{self.k}")

    @property
    def flops(self) -> int:
        return 2 * self.m * self.n * self.k


def plan_registers(config: KernelConfig) -> RegisterPlan:
    """Distribute the mr tile rows over full vector registers.

    The last register covers the row remainder and runs with a shorter
    active vector length; every (j, p) accumulator gets its own register, so
    one loop iteration issues one FMA per accumulator.
    """
    if config.dtype != "f32":
        raise ConfigError(f"only f32 kernels are supported, got {config.dtype!r}")
    elems = config.vlen_bits // 32
    num_a = -(-config.mr // elems)
    vl = tuple(min(elems, config.mr - p * elems) for p in range(num_a))
    acc = config.nr * num_a
    return RegisterPlan(elems, num_a, vl, acc, acc)


def kernel_name(config: KernelConfig) -> str:
    return f"ukernel_{config.mr}x{config.nr}_f32"


def build_microkernel(config: KernelConfig) -> ModuleIR:
    """Assemble one kernel as a single-function module.

    Layout: prologue vector loads of the C tile (j-major, p-minor), one
    counted loop over kc carrying every accumulator as an iter-arg, and an
    epilogue storing each loop result back at its prologue offset.
    """
    plan = plan_registers(config)
    mr, nr = config.mr, config.nr
    elems, num_a = plan.elems_per_vreg, plan.num_a_regs

    mod = ModuleIR()
    _, params, fb = make_function(
        mod, kernel_name(config), [INDEX, MEMREF_F32, MEMREF_F32, MEMREF_F32, INDEX]
    )
    kc, a_pack, b_pack, c_mat, ld_c = params

    fn_consts: dict[int, ValueRef] = {}

    def fc(value: int) -> ValueRef:
        if value not in fn_consts:
            fn_consts[value] = fb.const_index(value)
        return fn_consts[value]

    # prologue: load the C tile into the accumulators
    inits: list[ValueRef] = []
    tile_offsets: list[tuple[ValueRef, ValueRef]] = []
    for j in range(nr):
        col_base = fb.muli(fc(j), ld_c)
        for p in range(num_a):
            off = fb.addi(fc(p * elems), col_base)
            avl = fc(plan.vl[p])
            inits.append(fb.vle32(c_mat, off, avl))
            tile_offsets.append((off, avl))

    for_op, k, iter_accs, bb = fb.scf_for(fc(0), kc, fc(1), inits)

    body_consts: dict[int, ValueRef] = {}

    def bc(value: int) -> ValueRef:
        if value not in body_consts:
            body_consts[value] = bb.const_index(value)
        return body_consts[value]

    # one A load per register slice of the current column
    a_base = bb.muli(k, bc(mr))
    a_regs: list[ValueRef] = []
    avls: list[ValueRef] = []
    for p in range(num_a):
        off = bb.addi(a_base, bc(p * elems))
        avl = bc(plan.vl[p])
        avls.append(avl)
        a_regs.append(bb.vle32(a_pack, off, avl))

    # FMA grid: scalar B element against each A slice
    b_base = bb.muli(k, bc(nr))
    updated: list[ValueRef] = []
    for j in range(nr):
        b_off = bb.addi(b_base, bc(j))
        for p in range(num_a):
            acc = iter_accs[j * num_a + p]
            updated.append(bb.vfmacc(acc, b_pack, b_off, a_regs[p], avls[p]))
    bb.scf_yield(updated)

    # epilogue: store each accumulator back at its prologue offset
    for res, (off, avl) in zip(for_op.results, tile_offsets):
        fb.vse32(res, c_mat, off, avl)
    fb.func_return()
    return mod


def build_family(config: KernelConfig) -> list[tuple[KernelConfig, ModuleIR]]:
    """All (mr', nr') kernels from 1x1 up to the configured tile, mr-major."""
    family = []
    for mr in range(1, config.mr + 1):
        for nr in range(1, config.nr + 1):
            sub = KernelConfig(mr, nr, config.dtype, config.vlen_bits)
            family.append((sub, build_microkernel(sub)))
    return family
