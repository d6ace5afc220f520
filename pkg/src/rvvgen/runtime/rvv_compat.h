/*
 * Target switch for generated kernels: real RVV intrinsics on RISC-V
 * builds, the scalar emulation shim when RVV_EMULATE is defined.
 */
#ifndef RVV_COMPAT_H
#define RVV_COMPAT_H

#include <stddef.h>

#ifdef RVV_EMULATE
#include "rvv_shim.h"
#else
#include <riscv_vector.h>
#endif

#endif /* RVV_COMPAT_H */
