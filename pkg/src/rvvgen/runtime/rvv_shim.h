/*
 * Scalar emulation of the three RVV 1.0 intrinsics used by generated
 * kernels, for running on hosts without the V extension.
 *
 * A vector register holds VLEN_BITS/32 f32 lanes and is passed by value.
 * Semantics mirror the hardware behaviour the kernels rely on:
 *   - vle32 loads vl lanes and zeroes the tail;
 *   - vfmacc updates the first vl lanes and leaves the tail undisturbed,
 *     rounding the multiply and the add separately (no fused multiply-add,
 *     so results are bit-deterministic across hosts);
 *   - vse32 stores exactly vl lanes.
 * Build the including translation unit with contraction disabled
 * (e.g. -ffp-contract=off) to keep the separate-rounding guarantee.
 */
#ifndef RVV_SHIM_H
#define RVV_SHIM_H

#include <stddef.h>

#ifndef VLEN_BITS
#define VLEN_BITS 256
#endif

#if VLEN_BITS != 128 && VLEN_BITS != 256 && VLEN_BITS != 512
#error "VLEN_BITS must be 128, 256 or 512"
#endif

#define RVV_SHIM_LANES (VLEN_BITS / 32)

typedef struct {
    float lanes[RVV_SHIM_LANES];
} vfloat32m1_t;

/* pre: 1 <= vl <= RVV_SHIM_LANES and base[0..vl) readable */
static inline vfloat32m1_t __riscv_vle32_v_f32m1(const float *base, size_t vl) {
    vfloat32m1_t v;
    size_t i;
    for (i = 0; i < vl; ++i) {
        v.lanes[i] = base[i];
    }
    for (; i < (size_t)RVV_SHIM_LANES; ++i) {
        v.lanes[i] = 0.0f;
    }
    return v;
}

/* vd[i] + rs * vs[i] on the first vl lanes; tail lanes keep vd's bits */
static inline vfloat32m1_t __riscv_vfmacc_vf_f32m1(vfloat32m1_t vd, float rs,
                                                   vfloat32m1_t vs, size_t vl) {
    vfloat32m1_t r = vd;
    size_t i;
    for (i = 0; i < vl; ++i) {
        float prod = rs * vs.lanes[i];
        r.lanes[i] = vd.lanes[i] + prod;
    }
    return r;
}

/* pre: 1 <= vl <= RVV_SHIM_LANES and base[0..vl) writable */
static inline void __riscv_vse32_v_f32m1(float *base, vfloat32m1_t v, size_t vl) {
    size_t i;
    for (i = 0; i < vl; ++i) {
        base[i] = v.lanes[i];
    }
}

#endif /* RVV_SHIM_H */
