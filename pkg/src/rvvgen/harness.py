"""Test-bench generation around a kernel family.

Produces the cache-blocked driver (five loops plus packing), the naive
reference oracle, a benchmark main with verification and timing, the
emulation headers, a Makefile with host/native targets, and a convenience
run script. Everything is written atomically so a failed run never leaves a
half-written file.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .c_emitter import CSourceUnit, EmitOptions, emit_kernel_set
from .kernel_builder import ConfigError, GemmShape, KernelConfig, build_family
from .lowering import run_pipeline

ERR_THRESHOLD = "1e-4"
RNG_SEED = "0x2545F491u"


class HarnessError(RuntimeError):
    """Generation failed (e.g. a kernel did not lower cleanly)."""


@dataclass(frozen=True)
class BlockingParams:
    mc: int
    kc: int
    nc: int
    mr: int
    nr: int

    def __post_init__(self) -> None:
        for name in ("mc", "kc", "nc", "mr", "nr"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class BenchCase:
    id: str
    shape: GemmShape
    repetitions: int = 1
    slow: bool = False

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")


def default_blocking(mr: int, nr: int) -> BlockingParams:
    """Functional-testing defaults for the host; not tuned for any machine."""
    return BlockingParams(mc=120, kc=256, nc=512, mr=mr, nr=nr)


def default_cases() -> list[BenchCase]:
    """Square scaling plus transformer-layer shapes; the two largest squares
    only run when the bench is invoked with --slow."""
    square = [BenchCase(f"S{i}", GemmShape(d, d, d), slow=d >= 4000)
              for i, d in enumerate((1000, 2000, 3000, 4000, 5000), start=1)]
    layers = [
        BenchCase("B1", GemmShape(1024, 384, 1024)),
        BenchCase("B2", GemmShape(384, 384, 64)),
        BenchCase("B3", GemmShape(64, 384, 384)),
        BenchCase("B4", GemmShape(4096, 384, 1024)),
        BenchCase("B5", GemmShape(1024, 384, 4096)),
    ]
    return square + layers


def kernel_set_filename(config: KernelConfig) -> str:
    return f"ukernels_{config.mr}x{config.nr}_vlen{config.vlen_bits}.c"


# ---------------------------------------------------------------------------
# Driver


_DRIVER_HELPERS = [
    """\
static size_t size_min(size_t a, size_t b) {
    return a < b ? a : b;
}
""",
    """\
static float *gemm_alloc(size_t count) {
    size_t bytes = (count * sizeof(float) + 63u) & ~(size_t)63u;
    void *p = aligned_alloc(64, bytes);
    if (p == NULL) {
        abort();
    }
    return (float *)p;
}
""",
    """\
/* Ac slabs: GEMM_MR-tall row bands; element (i, p) of a band of height h
 * sits at band[p * h + i]. Edge bands keep their exact height. */
static void pack_a(size_t kc_eff, size_t mc_eff, const float *A, size_t ldA, float *Ac) {
    size_t ir, p, i;
    for (ir = 0; ir < mc_eff; ir += GEMM_MR) {
        size_t h = size_min(GEMM_MR, mc_eff - ir);
        float *band = Ac + kc_eff * ir;
        for (p = 0; p < kc_eff; ++p) {
            for (i = 0; i < h; ++i) {
                band[p * h + i] = A[(ir + i) + p * ldA];
            }
        }
    }
}
""",
    """\
/* Bc panels: GEMM_NR-wide column panels; element (p, j) of a panel of width w
 * sits at panel[p * w + j]. Edge panels keep their exact width. */
static void pack_b(size_t kc_eff, size_t nc_eff, const float *B, size_t ldB, float *Bc) {
    size_t jr, p, j;
    for (jr = 0; jr < nc_eff; jr += GEMM_NR) {
        size_t w = size_min(GEMM_NR, nc_eff - jr);
        float *panel = Bc + kc_eff * jr;
        for (p = 0; p < kc_eff; ++p) {
            for (j = 0; j < w; ++j) {
                panel[p * w + j] = B[p + (jr + j) * ldB];
            }
        }
    }
}
""",
]


def generate_driver(params: BlockingParams) -> CSourceUnit:
    """Five-loop blocked C := C + A*B over column-major matrices."""
    header = f"""\
/* Cache-blocked GEMM driver dispatching into the generated kernel family. */
#include <assert.h>
#include <stddef.h>
#include <stdlib.h>

#define GEMM_MR {params.mr}
#define GEMM_NR {params.nr}
#define GEMM_MC {params.mc}
#define GEMM_KC {params.kc}
#define GEMM_NC {params.nc}

typedef void (*ukernel_fn)(size_t, const float*, const float*, float*, size_t);
extern const ukernel_fn ukernels[GEMM_MR][GEMM_NR];

#ifdef GEMM_COUNT_KERNELS
unsigned long gemm_kernel_calls[GEMM_MR][GEMM_NR];
#endif
"""
    gemm = f"""\
void gemm_blocked(size_t m, size_t n, size_t k,
                  const float *A, size_t ldA,
                  const float *B, size_t ldB,
                  float *C, size_t ldC) {{
    float *Ac, *Bc;
    size_t jc, pc, ic, jr, ir;
    assert(m >= 1 && n >= 1 && k >= 1);
    assert(ldA >= m && ldB >= k && ldC >= m);
    Ac = gemm_alloc((size_t)GEMM_MC * GEMM_KC);
    Bc = gemm_alloc((size_t)GEMM_KC * GEMM_NC);
    for (jc = 0; jc < n; jc += GEMM_NC) {{
        size_t nc_eff = size_min(GEMM_NC, n - jc);
        for (pc = 0; pc < k; pc += GEMM_KC) {{
            size_t kc_eff = size_min(GEMM_KC, k - pc);
            pack_b(kc_eff, nc_eff, B + pc + jc * ldB, ldB, Bc);
            for (ic = 0; ic < m; ic += GEMM_MC) {{
                size_t mc_eff = size_min(GEMM_MC, m - ic);
                pack_a(kc_eff, mc_eff, A + ic + pc * ldA, ldA, Ac);
                for (jr = 0; jr < nc_eff; jr += GEMM_NR) {{
                    size_t nr_eff = size_min(GEMM_NR, nc_eff - jr);
                    for (ir = 0; ir < mc_eff; ir += GEMM_MR) {{
                        size_t mr_eff = size_min(GEMM_MR, mc_eff - ir);
                        float *c_tile = C + (ic + ir) + (jc + jr) * ldC;
#ifdef GEMM_COUNT_KERNELS
                        gemm_kernel_calls[mr_eff - 1][nr_eff - 1] += 1;
#endif
                        if (mr_eff == GEMM_MR && nr_eff == GEMM_NR) {{
                            ukernels[{params.mr - 1}][{params.nr - 1}](kc_eff, Ac + kc_eff * ir,
                                                                       Bc + kc_eff * jr, c_tile, ldC);
                        }} else {{
                            ukernels[mr_eff - 1][nr_eff - 1](kc_eff, Ac + kc_eff * ir,
                                                             Bc + kc_eff * jr, c_tile, ldC);
                        }}
                    }}
                }}
            }}
        }}
    }}
    free(Ac);
    free(Bc);
}}
"""
    functions = tuple(_DRIVER_HELPERS) + (gemm,)
    text = header + "\n" + "\n".join(functions)
    return CSourceUnit(("<assert.h>", "<stddef.h>", "<stdlib.h>"), functions, text)


# ---------------------------------------------------------------------------
# Reference oracle


def generate_naive_ref() -> CSourceUnit:
    fn = """\
/* Reference GEMM. The k loop ascends for every (i, j), with the multiply and
 * the add rounded separately, so the per-element operation sequence is
 * identical to the blocked kernels'; the axpy-style loop order only improves
 * locality and does not change any intermediate value. */
void naive_gemm(size_t m, size_t n, size_t k,
                const float *A, size_t ldA,
                const float *B, size_t ldB,
                float *C, size_t ldC) {
    size_t j, p, i;
    for (j = 0; j < n; ++j) {
        for (p = 0; p < k; ++p) {
            float b = B[p + j * ldB];
            for (i = 0; i < m; ++i) {
                float prod = A[i + p * ldA] * b;
                C[i + j * ldC] = C[i + j * ldC] + prod;
            }
        }
    }
}
"""
    text = "#include <stddef.h>\n\n" + fn
    return CSourceUnit(("<stddef.h>",), (fn,), text)


# ---------------------------------------------------------------------------
# Bench main


def generate_main(cases: list[BenchCase], mr: int, nr: int) -> CSourceUnit:
    if not cases:
        raise ConfigError("at least one bench case is required")
    rows = "\n".join(
        f'    {{"{c.id}", {c.shape.m}, {c.shape.n}, {c.shape.k}, {c.repetitions}, {int(c.slow)}}},'
        for c in cases
    )
    header = f"""\
/* Benchmark and verification harness over the generated blocked GEMM. */
#define _POSIX_C_SOURCE 200809L

#include <math.h>
#include <stddef.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

void gemm_blocked(size_t m, size_t n, size_t k, const float *A, size_t ldA,
                  const float *B, size_t ldB, float *C, size_t ldC);
void naive_gemm(size_t m, size_t n, size_t k, const float *A, size_t ldA,
                const float *B, size_t ldB, float *C, size_t ldC);

#define BENCH_MR {mr}
#define BENCH_NR {nr}
#define ERR_THRESHOLD {ERR_THRESHOLD}
#define RNG_SEED {RNG_SEED}

typedef struct {{
    const char *id;
    size_t m, n, k;
    int reps;
    int slow;
}} bench_case;

static const bench_case CASES[] = {{
{rows}
}};
"""
    body = """\
static uint32_t rng_state = RNG_SEED;

static uint32_t xorshift32(void) {
    uint32_t x = rng_state;
    x ^= x << 13;
    x ^= x >> 17;
    x ^= x << 5;
    rng_state = x;
    return x;
}

/* uniform in (-1, 1] */
static float rand_unit(void) {
    return (float)((double)xorshift32() / 2147483648.0 - 1.0);
}

static void fill_random(float *buf, size_t count) {
    size_t i;
    for (i = 0; i < count; ++i) {
        buf[i] = rand_unit();
    }
}

static void *xmalloc(size_t bytes) {
    void *p = malloc(bytes);
    if (p == NULL) {
        fprintf(stderr, "allocation of %zu bytes failed\\n", bytes);
        exit(1);
    }
    return p;
}

static double now_seconds(void) {
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (double)ts.tv_sec + (double)ts.tv_nsec * 1e-9;
}

/* element-wise |got - ref| / max(1, |ref|) */
static double max_rel_error(const float *got, const float *ref, size_t count) {
    double worst = 0.0;
    size_t i;
    for (i = 0; i < count; ++i) {
        double denom = fabs((double)ref[i]);
        double err;
        if (denom < 1.0) {
            denom = 1.0;
        }
        err = fabs((double)got[i] - (double)ref[i]) / denom;
        if (err > worst) {
            worst = err;
        }
    }
    return worst;
}

static int run_case(const bench_case *bc) {
    size_t m = bc->m, n = bc->n, k = bc->k;
    float *A = xmalloc(m * k * sizeof(float));
    float *B = xmalloc(k * n * sizeof(float));
    float *C0 = xmalloc(m * n * sizeof(float));
    float *Cblk = xmalloc(m * n * sizeof(float));
    float *Cref = xmalloc(m * n * sizeof(float));
    double elapsed = 0.0, t0, err, gflops;
    int pass, r;

    rng_state = RNG_SEED;
    fill_random(A, m * k);
    fill_random(B, k * n);
    fill_random(C0, m * n);
    memcpy(Cblk, C0, m * n * sizeof(float));
    memcpy(Cref, C0, m * n * sizeof(float));

    t0 = now_seconds();
    gemm_blocked(m, n, k, A, m, B, k, Cblk, m);
    elapsed += now_seconds() - t0;
    for (r = 1; r < bc->reps; ++r) {
        memcpy(Cblk, C0, m * n * sizeof(float));
        t0 = now_seconds();
        gemm_blocked(m, n, k, A, m, B, k, Cblk, m);
        elapsed += now_seconds() - t0;
    }

    naive_gemm(m, n, k, A, m, B, k, Cref, m);
    err = max_rel_error(Cblk, Cref, m * n);
    pass = err <= ERR_THRESHOLD;
    if (elapsed <= 0.0) {
        elapsed = 1e-9;
    }
    gflops = 2.0 * (double)m * (double)n * (double)k * (double)bc->reps / elapsed / 1e9;
    printf("%s,%zu,%zu,%zu,%d,%d,%.3f,%.9g,%s\\n", bc->id, m, n, k,
           BENCH_MR, BENCH_NR, gflops, err, pass ? "PASS" : "FAIL");
    fflush(stdout);

    free(A);
    free(B);
    free(C0);
    free(Cblk);
    free(Cref);
    return pass ? 0 : 1;
}

#ifdef GEMM_COUNT_KERNELS
extern unsigned long gemm_kernel_calls[BENCH_MR][BENCH_NR];

static void dump_kernel_calls(void) {
    int i, j;
    for (i = 0; i < BENCH_MR; ++i) {
        for (j = 0; j < BENCH_NR; ++j) {
            printf("#kernel_calls,%d,%d,%lu\\n", i + 1, j + 1, gemm_kernel_calls[i][j]);
        }
    }
}
#endif

int main(int argc, char **argv) {
    int slow = 0, failures = 0, i;
    size_t ci;
    for (i = 1; i < argc; ++i) {
        if (strcmp(argv[i], "--slow") == 0) {
            slow = 1;
        } else {
            fprintf(stderr, "usage: %s [--slow]\\n", argv[0]);
            return 2;
        }
    }
    for (ci = 0; ci < sizeof(CASES) / sizeof(CASES[0]); ++ci) {
        const bench_case *bc = &CASES[ci];
        if (bc->slow && !slow) {
            printf("%s,%zu,%zu,%zu,%d,%d,0.000,0,SKIP\\n", bc->id, bc->m, bc->n, bc->k,
                   BENCH_MR, BENCH_NR);
            continue;
        }
        failures += run_case(bc);
    }
#ifdef GEMM_COUNT_KERNELS
    dump_kernel_calls();
#endif
    return failures > 0 ? 1 : 0;
}
"""
    text = header + "\n" + body
    includes = ("<math.h>", "<stddef.h>", "<stdint.h>", "<stdio.h>", "<stdlib.h>", "<string.h>", "<time.h>")
    return CSourceUnit(includes, (body,), text)


# ---------------------------------------------------------------------------
# Build files


def generate_makefile(config: KernelConfig) -> str:
    return f"""\
# Build for the generated GEMM bench.
#
# host   - scalar emulation of the vector intrinsics, any C11 compiler
# native - RISC-V build using the real RVV intrinsics
CC ?= cc
NATIVE_CC ?= riscv64-unknown-linux-gnu-gcc
VLEN_BITS ?= {config.vlen_bits}
CFLAGS_EXTRA ?=

HOST_CFLAGS = -std=c11 -O2 -Wall -Wextra -ffp-contract=off -DRVV_EMULATE -DVLEN_BITS=$(VLEN_BITS) $(CFLAGS_EXTRA)
NATIVE_CFLAGS = -std=c11 -O3 -march=rv64gcv -mabi=lp64d $(CFLAGS_EXTRA)

SRC = {kernel_set_filename(config)} gemm_driver.c naive_ref.c bench_main.c
HDR = rvv_compat.h rvv_shim.h

host: bench

bench: $(SRC) $(HDR)
\t$(CC) $(HOST_CFLAGS) -o bench $(SRC) -lm

native: bench_native

bench_native: $(SRC) $(HDR)
\t$(NATIVE_CC) $(NATIVE_CFLAGS) -o bench_native $(SRC) -lm

run-host: bench
\t./bench

clean:
\trm -f bench bench_native

.PHONY: host native run-host clean
"""


RUN_HOST_SH = """\
#!/bin/sh
# Build and run the emulated bench; pass --slow to include the largest cases.
set -e
cd "$(dirname "$0")"
make host
./bench "$@"
"""


def _runtime_header(name: str) -> str:
    return (resources.files("rvvgen") / "runtime" / name).read_text(encoding="utf-8")


def atomic_write(path: Path, text: str, *, executable: bool = False) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if executable:
            os.chmod(tmp, 0o755)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_testbench(config: KernelConfig, out_dir: Path,
                    blocking: BlockingParams | None = None,
                    cases: list[BenchCase] | None = None) -> list[str]:
    """Generate, lower and emit the kernel family plus the full bench tree.

    Returns the list of file names written (relative to out_dir).
    """
    if blocking is None:
        blocking = default_blocking(config.mr, config.nr)
    if (blocking.mr, blocking.nr) != (config.mr, config.nr):
        raise ConfigError(
            f"blocking tile {blocking.mr}x{blocking.nr} does not match kernel family "
            f"{config.mr}x{config.nr}"
        )
    if cases is None:
        cases = default_cases()

    lowered = []
    for sub, mod in build_family(config):
        result = run_pipeline(mod)
        if result.diagnostics:
            raise HarnessError(
                f"kernel {sub.mr}x{sub.nr} did not lower cleanly: {result.diagnostics[0]}"
            )
        lowered.append((sub, result.module))

    files = {
        kernel_set_filename(config): emit_kernel_set(lowered).text,
        "gemm_driver.c": generate_driver(blocking).text,
        "naive_ref.c": generate_naive_ref().text,
        "bench_main.c": generate_main(cases, config.mr, config.nr).text,
        "rvv_compat.h": _runtime_header("rvv_compat.h"),
        "rvv_shim.h": _runtime_header("rvv_shim.h"),
        "Makefile": generate_makefile(config),
        "run_host.sh": RUN_HOST_SH,
    }
    out = Path(out_dir)
    for name, text in files.items():
        atomic_write(out / name, text, executable=(name == "run_host.sh"))
    return list(files)
