"""Generated bench tree: driver text, build flags, and compiled end-to-end runs.

The kernel-call counter tests compare the compiled driver against a Python
simulation of the five blocked loops, so tile dispatch is checked for every
edge residue without inspecting the C.
"""

from __future__ import annotations

import os
import shutil
import subprocess
from collections import Counter
from pathlib import Path

import pytest

from rvvgen.harness import (
    ERR_THRESHOLD,
    RNG_SEED,
    RUN_HOST_SH,
    BenchCase,
    BlockingParams,
    HarnessError,
    atomic_write,
    default_blocking,
    default_cases,
    generate_driver,
    generate_main,
    generate_makefile,
    generate_naive_ref,
    kernel_set_filename,
    write_testbench,
)
from rvvgen.kernel_builder import ConfigError, GemmShape, KernelConfig

EXPECTED_FILES = [
    "ukernels_4x3_vlen128.c", "gemm_driver.c", "naive_ref.c", "bench_main.c",
    "rvv_compat.h", "rvv_shim.h", "Makefile", "run_host.sh",
]


def require_cc():
    cc = shutil.which("cc") or shutil.which("gcc")
    if cc is None:
        pytest.skip("no C compiler on PATH")


def build_and_run(tree: Path, *, cflags_extra: str = "", args: tuple = ()):
    cmd = ["make", "-C", str(tree), "host"]
    if cflags_extra:
        cmd.append(f"CFLAGS_EXTRA={cflags_extra}")
    built = subprocess.run(cmd, capture_output=True, text=True)
    assert built.returncode == 0, built.stderr
    assert "warning" not in built.stderr.lower(), built.stderr
    return subprocess.run([str(tree / "bench"), *args], capture_output=True, text=True)


def csv_rows(stdout: str):
    return [ln.split(",") for ln in stdout.splitlines() if ln and not ln.startswith("#")]


def counter_rows(stdout: str):
    calls = {}
    for ln in stdout.splitlines():
        if ln.startswith("#kernel_calls,"):
            _, mr_eff, nr_eff, count = ln.split(",")
            calls[(int(mr_eff), int(nr_eff))] = int(count)
    return calls


def simulate_calls(m, n, k, p: BlockingParams) -> Counter:
    """Count micro-kernel invocations the blocked loop structure must make."""
    calls = Counter()
    for jc in range(0, n, p.nc):
        nc_eff = min(p.nc, n - jc)
        for _pc in range(0, k, p.kc):
            for ic in range(0, m, p.mc):
                mc_eff = min(p.mc, m - ic)
                for jr in range(0, nc_eff, p.nr):
                    nr_eff = min(p.nr, nc_eff - jr)
                    for ir in range(0, mc_eff, p.mr):
                        mr_eff = min(p.mr, mc_eff - ir)
                        calls[(mr_eff, nr_eff)] += 1
    return calls


# -- defaults and validation ---------------------------------------------------

def test_error_threshold_and_seed_frozen():
    assert ERR_THRESHOLD == "1e-4"
    assert RNG_SEED == "0x2545F491u"


def test_default_blocking():
    assert default_blocking(8, 4) == BlockingParams(mc=120, kc=256, nc=512, mr=8, nr=4)


def test_default_cases_frozen():
    cases = default_cases()
    assert [c.id for c in cases] == ["S1", "S2", "S3", "S4", "S5",
                                     "B1", "B2", "B3", "B4", "B5"]
    squares = {c.id: c.shape for c in cases if c.id.startswith("S")}
    assert squares == {f"S{i}": GemmShape(d, d, d)
                       for i, d in enumerate((1000, 2000, 3000, 4000, 5000), start=1)}
    layers = [(c.shape.m, c.shape.n, c.shape.k) for c in cases if c.id.startswith("B")]
    assert layers == [(1024, 384, 1024), (384, 384, 64), (64, 384, 384),
                      (4096, 384, 1024), (1024, 384, 4096)]
    assert [c.id for c in cases if c.slow] == ["S4", "S5"]
    assert all(c.repetitions == 1 for c in cases)


def test_blocking_params_must_be_positive():
    with pytest.raises(ConfigError):
        BlockingParams(mc=0, kc=1, nc=1, mr=1, nr=1)
    with pytest.raises(ConfigError):
        BlockingParams(mc=1, kc=1, nc=1, mr=1, nr=0)


def test_write_testbench_rejects_mismatched_tile(tmp_path):
    with pytest.raises(ConfigError, match="does not match"):
        write_testbench(KernelConfig(4, 3, vlen_bits=128), tmp_path,
                        blocking=BlockingParams(8, 8, 8, 5, 3))


def test_kernel_set_filename():
    assert kernel_set_filename(KernelConfig(8, 4, vlen_bits=256)) == "ukernels_8x4_vlen256.c"


# -- generated text --------------------------------------------------------------

def test_driver_interior_dispatch_is_baked_in():
    text = generate_driver(BlockingParams(40, 128, 60, 20, 6)).text
    assert "ukernels[19][5]" in text
    assert "ukernels[mr_eff - 1][nr_eff - 1]" in text


def test_driver_buffers_are_cache_aligned():
    text = generate_driver(BlockingParams(40, 128, 60, 20, 6)).text
    assert "aligned_alloc(64," in text


def test_driver_packs_before_dispatch():
    text = generate_driver(BlockingParams(8, 8, 9, 4, 3)).text
    dispatch = text.index("ukernels[mr_eff - 1]")
    assert text.index("pack_a(kc_eff") < dispatch
    assert text.index("pack_b(kc_eff") < dispatch


def test_naive_reference_signature():
    text = generate_naive_ref().text
    assert "void naive_gemm(size_t m, size_t n, size_t k," in text
    assert "ukernel" not in text


def test_main_embeds_cases_threshold_and_seed():
    cases = [BenchCase("C1", GemmShape(5, 7, 9)), BenchCase("Z", GemmShape(1, 1, 1), slow=True)]
    text = generate_main(cases, 4, 3).text
    assert '{"C1", 5, 7, 9, 1, 0},' in text
    assert '{"Z", 1, 1, 1, 1, 1},' in text
    assert f"#define ERR_THRESHOLD {ERR_THRESHOLD}" in text
    assert f"#define RNG_SEED {RNG_SEED}" in text
    assert '"--slow"' in text
    assert "CLOCK_MONOTONIC" in text


def test_main_rejects_empty_case_list():
    with pytest.raises(ConfigError):
        generate_main([], 4, 3)


def test_makefile_flags():
    text = generate_makefile(KernelConfig(4, 3, vlen_bits=128))
    assert "VLEN_BITS ?= 128" in text
    assert "-DVLEN_BITS=$(VLEN_BITS)" in text
    assert "-DRVV_EMULATE" in text
    assert "-ffp-contract=off" in text
    assert "-march=rv64gcv -mabi=lp64d" in text
    assert "ukernels_4x3_vlen128.c" in text
    for target in ("host:", "native:", "run-host:", "clean:"):
        assert target in text


def test_run_host_script_shape():
    assert RUN_HOST_SH.startswith("#!/bin/sh\n")
    assert 'make host' in RUN_HOST_SH and './bench "$@"' in RUN_HOST_SH


# -- file emission ---------------------------------------------------------------

def test_write_testbench_produces_expected_tree(tmp_path):
    names = write_testbench(KernelConfig(4, 3, vlen_bits=128), tmp_path,
                            blocking=BlockingParams(8, 8, 9, 4, 3),
                            cases=[BenchCase("C1", GemmShape(5, 7, 9))])
    assert names == EXPECTED_FILES
    for name in names:
        assert (tmp_path / name).is_file()
    assert os.access(tmp_path / "run_host.sh", os.X_OK)
    assert not list(tmp_path.glob(".*"))  # no temp-file litter


def test_atomic_write_replaces_and_cleans_up(tmp_path):
    target = tmp_path / "x.txt"
    atomic_write(target, "one\n")
    atomic_write(target, "two\n")
    assert target.read_text() == "two\n"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


# -- compiled end-to-end -----------------------------------------------------------

def test_small_family_runs_bit_exact(tmp_path):
    require_cc()
    write_testbench(KernelConfig(4, 3, vlen_bits=128), tmp_path,
                    blocking=BlockingParams(8, 8, 9, 4, 3),
                    cases=[BenchCase("C1", GemmShape(5, 7, 9)),
                           BenchCase("C2", GemmShape(4, 3, 1)),
                           BenchCase("C3", GemmShape(37, 29, 53)),
                           BenchCase("C4", GemmShape(8, 6, 16))])
    run = build_and_run(tmp_path)
    assert run.returncode == 0, run.stdout + run.stderr
    rows = csv_rows(run.stdout)
    assert [r[0] for r in rows] == ["C1", "C2", "C3", "C4"]
    for row in rows:
        assert row[-1] == "PASS"
        assert row[7] == "0"  # emulated run must match the reference bit for bit


def test_weird_blocking_still_correct(tmp_path):
    require_cc()
    write_testbench(KernelConfig(4, 3, vlen_bits=128), tmp_path,
                    blocking=BlockingParams(5, 3, 2, 4, 3),  # nc below nr, mc off-tile
                    cases=[BenchCase("C1", GemmShape(7, 5, 6)),
                           BenchCase("C2", GemmShape(1, 1, 1))])
    run = build_and_run(tmp_path)
    assert run.returncode == 0, run.stdout + run.stderr
    assert all(row[-1] == "PASS" and row[7] == "0" for row in csv_rows(run.stdout))


def test_kernel_dispatch_matches_loop_oracle(tmp_path):
    require_cc()
    blocking = BlockingParams(5, 4, 7, 4, 3)
    shapes = [(m, n, k) for m in range(4, 8) for n in range(3, 6) for k in (1, 5)]
    cases = [BenchCase(f"G{i}", GemmShape(*s)) for i, s in enumerate(shapes, start=1)]
    write_testbench(KernelConfig(4, 3, vlen_bits=128), tmp_path,
                    blocking=blocking, cases=cases)
    run = build_and_run(tmp_path, cflags_extra="-DGEMM_COUNT_KERNELS")
    assert run.returncode == 0, run.stdout + run.stderr
    assert all(row[-1] == "PASS" for row in csv_rows(run.stdout))

    expected = Counter()
    for m, n, k in shapes:
        expected += simulate_calls(m, n, k, blocking)
    observed = counter_rows(run.stdout)
    assert set(observed) == {(mr, nr) for mr in range(1, 5) for nr in range(1, 4)}
    for tile, count in observed.items():
        assert count == expected.get(tile, 0), f"tile {tile}"
    assert sum(observed.values()) == sum(expected.values())


def test_exact_tile_shape_uses_one_kernel_call(tmp_path):
    require_cc()
    write_testbench(KernelConfig(4, 3, vlen_bits=128), tmp_path,
                    blocking=BlockingParams(8, 8, 9, 4, 3),
                    cases=[BenchCase("C1", GemmShape(4, 3, 5))])
    run = build_and_run(tmp_path, cflags_extra="-DGEMM_COUNT_KERNELS")
    assert run.returncode == 0
    observed = counter_rows(run.stdout)
    assert observed[(4, 3)] == 1
    assert sum(observed.values()) == 1


def test_failure_exit_code_when_kernels_are_broken(tmp_path):
    require_cc()
    write_testbench(KernelConfig(4, 3, vlen_bits=128), tmp_path,
                    blocking=BlockingParams(8, 8, 9, 4, 3),
                    cases=[BenchCase("C1", GemmShape(5, 7, 9))])
    # sabotage the driver: skip the packing of A so results are wrong
    driver = tmp_path / "gemm_driver.c"
    text = driver.read_text()
    call = "pack_a(kc_eff, mc_eff,"
    assert text.count(call) == 1
    driver.write_text(text.replace(call, "if (0) " + call))
    run = build_and_run(tmp_path)
    assert run.returncode == 1
    rows = csv_rows(run.stdout)
    assert any(row[-1] == "FAIL" for row in rows)
