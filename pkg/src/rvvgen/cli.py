"""Command-line front end.

Subcommands: ``ir`` prints the kernel IR after any pipeline stage, ``emit``
writes a single lowered kernel as C, ``testbench`` writes the complete bench
tree for a kernel family. Exit codes: 0 success, 1 pipeline or I/O failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .c_emitter import EmitError, emit_c
from .harness import (
    BenchCase,
    BlockingParams,
    HarnessError,
    atomic_write,
    write_testbench,
)
from .kernel_builder import ConfigError, GemmShape, KernelConfig, build_microkernel
from .lowering import STAGE_NAMES, run_pipeline

VERSION_LINE = f"rvvgen {__version__} (kernel interface v1)"


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mr", type=int, required=True, help="tile rows")
    parser.add_argument("--nr", type=int, required=True, help="tile columns")
    parser.add_argument("--vlen", type=int, default=256, choices=(128, 256, 512),
                        help="vector register width in bits")
    parser.add_argument("--dtype", default="f32", choices=("f32",),
                        help="element type")


def _config(args: argparse.Namespace) -> KernelConfig:
    return KernelConfig(args.mr, args.nr, args.dtype, args.vlen)


def parse_cases(text: str) -> list[BenchCase]:
    cases = []
    for i, part in enumerate(text.split(","), start=1):
        dims = part.lower().split("x")
        if len(dims) != 3:
            raise ConfigError(f"case {part!r} is not of the form MxNxK")
        try:
            m, n, k = (int(d) for d in dims)
        except ValueError:
            raise ConfigError(f"case {part!r} has non-integer dimensions") from None
        cases.append(BenchCase(f"C{i}", GemmShape(m, n, k)))
    return cases


def cmd_ir(args: argparse.Namespace) -> int:
    config = _config(args)
    result = run_pipeline(build_microkernel(config), until=args.stage)
    if result.diagnostics:
        for diag in result.diagnostics:
            print(f"error: {diag}", file=sys.stderr)
        return 1
    from .ir import print_ir

    sys.stdout.write(print_ir(result.module))
    return 0


def cmd_emit(args: argparse.Namespace) -> int:
    config = _config(args)
    result = run_pipeline(build_microkernel(config))
    if result.diagnostics:
        for diag in result.diagnostics:
            print(f"error: {diag}", file=sys.stderr)
        return 1
    unit = emit_c(result.module)
    name = f"ukernel_{config.mr}x{config.nr}_vlen{config.vlen_bits}.c"
    atomic_write(Path(args.out) / name, unit.text)
    print(f"wrote {Path(args.out) / name}")
    return 0


def cmd_testbench(args: argparse.Namespace) -> int:
    config = _config(args)
    blocking = BlockingParams(args.mc, args.kc, args.nc, config.mr, config.nr)
    cases = parse_cases(args.cases) if args.cases else None
    written = write_testbench(config, Path(args.out), blocking=blocking, cases=cases)
    print(f"generated {config.mr * config.nr} kernels for vlen={config.vlen_bits}")
    for name in written:
        print(f"  {Path(args.out) / name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rvvgen",
        description="Generate RISC-V Vector GEMM micro-kernels and their test bench.",
    )
    parser.add_argument("--version", action="version", version=VERSION_LINE)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ir = sub.add_parser("ir", help="print kernel IR after a pipeline stage")
    _add_config_flags(p_ir)
    p_ir.add_argument("--stage", default="rvv", choices=STAGE_NAMES,
                      help="pipeline stage to stop after")
    p_ir.set_defaults(func=cmd_ir)

    p_emit = sub.add_parser("emit", help="emit one kernel as C")
    _add_config_flags(p_emit)
    p_emit.add_argument("--out", required=True, help="output directory")
    p_emit.set_defaults(func=cmd_emit)

    p_tb = sub.add_parser("testbench", help="emit the kernel family and bench tree")
    _add_config_flags(p_tb)
    p_tb.add_argument("--out", required=True, help="output directory")
    p_tb.add_argument("--mc", type=int, default=120, help="cache block rows")
    p_tb.add_argument("--kc", type=int, default=256, help="cache block depth")
    p_tb.add_argument("--nc", type=int, default=512, help="cache block columns")
    p_tb.add_argument("--cases", default=None,
                      help="comma-separated MxNxK shapes (default: built-in suite)")
    p_tb.set_defaults(func=cmd_testbench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EmitError, HarnessError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
