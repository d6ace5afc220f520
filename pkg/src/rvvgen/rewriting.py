"""Greedy pattern rewriting over modules.

A pattern matches a single operation and replaces it with a short sequence of
ops plus a value-replacement map for its results. The driver walks operations
in pre-order (or in seeded-random order under a test flag), rewrites one
operation at a time, applies the value map module-wide, and repeats until no
pattern matches. Rewriting is bounded: exceeding ``|ops| * |patterns| * 4``
attempts aborts, since every shipped pattern strictly lowers the dialect of
the node it touches.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .ir import (
    Block,
    Diagnostic,
    ModuleIR,
    OperationNode,
    ValueRef,
    clone_module,
    substitute_operands,
    verify,
    walk_ops,
)

ALLOWED_OUTPUT_DIALECTS = frozenset({"emitc", "func"})


class PatternError(Exception):
    """A pattern matched an op whose operands violate its precondition."""


@dataclass
class Replacement:
    ops: list[OperationNode]
    value_map: dict[ValueRef, ValueRef] = field(default_factory=dict)


class RewritePattern:
    """Base class. Subclasses declare the ops they match and produce."""

    #: dialects the replacement ops may belong to; the driver enforces this
    output_dialects: frozenset[str] = ALLOWED_OUTPUT_DIALECTS

    def match(self, op: OperationNode) -> bool:
        raise NotImplementedError

    def rewrite(self, op: OperationNode, module: ModuleIR) -> Replacement:
        raise NotImplementedError


@dataclass
class PassResult:
    module: ModuleIR
    rewrites_applied: int
    diagnostics: list[Diagnostic]


def _candidate_sites(module: ModuleIR, patterns: list[RewritePattern]):
    """All (block, index, pattern) triples whose op matches, in pre-order."""
    sites = []

    def visit_block(block: Block) -> None:
        for idx, op in enumerate(block.ops):
            for pattern in patterns:
                if pattern.match(op):
                    sites.append((block, idx, pattern))
                    break
            for region in op.regions:
                for nested in region.blocks:
                    visit_block(nested)

    for fn in module.functions:
        for region in fn.regions:
            for block in region.blocks:
                visit_block(block)
    return sites


def apply_patterns(module: ModuleIR, patterns: list[RewritePattern], *,
                   shuffle_seed: int | None = None) -> PassResult:
    """Rewrite to a fixed point; the input module is left untouched."""
    for pattern in patterns:
        if not pattern.output_dialects <= ALLOWED_OUTPUT_DIALECTS:
            raise ValueError(
                f"{type(pattern).__name__} declares output dialects "
                f"{sorted(pattern.output_dialects)}; only {sorted(ALLOWED_OUTPUT_DIALECTS)} are allowed"
            )
    work = clone_module(module)
    limit = max(1, sum(1 for _ in walk_ops(work))) * max(1, len(patterns)) * 4
    rng = random.Random(shuffle_seed) if shuffle_seed is not None else None
    rewrites = 0
    while True:
        sites = _candidate_sites(work, patterns)
        if not sites:
            break
        block, idx, pattern = rng.choice(sites) if rng is not None else sites[0]
        repl = pattern.rewrite(block.ops[idx], work)
        for new_op in repl.ops:
            if new_op.dialect not in pattern.output_dialects:
                raise PatternError(
                    f"{type(pattern).__name__} produced a {new_op.full_name} op "
                    f"outside its declared output dialects"
                )
        block.ops[idx:idx + 1] = repl.ops
        substitute_operands(work, repl.value_map)
        rewrites += 1
        if rewrites > limit:
            raise RuntimeError(f"rewrite did not converge within {limit} attempts")
    return PassResult(work, rewrites, verify(work))
