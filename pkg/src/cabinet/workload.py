"""Synthetic operation batches with configurable type mixes.

Mixes mirror the usual key-value benchmark workloads (read/update/scan/
insert ratios) and a transactional mix, but no database runs anywhere:
batches are opaque payloads to the replication layer, and execution cost
is modelled by the simulator's per-node service time (optionally weighted
per operation kind).
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

__all__ = [
    "Batch",
    "OperationMix",
    "BUILTIN_MIXES",
    "batch_cost",
    "generate_batch",
    "resolve_mix",
]

KV_KINDS = ("READ", "UPDATE", "SCAN", "INSERT")

RATIO_TOL = 1e-9


@dataclass(frozen=True)
class OperationMix:
    """Named distribution over operation kinds plus per-op payload size."""

    name: str
    ratios: dict[str, float]
    payload_bytes: int = 100

    def __post_init__(self):
        if not self.ratios:
            raise ValueError("mix needs at least one operation kind")
        if any(p < 0 for p in self.ratios.values()):
            raise ValueError("ratios must be nonnegative")
        if not math.isclose(sum(self.ratios.values()), 1.0, rel_tol=0, abs_tol=RATIO_TOL):
            raise ValueError(f"ratios of mix {self.name!r} must sum to 1")
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be positive")


# Default mix tables; editable via scenario files, not asserted constants.
BUILTIN_MIXES: dict[str, OperationMix] = {
    "A": OperationMix("A", {"READ": 0.5, "UPDATE": 0.5}),
    "B": OperationMix("B", {"READ": 0.95, "UPDATE": 0.05}),
    "C": OperationMix("C", {"READ": 1.0}),
    "D": OperationMix("D", {"READ": 0.95, "INSERT": 0.05}),
    "E": OperationMix("E", {"SCAN": 0.95, "INSERT": 0.05}),
    "F": OperationMix("F", {"READ": 0.5, "UPDATE": 0.5}),
    "tpcc": OperationMix(
        "tpcc",
        {
            "NEW_ORDER": 0.45,
            "PAYMENT": 0.43,
            "ORDER_STATUS": 0.04,
            "DELIVERY": 0.04,
            "STOCK_LEVEL": 0.04,
        },
        payload_bytes=400,
    ),
}


@dataclass(frozen=True)
class Batch:
    """A block of b operations replicated as one log entry."""

    batch_id: int
    operations: tuple[tuple[str, int, int], ...]  # (kind, key, payload_bytes)

    @property
    def size(self) -> int:
        return len(self.operations)

    def kind_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for kind, _, _ in self.operations:
            counts[kind] = counts.get(kind, 0) + 1
        return counts


def resolve_mix(spec) -> OperationMix:
    """Accept a builtin mix name, an OperationMix, or a ratio mapping."""
    if isinstance(spec, OperationMix):
        return spec
    if isinstance(spec, str):
        try:
            return BUILTIN_MIXES[spec]
        except KeyError:
            raise ValueError(f"unknown mix {spec!r}; builtin: {sorted(BUILTIN_MIXES)}") from None
    if isinstance(spec, dict):
        payload = int(spec.get("payload_bytes", 100))
        ratios = {str(k): float(v) for k, v in spec.get("ratios", spec).items() if k != "payload_bytes"}
        return OperationMix(str(spec.get("name", "custom")), ratios, payload)
    raise TypeError(f"cannot resolve mix from {type(spec).__name__}")


def generate_batch(mix: OperationMix, b: int, rng: random.Random, batch_id: int = 0) -> Batch:
    """Sample b operations i.i.d. from the mix; deterministic under the rng seed."""
    if b < 1:
        raise ValueError("batch size must be >= 1")
    kinds = list(mix.ratios)
    weights = [mix.ratios[k] for k in kinds]
    chosen = rng.choices(kinds, weights=weights, k=b)
    ops = tuple((kind, rng.randrange(1 << 30), mix.payload_bytes) for kind in chosen)
    return Batch(batch_id=batch_id, operations=ops)


def batch_cost(batch: Batch, kind_costs: dict[str, float] | None = None) -> float:
    """Mean per-operation cost factor; 1.0 unless kinds are weighted."""
    if not kind_costs:
        return 1.0
    total = sum(kind_costs.get(kind, 1.0) for kind, _, _ in batch.operations)
    return total / batch.size
