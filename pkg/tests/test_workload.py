"""Synthetic workload generation."""
import math
import random

import pytest

from cabinet.workload import (
    BUILTIN_MIXES,
    OperationMix,
    batch_cost,
    generate_batch,
    resolve_mix,
)


def test_half_read_half_update_within_binomial_bound():
    mix = BUILTIN_MIXES["A"]
    batch = generate_batch(mix, 10_000, random.Random(1))
    reads = batch.kind_counts().get("READ", 0)
    sigma = math.sqrt(10_000 * 0.5 * 0.5)
    assert abs(reads - 5_000) <= 4 * sigma


def test_single_read_batch():
    batch = generate_batch(BUILTIN_MIXES["C"], 1, random.Random(2))
    assert batch.size == 1
    assert batch.operations[0][0] == "READ"


def test_transactional_mix_composition():
    mix = BUILTIN_MIXES["tpcc"]
    b = 2_000
    batch = generate_batch(mix, b, random.Random(3))
    counts = batch.kind_counts()
    for kind, p in mix.ratios.items():
        sigma = math.sqrt(b * p * (1 - p))
        assert abs(counts.get(kind, 0) - b * p) <= 4 * sigma, kind


def test_seeded_determinism():
    mix = BUILTIN_MIXES["B"]
    one = generate_batch(mix, 500, random.Random(42), batch_id=7)
    two = generate_batch(mix, 500, random.Random(42), batch_id=7)
    assert one == two
    three = generate_batch(mix, 500, random.Random(43), batch_id=7)
    assert one != three


def test_bad_inputs():
    with pytest.raises(ValueError):
        OperationMix("broken", {"READ": 0.7, "UPDATE": 0.7})
    with pytest.raises(ValueError):
        OperationMix("broken", {})
    with pytest.raises(ValueError):
        OperationMix("broken", {"READ": 1.0}, payload_bytes=0)
    with pytest.raises(ValueError):
        generate_batch(BUILTIN_MIXES["A"], 0, random.Random(1))
    with pytest.raises(ValueError):
        resolve_mix("nope")


def test_resolve_mix_forms():
    assert resolve_mix("A") is BUILTIN_MIXES["A"]
    custom = resolve_mix({"name": "w", "ratios": {"READ": 0.25, "SCAN": 0.75}, "payload_bytes": 64})
    assert custom.ratios["SCAN"] == 0.75
    assert custom.payload_bytes == 64


def test_scan_heavy_batches_cost_more():
    scans = generate_batch(BUILTIN_MIXES["E"], 400, random.Random(5))
    reads = generate_batch(BUILTIN_MIXES["C"], 400, random.Random(5))
    costs = {"SCAN": 4.0}
    assert batch_cost(scans, costs) > batch_cost(reads, costs) == 1.0
    assert batch_cost(scans) == 1.0  # unweighted by default
