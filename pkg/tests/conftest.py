"""Shared fixtures: the 4-device two-layer regression graph and oracle helpers."""

from __future__ import annotations

import itertools

import pytest

from fogpart.model import Device
from fogpart.multilayer import Layer, LayerView, make_layer_view


def fig_devices() -> dict[int, Device]:
    """Four devices whose resource triplets make two natural similarity groups."""
    return {
        1: Device(1, cores=10, cpu_speed=20.0, mem=10.0, storage=10.0),
        2: Device(2, cores=10, cpu_speed=22.0, mem=11.0, storage=11.0),
        3: Device(3, cores=10, cpu_speed=24.0, mem=12.0, storage=12.0),
        4: Device(4, cores=10, cpu_speed=60.0, mem=25.0, storage=25.0),
    }


def triangle_view() -> LayerView:
    """Layer with a unit-weight triangle d1-d2-d3 and an isolated d4."""
    return make_layer_view(Layer.CPU, [1, 2, 3, 4], {(1, 2): 1.0, (1, 3): 1.0, (2, 3): 1.0})


def two_pairs_view() -> LayerView:
    """Layer with unit edges (d1,d2) and (d3,d4)."""
    return make_layer_view(Layer.MEM, [1, 2, 3, 4], {(1, 2): 1.0, (3, 4): 1.0})


@pytest.fixture
def worked_example():
    return fig_devices(), triangle_view(), two_pairs_view()


def set_partitions(items):
    """All set partitions of ``items`` (restricted-growth enumeration)."""
    seq = list(items)
    if not seq:
        yield []
        return

    def rec(i, parts):
        if i == len(seq):
            yield [list(p) for p in parts]
            return
        x = seq[i]
        for p in parts:
            p.append(x)
            yield from rec(i + 1, parts)
            p.pop()
        parts.append([x])
        yield from rec(i + 1, parts)
        parts.pop()

    yield from rec(0, [])


def assignment_of(parts) -> dict:
    return {node: pid for pid, members in enumerate(parts) for node in members}


def best_partition_bruteforce(view, modularity_fn):
    """Exhaustive argmax of modularity over all set partitions of the view."""
    best_q = float("-inf")
    best_parts = None
    for parts in set_partitions(view.nodes):
        q = modularity_fn(view, assignment_of(parts))
        if q > best_q:
            best_q = q
            best_parts = [frozenset(p) for p in parts]
    return best_parts, best_q
