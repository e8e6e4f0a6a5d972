"""Graph metric, builders, and connected-subset enumeration.

Distances are cross-checked against a Floyd-Warshall oracle and the subset
enumerator against a plain powerset filter, both written here from scratch.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from adiaprep.lattice import (
    EdgeSet,
    Lattice,
    build_chain,
    build_grid,
    connected_edge_sets,
    disjoint_grouping,
    graph_distance,
    set_distance,
)


def floyd_warshall(lat: Lattice) -> dict[tuple[str, str], float]:
    names = lat.vertices
    dist = {(a, b): (0.0 if a == b else math.inf) for a in names for b in names}
    for u, v in lat.edges:
        dist[(u, v)] = dist[(v, u)] = 1.0
    for k in names:
        for i in names:
            for j in names:
                via = dist[(i, k)] + dist[(k, j)]
                if via < dist[(i, j)]:
                    dist[(i, j)] = via
    return dist


def powerset_edge_sets(lat: Lattice, anchor: int, max_size: int):
    """Reference enumeration: anchored subsets that are connected once the
    supports touching the anchor are included."""
    sets = [set(s) for s in lat.supports]
    mu = set(lat.pairs[anchor])
    touching = {i for i, s in enumerate(sets) if s & mu}

    def connected(idx: set[int]) -> bool:
        if len(idx) <= 1:
            return True
        seen = {next(iter(idx))}
        grew = True
        while grew:
            grew = False
            for j in idx - seen:
                if any(sets[j] & sets[k] for k in seen):
                    seen.add(j)
                    grew = True
        return seen == idx

    out = {}
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(range(len(lat.supports)), size):
            if not any(sets[i] & mu for i in combo):
                continue
            if connected(set(combo) | touching):
                out[frozenset(combo)] = connected(set(combo))
    return out


@pytest.mark.parametrize("lat", [build_chain(6, 2), build_grid(3, 2, 2),
                                 build_chain(4, 2, thermal=False)])
def test_distances_match_floyd_warshall(lat):
    oracle = floyd_warshall(lat)
    for a in lat.vertices:
        for b in lat.vertices:
            assert lat.distance(a, b) == oracle[(a, b)]
    assert lat.diameter == max(oracle.values())


def test_thermal_three_chain_layout():
    lat = build_chain(3, 2)
    assert lat.vertices == ("s0", "a0", "s1", "a1", "s2", "a2")
    assert set(map(frozenset, lat.supports)) == {frozenset({"s0", "s1"}),
                                                 frozenset({"s1", "s2"})}
    assert lat.pairs == (("s0", "a0"), ("s1", "a1"), ("s2", "a2"))
    assert lat.interaction_length == 1
    assert lat.system == ("s0", "s1", "s2")
    assert lat.dim == 64


def test_single_site_chain_has_on_site_support():
    lat = build_chain(1, 3)
    assert lat.supports == (("s0",),)
    assert lat.pairs == (("s0", "a0"),)
    assert lat.dim == 9


def test_bond_layout_chain():
    lat = build_chain(3, 2, thermal=False)
    assert lat.pairs == (("v0r", "v1l"), ("v1r", "v2l"))
    assert set(lat.supports[1]) == {"v1l", "v1r"}
    assert lat.system == () and lat.ancillas == ()
    with pytest.raises(ValueError):
        build_chain(1, 2, thermal=False)


def test_grid_layout_and_metric():
    lat = build_grid(2, 2, 2)
    assert lat.n_vertices == 8
    assert len(lat.supports) == 4
    assert lat.distance("s0_0", "s1_1") == 2
    assert lat.distance("a0_0", "a1_1") == 4


def test_dim_cap_enforced():
    with pytest.raises(ValueError):
        build_chain(7, 2)  # 2^14 vertices' worth of amplitudes
    build_chain(6, 2)  # exactly at the cap


def test_validation_errors():
    with pytest.raises(ValueError):
        Lattice(vertices=("a", "a"), local_dim=2, edges=(), supports=(), pairs=())
    with pytest.raises(ValueError):
        Lattice(vertices=("a", "b"), local_dim=1, edges=(), supports=(), pairs=())
    with pytest.raises(ValueError):
        Lattice(vertices=("a", "b"), local_dim=2, edges=(("a", "a"),),
                supports=(), pairs=())
    with pytest.raises(ValueError):  # support vertex not covered by a pair
        Lattice(vertices=("a", "b", "c"), local_dim=2, edges=(("a", "b"),),
                supports=(("c",),), pairs=(("a", "b"),))
    with pytest.raises(ValueError):  # vertex reused across pairs
        Lattice(vertices=("a", "b", "c"), local_dim=2, edges=(),
                supports=(), pairs=(("a", "b"), ("b", "c")))
    with pytest.raises(ValueError):  # system marking must partition
        Lattice(vertices=("a", "b"), local_dim=2, edges=(), supports=(),
                pairs=(("a", "b"),), system=("a",), ancillas=("a",))


def test_distance_helpers():
    lat = build_chain(3, 2)
    assert graph_distance(lat, "a0", "a2") == 4
    assert set_distance(lat, {"s0", "a0"}, {"s2"}) == 2
    assert set_distance(lat, (), {"s0"}) == math.inf
    with pytest.raises(ValueError):
        lat.distance("s0", "nope")


def test_supports_touching():
    lat = build_chain(3, 2)
    assert lat.supports_touching(0) == (0,)
    assert lat.supports_touching(1) == (0, 1)
    assert lat.supports_touching(2) == (1,)


@pytest.mark.parametrize("lat,anchor,max_size", [
    (build_chain(6, 2), 2, 3),
    (build_chain(4, 2), 0, 3),
    (build_grid(2, 2, 2), 0, 2),
])
def test_connected_edge_sets_match_powerset_filter(lat, anchor, max_size):
    oracle = powerset_edge_sets(lat, anchor, max_size)
    got = connected_edge_sets(lat, anchor, max_size)
    assert {e.members for e in got} == set(oracle)
    for e in got:
        assert e.connected == oracle[e.members]
    # deterministic order: by size, then lexicographically
    keys = [(len(e.members), e.sorted_members()) for e in got]
    assert keys == sorted(keys)


def test_connected_edge_sets_empty_flag_and_errors():
    lat = build_chain(3, 2)
    with_empty = connected_edge_sets(lat, 0, 1, include_empty=True)
    assert with_empty[0] == EdgeSet(members=frozenset(), connected=True)
    assert connected_edge_sets(lat, 0, 0) == []
    with pytest.raises(ValueError):
        connected_edge_sets(lat, 9, 1)
    with pytest.raises(ValueError):
        connected_edge_sets(lat, 0, -1)


def test_disjoint_grouping_example_and_invariants():
    groups = disjoint_grouping([("s0", "s1"), ("s2", "s3"), ("s1", "s2")])
    assert groups == [[0, 1], [2]]
    rng = np.random.default_rng(7)
    for _ in range(20):
        sups = [tuple(rng.choice(12, size=2, replace=False).tolist())
                for _ in range(rng.integers(1, 8))]
        groups = disjoint_grouping(sups)
        flat = [i for g in groups for i in g]
        assert flat == list(range(len(sups)))
        for g in groups:
            for a, b in itertools.combinations(g, 2):
                assert not set(sups[a]) & set(sups[b])
