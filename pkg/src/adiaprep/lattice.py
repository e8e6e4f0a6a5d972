"""Interaction graphs for paired-vertex models.

A lattice is a finite vertex set carrying a local dimension, a graph metric
(edge hops), a list of interaction supports, and a perfect pairing of the
vertices that the target-state construction entangles.  Chains come in two
flavors: a "thermal" layout with one ancilla glued to every system site,
and a bond layout where the pairs live on the links between node blocks.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

__all__ = [
    "Lattice",
    "EdgeSet",
    "build_chain",
    "build_grid",
    "graph_distance",
    "set_distance",
    "connected_edge_sets",
    "disjoint_grouping",
]

DIM_CAP = 2**13


@dataclass(frozen=True)
class Lattice:
    """Finite interaction graph with vertex pairing.

    vertices fixes the canonical tensor ordering: basis states are labelled
    lexicographically with the digit of the *last* vertex varying fastest.
    supports are the interaction regions; pairs is a partial matching that
    must cover every support vertex exactly once.  system/ancillas give the
    thermal-mode split and stay empty for bond layouts.
    """

    vertices: tuple[str, ...]
    local_dim: int
    edges: tuple[tuple[str, str], ...]
    supports: tuple[tuple[str, ...], ...]
    pairs: tuple[tuple[str, str], ...]
    system: tuple[str, ...] = field(default=())
    ancillas: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.local_dim < 2:
            raise ValueError(f"local_dim must be >= 2, got {self.local_dim}")
        if not self.vertices:
            raise ValueError("lattice needs at least one vertex")
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("duplicate vertex names")
        if len(self.vertices) * math.log2(self.local_dim) > math.log2(DIM_CAP) + 1e-9:
            raise ValueError(
                f"Hilbert dimension {self.local_dim}**{len(self.vertices)} exceeds cap {DIM_CAP}"
            )
        known = set(self.vertices)
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u!r}")
            if u not in known or v not in known:
                raise ValueError(f"edge ({u!r}, {v!r}) references unknown vertex")
        for sup in self.supports:
            if not sup:
                raise ValueError("empty interaction support")
            if len(set(sup)) != len(sup) or any(v not in known for v in sup):
                raise ValueError(f"bad support {sup!r}")
        seen_paired: set[str] = set()
        for u, v in self.pairs:
            if u == v or u not in known or v not in known:
                raise ValueError(f"bad pair ({u!r}, {v!r})")
            if u in seen_paired or v in seen_paired:
                raise ValueError(f"vertex reused across pairs in ({u!r}, {v!r})")
            seen_paired.update((u, v))
        for sup in self.supports:
            for v in sup:
                if v not in seen_paired:
                    raise ValueError(f"support vertex {v!r} not covered by any pair")
        if self.system or self.ancillas:
            if set(self.system) | set(self.ancillas) != known or set(self.system) & set(self.ancillas):
                raise ValueError("system/ancilla marking must partition the vertices")

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def dim(self) -> int:
        return self.local_dim ** len(self.vertices)

    @cached_property
    def _dist(self) -> dict[str, dict[str, float]]:
        adj: dict[str, list[str]] = {v: [] for v in self.vertices}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        table: dict[str, dict[str, float]] = {}
        for src in self.vertices:
            d = {v: math.inf for v in self.vertices}
            d[src] = 0
            queue = deque([src])
            while queue:
                cur = queue.popleft()
                for nxt in adj[cur]:
                    if d[nxt] > d[cur] + 1:
                        d[nxt] = d[cur] + 1
                        queue.append(nxt)
            table[src] = d
        return table

    def distance(self, a: str, b: str) -> float:
        """Graph distance in edge hops; math.inf when disconnected."""
        try:
            return self._dist[a][b]
        except KeyError as exc:
            raise ValueError(f"unknown vertex {exc.args[0]!r}") from None

    @cached_property
    def diameter(self) -> float:
        return max(self._dist[u][v] for u in self.vertices for v in self.vertices)

    @property
    def interaction_length(self) -> float:
        """Largest pairwise distance inside any single support."""
        best = 0.0
        for sup in self.supports:
            for a, b in itertools.combinations(sup, 2):
                best = max(best, self.distance(a, b))
        return best

    def supports_touching(self, pair_index: int) -> tuple[int, ...]:
        """Indices of supports sharing a vertex with the given pair."""
        mu = set(self.pairs[pair_index])
        return tuple(i for i, sup in enumerate(self.supports) if mu & set(sup))


def graph_distance(lat: Lattice, a: str, b: str) -> float:
    return lat.distance(a, b)


def set_distance(lat: Lattice, group_a: Iterable[str], group_b: Iterable[str]) -> float:
    """min over cross pairs of the graph distance; inf for empty arguments."""
    best = math.inf
    for a in group_a:
        for b in group_b:
            best = min(best, lat.distance(a, b))
    return best


def build_chain(n_sites: int, local_dim: int, thermal: bool = True) -> Lattice:
    """Open chain of n_sites.

    thermal=True: one ancilla per site, pairs (s_i, a_i), nearest-neighbour
    two-site supports (a single on-site support when n_sites == 1).
    thermal=False: bond layout; every internal node carries a left and a
    right leg, pairs sit on the links, supports are the node leg sets.
    Needs n_sites >= 2 since a single node has no legs to pair.
    """
    if n_sites < 1:
        raise ValueError(f"n_sites must be >= 1, got {n_sites}")
    if thermal:
        sys_v = tuple(f"s{i}" for i in range(n_sites))
        anc_v = tuple(f"a{i}" for i in range(n_sites))
        vertices = tuple(itertools.chain.from_iterable(zip(sys_v, anc_v)))
        edges = [(f"s{i}", f"a{i}") for i in range(n_sites)]
        edges += [(f"s{i}", f"s{i+1}") for i in range(n_sites - 1)]
        pairs = tuple((f"s{i}", f"a{i}") for i in range(n_sites))
        if n_sites == 1:
            supports: tuple[tuple[str, ...], ...] = (("s0",),)
        else:
            supports = tuple((f"s{i}", f"s{i+1}") for i in range(n_sites - 1))
        return Lattice(vertices=vertices, local_dim=local_dim, edges=tuple(edges),
                       supports=supports, pairs=pairs, system=sys_v, ancillas=anc_v)
    if n_sites < 2:
        raise ValueError("bond layout needs n_sites >= 2")
    vertices = []
    supports = []
    for i in range(n_sites):
        legs = []
        if i > 0:
            legs.append(f"v{i}l")
        if i < n_sites - 1:
            legs.append(f"v{i}r")
        vertices.extend(legs)
        supports.append(tuple(legs))
    pairs = tuple((f"v{i}r", f"v{i+1}l") for i in range(n_sites - 1))
    edges = list(pairs)
    edges += [(f"v{i}l", f"v{i}r") for i in range(1, n_sites - 1)]
    return Lattice(vertices=tuple(vertices), local_dim=local_dim, edges=tuple(edges),
                   supports=tuple(supports), pairs=pairs)


def build_grid(nx: int, ny: int, local_dim: int) -> Lattice:
    """Thermal-mode open grid with nearest-neighbour supports."""
    if nx < 1 or ny < 1:
        raise ValueError("grid extents must be >= 1")
    if nx * ny == 1:
        return build_chain(1, local_dim, thermal=True)
    sites = [(i, j) for i in range(nx) for j in range(ny)]
    sname = {p: f"s{p[0]}_{p[1]}" for p in sites}
    aname = {p: f"a{p[0]}_{p[1]}" for p in sites}
    vertices = tuple(itertools.chain.from_iterable((sname[p], aname[p]) for p in sites))
    edges = [(sname[p], aname[p]) for p in sites]
    supports = []
    for i, j in sites:
        if i + 1 < nx:
            supports.append((sname[(i, j)], sname[(i + 1, j)]))
            edges.append((sname[(i, j)], sname[(i + 1, j)]))
        if j + 1 < ny:
            supports.append((sname[(i, j)], sname[(i, j + 1)]))
            edges.append((sname[(i, j)], sname[(i, j + 1)]))
    pairs = tuple((sname[p], aname[p]) for p in sites)
    return Lattice(vertices=vertices, local_dim=local_dim, edges=tuple(edges),
                   supports=tuple(supports), pairs=pairs,
                   system=tuple(sname[p] for p in sites),
                   ancillas=tuple(aname[p] for p in sites))


@dataclass(frozen=True)
class EdgeSet:
    """A subset of support indices; `connected` refers to the members alone
    under the shared-vertex adjacency (the empty set counts as connected)."""

    members: frozenset[int]
    connected: bool

    def sorted_members(self) -> tuple[int, ...]:
        return tuple(sorted(self.members))


def _support_sets(lat: Lattice) -> list[set[str]]:
    return [set(sup) for sup in lat.supports]


def _members_connected(sets: Sequence[set[str]], idx: Iterable[int]) -> bool:
    idx = list(idx)
    if len(idx) <= 1:
        return True
    remaining = set(idx)
    stack = [idx[0]]
    remaining.discard(idx[0])
    while stack:
        cur = stack.pop()
        linked = [j for j in remaining if sets[cur] & sets[j]]
        for j in linked:
            remaining.discard(j)
            stack.append(j)
    return not remaining


def connected_edge_sets(lat: Lattice, anchor_pair: int, max_size: int,
                        include_empty: bool = False) -> list[EdgeSet]:
    """Subsets of supports of size <= max_size that can contribute around an
    anchor pair: the subset shares a vertex with the anchor and becomes
    connected once the supports touching the anchor are thrown in.

    Output is deterministic: ordered by size, then lexicographically.  The
    empty set is excluded unless include_empty is set.
    """
    if not 0 <= anchor_pair < len(lat.pairs):
        raise ValueError(f"anchor pair index {anchor_pair} out of range")
    if max_size < 0:
        raise ValueError(f"max_size must be >= 0, got {max_size}")
    sets = _support_sets(lat)
    mu = set(lat.pairs[anchor_pair])
    touching = [i for i, s in enumerate(sets) if s & mu]
    out: list[EdgeSet] = []
    if include_empty:
        out.append(EdgeSet(members=frozenset(), connected=True))
    n = len(lat.supports)
    for size in range(1, min(max_size, n) + 1):
        for combo in itertools.combinations(range(n), size):
            if not any(sets[i] & mu for i in combo):
                continue
            if not _members_connected(sets, set(combo) | set(touching)):
                continue
            out.append(EdgeSet(members=frozenset(combo),
                               connected=_members_connected(sets, combo)))
    return out


def disjoint_grouping(supports: Sequence[Iterable[str]]) -> list[list[int]]:
    """Greedy left-to-right grouping of consecutive pairwise-disjoint supports.

    Returns index groups partitioning range(len(supports)) in order; a
    support clashing with its current group starts a new one, so singletons
    are the worst case.
    """
    vsets = [set(s) for s in supports]
    groups: list[list[int]] = []
    current: list[int] = []
    for i, vs in enumerate(vsets):
        if current and any(vs & vsets[j] for j in current):
            groups.append(current)
            current = [i]
        else:
            current.append(i)
    if current:
        groups.append(current)
    return groups
