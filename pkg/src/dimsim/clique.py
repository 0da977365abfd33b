"""Conflict graphs over declared intents and right-of-way selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence

from dimsim.harmony import HarmonyMatrix, maneuver_index
from dimsim.topology import Maneuver


class PreconditionError(RuntimeError):
    """Raised when the caller violates a structural precondition (an engine bug)."""


class Node(NamedTuple):
    vid: Hashable
    maneuver: Maneuver

    @property
    def arm(self) -> int:
        return self.maneuver.entry


@dataclass(frozen=True)
class ConflictGraph:
    nodes: tuple[Node, ...]
    adj: Mapping[Node, frozenset[Node]]

    def edges(self) -> set[frozenset[Node]]:
        return {frozenset((u, v)) for u, nbrs in self.adj.items() for v in nbrs}


@dataclass(frozen=True)
class RightOfWaySet:
    winners: frozenset = frozenset()
    clique_maneuvers: tuple[Maneuver, ...] = field(default=())

    def __contains__(self, vid: object) -> bool:
        return vid in self.winners

    def __bool__(self) -> bool:
        return bool(self.winners)

    def __len__(self) -> int:
        return len(self.winners)


def _check_arms(arms: Sequence[int]) -> None:
    if len(set(arms)) != len(arms):
        raise PreconditionError("two intents declared on the same arm")


def build_graph(intents: Iterable[tuple[Hashable, Maneuver]], H: HarmonyMatrix) -> ConflictGraph:
    nodes = tuple(Node(vid, m) for vid, m in intents)
    _check_arms([nd.arm for nd in nodes])
    idx = [maneuver_index(nd.maneuver, H.n) for nd in nodes]
    adj: dict[Node, set[Node]] = {nd: set() for nd in nodes}
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if H.lookup(idx[i], idx[j]):
                adj[nodes[i]].add(nodes[j])
                adj[nodes[j]].add(nodes[i])
    return ConflictGraph(nodes, {k: frozenset(v) for k, v in adj.items()})


def _adjacency(g) -> Mapping:
    return g.adj if isinstance(g, ConflictGraph) else g


def _bron_kerbosch(nbr: Sequence[int]) -> list[int]:
    """Maximal cliques of a graph given as neighbour bitmasks, as bitmasks."""
    out: list[int] = []

    def expand(r: int, p: int, x: int) -> None:
        if not p and not x:
            out.append(r)
            return
        # Tomita pivot: the vertex of P | X with most neighbours in P
        pivot, best, m = 0, -1, p | x
        while m:
            low = m & -m
            u = low.bit_length() - 1
            c = (nbr[u] & p).bit_count()
            if c > best:
                pivot, best = u, c
            m ^= low
        cand = p & ~nbr[pivot]
        while cand:
            low = cand & -cand
            v = low.bit_length() - 1
            expand(r | low, p & nbr[v], x & nbr[v])
            p &= ~low
            x |= low
            cand ^= low

    if nbr:
        expand(0, (1 << len(nbr)) - 1, 0)
    return out


def _members(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def maximal_cliques(g) -> list[frozenset]:
    """All maximal cliques (Bron-Kerbosch with Tomita pivoting).

    ``g`` is a :class:`ConflictGraph` or a plain ``node -> neighbours`` mapping.
    """
    adj = _adjacency(g)
    labels = list(adj)
    pos = {u: i for i, u in enumerate(labels)}
    nbr = [sum(1 << pos[v] for v in adj[u]) for u in labels]
    return [frozenset(labels[i] for i in _members(c)) for c in _bron_kerbosch(nbr)]


def max_cliques(g) -> list[frozenset]:
    """Every clique of maximum cardinality; empty graph gives ``[]``."""
    cliques = maximal_cliques(g)
    if not cliques:
        return []
    best = max(len(c) for c in cliques)
    return [c for c in cliques if len(c) == best]


def _priority_key(clique: Iterable[Node], rank: Mapping[int, int]) -> tuple[int, ...]:
    return tuple(sorted(rank[nd.arm] for nd in clique))


def priority_rank(priority: Sequence[int]) -> dict[int, int]:
    """Map arm index -> rank (0 is the highest priority)."""
    priority = list(priority)
    if len(set(priority)) != len(priority):
        raise ValueError("priority order lists an arm twice")
    return {arm: r for r, arm in enumerate(priority)}


def select_priority_clique(cliques: Sequence[Iterable[Node]], priority: Sequence[int]) -> RightOfWaySet:
    """Pick the clique whose arms, sorted by priority, are lexicographically best."""
    if not cliques:
        return RightOfWaySet()
    rank = priority_rank(priority)
    best = min(cliques, key=lambda c: _priority_key(c, rank))
    members = sorted(best, key=lambda nd: rank[nd.arm])
    return RightOfWaySet(frozenset(nd.vid for nd in members), tuple(nd.maneuver for nd in members))


def decide(intents: Iterable[tuple[Hashable, Maneuver]], H: HarmonyMatrix,
           priority: Sequence[int] | None = None) -> RightOfWaySet:
    """Right-of-way set for the vehicles whose intents are visible.

    Same result as ``select_priority_clique(max_cliques(build_graph(...)))``
    but computed on bitmasks, which keeps exhaustive checks fast.
    """
    intents = list(intents)
    if not intents:
        return RightOfWaySet()
    rank = priority_rank(range(H.n) if priority is None else priority)
    arms = [m.entry for _, m in intents]
    _check_arms(arms)
    idx = [maneuver_index(m, H.n) for _, m in intents]
    rows = H._rows
    k = len(intents)
    nbr = [sum(1 << j for j in range(k) if j != i and rows[idx[i]][idx[j]]) for i in range(k)]
    cliques = _bron_kerbosch(nbr)
    size = max(c.bit_count() for c in cliques)
    best = min((c for c in cliques if c.bit_count() == size),
               key=lambda c: sorted(rank[arms[i]] for i in _members(c)))
    members = sorted(_members(best), key=lambda i: rank[arms[i]])
    return RightOfWaySet(frozenset(intents[i][0] for i in members),
                         tuple(intents[i][1] for i in members))
