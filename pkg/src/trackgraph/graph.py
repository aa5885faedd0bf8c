"""Frame-to-frame association: IOU-pruned bipartite graph construction,
edge weighting, component split and per-component matching."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .appearance import PcaBasis, appearance_deep, appearance_sift
from .core import AppearanceMode, BoundingBox, FeatureBundle, TrackerConfig, iou

# Slack for optimality comparisons during matching refinement; well above
# float accumulation noise, well below any meaningful weight difference.
_OPT_EPS = 1e-12


class NodeSide(enum.Enum):
    PREV = "prev"
    NEXT = "next"


@dataclass(frozen=True)
class GraphNode:
    """A node of the association graph: a track entering the step (prev side)
    or a detection of the incoming frame (next side)."""

    side: NodeSide
    ref: object  # track id (prev) or (frame_index, det_index) pair (next)
    bbox: BoundingBox
    features: FeatureBundle

    @classmethod
    def for_track(cls, track) -> "GraphNode":
        return cls(NodeSide.PREV, track.id, track.last_observation.bbox, track.last_features)

    @classmethod
    def for_detection(cls, det, features: FeatureBundle) -> "GraphNode":
        return cls(NodeSide.NEXT, (det.frame_index, det.det_index), det.bbox, features)

    @property
    def label(self) -> str:
        if self.side is NodeSide.PREV:
            return f"track {self.ref}"
        return f"detection {self.ref}"


@dataclass(frozen=True)
class AssociationGraph:
    prev_nodes: tuple[GraphNode, ...]
    next_nodes: tuple[GraphNode, ...]
    edges: tuple[tuple[int, int, float], ...]  # (prev_index, next_index, weight)


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    total_weight: float


def motion_score(a: BoundingBox, b: BoundingBox) -> float:
    """Spatial consistency between adjacent-frame boxes; plain IOU."""
    return iou(a, b)


def edge_weight(
    prev: GraphNode,
    nxt: GraphNode,
    cfg: TrackerConfig,
    basis: Optional[PcaBasis] = None,
) -> float:
    """Blend of alpha * motion and beta * appearance for one candidate edge."""
    motion = motion_score(prev.bbox, nxt.bbox)
    mode = cfg.appearance_mode
    if mode is AppearanceMode.NONE:
        return cfg.alpha * motion

    for node in (prev, nxt):
        if mode is AppearanceMode.SIFT_HIST:
            if node.features.histogram is None:
                raise ValueError(f"{node.label} has no histogram (required by sift appearance)")
            if node.features.descriptors is None:
                raise ValueError(f"{node.label} has no descriptors (required by sift appearance)")
        else:
            if node.features.deep_vector is None:
                raise ValueError(f"{node.label} has no deep_vector (required by deep appearance)")
    if mode is AppearanceMode.SIFT_HIST:
        app = appearance_sift(prev.features, nxt.features, cfg)
    else:
        if basis is None:
            raise ValueError("deep appearance needs a fitted PCA basis")
        app = appearance_deep(prev.features, nxt.features, basis)
    return cfg.alpha * motion + cfg.beta * app


def build_graph(
    prev: Sequence[GraphNode],
    nxt: Sequence[GraphNode],
    cfg: TrackerConfig,
    basis: Optional[PcaBasis] = None,
) -> AssociationGraph:
    """Bipartite graph holding exactly the pairs whose IOU exceeds the prune threshold."""
    edges = []
    for i, p in enumerate(prev):
        for j, n in enumerate(nxt):
            if iou(p.bbox, n.bbox) > cfg.iou_prune_threshold:
                edges.append((i, j, edge_weight(p, n, cfg, basis)))
    return AssociationGraph(tuple(prev), tuple(nxt), tuple(edges))


def connected_components(g: AssociationGraph) -> list[AssociationGraph]:
    """Split into maximal connected subgraphs; isolated nodes become singletons.

    Components are ordered by their smallest prev index, then smallest next
    index (prev-less components last, by next index); node order inside a
    component follows the parent graph.
    """
    n_prev, n_next = len(g.prev_nodes), len(g.next_nodes)
    parent = list(range(n_prev + n_next))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for pi, ni, _ in g.edges:
        union(pi, n_prev + ni)

    groups: dict[int, tuple[list[int], list[int]]] = {}
    for pi in range(n_prev):
        groups.setdefault(find(pi), ([], []))[0].append(pi)
    for ni in range(n_next):
        groups.setdefault(find(n_prev + ni), ([], []))[1].append(ni)

    comps = []
    for prevs, nexts in groups.values():
        pmap = {gi: li for li, gi in enumerate(prevs)}
        nmap = {gi: li for li, gi in enumerate(nexts)}
        edges = tuple(
            (pmap[pi], nmap[ni], w) for pi, ni, w in g.edges if pi in pmap
        )
        comp = AssociationGraph(
            tuple(g.prev_nodes[i] for i in prevs),
            tuple(g.next_nodes[i] for i in nexts),
            edges,
        )
        key = (prevs[0] if prevs else n_prev + n_next, nexts[0] if nexts else n_prev + n_next)
        comps.append((key, comp))
    comps.sort(key=lambda item: item[0])
    return [c for _, c in comps]


def max_weight_assignment(
    n_prev: int,
    n_next: int,
    edges: Sequence[tuple[int, int, float]],
) -> list[tuple[int, int]]:
    """Maximum-total-weight one-to-one pairing over non-negative edges.

    Returns the lexicographically smallest optimal pair list (ascending prev
    index; unmatched is preferred when weight-neutral). Shared by the tracker's
    component solver and the CLEAR-MOT frame assignment.
    """
    usable = [(p, n, w) for p, n, w in edges if w >= 0]
    if not usable:
        return []

    by_prev: dict[int, list[tuple[int, float]]] = {}
    for p, n, w in usable:
        by_prev.setdefault(p, []).append((n, w))
    for cand in by_prev.values():
        cand.sort()

    def opt(prev_from: int, used_next: frozenset[int]) -> float:
        rows = sorted(p for p in by_prev if p >= prev_from)
        cols = sorted({n for p in rows for n, _ in by_prev[p] if n not in used_next})
        if not rows or not cols:
            return 0.0
        col_of = {n: j for j, n in enumerate(cols)}
        # Extra all-zero columns let any row stay unmatched.
        profit = np.zeros((len(rows), len(cols) + len(rows)))
        for i, p in enumerate(rows):
            for n, w in by_prev[p]:
                if n not in used_next:
                    profit[i, col_of[n]] = w
        ri, ci = linear_sum_assignment(profit, maximize=True)
        return float(profit[ri, ci].sum())

    target = opt(0, frozenset())
    chosen: list[tuple[int, int]] = []
    used: set[int] = set()
    fixed = 0.0
    for p in sorted(by_prev):
        if fixed >= target - _OPT_EPS:
            break  # everything left unmatched is already optimal
        for n, w in by_prev[p]:
            if n in used:
                continue
            rest = opt(p + 1, frozenset(used | {n}))
            if fixed + w + rest >= target - _OPT_EPS:
                chosen.append((p, n))
                used.add(n)
                fixed += w
                break
    return chosen


def _greedy_assignment(edges: Sequence[tuple[int, int, float]]) -> list[tuple[int, int]]:
    taken_p: set[int] = set()
    taken_n: set[int] = set()
    pairs = []
    for p, n, w in sorted(edges, key=lambda e: (-e[2], e[0], e[1])):
        if p not in taken_p and n not in taken_n:
            pairs.append((p, n))
            taken_p.add(p)
            taken_n.add(n)
    return sorted(pairs)


def solve_component(c: AssociationGraph, min_weight: float = 0.0, greedy: bool = False) -> Matching:
    """Best one-to-one matching of the component over edges of weight >= min_weight."""
    admissible = [(p, n, w) for p, n, w in c.edges if w >= min_weight]
    if greedy:
        pairs = _greedy_assignment(admissible)
    else:
        pairs = max_weight_assignment(len(c.prev_nodes), len(c.next_nodes), admissible)

    weight_of = {(p, n): w for p, n, w in c.edges}
    total = 0.0
    seen_p: set[int] = set()
    seen_n: set[int] = set()
    for p, n in pairs:
        if (p, n) not in weight_of:
            raise AssertionError(f"matching used a pair {(p, n)} that is not a graph edge")
        if p in seen_p or n in seen_n:
            raise AssertionError("matching is not one-to-one")
        seen_p.add(p)
        seen_n.add(n)
        total += weight_of[(p, n)]
    return Matching(tuple(sorted(pairs)), total)
