"""
暴力对照实现，只在测试中使用。
"""

from typing import Iterable, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from mcrt.base import MatedCrtGraph


def _keys(values: Sequence[float]):
    return [(float(v), k) for k, v in enumerate(values)]


def visible_pairs(values: Sequence[float]) -> Set[Tuple[int, int]]:
    """逐对检查 max(m_i, m_j) ≤ min{m_k : i < k < j}，并列按 (取值, 序号) 比较。"""
    keys = _keys(values)
    pairs = set()
    for i in range(len(keys)):
        lowest = None  # 严格位于 i 与 j 之间的最小键
        for j in range(i + 1, len(keys)):
            if lowest is None or max(keys[i], keys[j]) <= lowest:
                pairs.add((i, j))
            lowest = keys[j] if lowest is None else min(lowest, keys[j])
    return pairs


def brute_force_edges(min_l: Sequence[float], min_r: Sequence[float]) -> Set[Tuple[int, int, str]]:
    edges = {(i, j, "L") for i, j in visible_pairs(min_l)}
    edges |= {(i, j, "R") for i, j in visible_pairs(min_r) if j - i > 1}
    return edges


def transition_matrix(graph: MatedCrtGraph) -> np.ndarray:
    weights = graph.conductance.toarray()
    return weights / weights.sum(axis=1, keepdims=True)


def expected_visits(graph: MatedCrtGraph, v: int, absorbing: Iterable[int]) -> float:
    """(I − Q)^{-1} 的对角元：被吸收前访问 v 的期望次数（含第 0 步）。"""
    dead = set(int(a) for a in absorbing)
    alive = [u for u in range(graph.count) if u not in dead]
    q = transition_matrix(graph)[np.ix_(alive, alive)]
    green = np.linalg.inv(np.eye(len(alive)) - q)
    k = alive.index(v)
    return float(green[k, k])


def to_networkx(graph: MatedCrtGraph) -> nx.Graph:
    """简单图；边的 resistance 为 1/重数。"""
    g = nx.Graph()
    g.add_nodes_from(range(graph.count))
    for i, j in zip(graph.edge_i.tolist(), graph.edge_j.tolist()):
        if g.has_edge(i, j):
            g[i][j]["multiplicity"] += 1
        else:
            g.add_edge(i, j, multiplicity=1)
    for _, _, data in g.edges(data=True):
        data["resistance"] = 1.0 / data["multiplicity"]
    return g


def resistance_to_set(graph: MatedCrtGraph, source: int, sink: Iterable[int]) -> float:
    """稠密 Laplace 矩阵直接求解：source 电势 1、sink 电势 0 时流出电流的倒数。"""
    weights = graph.conductance.toarray()
    lap = np.diag(weights.sum(axis=1)) - weights
    fixed = {int(source)} | {int(v) for v in sink}
    free = [v for v in range(graph.count) if v not in fixed]
    potential = np.zeros(graph.count)
    potential[source] = 1.0
    if free:
        potential[free] = np.linalg.solve(lap[np.ix_(free, free)], -lap[free, source])
    return 1.0 / float(lap[source] @ potential)
