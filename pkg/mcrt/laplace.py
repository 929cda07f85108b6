"""
图上的离散位势论（laplace）。

功能概要：
- harmonic_extend：给定边界取值的离散调和延拓（按重数加权的均值性质）
- dirichlet_energy：Σ_边 (差值)²，n 重边计 n 次
- effective_resistance / green_diag：Dirichlet 原理，Gr(v,v) = deg(v)·R_eff(v, 吸收集)
- tutte_embed：边界固定在凸多边形上的 Tutte 嵌入（两次调和延拓）
- count_crossings：嵌入后真正相交的边对数

求解器：未知数不超过 dense_limit 时稠密 Cholesky 求解；否则 Jacobi 预条件共轭梯度，
残差不达标时退回稀疏 LU。
"""

import logging
import math
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from .base import Embedding, HarmonicSolution, MatedCrtGraph, PlanarStructure
from .errors import ConsistencyError, DomainError, ResourceError, UnsolvableError
from .planar import outer_cycle, planar_structure

DEFAULT_TOLERANCE = 1e-9
DENSE_LIMIT = 2000

VertexValues = Union[Mapping[int, float], Sequence[float], np.ndarray]


def _check_vertex(graph: MatedCrtGraph, v: int) -> int:
    if int(v) != v or not 0 <= v < graph.count:
        raise DomainError(f"顶点越界：{v}")
    return int(v)


def _component_labels(graph: MatedCrtGraph) -> np.ndarray:
    _, labels = csgraph.connected_components(graph.conductance, directed=False)
    return labels


def _require_reachable_boundary(graph: MatedCrtGraph, boundary: np.ndarray) -> None:
    """每个含内部顶点的连通分量都必须含边界顶点。"""
    labels = _component_labels(graph)
    touched = np.zeros(labels.max() + 1, dtype=bool)
    touched[labels[boundary]] = True
    interior = np.ones(graph.count, dtype=bool)
    interior[boundary] = False
    orphans = np.flatnonzero(interior & ~touched[labels])
    if orphans.size:
        raise UnsolvableError(f"{orphans.size} 个内部顶点所在的连通分量不接触边界，例如顶点 {orphans[0]}")


def _solve_columns(
    graph: MatedCrtGraph,
    boundary: np.ndarray,
    data: np.ndarray,
    tolerance: float,
    dense_limit: int = DENSE_LIMIT,
) -> Tuple[np.ndarray, float, str]:
    """
    对 data 的每一列求调和延拓。

    内部方程 (D − W)_II x = W_IB b；返回 (N×m 取值, 均值性质残差, 求解方式)。
    """
    n = graph.count
    columns = data.shape[1]
    values = np.zeros((n, columns))
    values[boundary] = data
    interior = np.ones(n, dtype=bool)
    interior[boundary] = False
    idx = np.flatnonzero(interior)
    if idx.size == 0:
        return values, 0.0, "none"

    weights = graph.conductance
    deg = np.asarray(weights.sum(axis=1)).ravel()[idx]
    w_ii = weights[idx][:, idx]
    rhs = weights[idx][:, boundary] @ data
    system = (sp.diags(deg) - w_ii).tocsr()

    def residual_of(x: np.ndarray) -> float:
        return float(np.max(np.abs(system @ x - rhs) / deg[:, None]))

    if idx.size <= dense_limit:
        x = scipy.linalg.solve(system.toarray(), rhs, assume_a="pos")
        method = "dense"
    else:
        precond = sp.diags(1.0 / deg)
        x = np.zeros((idx.size, columns))
        method = "cg"
        atol = 0.5 * tolerance * float(deg.min())
        for c in range(columns):
            x[:, c], info = spla.cg(system, rhs[:, c], rtol=0.0, atol=atol, maxiter=20 * idx.size, M=precond)
            if info != 0:
                method = "splu"
        if method == "splu" or residual_of(x) > tolerance:
            logging.warning("共轭梯度未达到容差（未知数 %d），改用稀疏 LU", idx.size)
            method = "splu"
            x = spla.splu(system.tocsc()).solve(rhs)

    residual = residual_of(x)
    if residual > tolerance:
        raise ConsistencyError(f"调和延拓残差 {residual:.3e} 超过容差 {tolerance:.1e}")
    values[idx] = x
    return values, residual, method


def harmonic_extend(
    graph: MatedCrtGraph,
    boundary_values: Mapping[int, float],
    tolerance: float = DEFAULT_TOLERANCE,
) -> HarmonicSolution:
    """边界取值固定、内部满足按重数加权均值性质的函数。"""
    if not boundary_values:
        raise DomainError("边界集合不能为空")
    boundary = np.array([_check_vertex(graph, v) for v in boundary_values], dtype=np.int64)
    data = np.array([float(boundary_values[v]) for v in boundary_values], dtype=float)
    if not np.all(np.isfinite(data)):
        raise DomainError("边界取值必须有限")
    _require_reachable_boundary(graph, boundary)

    if np.all(data == data[0]):
        return HarmonicSolution(
            values=np.full(graph.count, data[0]),
            boundary=frozenset(boundary.tolist()),
            residual=0.0,
            tolerance=tolerance,
            method="constant",
        )
    values, residual, method = _solve_columns(graph, boundary, data[:, None], tolerance)
    return HarmonicSolution(
        values=values[:, 0],
        boundary=frozenset(boundary.tolist()),
        residual=residual,
        tolerance=tolerance,
        method=method,
    )


def _as_vertex_array(graph: MatedCrtGraph, values: VertexValues) -> np.ndarray:
    if isinstance(values, Mapping):
        missing = [v for v in range(graph.count) if v not in values]
        if missing:
            raise DomainError(f"缺少 {len(missing)} 个顶点的取值，例如顶点 {missing[0]}")
        array = np.array([float(values[v]) for v in range(graph.count)])
    else:
        array = np.asarray(values, dtype=float)
        if array.shape != (graph.count,):
            raise DomainError(f"取值个数 {array.size} 与顶点数 {graph.count} 不一致")
    if not np.all(np.isfinite(array)):
        raise DomainError("顶点取值必须有限")
    return array


def dirichlet_energy(graph: MatedCrtGraph, values: VertexValues) -> float:
    """离散 Dirichlet 能量，重边按重数计。"""
    array = _as_vertex_array(graph, values)
    diff = array[graph.edge_i] - array[graph.edge_j]
    return float(np.dot(diff, diff))


def effective_resistance(
    graph: MatedCrtGraph,
    source: int,
    sink: Iterable[int],
    tolerance: float = DEFAULT_TOLERANCE,
) -> float:
    """source 到 sink 的有效电阻：1 / (source 处取 1、sink 上取 0 的调和函数的能量)。"""
    source = _check_vertex(graph, source)
    sink = sorted({_check_vertex(graph, v) for v in sink})
    if not sink:
        raise DomainError("sink 不能为空")
    if source in sink:
        raise DomainError(f"source {source} 属于 sink")
    labels = _component_labels(graph)
    own = labels == labels[source]
    reachable = [v for v in sink if own[v]]
    if not reachable:
        raise UnsolvableError("sink 与 source 不连通，有效电阻为无穷")

    # 其他连通分量与 source 无边相连，统一固定为 0，不影响能量
    boundary_values = {int(v): 0.0 for v in np.flatnonzero(~own)}
    boundary_values.update({v: 0.0 for v in reachable})
    boundary_values[source] = 1.0
    solution = harmonic_extend(graph, boundary_values, tolerance)
    energy = dirichlet_energy(graph, solution.values)
    if energy <= 0:
        raise ConsistencyError("单位电势的能量为 0")
    return 1.0 / energy


def green_diag(
    graph: MatedCrtGraph,
    v: int,
    absorbing: Iterable[int],
    tolerance: float = DEFAULT_TOLERANCE,
) -> float:
    """从 v 出发、被吸收前访问 v 的期望次数 = deg(v)·R_eff(v, absorbing)。"""
    absorbing = list(absorbing)
    if not absorbing:
        raise DomainError("吸收集为空：游走不会被杀死，Green 函数为无穷")
    v = _check_vertex(graph, v)
    if v in set(int(a) for a in absorbing):
        raise DomainError(f"顶点 {v} 属于吸收集")
    return float(graph.degree[v]) * effective_resistance(graph, v, absorbing, tolerance)


def unit_circle_positions(count: int, phase: float = 0.0) -> np.ndarray:
    """单位圆上等距的 count 个点（逆时针）。"""
    if count < 3:
        raise DomainError(f"凸多边形至少需要 3 个顶点：{count}")
    angles = phase + 2.0 * math.pi * np.arange(count) / count
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _is_strictly_convex(points: np.ndarray) -> bool:
    edges = np.roll(points, -1, axis=0) - points
    cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    if not (np.all(cross > 0) or np.all(cross < 0)):
        return False
    # 总转角为 ±2π，排除自相交的星形
    turning = np.arctan2(cross, np.einsum("ij,ij->i", edges, np.roll(edges, -1, axis=0)))
    return abs(abs(turning.sum()) - 2.0 * math.pi) < 1e-6


def _same_cycle(a: Sequence[int], b: Sequence[int]) -> bool:
    """a 与 b 是否为同一循环序列（允许旋转与反向）。"""
    if len(a) != len(b) or set(a) != set(b):
        return False
    if not a:
        return True
    k = list(b).index(a[0])
    forward = list(b[k:]) + list(b[:k])
    backward = [forward[0]] + forward[1:][::-1]
    return list(a) == forward or list(a) == backward


def tutte_embed(
    graph: MatedCrtGraph,
    boundary_cycle: Sequence[int],
    positions: Union[Sequence[Sequence[float]], np.ndarray],
    planar: Optional[PlanarStructure] = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Embedding:
    """
    Tutte 嵌入：边界顶点固定在凸多边形上，每个内部顶点位于邻居（按重数加权）的平均位置。

    给定 planar 时，boundary_cycle 必须是其外面序列；否则必须是图中的一个环。
    """
    cycle = [_check_vertex(graph, v) for v in boundary_cycle]
    if len(set(cycle)) != len(cycle):
        raise DomainError("边界环中有重复顶点")
    points = np.asarray(positions, dtype=float)
    if points.shape != (len(cycle), 2) or not np.all(np.isfinite(points)):
        raise DomainError("positions 必须是与边界环等长的有限平面点列")
    if len(cycle) < 3 or not _is_strictly_convex(points):
        raise DomainError("边界位置必须按环序处于严格凸位置")
    if planar is not None:
        if not _same_cycle(cycle, outer_cycle(planar)):
            raise DomainError("boundary_cycle 不是外面的顶点环")
    else:
        weights = graph.conductance
        for u, w in zip(cycle, cycle[1:] + cycle[:1]):
            if weights[u, w] <= 0:
                raise DomainError(f"边界环上的 {u}-{w} 不是图中的边")

    boundary = np.asarray(cycle, dtype=np.int64)
    _require_reachable_boundary(graph, boundary)
    coords, residual, method = _solve_columns(graph, boundary, points, tolerance)
    logging.debug("Tutte 嵌入完成：N=%d 边界=%d 求解=%s", graph.count, boundary.size, method)
    return Embedding(coords=coords, pinned=tuple(cycle), pinned_positions=points, residual=residual)


def count_crossings(graph: MatedCrtGraph, embedding: Embedding, max_edges: int = 20000, block: int = 256) -> int:
    """嵌入后真正相交（不含共享端点）的边对数。"""
    m = graph.edge_count
    if m > max_edges:
        raise ResourceError(f"边数 {m} 超过相交计数上限 {max_edges}")
    p = embedding.coords[graph.edge_i]
    q = embedding.coords[graph.edge_j]
    ei, ej = graph.edge_i, graph.edge_j

    def orient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    total = 0
    for lo in range(0, m, block):
        hi = min(m, lo + block)
        a1, a2 = p[lo:hi, None, :], q[lo:hi, None, :]
        b1, b2 = p[None, :, :], q[None, :, :]
        o1 = orient(a1, a2, b1)
        o2 = orient(a1, a2, b2)
        o3 = orient(b1, b2, a1)
        o4 = orient(b1, b2, a2)
        crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
        shared = (
            (ei[lo:hi, None] == ei[None, :])
            | (ei[lo:hi, None] == ej[None, :])
            | (ej[lo:hi, None] == ei[None, :])
            | (ej[lo:hi, None] == ej[None, :])
        )
        later = np.arange(lo, hi)[:, None] < np.arange(m)[None, :]
        total += int(np.sum(crossing & ~shared & later))
    return total


def circle_embedding(
    graph: MatedCrtGraph,
    planar: Optional[PlanarStructure] = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Tuple[PlanarStructure, Embedding]:
    """外面顶点序列等距固定在单位圆上的 Tutte 嵌入。"""
    if planar is None:
        planar = planar_structure(graph)
    cycle = outer_cycle(planar)
    embedding = tutte_embed(graph, cycle, unit_circle_positions(len(cycle)), planar=planar, tolerance=tolerance)
    return planar, embedding
