"""
由路径对构造 mated-CRT 图（map-core）。

功能概要：
- cell_minima：每个 ε-单元上 L、R 的网格最小值
- build_graph：按 (1.1) 的“谷可见”关系建边，单调栈实现，复杂度 O(N + 边数)
- scale_check：对 L、R 分别做正数缩放后边集不变
- generate_map：路径 → 单元 → 图 的完整流水线
- graph_ball / summary：图球与汇总统计

可见关系：i < j 在 L 侧相邻，当且仅当 max(m_i, m_j) ≤ min{m_k : i < k < j}。
相等值按 (取值, 单元序号) 打破，即较早的单元视为更低；无并列时与非严格 ≤ 完全一致。
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csgraph

from .base import SIDE_L, SIDE_R, CellMinSeq, MatedCrtGraph, PathPair
from .errors import DomainError
from .paths import sample_brownian_pair, sample_lattice_walk

DEFAULT_MESH_DIVISOR = 64
DEFAULT_MIN_CELL_SAMPLES = 8


@dataclass(frozen=True)
class MatedCrtMap:
    """一次生成的结果：路径、单元最小值与图。"""

    path: PathPair
    cells: CellMinSeq
    graph: MatedCrtGraph


def _grid_ratio(value: float, mesh: float, label: str) -> int:
    """value / mesh 必须在舍入误差内为正整数。"""
    ratio = value / mesh
    steps = int(round(ratio))
    if steps < 1 or abs(ratio - steps) > 1e-6 * max(1.0, ratio):
        raise DomainError(f"{label}={value} 不是 mesh={mesh} 的整数倍")
    return steps


def _block_minima(samples: np.ndarray, k: int, count: int, mesh: float) -> Tuple[np.ndarray, np.ndarray]:
    """每个长度为 k+1（两端包含）的窗口的最小值与最早的 argmin 时刻。"""
    blocks = samples[: count * k].reshape(count, k)
    ends = samples[k : count * k + 1 : k]
    block_min = blocks.min(axis=1)
    block_arg = blocks.argmin(axis=1)
    use_end = ends < block_min
    minima = np.where(use_end, ends, block_min)
    offsets = np.where(use_end, k, block_arg)
    times = (np.arange(count) * k + offsets) * mesh
    return minima, times


def check_cell_resolution(
    epsilon: float,
    mesh: float,
    horizon: float,
    kind: str = "brownian",
    min_cell_samples: int = DEFAULT_MIN_CELL_SAMPLES,
) -> int:
    """校验 ε、mesh 与时间窗口的关系，返回每个单元的网格步数。"""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise DomainError(f"epsilon 必须为正：{epsilon}")
    if epsilon > horizon * (1 + 1e-9):
        raise DomainError(f"epsilon={epsilon} 大于时间窗口 {horizon}")
    k = _grid_ratio(epsilon, mesh, "epsilon")
    if kind == "brownian" and k < min_cell_samples:
        raise DomainError(
            f"epsilon={epsilon} 过小：每个单元只有 {k} 步，至少需要 {min_cell_samples} 步"
        )
    return k


def cell_minima(
    path: PathPair,
    epsilon: float,
    min_cell_samples: int = DEFAULT_MIN_CELL_SAMPLES,
) -> CellMinSeq:
    """
    计算单元最小值。

    单元 i 覆盖网格时刻 [iε, (i+1)ε]（两端包含），相邻单元共享端点。
    布朗路径要求每个单元至少 min_cell_samples 步；格点路径的最小值是精确的，一步即可。
    """
    k = check_cell_resolution(epsilon, path.mesh, path.horizon, path.kind, min_cell_samples)
    count = int(math.floor(path.horizon / epsilon + 1e-9))
    if count * k + 1 > path.count:
        raise DomainError("路径采样点不足以覆盖全部单元")
    min_l, arg_l = _block_minima(path.samples_l, k, count, path.mesh)
    min_r, arg_r = _block_minima(path.samples_r, k, count, path.mesh)
    return CellMinSeq(
        epsilon=float(epsilon),
        count=count,
        min_l=min_l,
        min_r=min_r,
        argmin_l=arg_l,
        argmin_r=arg_r,
        samples_per_cell=k,
    )


def tie_ranks(values: Sequence[float]) -> np.ndarray:
    """按 (取值, 序号) 排名，得到两两不同的比较键。"""
    values = np.asarray(values, dtype=float)
    order = np.lexsort((np.arange(values.size), values))
    ranks = np.empty(values.size, dtype=np.int64)
    ranks[order] = np.arange(values.size)
    return ranks


def visibility_pairs(values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    单调栈求全部可见对 (i, j)。

    栈中保存当前前缀的后缀最小值（自底向上递增）。处理 j 时，弹出键大于 j 的元素，
    它们都与 j 可见；剩下的栈顶也与 j 可见。
    """
    keys = tie_ranks(values).tolist()
    stack: List[int] = []
    left: List[int] = []
    right: List[int] = []
    for j, key in enumerate(keys):
        while stack and keys[stack[-1]] > key:
            left.append(stack.pop())
            right.append(j)
        if stack:
            left.append(stack[-1])
            right.append(j)
        stack.append(j)
    return np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64)


def _record_flags(values: np.ndarray) -> np.ndarray:
    """从左或从右看是（非严格）前缀最小值的位置。"""
    before = np.concatenate([[np.inf], np.minimum.accumulate(values)[:-1]])
    after = np.concatenate([np.minimum.accumulate(values[::-1])[:-1][::-1], [np.inf]])
    return (values <= before) | (values <= after)


def boundary_flags(cells: CellMinSeq) -> np.ndarray:
    """可能与窗口外单元相邻的顶点：L 或 R 的左右纪录点，以及两端点。"""
    flags = _record_flags(cells.min_l) | _record_flags(cells.min_r)
    flags[0] = True
    flags[-1] = True
    return flags


def build_graph(cells: CellMinSeq) -> MatedCrtGraph:
    """
    构造 mated-CRT 图。

    L 侧：全部可见对（含相邻对，相邻对只记一条 L 边）。
    R 侧：|i − j| > 1 的可见对。两侧同时可见的非相邻对形成二重边。
    """
    if cells.count < 2:
        raise DomainError(f"至少需要 2 个单元，实际 {cells.count}")
    l_i, l_j = visibility_pairs(cells.min_l)
    r_i, r_j = visibility_pairs(cells.min_r)
    far = (r_j - r_i) > 1
    r_i, r_j = r_i[far], r_j[far]
    graph = MatedCrtGraph(
        count=cells.count,
        edge_i=np.concatenate([l_i, r_i]),
        edge_j=np.concatenate([l_j, r_j]),
        edge_side=np.concatenate(
            [np.full(l_i.size, SIDE_L, dtype=np.int8), np.full(r_i.size, SIDE_R, dtype=np.int8)]
        ),
        boundary_flags=boundary_flags(cells),
    )
    logging.debug("建图完成：N=%d E=%d", graph.count, graph.edge_count)
    return graph


def scale_check(
    path: PathPair,
    a: float,
    b: float,
    epsilon: float,
    min_cell_samples: int = DEFAULT_MIN_CELL_SAMPLES,
) -> bool:
    """(a·L, b·R) 与 (L, R) 生成的边集是否完全相同。"""
    if not (a > 0 and b > 0):
        raise DomainError(f"缩放因子必须为正：a={a}, b={b}")
    base = build_graph(cell_minima(path, epsilon, min_cell_samples))
    scaled = build_graph(cell_minima(path.scaled(a, b), epsilon, min_cell_samples))
    return base.same_edges(scaled)


def generate_map(
    gamma: float,
    epsilon: float,
    horizon: float,
    seed: int,
    mesh: Optional[float] = None,
    kind: str = "brownian",
    min_cell_samples: int = DEFAULT_MIN_CELL_SAMPLES,
) -> MatedCrtMap:
    """采样路径并构图；布朗路径的 mesh 缺省为 ε/64，格点路径 mesh 恒为 1。"""
    if kind == "lattice":
        path = sample_lattice_walk(int(round(horizon)), seed)
    elif kind == "brownian":
        mesh = epsilon / DEFAULT_MESH_DIVISOR if mesh is None else mesh
        path = sample_brownian_pair(gamma, horizon, mesh, seed)
    else:
        raise DomainError(f"未知的路径类型：{kind}")
    cells = cell_minima(path, epsilon, min_cell_samples)
    return MatedCrtMap(path=path, cells=cells, graph=build_graph(cells))


def graph_ball(graph: MatedCrtGraph, v: int, radius: int) -> np.ndarray:
    """与 v 的图距离不超过 radius 的顶点（升序）。"""
    if not 0 <= v < graph.count:
        raise DomainError(f"顶点越界：{v}")
    dist = csgraph.dijkstra(graph.conductance, directed=False, indices=v, unweighted=True, limit=radius + 0.5)
    return np.flatnonzero(np.isfinite(dist))


def interior_center(graph: MatedCrtGraph) -> int:
    """离窗口中点最近的未标记顶点。"""
    candidates = np.flatnonzero(~graph.boundary_flags)
    if candidates.size == 0:
        raise DomainError("窗口内没有未标记的内部顶点")
    middle = (graph.count - 1) / 2.0
    return int(candidates[np.argmin(np.abs(candidates - middle))])


def summary(graph: MatedCrtGraph, **meta: Any) -> Dict[str, Any]:
    """图的 JSON 摘要。"""
    pairs = graph.edge_i * graph.count + graph.edge_j
    _, counts = np.unique(pairs, return_counts=True)
    data: Dict[str, Any] = {
        "N": graph.count,
        "E": graph.edge_count,
        "max_degree": int(graph.degree.max()) if graph.count else 0,
        "boundary_count": int(graph.boundary_flags.sum()),
        "double_edges": int(np.sum(counts > 1)),
    }
    data.update(meta)
    return data
