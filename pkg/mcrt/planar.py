"""
mated-CRT 图的平面结构（旋转系统与面追踪）。

顶点按时间顺序放在实轴上：相邻顶点之间的 L 边画在轴上，
其余 L 边为上方圆弧，R 边为下方圆弧。可见关系保证同侧圆弧互不相交。
绕顶点 v 从正东方向逆时针：
  轴上右边 → 右上弧（由内到外）→ 左上弧（由外到内）→ 轴上左边 → 左下弧（由内到外）→ 右下弧（由外到内）
面追踪规则：next(d) = 在 head(d) 处 twin(d) 的逆时针后继，面位于半边右侧。
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from .base import SIDE_L, CellMinSeq, MatedCrtGraph, PlanarStructure
from .errors import ConsistencyError, DomainError


def _dart_order(graph: MatedCrtGraph) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """返回 (dart_tail, dart_head, 按 (tail, 类别, 次序) 排好的半边)。"""
    m = graph.edge_count
    tail = np.empty(2 * m, dtype=np.int64)
    head = np.empty(2 * m, dtype=np.int64)
    side = np.repeat(graph.edge_side, 2)
    tail[0::2], tail[1::2] = graph.edge_i, graph.edge_j
    head[0::2], head[1::2] = graph.edge_j, graph.edge_i

    upper = side == SIDE_L
    category = np.select(
        [
            upper & (head == tail + 1),
            upper & (head > tail + 1),
            upper & (head < tail - 1),
            upper & (head == tail - 1),
            ~upper & (head < tail),
        ],
        [0, 1, 2, 3, 4],
        default=5,
    )
    # 右上弧由内到外（head 升序）；左上弧由外到内（head 升序）；下方两组 head 降序
    secondary = np.where(category >= 4, -head, head)
    order = np.lexsort((secondary, category, tail))
    return tail, head, order


def planar_structure(
    graph: MatedCrtGraph,
    cells: Optional[CellMinSeq] = None,
    require_triangulation: bool = True,
) -> PlanarStructure:
    """构造旋转系统、追踪全部面并校验欧拉示性数与三角面。"""
    if cells is not None and cells.count != graph.count:
        raise DomainError("图与单元序列的顶点数不一致")
    n = graph.count
    tail, head, order = _dart_order(graph)
    darts = order.astype(np.int64)
    degree = np.bincount(tail, minlength=n)
    start = np.concatenate([[0], np.cumsum(degree)[:-1]])

    position = np.empty(darts.size, dtype=np.int64)
    position[darts] = np.arange(darts.size)
    twin = np.arange(darts.size) ^ 1
    h = head
    local = position[twin] - start[h]
    successor = darts[start[h] + (local + 1) % np.maximum(degree[h], 1)]

    faces: List[Tuple[int, ...]] = []
    face_of = np.full(darts.size, -1, dtype=np.int64)
    succ = successor.tolist()
    for first in range(darts.size):
        if face_of[first] >= 0:
            continue
        cycle = []
        d = first
        while face_of[d] < 0:
            face_of[d] = len(faces)
            cycle.append(d)
            d = succ[d]
        if d != first:
            raise ConsistencyError("面追踪没有回到起始半边")
        faces.append(tuple(cycle))

    rotation = tuple(
        tuple(int(d) for d in darts[start[v] : start[v] + degree[v]]) for v in range(n)
    )

    if faces:
        upper_at_root = sum(1 for d in rotation[0] if graph.edge_side[d // 2] == SIDE_L)
        root = rotation[0]
        outer = int(face_of[root[upper_at_root % len(root)]])
    else:
        outer = 0
        faces.append(tuple())

    planar = PlanarStructure(
        rotation=rotation,
        dart_tail=tail,
        dart_head=head,
        faces=tuple(faces),
        outer_face=outer,
    )
    if planar.euler_characteristic != 2:
        raise ConsistencyError(
            f"欧拉示性数为 {planar.euler_characteristic}（V={n}, E={planar.edge_count}, F={planar.face_count}）"
        )
    if require_triangulation:
        bad = [f for f, size in enumerate(planar.corner_counts()) if f != outer and size != 3]
        if bad:
            raise ConsistencyError(f"存在 {len(bad)} 个非三角内面")
    logging.debug("平面结构：V=%d E=%d F=%d", n, planar.edge_count, planar.face_count)
    return planar


def outer_cycle(planar: PlanarStructure) -> Tuple[int, ...]:
    """外面的顶点序列：从顶点 0 开始，重复出现的顶点只保留第一次。"""
    walk = list(planar.face_vertices(planar.outer_face))
    if not walk:
        return (0,)
    if 0 in walk:
        k = walk.index(0)
        walk = walk[k:] + walk[:k]
    seen = set()
    cycle: List[int] = []
    for v in walk:
        if v not in seen:
            seen.add(v)
            cycle.append(v)
    return tuple(cycle)
