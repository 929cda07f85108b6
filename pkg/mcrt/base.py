"""
核心数据结构。

定义：
- PathPair：等距网格上的相关布朗运动对 / 格点随机游走 (L, R)
- CellMinSeq：每个 ε-单元上 L、R 的网格最小值
- MatedCrtGraph：带侧标签（L/R）与重数的 mated-CRT 图
- PlanarStructure：旋转系统 + 面列表
- HarmonicSolution / Embedding：离散调和延拓与 Tutte 嵌入
- WalkPath / Estimate：随机游走轨迹与蒙特卡洛估计

所有数组在构造后设为只读，结构可在线程间共享。
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .errors import DomainError

SIDE_L = 0
SIDE_R = 1
SIDE_NAMES = ("L", "R")

PATH_KINDS = ("brownian", "lattice")
STOP_REASONS = ("hit_target", "left_region", "step_budget")


def _frozen(array: Any, dtype: Any) -> np.ndarray:
    """复制为指定类型的只读数组。"""
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def side_code(side: Union[str, int]) -> int:
    """把 'L'/'R' 或 0/1 统一为整数侧标签。"""
    if isinstance(side, str):
        key = side.strip().upper()
        if key not in SIDE_NAMES:
            raise DomainError(f"未知的边侧标签：{side!r}")
        return SIDE_NAMES.index(key)
    code = int(side)
    if code not in (SIDE_L, SIDE_R):
        raise DomainError(f"未知的边侧标签：{side!r}")
    return code


@dataclass(frozen=True, eq=False)
class PathPair:
    """网格采样的 (L, R) 路径对。"""

    gamma: float  # LQG 参数 γ ∈ (0,2)
    correlation: float  # L 与 R 增量的相关系数
    mesh: float  # 时间步长 δ
    horizon: float  # 时间窗口长度 T
    samples_l: np.ndarray  # L 在 0, δ, 2δ, …, T 处的取值
    samples_r: np.ndarray  # R 在同一网格上的取值
    seed: int  # 生成该路径的随机种子
    kind: str = "brownian"  # "brownian" 或 "lattice"

    def __post_init__(self) -> None:
        if self.kind not in PATH_KINDS:
            raise DomainError(f"未知的路径类型：{self.kind}")
        object.__setattr__(self, "samples_l", _frozen(self.samples_l, float))
        object.__setattr__(self, "samples_r", _frozen(self.samples_r, float))
        if self.samples_l.shape != self.samples_r.shape or self.samples_l.ndim != 1:
            raise DomainError("L 与 R 的采样长度不一致")
        if self.samples_l.size < 2:
            raise DomainError("路径至少需要两个采样点")
        if self.samples_l[0] != 0.0 or self.samples_r[0] != 0.0:
            raise DomainError("路径必须从原点 (0,0) 出发")

    @property
    def count(self) -> int:
        return int(self.samples_l.size)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.count, dtype=float) * self.mesh

    def increments(self) -> np.ndarray:
        """返回形状为 (n, 2) 的增量矩阵。"""
        return np.column_stack([np.diff(self.samples_l), np.diff(self.samples_r)])

    def scaled(self, a: float, b: float) -> "PathPair":
        """返回 (a·L, b·R)。"""
        return PathPair(
            gamma=self.gamma,
            correlation=self.correlation,
            mesh=self.mesh,
            horizon=self.horizon,
            samples_l=self.samples_l * a,
            samples_r=self.samples_r * b,
            seed=self.seed,
            kind=self.kind,
        )


@dataclass(frozen=True, eq=False)
class CellMinSeq:
    """ε-单元最小值序列；单元 i（0 起）覆盖时间区间 [iε, (i+1)ε]。"""

    epsilon: float
    count: int
    min_l: np.ndarray
    min_r: np.ndarray
    argmin_l: np.ndarray  # 最早达到最小值的网格时刻
    argmin_r: np.ndarray
    samples_per_cell: int = 1

    def __post_init__(self) -> None:
        for name in ("min_l", "min_r", "argmin_l", "argmin_r"):
            object.__setattr__(self, name, _frozen(getattr(self, name), float))
            if getattr(self, name).shape != (self.count,):
                raise DomainError(f"{name} 的长度与单元数 {self.count} 不一致")

    @classmethod
    def from_minima(
        cls,
        min_l: Sequence[float],
        min_r: Optional[Sequence[float]] = None,
        epsilon: float = 1.0,
    ) -> "CellMinSeq":
        """直接由最小值序列构造（argmin 取单元右端点）。"""
        min_l = np.asarray(min_l, dtype=float)
        if min_r is None:
            # 严格递增的 R 只产生相邻对，不增加 R 边
            min_r = np.arange(min_l.size, dtype=float)
        min_r = np.asarray(min_r, dtype=float)
        ends = (np.arange(min_l.size) + 1.0) * epsilon
        return cls(
            epsilon=epsilon,
            count=int(min_l.size),
            min_l=min_l,
            min_r=min_r,
            argmin_l=ends,
            argmin_r=ends,
        )


@dataclass(frozen=True, eq=False)
class MatedCrtGraph:
    """
    带侧标签的多重图。

    顶点为 0..count-1；每条边记录 (i, j, side)，i < j。
    同一顶点对在同一侧至多一条边，因此重数至多为 2。
    """

    count: int
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_side: np.ndarray
    boundary_flags: np.ndarray

    def __post_init__(self) -> None:
        edge_i = np.asarray(self.edge_i, dtype=np.int64)
        edge_j = np.asarray(self.edge_j, dtype=np.int64)
        edge_side = np.asarray(self.edge_side, dtype=np.int8)
        if not (edge_i.shape == edge_j.shape == edge_side.shape):
            raise DomainError("边数组长度不一致")
        if edge_i.size and (edge_i.min() < 0 or edge_j.max() >= self.count or np.any(edge_i >= edge_j)):
            raise DomainError("边端点越界或未满足 i < j")
        order = np.lexsort((edge_side, edge_j, edge_i))
        edge_i, edge_j, edge_side = edge_i[order], edge_j[order], edge_side[order]
        if edge_i.size > 1:
            same = (np.diff(edge_i) == 0) & (np.diff(edge_j) == 0) & (np.diff(edge_side) == 0)
            if np.any(same):
                raise DomainError("同一顶点对在同一侧出现了重复边")
        flags = self.boundary_flags
        if flags is None:
            flags = np.zeros(self.count, dtype=bool)
        object.__setattr__(self, "edge_i", _frozen(edge_i, np.int64))
        object.__setattr__(self, "edge_j", _frozen(edge_j, np.int64))
        object.__setattr__(self, "edge_side", _frozen(edge_side, np.int8))
        object.__setattr__(self, "boundary_flags", _frozen(flags, bool))
        if self.boundary_flags.shape != (self.count,):
            raise DomainError("boundary_flags 长度与顶点数不一致")

    @classmethod
    def from_edges(
        cls,
        count: int,
        edges: Iterable[Tuple[Any, ...]],
        boundary_flags: Optional[Sequence[bool]] = None,
    ) -> "MatedCrtGraph":
        """由 (i, j[, side]) 记录构造任意小图；side 缺省为 L。"""
        rows: List[Tuple[int, int, int]] = []
        for record in edges:
            i, j = int(record[0]), int(record[1])
            side = side_code(record[2]) if len(record) > 2 else SIDE_L
            if i == j:
                raise DomainError(f"不允许自环：{i}")
            rows.append((min(i, j), max(i, j), side))
        data = np.array(rows, dtype=np.int64).reshape(-1, 3)
        flags = None if boundary_flags is None else np.asarray(boundary_flags, dtype=bool)
        return cls(
            count=int(count),
            edge_i=data[:, 0],
            edge_j=data[:, 1],
            edge_side=data[:, 2],
            boundary_flags=flags,
        )

    @property
    def edge_count(self) -> int:
        return int(self.edge_i.size)

    @cached_property
    def edge_set(self) -> FrozenSet[Tuple[int, int, str]]:
        return frozenset(
            (int(i), int(j), SIDE_NAMES[int(s)])
            for i, j, s in zip(self.edge_i, self.edge_j, self.edge_side)
        )

    @cached_property
    def adjacency(self) -> Tuple[Tuple[Tuple[int, str], ...], ...]:
        """每个顶点的 (邻居, 侧) 列表，重边出现多次。"""
        lists: List[List[Tuple[int, str]]] = [[] for _ in range(self.count)]
        for i, j, s in zip(self.edge_i.tolist(), self.edge_j.tolist(), self.edge_side.tolist()):
            lists[i].append((j, SIDE_NAMES[s]))
            lists[j].append((i, SIDE_NAMES[s]))
        return tuple(tuple(items) for items in lists)

    @cached_property
    def conductance(self) -> sp.csr_matrix:
        """对称稀疏矩阵，元素为顶点对之间的边重数。"""
        ones = np.ones(self.edge_count, dtype=float)
        rows = np.concatenate([self.edge_i, self.edge_j])
        cols = np.concatenate([self.edge_j, self.edge_i])
        matrix = sp.coo_matrix(
            (np.concatenate([ones, ones]), (rows, cols)), shape=(self.count, self.count)
        ).tocsr()
        matrix.sum_duplicates()
        matrix.sort_indices()
        return matrix

    @cached_property
    def degree(self) -> np.ndarray:
        """按重数计的度。"""
        deg = np.bincount(self.edge_i, minlength=self.count) + np.bincount(
            self.edge_j, minlength=self.count
        )
        return _frozen(deg, np.int64)

    @cached_property
    def neighbor_table(self) -> Tuple[np.ndarray, np.ndarray]:
        """CSR 形式的邻居表 (indptr, indices)，重边按重数重复，供随机游走均匀抽样。"""
        matrix = self.conductance
        indices = np.repeat(matrix.indices, matrix.data.astype(np.int64))
        indptr = np.concatenate([[0], np.cumsum(self.degree)])
        return _frozen(indptr, np.int64), _frozen(indices, np.int64)

    def multiplicity(self, i: int, j: int) -> int:
        return int(self.conductance[i, j])

    def same_edges(self, other: "MatedCrtGraph") -> bool:
        return self.count == other.count and self.edge_set == other.edge_set

    def subgraph(self, vertices: Iterable[int]) -> Tuple["MatedCrtGraph", np.ndarray]:
        """诱导子图；返回 (子图, 子图顶点 → 原顶点编号)。"""
        keep = np.unique(np.asarray(list(vertices), dtype=np.int64))
        if keep.size and (keep[0] < 0 or keep[-1] >= self.count):
            raise DomainError("子图顶点越界")
        relabel = np.full(self.count, -1, dtype=np.int64)
        relabel[keep] = np.arange(keep.size)
        mask = (relabel[self.edge_i] >= 0) & (relabel[self.edge_j] >= 0)
        sub = MatedCrtGraph(
            count=int(keep.size),
            edge_i=relabel[self.edge_i[mask]],
            edge_j=relabel[self.edge_j[mask]],
            edge_side=self.edge_side[mask],
            boundary_flags=self.boundary_flags[keep],
        )
        return sub, keep


@dataclass(frozen=True, eq=False)
class PlanarStructure:
    """
    旋转系统与面。

    半边（dart）d 属于边 d // 2；偶数 d 从 edge_i 指向 edge_j，奇数反向。
    rotation[v] 为 v 处出发半边的逆时针顺序。
    """

    rotation: Tuple[Tuple[int, ...], ...]
    dart_tail: np.ndarray
    dart_head: np.ndarray
    faces: Tuple[Tuple[int, ...], ...]  # 每个面为半边环
    outer_face: int

    @property
    def vertex_count(self) -> int:
        return len(self.rotation)

    @property
    def edge_count(self) -> int:
        return int(self.dart_tail.size // 2)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def euler_characteristic(self) -> int:
        return self.vertex_count - self.edge_count + self.face_count

    def face_vertices(self, face: int) -> Tuple[int, ...]:
        return tuple(int(self.dart_tail[d]) for d in self.faces[face])

    def corner_counts(self) -> List[int]:
        return [len(cycle) for cycle in self.faces]


@dataclass(frozen=True, eq=False)
class HarmonicSolution:
    """离散调和延拓的结果及残差证书。"""

    values: np.ndarray
    boundary: FrozenSet[int]
    residual: float  # 内部顶点均值性质的最大偏差
    tolerance: float
    method: str = "dense"  # "dense" / "cg" / "splu" / "constant"

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values, float))
        object.__setattr__(self, "boundary", frozenset(int(v) for v in self.boundary))

    def check_maximum_principle(self, slack: float = 0.0) -> bool:
        """内部取值是否落在边界取值的 [min, max] 内。"""
        if not self.boundary:
            return True
        idx = np.fromiter(self.boundary, dtype=np.int64)
        low, high = self.values[idx].min(), self.values[idx].max()
        slack = slack or 10 * self.tolerance
        return bool(np.all(self.values >= low - slack) and np.all(self.values <= high + slack))


@dataclass(frozen=True, eq=False)
class Embedding:
    """平面坐标；pinned 中的顶点固定在 pinned_positions 上。"""

    coords: np.ndarray  # 形状 (N, 2)
    pinned: Tuple[int, ...]
    pinned_positions: np.ndarray  # 形状 (m, 2)
    residual: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords", _frozen(self.coords, float))
        object.__setattr__(self, "pinned_positions", _frozen(self.pinned_positions, float))
        object.__setattr__(self, "pinned", tuple(int(v) for v in self.pinned))

    @cached_property
    def pinned_mask(self) -> np.ndarray:
        mask = np.zeros(self.coords.shape[0], dtype=bool)
        mask[list(self.pinned)] = True
        mask.setflags(write=False)
        return mask

    def edge_lengths(self, graph: MatedCrtGraph) -> np.ndarray:
        delta = self.coords[graph.edge_i] - self.coords[graph.edge_j]
        return np.hypot(delta[:, 0], delta[:, 1])


@dataclass(frozen=True)
class WalkPath:
    """一条随机游走轨迹。"""

    vertices: Tuple[int, ...]
    stop_reason: str  # hit_target / left_region / step_budget
    steps: int


@dataclass(frozen=True)
class Estimate:
    """蒙特卡洛估计：点估计、标准误与置信区间。"""

    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int
    successes: Optional[int] = None  # 比例型估计的成功次数
    budget_exhausted: int = 0  # 因步数上限而截断的试验数
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "mean": self.mean,
            "stderr": self.stderr,
            "ci": [self.ci_low, self.ci_high],
            "trials": self.trials,
            "seed": self.seed,
            "budget_exhausted": self.budget_exhausted,
        }
        if self.successes is not None:
            data["successes"] = self.successes
        data.update(self.extra)
        return data
