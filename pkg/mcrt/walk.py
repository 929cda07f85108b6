"""
图上的简单随机游走（walk-sim）。

每一步从当前顶点的关联边中（按重数）等概率选一条。
- simulate_walk：单条轨迹，逐步判断停止条件
- return_probability / return_probability_curve：n 步返回概率（精确矩阵迭代或蒙特卡洛）
- curve_follow_probability：沿曲线前进、到达终点附近之前不离开曲线邻域的概率
- annulus_crossing_probability：先到内圆再到外圆的概率
- hitting_probability_exact / exit_time_exact：吸收链的精确解，用于与蒙特卡洛交叉校验

批量试验按 CHUNK 分块，第 c 块使用 trial_rng(seed, c)，各块并行、按序合并，
结果只取决于 (seed, 块序号)，与调度无关。
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from matplotlib.path import Path as PolygonPath
from scipy import stats
from scipy.sparse import csgraph

from .base import STOP_REASONS, Embedding, Estimate, MatedCrtGraph, WalkPath
from .errors import DomainError, ResourceError, UnsolvableError
from .laplace import harmonic_extend
from .rng import derive_seed, parallel_map, trial_rng

CHUNK = 256
ANNULUS_STREAM = 7919
DEFAULT_MAX_STEPS = 100_000
EXACT_VERTEX_LIMIT = 50_000
CONFIDENCE = 0.95
MAX_ANNULUS_STARTS = 8

# 批量试验的结果编码
HIT, LEFT, BUDGET = 1, 0, -1
_OUTCOME_NAMES = {HIT: "hit_target", LEFT: "left_region", BUDGET: "step_budget"}

StopRule = Callable[[int, int], Union[bool, str]]
Points = Union[Sequence[Sequence[float]], np.ndarray]


@dataclass(frozen=True, eq=False)
class TrialLog:
    """批量试验的逐次记录。"""

    outcome: np.ndarray  # HIT / LEFT / BUDGET
    steps: np.ndarray
    seed: int

    @property
    def trials(self) -> int:
        return int(self.outcome.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "trial": np.arange(self.trials),
                "outcome": [_OUTCOME_NAMES[int(o)] for o in self.outcome],
                "steps": self.steps,
            }
        )


def _check_vertex(graph: MatedCrtGraph, v: int) -> int:
    if int(v) != v or not 0 <= v < graph.count:
        raise DomainError(f"顶点越界：{v}")
    return int(v)


def _check_movable(graph: MatedCrtGraph, vertices: np.ndarray) -> None:
    isolated = vertices[graph.degree[vertices] == 0]
    if isolated.size:
        raise DomainError(f"起点 {int(isolated[0])} 是孤立顶点，游走无法移动")


def _mask(graph: MatedCrtGraph, vertices: Iterable[int]) -> np.ndarray:
    mask = np.zeros(graph.count, dtype=bool)
    idx = np.asarray(list(vertices), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= graph.count):
        raise DomainError("顶点集合越界")
    mask[idx] = True
    return mask


def _advance(graph: MatedCrtGraph, current: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """按重数等概率走一步（向量化）。"""
    indptr, indices = graph.neighbor_table
    deg = indptr[current + 1] - indptr[current]
    offset = np.minimum((uniforms * deg).astype(np.int64), deg - 1)
    return indices[indptr[current] + offset]


def _walk_batch(
    graph: MatedCrtGraph,
    starts: np.ndarray,
    target: np.ndarray,
    killed: np.ndarray,
    max_steps: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """同步推进一批游走，直到击中 target、进入 killed 或步数耗尽；target 优先。"""
    pos = starts.astype(np.int64).copy()
    steps = np.zeros(pos.size, dtype=np.int64)
    outcome = np.full(pos.size, BUDGET, dtype=np.int8)
    outcome[killed[pos]] = LEFT
    outcome[target[pos]] = HIT
    active = outcome == BUDGET
    for t in range(1, max_steps + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        nxt = _advance(graph, pos[idx], rng.random(idx.size))
        pos[idx] = nxt
        steps[idx] = t
        hit = target[nxt]
        dead = killed[nxt] & ~hit
        outcome[idx[hit]] = HIT
        outcome[idx[dead]] = LEFT
        active[idx[hit | dead]] = False
    return outcome, steps


def run_trials(
    graph: MatedCrtGraph,
    start: Union[int, Sequence[int]],
    target: np.ndarray,
    killed: np.ndarray,
    trials: int,
    seed: int,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> TrialLog:
    """从 start 出发做 trials 次独立游走，分块并行，按块序合并。"""
    if trials < 1:
        raise DomainError(f"trials 必须 ≥ 1：{trials}")
    if max_steps < 1:
        raise DomainError(f"max_steps 必须 ≥ 1：{max_steps}")
    starts = np.broadcast_to(np.asarray(start, dtype=np.int64), (trials,)).copy()
    _check_movable(graph, np.unique(starts))
    chunks = [(c, lo, min(trials, lo + CHUNK)) for c, lo in enumerate(range(0, trials, CHUNK))]

    def run_chunk(chunk: Tuple[int, int, int]) -> Tuple[np.ndarray, np.ndarray]:
        c, lo, hi = chunk
        return _walk_batch(graph, starts[lo:hi], target, killed, max_steps, trial_rng(seed, c))

    results = parallel_map(run_chunk, chunks)
    outcome = np.concatenate([r[0] for r in results])
    steps = np.concatenate([r[1] for r in results])
    return TrialLog(outcome=outcome, steps=steps, seed=int(seed))


def proportion_estimate(successes: int, trials: int, seed: int, budget_exhausted: int = 0, **extra) -> Estimate:
    """比例估计，Wilson 置信区间。"""
    p = successes / trials
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=CONFIDENCE, method="wilson")
    return Estimate(
        mean=p,
        stderr=math.sqrt(p * (1.0 - p) / trials),
        ci_low=float(ci.low),
        ci_high=float(ci.high),
        trials=int(trials),
        seed=int(seed),
        successes=int(successes),
        budget_exhausted=int(budget_exhausted),
        extra=dict(extra),
    )


def mean_estimate(samples: np.ndarray, seed: int, budget_exhausted: int = 0, **extra) -> Estimate:
    """均值估计，正态近似置信区间。"""
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(samples.size)) if samples.size > 1 else 0.0
    z = float(stats.norm.ppf(0.5 + CONFIDENCE / 2.0))
    return Estimate(
        mean=mean,
        stderr=stderr,
        ci_low=mean - z * stderr,
        ci_high=mean + z * stderr,
        trials=int(samples.size),
        seed=int(seed),
        budget_exhausted=int(budget_exhausted),
        extra=dict(extra),
    )


def simulate_walk(
    graph: MatedCrtGraph,
    start: int,
    stop: Optional[StopRule],
    max_steps: int,
    seed: int,
) -> WalkPath:
    """
    单条游走轨迹。

    stop(vertex, step) 为真时停止（含第 0 步）；返回 STOP_REASONS 中的字符串时作为停止原因，
    其他真值记为 hit_target。步数耗尽记为 step_budget。
    """
    start = _check_vertex(graph, start)
    if max_steps < 1:
        raise DomainError(f"max_steps 必须 ≥ 1：{max_steps}")
    _check_movable(graph, np.array([start]))
    rng = trial_rng(seed)
    vertices: List[int] = [start]
    current = np.array([start], dtype=np.int64)

    def verdict(v: int, step: int) -> Optional[str]:
        if stop is None:
            return None
        result = stop(v, step)
        if isinstance(result, str):
            if result not in STOP_REASONS:
                raise DomainError(f"未知的停止原因：{result}")
            return result
        return "hit_target" if result else None

    reason = verdict(start, 0)
    step = 0
    while reason is None and step < max_steps:
        uniforms = rng.random(min(4096, max_steps - step))
        for u in uniforms:
            current = _advance(graph, current, np.array([u]))
            step += 1
            vertices.append(int(current[0]))
            reason = verdict(vertices[-1], step)
            if reason is not None:
                break
    return WalkPath(vertices=tuple(vertices), stop_reason=reason or "step_budget", steps=step)


def _require_exact_size(graph: MatedCrtGraph, max_vertices: int) -> None:
    if graph.count > max_vertices:
        raise ResourceError(f"精确计算限于 {max_vertices} 个顶点，当前 {graph.count}")


def return_probability_curve(
    graph: MatedCrtGraph, v: int, n: int, max_vertices: int = EXACT_VERTEX_LIMIT
) -> np.ndarray:
    """精确的 p_k(v, v)，k = 1..n；分布按 μ_{k+1} = W (μ_k / deg) 迭代。"""
    v = _check_vertex(graph, v)
    if n < 1:
        raise DomainError(f"n 必须 ≥ 1：{n}")
    _require_exact_size(graph, max_vertices)
    _check_movable(graph, np.array([v]))
    weights = graph.conductance
    inv_deg = np.zeros(graph.count)
    nz = graph.degree > 0
    inv_deg[nz] = 1.0 / graph.degree[nz]
    dist = np.zeros(graph.count)
    dist[v] = 1.0
    curve = np.empty(n)
    for k in range(n):
        dist = weights @ (dist * inv_deg)
        curve[k] = dist[v]
    return curve


def return_probability_mc(graph: MatedCrtGraph, v: int, n: int, trials: int, seed: int) -> Estimate:
    """n 步后恰好位于 v 的蒙特卡洛比例估计。"""
    v = _check_vertex(graph, v)
    if n < 1:
        raise DomainError(f"n 必须 ≥ 1：{n}")
    if trials < 1:
        raise DomainError(f"trials 必须 ≥ 1：{trials}")
    _check_movable(graph, np.array([v]))
    chunks = [(c, lo, min(trials, lo + CHUNK)) for c, lo in enumerate(range(0, trials, CHUNK))]

    def final_positions(chunk: Tuple[int, int, int]) -> np.ndarray:
        c, lo, hi = chunk
        rng = trial_rng(seed, c)
        pos = np.full(hi - lo, v, dtype=np.int64)
        for _ in range(n):
            pos = _advance(graph, pos, rng.random(pos.size))
        return pos

    ends = np.concatenate(parallel_map(final_positions, chunks))
    return proportion_estimate(int(np.sum(ends == v)), trials, seed, steps=n)


def return_probability(
    graph: MatedCrtGraph,
    v: int,
    n: int,
    method: str = "exact",
    trials: int = 10_000,
    seed: int = 0,
    max_vertices: int = EXACT_VERTEX_LIMIT,
) -> float:
    """n 步返回概率；method 为 exact 或 monte_carlo。"""
    if method == "exact":
        return float(return_probability_curve(graph, v, n, max_vertices)[-1])
    if method == "monte_carlo":
        estimate = return_probability_mc(graph, v, n, trials, seed)
        logging.info("返回概率 MC：p=%.5f ± %.5f（%d 次）", estimate.mean, estimate.stderr, trials)
        return estimate.mean
    raise DomainError(f"未知的计算方式：{method}")


def hitting_probabilities(graph: MatedCrtGraph, target: np.ndarray, killed: np.ndarray) -> np.ndarray:
    """每个顶点出发、先到 target 再到 killed 的概率；到不了两者的分量取 0。"""
    if np.any(target & killed):
        raise DomainError("target 与 killed 不能相交")
    if not target.any():
        return np.zeros(graph.count)
    absorbing = target | killed
    _, labels = csgraph.connected_components(graph.conductance, directed=False)
    touched = np.zeros(labels.max() + 1, dtype=bool)
    touched[labels[absorbing]] = True
    stranded = ~touched[labels]
    boundary = {int(v): 1.0 for v in np.flatnonzero(target)}
    boundary.update({int(v): 0.0 for v in np.flatnonzero(killed | stranded)})
    return np.clip(harmonic_extend(graph, boundary).values, 0.0, 1.0)


def hitting_probability_exact(
    graph: MatedCrtGraph, start: int, target: Iterable[int], killed: Iterable[int]
) -> float:
    """吸收链精确解：从 start 出发先击中 target 的概率。"""
    start = _check_vertex(graph, start)
    return float(hitting_probabilities(graph, _mask(graph, target), _mask(graph, killed))[start])


def exit_time_exact(graph: MatedCrtGraph, start: int, region: Iterable[int]) -> float:
    """离开 region 的期望步数：解 (D − W)_SS t = d_S。"""
    start = _check_vertex(graph, start)
    inside = _mask(graph, region)
    if not inside[start]:
        return 0.0
    idx = np.flatnonzero(inside)
    weights = graph.conductance
    w_ss = weights[idx][:, idx]
    deg = graph.degree[idx].astype(float)
    leaks = deg - np.asarray(w_ss.sum(axis=1)).ravel()
    _, labels = csgraph.connected_components(w_ss, directed=False)
    open_components = np.zeros(labels.max() + 1, dtype=bool)
    open_components[labels[leaks > 0]] = True
    local = int(np.searchsorted(idx, start))
    if not open_components[labels[local]]:
        raise UnsolvableError(f"顶点 {start} 所在的区域分量没有出口，离开时间为无穷")
    keep = open_components[labels]
    system = (sp.diags(deg[keep]) - w_ss[keep][:, keep]).tocsc()
    times = spla.splu(system).solve(deg[keep])
    return float(times[int(np.searchsorted(np.flatnonzero(keep), local))])


def exit_time_trials(
    graph: MatedCrtGraph,
    start: int,
    region: Iterable[int],
    trials: int,
    seed: int,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> TrialLog:
    """离开 region 的逐次试验记录。"""
    start = _check_vertex(graph, start)
    outside = ~_mask(graph, region)
    return run_trials(graph, start, outside, np.zeros(graph.count, dtype=bool), trials, seed, max_steps)


def mean_exit_time(
    graph: MatedCrtGraph,
    start: int,
    region: Iterable[int],
    trials: int,
    seed: int,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Estimate:
    """离开时间的蒙特卡洛均值；步数耗尽的试验按 max_steps 计入并单独计数。"""
    log = exit_time_trials(graph, start, region, trials, seed, max_steps)
    exhausted = int(np.sum(log.outcome == BUDGET))
    if exhausted:
        logging.warning("离开时间：%d/%d 次试验耗尽步数上限 %d", exhausted, trials, max_steps)
    return mean_estimate(log.steps, seed, budget_exhausted=exhausted, start=int(start))


# ---------- 嵌入中的几何 ----------


def _window_polygon(embedding: Embedding) -> PolygonPath:
    return PolygonPath(embedding.pinned_positions)


def _distance_to_polyline(points: np.ndarray, curve: np.ndarray) -> np.ndarray:
    """每个点到折线的欧氏距离。"""
    if curve.shape[0] == 1:
        return np.hypot(*(points - curve[0]).T)
    best = np.full(points.shape[0], np.inf)
    for a, b in zip(curve[:-1], curve[1:]):
        ab = b - a
        denom = float(ab @ ab)
        t = np.zeros(points.shape[0]) if denom == 0 else np.clip((points - a) @ ab / denom, 0.0, 1.0)
        nearest = a + t[:, None] * ab
        best = np.minimum(best, np.hypot(*(points - nearest).T))
    return best


def _distance_to_window_edge(embedding: Embedding, points: np.ndarray) -> np.ndarray:
    ring = np.vstack([embedding.pinned_positions, embedding.pinned_positions[:1]])
    best = np.full(points.shape[0], np.inf)
    for a, b in zip(ring[:-1], ring[1:]):
        best = np.minimum(best, _distance_to_polyline(points, np.vstack([a, b])))
    return best


def _as_points(points: Points, label: str) -> np.ndarray:
    array = np.asarray(points, dtype=float).reshape(-1, 2)
    if array.shape[0] < 1 or not np.all(np.isfinite(array)):
        raise DomainError(f"{label} 必须是非空的有限平面点列")
    return array


def curve_follow_sets(
    graph: MatedCrtGraph,
    embedding: Embedding,
    curve: Points,
    r_small: float,
    r_big: float,
) -> Tuple[int, np.ndarray, np.ndarray]:
    """曲线跟随问题的 (起点, 目标集, 杀死集)。"""
    if not (0 < r_small < r_big):
        raise DomainError(f"需要 0 < r_small < r_big：{r_small}, {r_big}")
    curve = _as_points(curve, "curve")
    if embedding.coords.shape[0] != graph.count:
        raise DomainError("嵌入与图的顶点数不一致")
    if not np.all(_window_polygon(embedding).contains_points(curve)):
        raise DomainError("曲线离开了嵌入窗口")
    clearance = float(_distance_to_window_edge(embedding, curve).min())
    if clearance < r_big:
        logging.warning("曲线距窗口边界 %.4f 小于 r_big=%.4f，部分邻域被边界截断", clearance, r_big)

    coords = embedding.coords
    to_start = np.hypot(*(coords - curve[0]).T)
    start = int(np.argmin(to_start))
    if to_start[start] > r_small:
        raise DomainError(f"距曲线起点最近的顶点 {start} 远于 r_small={r_small}")
    target = np.hypot(*(coords - curve[-1]).T) <= r_big
    killed = (embedding.pinned_mask | (_distance_to_polyline(coords, curve) > r_big)) & ~target
    return start, target, killed


def curve_follow_probability(
    graph: MatedCrtGraph,
    embedding: Embedding,
    curve: Points,
    r_small: float,
    r_big: float,
    trials: int,
    seed: int,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Estimate:
    """到达曲线终点 r_big 邻域之前不离开曲线 r_big 邻域的概率（Wilson 区间）。"""
    start, target, killed = curve_follow_sets(graph, embedding, curve, r_small, r_big)
    log = run_trials(graph, start, target, killed, trials, seed, max_steps)
    successes = int(np.sum(log.outcome == HIT))
    exhausted = int(np.sum(log.outcome == BUDGET))
    return proportion_estimate(
        successes, trials, seed, exhausted, start=start, target_size=int(target.sum())
    )


def curve_follow_exact(
    graph: MatedCrtGraph, embedding: Embedding, curve: Points, r_small: float, r_big: float
) -> float:
    """同一问题的吸收链精确解。"""
    start, target, killed = curve_follow_sets(graph, embedding, curve, r_small, r_big)
    return float(hitting_probabilities(graph, target, killed)[start])


def annulus_sets(
    graph: MatedCrtGraph, embedding: Embedding, center: Points, s: float, r: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """环形问题的 (内集, 外集, 抽样起点)。"""
    if not (0 < s <= 0.1):
        raise DomainError(f"s 必须位于 (0, 1/10]：{s}")
    if not r > 0:
        raise DomainError(f"r 必须为正：{r}")
    point = _as_points(center, "center")[:1]
    if not _window_polygon(embedding).contains_points(point)[0]:
        raise DomainError("中心点不在嵌入窗口内")
    if float(_distance_to_window_edge(embedding, point)[0]) < r:
        raise DomainError(f"半径 {r} 的圆盘超出嵌入窗口")
    dist = np.hypot(*(embedding.coords - point[0]).T)
    inner = dist <= s * r
    if not inner.any():
        raise DomainError(f"半径 {s * r:.4g} 的内圆中没有顶点")
    outer = (dist >= r) | embedding.pinned_mask
    candidates = np.flatnonzero((dist < 4 * s * r) & ~outer)
    if candidates.size == 0:
        raise DomainError(f"半径 {4 * s * r:.4g} 的圆盘中没有可用的起点")
    if candidates.size > MAX_ANNULUS_STARTS:
        pick = np.linspace(0, candidates.size - 1, MAX_ANNULUS_STARTS).round().astype(np.int64)
        candidates = candidates[pick]
    return inner, outer, candidates


def annulus_crossing_probability(
    graph: MatedCrtGraph,
    embedding: Embedding,
    center: Points,
    s: float,
    r: float,
    trials: int,
    seed: int,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Estimate:
    """从 B_{4sr} 内的起点出发，先到 B_{sr} 再到 ∂B_r 的概率；报告各起点中的最小值。"""
    inner, outer, starts = annulus_sets(graph, embedding, center, s, r)
    per_start = []
    for k, v in enumerate(starts.tolist()):
        sub_seed = derive_seed(seed, ANNULUS_STREAM, k)
        log = run_trials(graph, v, inner, outer, trials, sub_seed, max_steps)
        per_start.append(
            proportion_estimate(
                int(np.sum(log.outcome == HIT)), trials, sub_seed, int(np.sum(log.outcome == BUDGET))
            )
        )
    worst = min(range(len(per_start)), key=lambda k: (per_start[k].mean, k))
    chosen = per_start[worst]
    return Estimate(
        mean=chosen.mean,
        stderr=chosen.stderr,
        ci_low=chosen.ci_low,
        ci_high=chosen.ci_high,
        trials=chosen.trials,
        seed=int(seed),
        successes=chosen.successes,
        budget_exhausted=sum(e.budget_exhausted for e in per_start),
        extra={
            "start": int(starts[worst]),
            "starts": [int(v) for v in starts],
            "start_means": [e.mean for e in per_start],
        },
    )


def annulus_crossing_exact(
    graph: MatedCrtGraph, embedding: Embedding, center: Points, s: float, r: float
) -> Tuple[np.ndarray, np.ndarray]:
    """(抽样起点, 各起点的精确击中概率)。"""
    inner, outer, starts = annulus_sets(graph, embedding, center, s, r)
    return starts, hitting_probabilities(graph, inner, outer & ~inner)[starts]
