"""
尺度律实验：度分布尾部、Green 函数增长、最长嵌入边、返回概率指数、离开时间。
"""

import logging
import math
from typing import List, Sequence

import numpy as np

from ..base import CellMinSeq
from ..errors import ConsistencyError, DomainError
from ..graph import build_graph, generate_map, graph_ball, interior_center
from ..laplace import circle_embedding, effective_resistance
from ..rng import derive_seed, parallel_map
from ..walk import exit_time_exact, mean_exit_time, return_probability_curve
from .base import (
    DEFAULT_EPSILONS,
    ExperimentReport,
    PlotSpec,
    check_epsilons,
    linear_fit,
    mean_and_stderr,
    timed,
)

MIN_EXCEEDANCES = 30
SPECTRAL_BAND = (-1.35, -0.75)


@timed
def degree_tail_experiment(
    samples: int = 10_000,
    window: int = 64,
    seed: int = 0,
    gamma: float = math.sqrt(2.0),
    mesh_divisor: int = 16,
) -> ExperimentReport:
    """
    ε = 1 的独立窗口中心顶点度的尾部。

    在 k ∈ [3, k_max] 上对 log P[deg > k] 做直线拟合，k_max 为至少有 30 个样本超过的最大 k；
    斜率为负（置信区间不含 0）且 R² ≥ 0.95 时通过。
    """
    if samples < 1000:
        raise DomainError(f"samples 至少为 1000：{samples}")
    if window < 3:
        raise DomainError(f"窗口太小，没有内部中心顶点：{window}")

    def center_degree(index: int) -> int:
        built = generate_map(gamma, 1.0, float(window), derive_seed(seed, index), mesh=1.0 / mesh_divisor)
        return int(built.graph.degree[interior_center(built.graph)])

    degrees = np.asarray(parallel_map(center_degree, range(samples)), dtype=np.int64)
    rows = []
    for k in range(int(degrees.max())):
        exceed = int(np.sum(degrees > k))
        survival = exceed / samples
        rows.append(
            {
                "k": k,
                "exceedances": exceed,
                "survival": survival,
                "stderr": math.sqrt(survival * (1.0 - survival) / samples),
                "n": samples,
            }
        )
    k_max = max((r["k"] for r in rows if r["exceedances"] >= MIN_EXCEEDANCES), default=0)
    fit_rows = [r for r in rows if 3 <= r["k"] <= k_max]
    report = ExperimentReport(
        name="degree-tail",
        parameters={"samples": samples, "window": window, "gamma": gamma, "mesh_divisor": mesh_divisor},
        seed=seed,
        rows=rows,
        statistics={"min_degree": int(degrees.min()), "mean_degree": mean_and_stderr(degrees), "k_max": k_max},
        criterion="log-survival slope < 0 with CI excluding 0 and R² ≥ 0.95 over k ∈ [3, k_max]",
        plot=PlotSpec(x="k", y="survival", xlabel="k", ylabel="P[deg > k]", logx=False),
    )
    if len(fit_rows) < 3:
        report.passed = False
        report.notes.append(f"拟合区间 [3, {k_max}] 不足 3 个点")
        return report
    report.fit = linear_fit([r["k"] for r in fit_rows], [math.log(r["survival"]) for r in fit_rows])
    report.passed = bool(report.fit.ci_high < 0 and report.fit.r_squared >= 0.95)
    logging.info(
        "度尾部：斜率 %.4f [%.4f, %.4f] R²=%.4f → %s",
        report.fit.slope,
        report.fit.ci_low,
        report.fit.ci_high,
        report.fit.r_squared,
        "通过" if report.passed else "未通过",
    )
    return report


def window_cells(cells: CellMinSeq, start: int, size: int) -> CellMinSeq:
    """单元序列的连续子窗口 [start, start + size)。"""
    if start < 0 or size < 2 or start + size > cells.count:
        raise DomainError(f"子窗口越界：start={start} size={size} count={cells.count}")
    stop = start + size
    return CellMinSeq(
        epsilon=cells.epsilon,
        count=size,
        min_l=cells.min_l[start:stop],
        min_r=cells.min_r[start:stop],
        argmin_l=cells.argmin_l[start:stop],
        argmin_r=cells.argmin_r[start:stop],
        samples_per_cell=cells.samples_per_cell,
    )


def nested_resistances(
    sizes: Sequence[int], seed: int, gamma: float = math.sqrt(2.0), mesh_divisor: int = 16
) -> List[float]:
    """
    同一条路径上居中嵌套的窗口中，固定中心顶点到各窗口边界标记顶点的有效电阻（按 sizes 升序）。

    中心取最小窗口的内部顶点。大窗口在小窗口内的标记顶点是小窗口标记顶点的子集，
    而小窗口的标记集把它与窗口外隔开，所以电阻随窗口增大单调不减。
    """
    sizes = sorted(int(s) for s in sizes)
    built = generate_map(gamma, 1.0, float(sizes[-1]), seed, mesh=1.0 / mesh_divisor)
    cells = built.cells
    starts = [(cells.count - size) // 2 for size in sizes]
    smallest = build_graph(window_cells(cells, starts[0], sizes[0]))
    center = starts[0] + interior_center(smallest)
    values = []
    for start, size in zip(starts, sizes):
        graph = build_graph(window_cells(cells, start, size))
        local = center - start
        sink = np.flatnonzero(graph.boundary_flags)
        values.append(effective_resistance(graph, local, sink[sink != local]))
    return values


@timed
def green_growth_experiment(
    sizes: Sequence[int] = tuple(2**k for k in range(7, 14)),
    trials: int = 50,
    seed: int = 0,
    gamma: float = math.sqrt(2.0),
    mesh_divisor: int = 16,
) -> ExperimentReport:
    """
    中心到窗口边界的有效电阻随窗口大小的增长。

    每次试验在一条路径上取居中嵌套的窗口，各尺寸共用同一中心顶点，相邻尺寸之间的增量成对统计。
    平均电阻随 N 严格递增、且对 log N 回归斜率为正（置信区间不含 0）时通过。
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 8:
        raise DomainError(f"sizes 必须严格递增且不小于 8：{sizes}")
    if trials < 2:
        raise DomainError(f"trials 至少为 2：{trials}")

    per_trial = parallel_map(
        lambda t: nested_resistances(sizes, derive_seed(seed, t), gamma, mesh_divisor), range(trials)
    )
    table = np.asarray(per_trial, dtype=float).T  # (尺寸, 试验)
    increments = np.diff(table, axis=0)
    if increments.min() < -1e-8:
        raise ConsistencyError(f"嵌套窗口的电阻出现下降：{increments.min():.3e}")
    rows = []
    for a, size in enumerate(sizes):
        stats = mean_and_stderr(table[a])
        row = {
            "size": size,
            "log_size": math.log(size),
            "resistance": stats["mean"],
            "stderr": stats["stderr"],
            "n": stats["n"],
        }
        if a > 0:
            paired = mean_and_stderr(increments[a - 1])
            row["increment"] = paired["mean"]
            row["increment_stderr"] = paired["stderr"]
        rows.append(row)
    fit = linear_fit(np.repeat(np.log(sizes), trials), table.ravel())
    means = [r["resistance"] for r in rows]
    increasing = all(b > a for a, b in zip(means, means[1:]))
    report = ExperimentReport(
        name="green-growth",
        parameters={"sizes": sizes, "trials": trials, "gamma": gamma, "mesh_divisor": mesh_divisor, "nested": True},
        seed=seed,
        rows=rows,
        fit=fit,
        statistics={
            "increasing": increasing,
            "min_resistance": float(table.min()),
            "min_increment": float(increments.min()),
        },
        criterion="mean resistance increasing in N over nested centred windows and slope vs log N > 0 with CI excluding 0",
        passed=bool(increasing and fit.ci_low > 0),
        plot=PlotSpec(x="size", y="resistance", xlabel="N", ylabel="R_eff", show_fit=False),
    )
    logging.info("Green 增长：斜率 %.4f [%.4f, %.4f] 单调=%s", fit.slope, fit.ci_low, fit.ci_high, increasing)
    return report


def max_interior_edge(graph_seed: int, epsilon: float, horizon: float, gamma: float, radius: float = 0.5) -> dict:
    """一次采样：单位圆 Tutte 嵌入中两端点都落在 |z| ≤ radius 内的边的最大长度；没有这样的边时为 None。"""
    built = generate_map(gamma, epsilon, horizon, graph_seed)
    graph = built.graph
    _, embedding = circle_embedding(graph)
    interior = ~embedding.pinned_mask
    if interior.sum() > 1 and np.ptp(embedding.coords[interior], axis=0).max() < 1e-12:
        raise ConsistencyError("嵌入退化：全部内部顶点重合")
    inside = np.hypot(embedding.coords[:, 0], embedding.coords[:, 1]) <= radius
    keep = inside[graph.edge_i] & inside[graph.edge_j]
    lengths = embedding.edge_lengths(graph)
    return {
        "max_edge": float(lengths[keep].max()) if keep.any() else None,
        "max_any": float(lengths.max()),
        "edges": int(keep.sum()),
        "N": graph.count,
    }


@timed
def max_edge_scaling_experiment(
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    trials: int = 20,
    seed: int = 0,
    gamma: float = math.sqrt(2.0),
    horizon: float = 1.0,
    radius: float = 0.5,
) -> ExperimentReport:
    """
    嵌入后子圆盘 |z| ≤ radius 内最长边的尺度。

    log(最长边) 对 log ε 回归，斜率 ξ' > 0 且置信区间不含 0 时通过。子圆盘内没有边的样本不计入。
    """
    epsilons = check_epsilons(epsilons)
    if not 0 < radius < 1:
        raise DomainError(f"radius 必须在 (0, 1) 内：{radius}")
    jobs = [(a, t) for a in range(len(epsilons)) for t in range(trials)]
    results = parallel_map(
        lambda job: max_interior_edge(derive_seed(seed, job[0], job[1]), epsilons[job[0]], horizon, gamma, radius),
        jobs,
    )
    rows = []
    xs: List[float] = []
    ys: List[float] = []
    skipped = 0
    for a, epsilon in enumerate(epsilons):
        chunk = results[a * trials : (a + 1) * trials]
        lengths = [r["max_edge"] for r in chunk if r["max_edge"] is not None]
        skipped += len(chunk) - len(lengths)
        if not lengths:
            raise DomainError(f"epsilon={epsilon} 时子圆盘 |z| ≤ {radius} 内没有边")
        stats = mean_and_stderr(lengths)
        rows.append(
            {
                "epsilon": epsilon,
                "max_edge": stats["mean"],
                "stderr": stats["stderr"],
                "n": stats["n"],
                "vertices": float(np.mean([r["N"] for r in chunk])),
            }
        )
        xs.extend([math.log(epsilon)] * len(lengths))
        ys.extend(math.log(v) for v in lengths)
    longest = max(r["max_any"] for r in results)
    report = ExperimentReport(
        name="max-edge",
        parameters={"epsilons": epsilons, "trials": trials, "gamma": gamma, "horizon": horizon, "radius": radius},
        seed=seed,
        rows=rows,
        statistics={
            "longest_edge": longest,
            "within_diameter": bool(longest <= 2.0 + 1e-9),
            "skipped_samples": skipped,
        },
        criterion="fitted exponent ξ' > 0 with CI excluding 0, edges with both ends in |z| ≤ radius",
        plot=PlotSpec(x="epsilon", y="max_edge", xlabel="ε", ylabel="max edge length"),
    )
    if skipped:
        report.notes.append(f"{skipped} 个样本在子圆盘内没有边，未计入")
    if len(epsilons) >= 2:
        report.fit = linear_fit(xs, ys)
        report.passed = bool(report.fit.ci_low > 0)
        logging.info("最长边：ξ'=%.4f [%.4f, %.4f]", report.fit.slope, report.fit.ci_low, report.fit.ci_high)
    else:
        report.passed = False
        report.notes.append("只有一个 ε，无法拟合指数")
    return report


@timed
def spectral_dimension_experiment(
    cells: int = 100_000,
    n_max: int = 10_000,
    seed: int = 0,
    gamma: float = math.sqrt(2.0),
    mesh_divisor: int = 8,
    max_vertices: int = 200_000,
    n_min: int = 10,
) -> ExperimentReport:
    """
    窗口中心的精确返回概率 p_n 对 n 的双对数斜率，参考区间 [−1.35, −0.75]，不作为判定。

    n 步内返回的游走不会离开半径 ⌈n/2⌉ 的图球，因此只在该球的诱导子图上计算。
    """
    if n_max <= n_min:
        raise DomainError(f"n_max 必须大于 n_min={n_min}：{n_max}")
    built = generate_map(gamma, 1.0, float(cells), derive_seed(seed, 0), mesh=1.0 / mesh_divisor)
    graph = built.graph
    center = interior_center(graph)
    ball = graph_ball(graph, center, math.ceil(n_max / 2))
    sub, keep = graph.subgraph(ball)
    local = int(np.searchsorted(keep, center))
    curve = return_probability_curve(sub, local, n_max, max_vertices=max_vertices)
    steps = np.unique(np.geomspace(n_min, n_max, 40).round().astype(np.int64))
    rows = [{"n": int(n), "return_probability": float(curve[n - 1])} for n in steps]
    positive = [r for r in rows if r["return_probability"] > 0]
    fit = linear_fit([math.log(r["n"]) for r in positive], [math.log(r["return_probability"]) for r in positive])
    low, high = SPECTRAL_BAND
    report = ExperimentReport(
        name="spectral-dimension",
        parameters={"cells": cells, "n_max": n_max, "n_min": n_min, "gamma": gamma, "mesh_divisor": mesh_divisor},
        seed=seed,
        rows=rows,
        fit=fit,
        statistics={"ball_vertices": int(sub.count), "center": center, "band": list(SPECTRAL_BAND)},
        criterion="return-probability exponent within [-1.35, -0.75] (indicative)",
        passed=bool(low <= fit.slope <= high),
        gating=False,
        plot=PlotSpec(x="n", y="return_probability", xlabel="n", ylabel="p_n(v,v)"),
    )
    if not report.passed:
        logging.warning("返回概率指数 %.4f 不在参考区间 [%.2f, %.2f] 内", fit.slope, low, high)
    return report


@timed
def exit_time_experiment(
    radii: Sequence[int] = (2, 4, 8, 16),
    trials: int = 200,
    seed: int = 0,
    gamma: float = math.sqrt(2.0),
    cells: int = 4096,
    mesh_divisor: int = 16,
    max_steps: int = 1_000_000,
) -> ExperimentReport:
    """从中心顶点出发离开图球的平均时间与球体积之比，蒙特卡洛与精确解对照；不作为判定。"""
    radii = [int(r) for r in radii]
    if not radii or radii[0] < 1 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError(f"radii 必须为严格递增的正整数：{radii}")
    built = generate_map(gamma, 1.0, float(cells), derive_seed(seed, 0), mesh=1.0 / mesh_divisor)
    graph = built.graph
    center = interior_center(graph)
    rows = []
    consistent = True
    for k, radius in enumerate(radii):
        ball = graph_ball(graph, center, radius)
        exact = exit_time_exact(graph, center, ball)
        estimate = mean_exit_time(graph, center, ball, trials, derive_seed(seed, 1, k), max_steps)
        agrees = abs(estimate.mean - exact) <= 4.0 * max(estimate.stderr, 1e-12)
        consistent = consistent and agrees
        rows.append(
            {
                "radius": radius,
                "volume": int(ball.size),
                "flagged_in_ball": int(graph.boundary_flags[ball].sum()),
                "exit_time": estimate.mean,
                "stderr": estimate.stderr,
                "n": estimate.trials,
                "exact": exact,
                "ratio": exact / ball.size,
                "consistent": agrees,
            }
        )
    report = ExperimentReport(
        name="exit-time",
        parameters={
            "radii": radii,
            "trials": trials,
            "gamma": gamma,
            "cells": cells,
            "mesh_divisor": mesh_divisor,
            "max_steps": max_steps,
        },
        seed=seed,
        rows=rows,
        statistics={"center": center, "monte_carlo_consistent": consistent},
        criterion="Monte Carlo exit times match the exact solve; slope of exit time vs volume reported (indicative)",
        gating=False,
        plot=PlotSpec(x="volume", y="exact", xlabel="ball volume", ylabel="mean exit time"),
    )
    volumes = [r["volume"] for r in rows]
    if len(set(volumes)) >= 3:
        report.fit = linear_fit(np.log(volumes), np.log([r["exact"] for r in rows]))
    report.passed = bool(consistent and (report.fit is None or report.fit.slope > 0))
    if not consistent:
        logging.warning("离开时间：蒙特卡洛与精确解不一致")
    return report
