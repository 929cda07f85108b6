"""
网格加细稳定性：同一条路径逐次 Lévy 中点加细，比较相邻网格下的边集。
"""

import logging
import math
from typing import List, Sequence

import numpy as np

from ..base import MatedCrtGraph
from ..errors import DomainError
from ..graph import DEFAULT_MIN_CELL_SAMPLES, build_graph, cell_minima
from ..paths import refine_path, sample_brownian_pair, sample_lattice_walk
from ..rng import derive_seed, parallel_map
from .base import ExperimentReport, mean_and_stderr, timed


def changed_edge_fraction(a: MatedCrtGraph, b: MatedCrtGraph) -> float:
    """|E_a △ E_b| / |E_a ∪ E_b|。"""
    union = a.edge_set | b.edge_set
    if not union:
        return 0.0
    return len(a.edge_set ^ b.edge_set) / len(union)


def check_factors(factors: Sequence[int]) -> List[int]:
    """加细倍数必须是严格递增的 2 的幂。"""
    values = [int(f) for f in factors]
    if len(values) < 2 or any(f != v for f, v in zip(factors, values)):
        raise DomainError(f"至少需要两个整数加细倍数：{list(factors)}")
    for f in values:
        if f < 1 or f & (f - 1):
            raise DomainError(f"加细倍数必须是 2 的幂：{f}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise DomainError(f"加细倍数必须严格递增：{values}")
    return values


def refinement_fractions(
    path_seed: int,
    epsilon: float,
    factors: Sequence[int],
    gamma: float,
    horizon: float,
    kind: str,
) -> List[float]:
    """一条路径在各加细倍数下的图，返回相邻倍数之间的变化比例。"""
    if kind == "lattice":
        path = sample_lattice_walk(int(round(horizon)), path_seed)
    else:
        path = sample_brownian_pair(gamma, horizon, epsilon / DEFAULT_MIN_CELL_SAMPLES, path_seed)
    graphs = []
    factor = 1
    level = 0
    while True:
        if factor in factors:
            graphs.append(build_graph(cell_minima(path, epsilon)))
        if factor >= factors[-1]:
            break
        path = refine_path(path, derive_seed(path_seed, level))
        factor *= 2
        level += 1
    return [changed_edge_fraction(a, b) for a, b in zip(graphs, graphs[1:])]


@timed
def mesh_refinement_study(
    seed: int = 0,
    epsilon: float = 2.0**-6,
    factors: Sequence[int] = (1, 2, 4, 8, 16),
    trials: int = 5,
    gamma: float = math.sqrt(2.0),
    horizon: float = 1.0,
    kind: str = "brownian",
) -> ExperimentReport:
    """
    网格减半时边集的变化比例；沿加细序列（在噪声范围内）不增且最终不高于起点时通过。

    布朗路径的倍数 1 对应 mesh = ε/8；格点路径 mesh = 1，最小值精确，加细不改变边集。
    """
    factors = check_factors(factors)
    if kind not in ("brownian", "lattice"):
        raise DomainError(f"未知的路径类型：{kind}")
    if kind == "lattice" and (epsilon < 1 or epsilon != int(epsilon)):
        raise DomainError(f"格点路径的 epsilon 必须是正整数：{epsilon}")
    table = np.asarray(
        parallel_map(
            lambda t: refinement_fractions(derive_seed(seed, t), epsilon, factors, gamma, horizon, kind),
            range(trials),
        )
    ).reshape(trials, len(factors) - 1)
    rows = []
    for k, (a, b) in enumerate(zip(factors, factors[1:])):
        stats = mean_and_stderr(table[:, k])
        rows.append(
            {
                "from_factor": a,
                "to_factor": b,
                "changed_fraction": stats["mean"],
                "stderr": stats["stderr"],
                "n": stats["n"],
            }
        )
    means = [r["changed_fraction"] for r in rows]
    noise = [2.0 * math.hypot(a["stderr"], b["stderr"]) for a, b in zip(rows, rows[1:])]
    monotone = all(nb <= na + tol for na, nb, tol in zip(means, means[1:], noise))
    decays = means[-1] <= means[0] or max(means) == 0.0
    report = ExperimentReport(
        name="mesh-refinement",
        parameters={
            "epsilon": epsilon,
            "factors": factors,
            "trials": trials,
            "gamma": gamma,
            "horizon": horizon,
            "kind": kind,
        },
        seed=seed,
        rows=rows,
        statistics={"monotone": monotone, "decays": decays},
        criterion="changed-edge fraction non-increasing within noise along refinement",
        passed=bool(monotone and decays),
    )
    logging.info("网格加细：变化比例 %s", ["%.4f" % m for m in means])
    return report
