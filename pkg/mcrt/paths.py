"""
随机输入的采样（path-gen）。

功能概要：
- bm_correlation：γ 对应的布朗运动相关系数 −cos(πγ²/4)
- sample_brownian_pair：[0,T] 上等距网格的相关布朗运动对
- sample_lattice_walk：Z² 上简单随机游走的两个坐标（Mullin 双射的离散对应）
- refine_path：Lévy 中点加细，网格减半且保留已有采样

所有函数都是 (参数, 种子) 的纯函数。
"""

import logging
import math

import numpy as np

from .base import PathPair
from .errors import DomainError
from .rng import trial_rng

# Z² 的四个单位步：(ΔL, ΔR)
LATTICE_STEPS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)


def bm_correlation(gamma: float) -> float:
    """返回 −cos(π·γ²/4)，在 (0,2) 上严格递增。"""
    if not (0.0 < gamma < 2.0) or not math.isfinite(gamma):
        raise DomainError(f"gamma 必须位于 (0,2)：{gamma}")
    return -math.cos(math.pi * gamma * gamma / 4.0)


def grid_steps(horizon: float, mesh: float) -> int:
    """校验 mesh 整除 horizon（允许舍入误差）并返回步数。"""
    if not (horizon > 0 and math.isfinite(horizon)):
        raise DomainError(f"horizon 必须为正：{horizon}")
    if not (mesh > 0 and math.isfinite(mesh)):
        raise DomainError(f"mesh 必须为正：{mesh}")
    ratio = horizon / mesh
    steps = int(round(ratio))
    if steps < 1 or abs(ratio - steps) > 1e-6 * max(1.0, ratio):
        raise DomainError(f"mesh={mesh} 不能整除 horizon={horizon}")
    return steps


def sample_brownian_pair(gamma: float, horizon: float, mesh: float, seed: int) -> PathPair:
    """
    采样相关布朗运动对。

    增量 (ΔL, ΔR) 独立同分布，协方差为 mesh·[[1, c], [c, 1]]，c = bm_correlation(gamma)。
    由标准平面布朗运动经线性变换（Cholesky 因子）得到。
    """
    correlation = bm_correlation(gamma)
    steps = grid_steps(horizon, mesh)
    rng = trial_rng(seed)
    normals = rng.standard_normal((steps, 2))
    scale = math.sqrt(mesh)
    d_l = scale * normals[:, 0]
    d_r = scale * (correlation * normals[:, 0] + math.sqrt(1.0 - correlation**2) * normals[:, 1])
    samples_l = np.concatenate([[0.0], np.cumsum(d_l)])
    samples_r = np.concatenate([[0.0], np.cumsum(d_r)])
    logging.debug("采样布朗路径：gamma=%.4f steps=%d seed=%d", gamma, steps, seed)
    return PathPair(
        gamma=float(gamma),
        correlation=correlation,
        mesh=float(mesh),
        horizon=float(horizon),
        samples_l=samples_l,
        samples_r=samples_r,
        seed=int(seed),
        kind="brownian",
    )


def sample_lattice_walk(n: int, seed: int) -> PathPair:
    """Z² 上 n 步简单随机游走；L、R 为两个坐标，mesh = 1。"""
    if int(n) != n or n < 1:
        raise DomainError(f"步数 n 必须为正整数：{n}")
    n = int(n)
    rng = trial_rng(seed)
    steps = LATTICE_STEPS[rng.integers(0, 4, size=n)]
    samples = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    return PathPair(
        gamma=math.sqrt(2.0),  # 生成树加权地图
        correlation=0.0,
        mesh=1.0,
        horizon=float(n),
        samples_l=samples[:, 0],
        samples_r=samples[:, 1],
        seed=int(seed),
        kind="lattice",
    )


def refine_path(path: PathPair, seed: int) -> PathPair:
    """
    Lévy 中点加细：在每对相邻采样之间插入中点。

    布朗路径的中点服从桥分布：均值为两端平均，协方差 (mesh/4)·[[1,c],[c,1]]。
    格点路径按线性插值加细，单元最小值保持不变。
    """
    mids_l = 0.5 * (path.samples_l[:-1] + path.samples_l[1:])
    mids_r = 0.5 * (path.samples_r[:-1] + path.samples_r[1:])
    if path.kind == "brownian":
        c = path.correlation
        normals = trial_rng(seed).standard_normal((mids_l.size, 2))
        scale = math.sqrt(path.mesh / 4.0)
        mids_l = mids_l + scale * normals[:, 0]
        mids_r = mids_r + scale * (c * normals[:, 0] + math.sqrt(1.0 - c * c) * normals[:, 1])
    size = 2 * path.count - 1
    samples_l = np.empty(size)
    samples_r = np.empty(size)
    samples_l[0::2], samples_l[1::2] = path.samples_l, mids_l
    samples_r[0::2], samples_r[1::2] = path.samples_r, mids_r
    return PathPair(
        gamma=path.gamma,
        correlation=path.correlation,
        mesh=path.mesh / 2.0,
        horizon=path.horizon,
        samples_l=samples_l,
        samples_r=samples_r,
        seed=path.seed,
        kind=path.kind,
    )
