"""
实验报告与拟合工具。

定义：
- ExperimentReport：实验名、参数、逐行统计、拟合结果、判定与运行时间
- LinearFit / linear_fit：最小二乘直线及斜率置信区间（t 分布）
- DEFAULT_GAMMA_GRID：三种离散模型对应的 γ
"""

import functools
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from ..errors import DomainError
from ..io import input_hash

SCHEMA_VERSION = "1.0"
CONFIDENCE = 0.95

# 双极定向 / 生成树加权 / 均匀
DEFAULT_GAMMA_GRID = (math.sqrt(4.0 / 3.0), math.sqrt(2.0), math.sqrt(8.0 / 3.0))
DEFAULT_EPSILONS = tuple(2.0**-k for k in range(6, 11))


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    n: int
    ci_low: float
    ci_high: float

    def excludes_zero(self) -> bool:
        return self.ci_low > 0 or self.ci_high < 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "r_squared": self.r_squared,
            "n": self.n,
            "ci": [self.ci_low, self.ci_high],
        }


def linear_fit(x: Sequence[float], y: Sequence[float], confidence: float = CONFIDENCE) -> LinearFit:
    """y = intercept + slope·x；至少 3 个点。"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if x.size < 3 or np.ptp(x) == 0:
        raise DomainError(f"拟合至少需要 3 个横坐标不全相同的点，实际 {x.size}")
    result = stats.linregress(x, y)
    t = float(stats.t.ppf(0.5 + confidence / 2.0, x.size - 2))
    return LinearFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        stderr=float(result.stderr),
        r_squared=float(result.rvalue**2),
        n=int(x.size),
        ci_low=float(result.slope - t * result.stderr),
        ci_high=float(result.slope + t * result.stderr),
    )


def mean_and_stderr(values: Sequence[float]) -> Dict[str, float]:
    values = np.asarray(values, dtype=float)
    n = int(values.size)
    return {
        "mean": float(values.mean()) if n else float("nan"),
        "stderr": float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "n": n,
    }


@dataclass
class PlotSpec:
    """报告附带的散点图：取 rows 中的两列。"""

    x: str
    y: str
    xlabel: str
    ylabel: str
    logx: bool = True
    show_fit: bool = True  # fit 为 log y 对 x（或 log x）的直线时才画拟合线


@dataclass
class ExperimentReport:
    name: str
    parameters: Dict[str, Any]
    seed: int
    rows: List[Dict[str, Any]] = field(default_factory=list)
    fit: Optional[LinearFit] = None
    statistics: Dict[str, Any] = field(default_factory=dict)
    criterion: str = ""
    passed: Optional[bool] = None
    gating: bool = True  # False 时结果只作参考
    notes: List[str] = field(default_factory=list)
    runtime: float = 0.0
    plot: Optional[PlotSpec] = None

    @property
    def input_hash(self) -> str:
        return input_hash(self.parameters, self.seed)

    def to_dict(self, include_runtime: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "parameters": self.parameters,
            "seed": self.seed,
            "input_hash": self.input_hash,
            "rows": self.rows,
            "fit": self.fit.to_dict() if self.fit else None,
            "statistics": self.statistics,
            "criterion": self.criterion,
            "passed": self.passed,
            "gating": self.gating,
            "notes": self.notes,
        }
        if include_runtime:
            data["runtime"] = self.runtime
        return data

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def timed(fn: Callable[..., ExperimentReport]) -> Callable[..., ExperimentReport]:
    """记录实验耗时到 report.runtime。"""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> ExperimentReport:
        started = time.perf_counter()
        report = fn(*args, **kwargs)
        report.runtime = time.perf_counter() - started
        return report

    return wrapper


def check_epsilons(epsilons: Sequence[float], dyadic: bool = True) -> List[float]:
    """ε 列表必须为正、互不相同；dyadic 时还须为 2 的负整数次幂。"""
    values = [float(e) for e in epsilons]
    if len(values) < 1 or any(not (e > 0 and math.isfinite(e)) for e in values):
        raise DomainError(f"epsilon 列表必须非空且全为正：{epsilons}")
    if len(set(values)) != len(values):
        raise DomainError("epsilon 列表有重复值")
    if dyadic:
        for e in values:
            k = -math.log2(e)
            if abs(k - round(k)) > 1e-9:
                raise DomainError(f"epsilon={e} 不是 2 的整数次幂")
    return sorted(values, reverse=True)
