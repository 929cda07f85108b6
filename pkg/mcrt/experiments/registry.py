"""
实验注册表。

按名称管理实验函数；run() 只把实验签名接受的参数传进去，未设置（None）的参数使用实验默认值。
"""

import inspect
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

from ..errors import DomainError
from .base import ExperimentReport
from .harmonic import energy_comparison_experiment, holder_exponent_experiment
from .mesh import mesh_refinement_study
from .scaling import (
    degree_tail_experiment,
    exit_time_experiment,
    green_growth_experiment,
    max_edge_scaling_experiment,
    spectral_dimension_experiment,
)


@dataclass(frozen=True)
class Experiment:
    name: str
    fn: Callable[..., ExperimentReport]
    description: str = ""

    @property
    def parameters(self) -> Tuple[str, ...]:
        return tuple(inspect.signature(self.fn).parameters)


class ExperimentRegistry:
    def __init__(self):
        """初始化实验注册表。"""
        self._experiments: Dict[str, Experiment] = {}

    def register(self, name: str, fn: Callable[..., ExperimentReport], description: str = "") -> None:
        """注册实验；同名覆盖。"""
        self._experiments[name.lower()] = Experiment(name=name.lower(), fn=fn, description=description)

    def get(self, name: str) -> Optional[Experiment]:
        """按名称获取实验。"""
        return self._experiments.get(name.lower())

    def require(self, name: str) -> Experiment:
        experiment = self.get(name)
        if experiment is None:
            raise DomainError(f"未知的实验：{name}（可选：{', '.join(self.names())}）")
        return experiment

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(self._experiments))

    def run(self, name: str, **options: Any) -> ExperimentReport:
        """运行实验；忽略值为 None 的选项以及该实验不接受的选项。"""
        experiment = self.require(name)
        accepted = set(experiment.parameters)
        kwargs = {k: v for k, v in options.items() if v is not None and k in accepted}
        ignored = sorted(k for k, v in options.items() if v is not None and k not in accepted)
        if ignored:
            logging.warning("实验 %s 不使用参数：%s", experiment.name, ", ".join(ignored))
        logging.info("开始实验 %s：%s", experiment.name, kwargs)
        report = experiment.fn(**kwargs)
        logging.info(
            "实验 %s 完成：%s（%.1f 秒）",
            experiment.name,
            {True: "通过", False: "未通过", None: "无判定"}[report.passed],
            report.runtime,
        )
        return report


def default_registry() -> ExperimentRegistry:
    registry = ExperimentRegistry()
    registry.register("degree-tail", degree_tail_experiment, "中心顶点度分布的指数尾")
    registry.register("green-growth", green_growth_experiment, "中心到边界的有效电阻随窗口增长")
    registry.register("max-edge", max_edge_scaling_experiment, "Tutte 嵌入最长边的 ε 幂律")
    registry.register("energy", energy_comparison_experiment, "离散与连续 Dirichlet 能量之比")
    registry.register("holder", holder_exponent_experiment, "调和延拓的连续模指数")
    registry.register("mesh-refinement", mesh_refinement_study, "网格加细下边集的稳定性")
    registry.register("spectral-dimension", spectral_dimension_experiment, "返回概率指数（参考）")
    registry.register("exit-time", exit_time_experiment, "图球离开时间与体积（参考）")
    return registry
