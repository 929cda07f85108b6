"""
实验模块对外导出。

提供：
- ExperimentRegistry / default_registry：按名称管理并运行实验
- 八个实验函数，均返回 ExperimentReport
- 具名测试函数与拟合工具
"""

from .base import DEFAULT_EPSILONS, DEFAULT_GAMMA_GRID, ExperimentReport, LinearFit, PlotSpec, linear_fit
from .functions import TestFunction, function_names, get_function
from .harmonic import energy_comparison_experiment, holder_exponent_experiment
from .mesh import changed_edge_fraction, mesh_refinement_study
from .registry import Experiment, ExperimentRegistry, default_registry
from .scaling import (
    degree_tail_experiment,
    exit_time_experiment,
    green_growth_experiment,
    max_edge_scaling_experiment,
    nested_resistances,
    spectral_dimension_experiment,
)

__all__ = [
    "DEFAULT_EPSILONS",
    "DEFAULT_GAMMA_GRID",
    "Experiment",
    "ExperimentRegistry",
    "ExperimentReport",
    "LinearFit",
    "PlotSpec",
    "TestFunction",
    "changed_edge_fraction",
    "default_registry",
    "degree_tail_experiment",
    "energy_comparison_experiment",
    "exit_time_experiment",
    "function_names",
    "get_function",
    "green_growth_experiment",
    "holder_exponent_experiment",
    "linear_fit",
    "max_edge_scaling_experiment",
    "mesh_refinement_study",
    "nested_resistances",
    "spectral_dimension_experiment",
]
