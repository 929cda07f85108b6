"""
单位圆盘上的具名测试函数及其连续 Dirichlet 能量 ∫_D |∇f|²。
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class TestFunction:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]  # (m, 2) 平面点 → m 个取值
    energy: Optional[float]  # 单位圆盘上的连续能量；未知时为 None
    description: str = ""

    __test__ = False  # 不是 pytest 测试类

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.asarray(self.fn(points), dtype=float)


def _holder(chi: float) -> Callable[[np.ndarray], np.ndarray]:
    def fn(p: np.ndarray) -> np.ndarray:
        return np.hypot(p[:, 0] - 1.0, p[:, 1]) ** chi

    return fn


_FUNCTIONS: Dict[str, TestFunction] = {
    f.name: f
    for f in (
        TestFunction("re", lambda p: p[:, 0], math.pi, "Re z"),
        TestFunction("im", lambda p: p[:, 1], math.pi, "Im z"),
        # 圆周上恒为 1，调和延拓是常数，能量为 0
        TestFunction("abs2", lambda p: p[:, 0] ** 2 + p[:, 1] ** 2, 0.0, "|z|²"),
        TestFunction(
            "radial-log",
            lambda p: np.log(np.hypot(p[:, 0] - 2.0, p[:, 1])),
            math.pi * math.log(4.0 / 3.0),
            "log|z − 2|",
        ),
        TestFunction("const", lambda p: np.ones(p.shape[0]), 0.0, "1"),
    )
}


def function_names() -> tuple:
    return tuple(sorted(_FUNCTIONS)) + ("holder",)


def get_function(name: str, chi: float = 0.5) -> TestFunction:
    """按名称取测试函数；holder 为 |z − 1|^χ。"""
    if name == "holder":
        if not 0 < chi <= 1:
            raise DomainError(f"Hölder 指数 χ 必须位于 (0, 1]：{chi}")
        return TestFunction("holder", _holder(chi), None, f"|z − 1|^{chi}")
    try:
        return _FUNCTIONS[name]
    except KeyError:
        raise DomainError(f"未知的测试函数：{name}（可选：{', '.join(function_names())}）") from None
