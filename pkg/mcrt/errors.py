"""
异常类型。

命令行按类型映射退出码：
- DomainError → 3（前置条件不满足）
- ResourceError → 4（超出规模上限）
- 其余 MatedCrtError → 1
"""


class MatedCrtError(Exception):
    """本库所有异常的基类。"""

    kind = "error"


class DomainError(MatedCrtError, ValueError):
    """参数或输入不满足前置条件。"""

    kind = "domain_error"


class DegenerateError(DomainError):
    """输入退化（例如边界数据为常数）。"""

    kind = "degenerate_input"


class UnsolvableError(MatedCrtError):
    """Dirichlet 问题无解：存在不接触边界的连通分量。"""

    kind = "unsolvable"


class ResourceError(MatedCrtError):
    """问题规模超出配置的上限。"""

    kind = "resource_error"


class ConsistencyError(MatedCrtError, RuntimeError):
    """内部不变量被破坏（说明代码有误，而非输入有误）。"""

    kind = "internal_consistency"
