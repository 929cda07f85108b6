"""
mated-CRT 随机平面图模拟库对外导出。

提供：
- 路径采样：sample_brownian_pair / sample_lattice_walk / refine_path
- 建图：cell_minima / build_graph / generate_map / planar_structure
- 位势论：harmonic_extend / dirichlet_energy / effective_resistance / green_diag / tutte_embed
- 随机游走：simulate_walk / return_probability / curve_follow_probability / annulus_crossing_probability
"""

from .base import (
    CellMinSeq,
    Embedding,
    Estimate,
    HarmonicSolution,
    MatedCrtGraph,
    PathPair,
    PlanarStructure,
    WalkPath,
)
from .errors import (
    ConsistencyError,
    DegenerateError,
    DomainError,
    MatedCrtError,
    ResourceError,
    UnsolvableError,
)
from .graph import (
    MatedCrtMap,
    boundary_flags,
    build_graph,
    cell_minima,
    generate_map,
    graph_ball,
    interior_center,
    scale_check,
    summary,
)
from .laplace import (
    circle_embedding,
    count_crossings,
    dirichlet_energy,
    effective_resistance,
    green_diag,
    harmonic_extend,
    tutte_embed,
    unit_circle_positions,
)
from .paths import bm_correlation, refine_path, sample_brownian_pair, sample_lattice_walk
from .planar import outer_cycle, planar_structure
from .rng import parallel_map, trial_rng
from .walk import (
    annulus_crossing_probability,
    curve_follow_probability,
    exit_time_exact,
    hitting_probability_exact,
    mean_exit_time,
    return_probability,
    return_probability_curve,
    simulate_walk,
)

__all__ = [
    "CellMinSeq",
    "ConsistencyError",
    "DegenerateError",
    "DomainError",
    "Embedding",
    "Estimate",
    "HarmonicSolution",
    "MatedCrtError",
    "MatedCrtGraph",
    "MatedCrtMap",
    "PathPair",
    "PlanarStructure",
    "ResourceError",
    "UnsolvableError",
    "WalkPath",
    "annulus_crossing_probability",
    "bm_correlation",
    "boundary_flags",
    "build_graph",
    "cell_minima",
    "circle_embedding",
    "count_crossings",
    "curve_follow_probability",
    "dirichlet_energy",
    "effective_resistance",
    "exit_time_exact",
    "generate_map",
    "graph_ball",
    "green_diag",
    "harmonic_extend",
    "hitting_probability_exact",
    "interior_center",
    "mean_exit_time",
    "outer_cycle",
    "parallel_map",
    "planar_structure",
    "refine_path",
    "return_probability",
    "return_probability_curve",
    "sample_brownian_pair",
    "sample_lattice_walk",
    "scale_check",
    "simulate_walk",
    "summary",
    "trial_rng",
    "tutte_embed",
    "unit_circle_positions",
]
