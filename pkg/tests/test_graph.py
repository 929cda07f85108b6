import math

import numpy as np
import pytest
from scipy import stats

from mcrt.base import CellMinSeq, MatedCrtGraph, PathPair
from mcrt.errors import DomainError
from mcrt.graph import (
    boundary_flags,
    build_graph,
    cell_minima,
    generate_map,
    graph_ball,
    interior_center,
    scale_check,
    summary,
    visibility_pairs,
)
from mcrt.paths import refine_path, sample_brownian_pair, sample_lattice_walk
from mcrt.rng import trial_rng

from .oracles import brute_force_edges, visible_pairs


def _path(samples_l, mesh, samples_r=None):
    samples_l = np.asarray(samples_l, dtype=float)
    samples_r = np.zeros_like(samples_l) if samples_r is None else np.asarray(samples_r, dtype=float)
    return PathPair(
        gamma=math.sqrt(2.0),
        correlation=0.0,
        mesh=mesh,
        horizon=mesh * (samples_l.size - 1),
        samples_l=samples_l,
        samples_r=samples_r,
        seed=0,
    )


def test_cell_minima_worked_example():
    path = _path([0, -1, 0.5, 0.2, -0.3, 0.1, 0.4], mesh=0.5)
    cells = cell_minima(path, 1.0, min_cell_samples=2)
    assert cells.count == 3
    assert np.allclose(cells.min_l, [-1.0, -0.3, -0.3])
    assert np.allclose(cells.argmin_l, [0.5, 2.0, 2.0])


def test_cell_minima_constant_path():
    cells = cell_minima(_path(np.zeros(65), mesh=1.0 / 64), 1.0 / 8)
    assert np.all(cells.min_l == 0.0)
    assert cells.count == 8


def test_cell_minima_resolution_and_grid():
    path = sample_brownian_pair(math.sqrt(2.0), 1.0, 2.0**-10, seed=0)
    with pytest.raises(DomainError):
        cell_minima(path, 2.0**-8)  # 每个单元只有 4 步
    with pytest.raises(DomainError):
        cell_minima(path, 0.003)
    with pytest.raises(DomainError):
        cell_minima(path, 2.0)
    assert cell_minima(path, 2.0**-7).count == 128


def test_single_side_example():
    graph = build_graph(CellMinSeq.from_minima([3, 1, 4, 1.5, 5]))
    assert graph.edge_set == {(0, 1, "L"), (1, 2, "L"), (2, 3, "L"), (3, 4, "L"), (1, 3, "L")}


def test_double_edge_example():
    graph = build_graph(CellMinSeq.from_minima([1, 5, 2], [2, 7, 1]))
    assert graph.multiplicity(0, 2) == 2
    assert (0, 2, "L") in graph.edge_set and (0, 2, "R") in graph.edge_set
    assert graph.multiplicity(0, 1) == 1


def test_increasing_minima_only_consecutive():
    graph = build_graph(CellMinSeq.from_minima([1, 2, 3, 4, 5, 6]))
    assert graph.edge_set == {(i, i + 1, "L") for i in range(5)}


def test_scaled_example_keeps_edges():
    base = build_graph(CellMinSeq.from_minima([3, 1, 4, 1.5, 5]))
    scaled = build_graph(CellMinSeq.from_minima([7 * v for v in (3, 1, 4, 1.5, 5)]))
    assert base.same_edges(scaled)


def test_build_needs_two_cells():
    with pytest.raises(DomainError):
        build_graph(CellMinSeq.from_minima([1.0]))


def test_visibility_matches_brute_force_with_ties():
    rng = trial_rng(123)
    for _ in range(200):
        n = int(rng.integers(2, 60))
        values = rng.integers(0, 4, size=n).astype(float)
        left, right = visibility_pairs(values)
        assert set(zip(left.tolist(), right.tolist())) == visible_pairs(values)


def _random_cells(rng, index):
    if index % 2:
        n = int(rng.integers(8, 400))
        path = sample_lattice_walk(n, seed=index)
        return cell_minima(path, float(rng.integers(1, 3)))
    path = sample_brownian_pair(float(rng.uniform(0.2, 1.9)), 1.0, 2.0**-12, seed=index)
    return cell_minima(path, 2.0 ** -int(rng.integers(2, 8)))


def _check_oracle(instances):
    rng = trial_rng(77)
    for index in range(instances):
        cells = _random_cells(rng, index)
        if cells.count < 2 or cells.count > 200:
            continue
        graph = build_graph(cells)
        assert graph.edge_set == brute_force_edges(cells.min_l, cells.min_r)


def test_builder_matches_brute_force():
    _check_oracle(150)


@pytest.mark.slow
def test_builder_matches_brute_force_full():
    _check_oracle(1000)


def test_scale_check():
    path = sample_brownian_pair(math.sqrt(2.0), 1.0, 2.0**-12, seed=8)
    assert scale_check(path, 1.0, 1.0, 2.0**-6)
    assert scale_check(path, 1e3, 1e-3, 2.0**-6)
    with pytest.raises(DomainError):
        scale_check(path, 0.0, 1.0, 2.0**-6)


def test_boundary_flags_cover_records():
    cells = CellMinSeq.from_minima([2, 0, 3, 1, 4, 5], [1, 4, 3, 6, 2, 7])
    flags = boundary_flags(cells)
    assert flags[0] and flags[-1]
    # 1 是 L 的全局最小；2 在 L、R 两侧都被更低的值左右夹住
    assert flags[1]
    assert not flags[2]


def test_generate_map_deterministic(small_map):
    again = generate_map(math.sqrt(2.0), 2.0**-6, 1.0, seed=3)
    assert small_map.graph.same_edges(again.graph)
    assert small_map.graph.count == 64
    other = generate_map(math.sqrt(2.0), 2.0**-6, 1.0, seed=4)
    assert not small_map.graph.same_edges(other.graph)


def test_generate_map_lattice(lattice_map):
    assert lattice_map.path.kind == "lattice"
    assert lattice_map.graph.count == 200


def test_graph_validation():
    with pytest.raises(DomainError):
        MatedCrtGraph.from_edges(2, [(0, 0)])
    with pytest.raises(DomainError):
        MatedCrtGraph.from_edges(2, [(0, 1, "L"), (1, 0, "L")])
    with pytest.raises(DomainError):
        MatedCrtGraph.from_edges(2, [(0, 2)])
    with pytest.raises(DomainError):
        MatedCrtGraph.from_edges(2, [(0, 1, "X")])


def test_degree_counts_multiplicity(double3):
    assert double3.degree.tolist() == [1, 3, 2]
    indptr, indices = double3.neighbor_table
    assert sorted(indices[indptr[1] : indptr[2]].tolist()) == [0, 2, 2]


def test_graph_ball_and_center(path3):
    assert graph_ball(path3, 1, 1).tolist() == [0, 1, 2]
    assert graph_ball(path3, 0, 1).tolist() == [0, 1]
    flagged = MatedCrtGraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)], [True, False, False, False, True])
    assert interior_center(flagged) == 2


def test_interior_center_unflagged(small_map):
    graph = small_map.graph
    assert not graph.boundary_flags[interior_center(graph)]


def test_summary(small_map):
    data = summary(small_map.graph, seed=3)
    assert data["N"] == 64
    assert data["E"] == small_map.graph.edge_count
    assert data["seed"] == 3
    assert data["max_degree"] >= 2
    assert data["boundary_count"] >= 2


def test_mesh_halving_never_raises_cell_minima():
    path = sample_brownian_pair(math.sqrt(8.0 / 3.0), 1.0, 2.0**-10, seed=6)
    coarse = cell_minima(path, 2.0**-6)
    for k in range(3):
        path = refine_path(path, seed=k)
        fine = cell_minima(path, 2.0**-6)
        assert fine.count == coarse.count
        assert np.all(fine.min_l <= coarse.min_l)
        assert np.all(fine.min_r <= coarse.min_r)
        coarse = fine


def _center_degrees(epsilon, horizon, seeds):
    degrees = []
    for seed in seeds:
        graph = generate_map(math.sqrt(2.0), epsilon, horizon, seed=seed, mesh=epsilon / 16).graph
        degrees.append(int(graph.degree[interior_center(graph)]))
    return np.asarray(degrees)


def test_degree_law_does_not_depend_on_epsilon():
    small = _center_degrees(2.0**-6, 1.0, range(300))
    unit = _center_degrees(1.0, 64.0, range(1000, 1300))
    assert stats.ks_2samp(small, unit).pvalue > 1e-3
    assert stats.mannwhitneyu(small, unit).pvalue > 1e-3
