import numpy as np
import pytest

from mcrt.base import MatedCrtGraph
from mcrt.errors import DomainError, ResourceError, UnsolvableError
from mcrt.graph import interior_center
from mcrt.laplace import circle_embedding
from mcrt.walk import (
    BUDGET,
    HIT,
    LEFT,
    _distance_to_window_edge,
    annulus_crossing_exact,
    annulus_crossing_probability,
    curve_follow_exact,
    curve_follow_probability,
    curve_follow_sets,
    exit_time_exact,
    exit_time_trials,
    hitting_probability_exact,
    mean_exit_time,
    return_probability,
    return_probability_curve,
    return_probability_mc,
    run_trials,
    simulate_walk,
)

from .oracles import transition_matrix


def _path_graph(n):
    return MatedCrtGraph.from_edges(n, [(k, k + 1) for k in range(n - 1)])


def _within(estimate, exact, sigmas=4.0):
    return abs(estimate.mean - exact) <= sigmas * max(estimate.stderr, 1e-3)


@pytest.fixture(scope="module")
def embedded(small_map):
    _, embedding = circle_embedding(small_map.graph)
    return small_map.graph, embedding


def test_forced_move_on_double_edge():
    graph = MatedCrtGraph.from_edges(2, [(0, 1, "L"), (0, 1, "R")])
    walk = simulate_walk(graph, 0, None, max_steps=1, seed=0)
    assert walk.vertices == (0, 1)
    assert walk.stop_reason == "step_budget"
    assert walk.steps == 1


def test_simulate_walk_stop_rules(path3):
    immediate = simulate_walk(path3, 1, lambda v, step: v == 1, max_steps=10, seed=0)
    assert immediate.steps == 0 and immediate.stop_reason == "hit_target"
    left = simulate_walk(path3, 1, lambda v, step: "left_region" if v != 1 else False, max_steps=10, seed=0)
    assert left.steps == 1 and left.stop_reason == "left_region"
    with pytest.raises(DomainError):
        simulate_walk(path3, 1, lambda v, step: "bogus", max_steps=10, seed=0)


def test_simulate_walk_deterministic_and_moves_along_edges(small_map):
    graph = small_map.graph
    a = simulate_walk(graph, 5, None, max_steps=500, seed=42)
    b = simulate_walk(graph, 5, None, max_steps=500, seed=42)
    assert a == b
    weights = graph.conductance
    assert all(weights[u, v] > 0 for u, v in zip(a.vertices, a.vertices[1:]))


def test_simulate_walk_errors():
    isolated = MatedCrtGraph.from_edges(3, [(0, 1)])
    with pytest.raises(DomainError):
        simulate_walk(isolated, 2, None, max_steps=5, seed=0)
    with pytest.raises(DomainError):
        simulate_walk(isolated, 0, None, max_steps=0, seed=0)


def test_occupation_follows_degree(small_map):
    graph = small_map.graph
    walk = simulate_walk(graph, 0, None, max_steps=200_000, seed=1)
    visits = np.bincount(np.asarray(walk.vertices), minlength=graph.count)
    u, v = int(np.argmax(graph.degree)), int(np.argmin(graph.degree))
    ratio = visits[u] / visits[v]
    assert ratio == pytest.approx(graph.degree[u] / graph.degree[v], rel=0.25)


def test_return_probability_triangle(triangle):
    assert return_probability(triangle, 0, 2) == pytest.approx(0.5)
    assert return_probability(triangle, 1, 1) == 0.0
    assert return_probability_curve(triangle, 0, 3)[2] == pytest.approx(0.25)


def test_return_probability_matches_matrix_power(small_map):
    graph = small_map.graph
    p = transition_matrix(graph)
    v = interior_center(graph)
    curve = return_probability_curve(graph, v, 12)
    power = np.linalg.matrix_power(p, 12)
    assert curve[-1] == pytest.approx(power[v, v], rel=1e-10)


def test_return_probability_monte_carlo(small_map):
    graph = small_map.graph
    v = interior_center(graph)
    exact = return_probability(graph, v, 6)
    estimate = return_probability_mc(graph, v, 6, trials=4000, seed=3)
    assert _within(estimate, exact)
    assert return_probability(graph, v, 6, method="monte_carlo", trials=4000, seed=3) == estimate.mean


def test_return_probability_errors(small_map):
    graph = small_map.graph
    with pytest.raises(ResourceError):
        return_probability(graph, 0, 4, max_vertices=10)
    with pytest.raises(DomainError):
        return_probability(graph, 0, 4, method="guess")
    with pytest.raises(DomainError):
        return_probability(graph, 0, 0)


def test_run_trials_outcomes(path3):
    target = np.array([False, False, True])
    killed = np.array([True, False, False])
    log = run_trials(path3, 1, target, killed, trials=1000, seed=0, max_steps=10)
    assert set(np.unique(log.outcome)) <= {HIT, LEFT}
    assert np.all(log.steps == 1)
    assert abs(np.mean(log.outcome == HIT) - 0.5) < 4 * 0.5 / np.sqrt(1000)
    frame = log.to_frame()
    assert list(frame.columns) == ["trial", "outcome", "steps"]
    assert len(frame) == 1000


def test_run_trials_target_wins_over_killed(path3):
    both = np.array([False, True, False])
    log = run_trials(path3, 1, both, both, trials=3, seed=0)
    assert np.all(log.outcome == HIT) and np.all(log.steps == 0)


def test_run_trials_budget(small_map):
    graph = small_map.graph
    none = np.zeros(graph.count, dtype=bool)
    log = run_trials(graph, 0, none, none, trials=5, seed=0, max_steps=7)
    assert np.all(log.outcome == BUDGET) and np.all(log.steps == 7)


def test_trials_do_not_depend_on_threads(small_map, monkeypatch):
    graph = small_map.graph
    target = graph.boundary_flags.copy()
    killed = np.zeros(graph.count, dtype=bool)
    start = interior_center(graph)
    monkeypatch.setenv("MCRT_THREADS", "1")
    one = run_trials(graph, start, target, killed, trials=700, seed=9)
    monkeypatch.setenv("MCRT_THREADS", "4")
    four = run_trials(graph, start, target, killed, trials=700, seed=9)
    assert np.array_equal(one.outcome, four.outcome)
    assert np.array_equal(one.steps, four.steps)


def test_hitting_probability_exact_vs_monte_carlo(small_map):
    graph = small_map.graph
    start = interior_center(graph)
    target, killed = [0], [graph.count - 1]
    exact = hitting_probability_exact(graph, start, target, killed)
    assert 0.0 < exact < 1.0
    t = np.zeros(graph.count, dtype=bool)
    k = np.zeros(graph.count, dtype=bool)
    t[0], k[-1] = True, True
    log = run_trials(graph, start, t, k, trials=3000, seed=4)
    p = float(np.mean(log.outcome == HIT))
    assert abs(p - exact) <= 4 * np.sqrt(exact * (1 - exact) / 3000)


def test_exit_time_interval():
    graph = _path_graph(5)
    assert exit_time_exact(graph, 2, [1, 2, 3]) == pytest.approx(4.0)
    assert exit_time_exact(graph, 0, [1, 2, 3]) == 0.0
    estimate = mean_exit_time(graph, 2, [1, 2, 3], trials=4000, seed=0)
    assert _within(estimate, 4.0)
    with pytest.raises(UnsolvableError):
        exit_time_exact(graph, 2, range(5))


def test_exit_time_budget_counted(small_map):
    graph = small_map.graph
    region = range(graph.count)
    log = exit_time_trials(graph, 0, region, trials=4, seed=0, max_steps=20)
    assert np.all(log.outcome == BUDGET)
    estimate = mean_exit_time(graph, 0, region, trials=4, seed=0, max_steps=20)
    assert estimate.budget_exhausted == 4 and estimate.mean == 20.0


def test_curve_follow_sets(embedded):
    graph, embedding = embedded
    interior = np.flatnonzero(~embedding.pinned_mask)
    a, b = embedding.coords[interior[0]], embedding.coords[interior[-1]]
    start, target, killed = curve_follow_sets(graph, embedding, [a, b], 1e-6, 0.2)
    assert start == interior[0]
    assert target[interior[-1]]
    assert not np.any(target & killed)
    assert np.all(killed[embedding.pinned_mask] | target[embedding.pinned_mask])


def test_curve_follow_exact_vs_monte_carlo(embedded):
    graph, embedding = embedded
    interior = np.flatnonzero(~embedding.pinned_mask)
    curve = [embedding.coords[interior[0]], embedding.coords[interior[-1]]]
    exact = curve_follow_exact(graph, embedding, curve, 1e-6, 0.3)
    estimate = curve_follow_probability(graph, embedding, curve, 1e-6, 0.3, trials=2000, seed=5)
    assert estimate.ci_low <= estimate.mean <= estimate.ci_high
    assert abs(estimate.mean - exact) <= 4 * np.sqrt(max(exact * (1 - exact), 1e-4) / 2000)


def test_curve_follow_errors(embedded):
    graph, embedding = embedded
    with pytest.raises(DomainError):
        curve_follow_sets(graph, embedding, [[0.0, 0.0], [3.0, 0.0]], 0.1, 0.2)
    with pytest.raises(DomainError):
        curve_follow_sets(graph, embedding, [[0.0, 0.0], [0.1, 0.0]], 0.3, 0.2)


def test_annulus_exact_vs_monte_carlo(embedded):
    graph, embedding = embedded
    interior = np.flatnonzero(~embedding.pinned_mask)
    radii = _distance_to_window_edge(embedding, embedding.coords[interior])
    v = int(interior[np.argmax(radii)])
    center = embedding.coords[v]
    r = 0.5 * float(radii.max())
    starts, exact = annulus_crossing_exact(graph, embedding, center, 0.1, r)
    estimate = annulus_crossing_probability(graph, embedding, center, 0.1, r, trials=1500, seed=6)
    assert estimate.extra["starts"] == starts.tolist()
    for mean, p in zip(estimate.extra["start_means"], exact):
        assert abs(mean - p) <= 4 * np.sqrt(max(p * (1 - p), 1e-4) / 1500)
    assert estimate.mean == min(estimate.extra["start_means"])


def test_annulus_errors(embedded):
    graph, embedding = embedded
    with pytest.raises(DomainError):
        annulus_crossing_probability(graph, embedding, [0.0, 0.0], 0.2, 0.1, trials=10, seed=0)
    with pytest.raises(DomainError):
        annulus_crossing_probability(graph, embedding, [0.0, 0.0], 0.1, 1.5, trials=10, seed=0)


def _transition_counts(graph, walk):
    counts = np.zeros((graph.count, graph.count), dtype=np.int64)
    np.add.at(counts, (np.asarray(walk.vertices[:-1]), np.asarray(walk.vertices[1:])), 1)
    return counts


def test_transitions_follow_multiplicity(double3):
    walk = simulate_walk(double3, 1, None, max_steps=60_000, seed=4)
    counts = _transition_counts(double3, walk)
    out = counts[1].sum()
    assert counts[1, 0] / out == pytest.approx(1.0 / 3.0, abs=0.015)
    assert counts[1, 2] / out == pytest.approx(2.0 / 3.0, abs=0.015)


def test_transition_frequencies_and_reversibility(small_map):
    graph = small_map.graph
    walk = simulate_walk(graph, 0, None, max_steps=300_000, seed=9)
    counts = _transition_counts(graph, walk)
    weights = graph.conductance.toarray()
    assert np.all(counts[weights == 0] == 0)
    busiest = int(np.argmax(counts.sum(axis=1)))
    out = counts[busiest].sum()
    expected = weights[busiest] / graph.degree[busiest]
    observed = counts[busiest] / out
    assert np.all(np.abs(observed - expected) <= 4.0 * np.sqrt(expected * (1 - expected) / out) + 1e-12)
    u, v = np.nonzero(np.triu(weights))
    forward, backward = counts[u, v], counts[v, u]
    assert np.all(np.abs(forward - backward) <= 4.0 * np.sqrt(forward + backward) + 1)


def test_zero_length_curve_is_followed_surely(embedded):
    graph, embedding = embedded
    v = int(np.flatnonzero(~embedding.pinned_mask)[0])
    point = embedding.coords[v]
    for curve in ([point], [point, point]):
        assert curve_follow_exact(graph, embedding, curve, 1e-6, 0.2) == 1.0
        estimate = curve_follow_probability(graph, embedding, curve, 1e-6, 0.2, trials=50, seed=1)
        assert estimate.mean == 1.0
