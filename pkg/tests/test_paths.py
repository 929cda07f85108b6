import math

import numpy as np
import pytest

from mcrt.errors import DomainError
from mcrt.paths import bm_correlation, grid_steps, refine_path, sample_brownian_pair, sample_lattice_walk


def test_bm_correlation_known_values():
    assert abs(bm_correlation(math.sqrt(2.0))) < 1e-12
    assert bm_correlation(math.sqrt(8.0 / 3.0)) == pytest.approx(0.5)
    assert bm_correlation(1e-4) == pytest.approx(-1.0, abs=1e-6)
    assert bm_correlation(2.0 - 1e-6) == pytest.approx(1.0, abs=1e-5)


def test_bm_correlation_increasing():
    grid = np.linspace(0.05, 1.95, 50)
    values = [bm_correlation(g) for g in grid]
    assert all(b > a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("gamma", [0.0, 2.0, -1.0, 2.5, float("nan")])
def test_bm_correlation_domain(gamma):
    with pytest.raises(DomainError):
        bm_correlation(gamma)


def test_grid_steps():
    assert grid_steps(1.0, 2.0**-10) == 1024
    for horizon, mesh in [(1.0, 0.3), (0.0, 0.1), (1.0, -0.1)]:
        with pytest.raises(DomainError):
            grid_steps(horizon, mesh)


def test_brownian_pair_is_deterministic():
    a = sample_brownian_pair(math.sqrt(2.0), 1.0, 2.0**-10, seed=11)
    b = sample_brownian_pair(math.sqrt(2.0), 1.0, 2.0**-10, seed=11)
    c = sample_brownian_pair(math.sqrt(2.0), 1.0, 2.0**-10, seed=12)
    assert np.array_equal(a.samples_l, b.samples_l)
    assert np.array_equal(a.samples_r, b.samples_r)
    assert not np.array_equal(a.samples_l, c.samples_l)
    assert a.count == 1025
    assert a.samples_l[0] == 0.0 and a.samples_r[0] == 0.0


@pytest.mark.parametrize("gamma", [math.sqrt(2.0), math.sqrt(8.0 / 3.0), math.sqrt(4.0 / 3.0)])
def test_brownian_increment_statistics(gamma):
    mesh = 1.0 / 200_000
    path = sample_brownian_pair(gamma, 1.0, mesh, seed=7)
    z = path.increments() / math.sqrt(mesh)
    n = z.shape[0]
    assert np.all(np.abs(z.mean(axis=0)) < 4.0 / math.sqrt(n))
    assert np.all(np.abs(z.var(axis=0) - 1.0) < 4.0 * math.sqrt(2.0 / n))
    c = bm_correlation(gamma)
    empirical = float(np.corrcoef(z.T)[0, 1])
    assert abs(empirical - c) < 4.0 * (1.0 - c * c) / math.sqrt(n) + 1e-3


def test_lattice_walk_steps():
    path = sample_lattice_walk(500, seed=2)
    assert path.kind == "lattice"
    assert path.count == 501
    assert path.mesh == 1.0 and path.horizon == 500.0
    steps = path.increments()
    assert np.all(np.abs(steps).sum(axis=1) == 1.0)


@pytest.mark.parametrize("n", [0, -3, 2.5])
def test_lattice_walk_domain(n):
    with pytest.raises(DomainError):
        sample_lattice_walk(n, seed=0)


def test_refine_keeps_samples_and_halves_mesh():
    path = sample_brownian_pair(math.sqrt(2.0), 1.0, 2.0**-8, seed=4)
    fine = refine_path(path, seed=9)
    assert fine.mesh == path.mesh / 2
    assert fine.count == 2 * path.count - 1
    assert np.array_equal(fine.samples_l[0::2], path.samples_l)
    assert np.array_equal(fine.samples_r[0::2], path.samples_r)


def test_refine_bridge_variance():
    path = sample_brownian_pair(math.sqrt(8.0 / 3.0), 1.0, 1.0 / 100_000, seed=1)
    fine = refine_path(path, seed=2)
    mid = fine.samples_l[1::2] - 0.5 * (path.samples_l[:-1] + path.samples_l[1:])
    z = mid / math.sqrt(path.mesh / 4.0)
    assert abs(z.var() - 1.0) < 4.0 * math.sqrt(2.0 / z.size)


def test_refine_lattice_is_interpolation():
    path = sample_lattice_walk(50, seed=3)
    fine = refine_path(path, seed=0)
    assert np.allclose(fine.samples_l[1::2], 0.5 * (path.samples_l[:-1] + path.samples_l[1:]))


def test_lattice_step_frequencies():
    path = sample_lattice_walk(400_000, seed=13)
    steps = path.increments()
    for direction in ([1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]):
        frequency = float(np.mean(np.all(steps == direction, axis=1)))
        assert frequency == pytest.approx(0.25, abs=0.005)
