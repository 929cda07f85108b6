import math

import pytest

from mcrt.base import MatedCrtGraph
from mcrt.graph import generate_map


@pytest.fixture(autouse=True)
def limit_threads(monkeypatch):
    monkeypatch.setenv("MCRT_THREADS", "2")


@pytest.fixture
def path3():
    """0 - 1 - 2"""
    return MatedCrtGraph.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def double3():
    """0 - 1 单边，1 = 2 二重边。"""
    return MatedCrtGraph.from_edges(3, [(0, 1, "L"), (1, 2, "L"), (1, 2, "R")])


@pytest.fixture
def triangle():
    return MatedCrtGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture(scope="session")
def small_map():
    """64 个单元的布朗 mated-CRT 图。"""
    return generate_map(math.sqrt(2.0), 2.0**-6, 1.0, seed=3)


@pytest.fixture(scope="session")
def lattice_map():
    return generate_map(math.sqrt(2.0), 2.0, 400.0, seed=5, kind="lattice")
