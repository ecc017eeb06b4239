import functools
import time

import pytest
from hypothesis import HealthCheck, settings

from steklov.fem import solve_modes
from steklov.geometry import make_profile
from steklov.mesh import MeshParams, generate_mesh

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

# wall-clock seconds spent building each cached object, keyed like the caches
BUILD_SECONDS = {}


@functools.lru_cache(maxsize=None)
def cached_mesh(kind, h, eps=None, delta=None, wall=None):
    started = time.perf_counter()
    prof = make_profile(kind, eps, delta) if kind != "ball" else make_profile("ball")
    grading = {"wall": wall, "corners": wall} if wall else {}
    mesh = generate_mesh(prof, MeshParams(h, grading))
    BUILD_SECONDS[("mesh", kind, h, eps, delta, wall)] = time.perf_counter() - started
    return mesh


@pytest.fixture(scope="session")
def mesh_cache():
    return cached_mesh


@functools.lru_cache(maxsize=None)
def cached_modes(kind, h, eps=None, m_max=7, per_mode=9):
    mesh = cached_mesh(kind, h, eps)
    started = time.perf_counter()
    modes = solve_modes(mesh, m_max, per_mode)
    BUILD_SECONDS[("modes", kind, h, eps, m_max, per_mode)] = time.perf_counter() - started
    return modes


@pytest.fixture(scope="session")
def modes_cache():
    return cached_modes
