import functools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from helmpseudo import fem, mesh

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SEED = 20240501


@functools.lru_cache(maxsize=None)
def level_mesh(level: int) -> mesh.Mesh:
    return mesh.mesh_hierarchy(level)


@functools.lru_cache(maxsize=None)
def level_fem(level: int) -> fem.FemMatrices:
    return fem.assemble_all(level_mesh(level))


@functools.lru_cache(maxsize=None)
def helmholtz(level: int, kappa: float):
    return fem.assemble_helmholtz(level_fem(level), fem.HelmholtzParams(kappa))


@functools.lru_cache(maxsize=None)
def shifted(level: int, kappa: float, sigma: float):
    p = fem.HelmholtzParams(kappa, sigma)
    fm = level_fem(level)
    return fem.assemble_helmholtz(fm, p), fem.assemble_shifted_laplace(fm, p)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def coarse():
    return level_mesh(1)


KAPPAS = (4 * math.pi, 8 * math.pi, 16 * math.pi)


# acceptance results, printed after the test run
ACCEPTANCE: dict = {}


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
