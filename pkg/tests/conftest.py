"""Shared fixtures and the acceptance summary printed at the end of a run."""

import numpy as np
import pytest

from ptmeta.geometry import DimerConfig, LatticeConfig, MaterialParams, ResonatorShape, build_pt_dimer

ACCEPTANCE_LINES = []


def record_acceptance(number: int, ok: bool, detail: str) -> str:
    line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sphere_dimer():
    """Unit spheres, gap 2, a = 2e-4."""
    cfg = DimerConfig(ResonatorShape("sphere", 1.0), 2.0, MaterialParams(2e-4, 0.0))
    return build_pt_dimer(cfg)


@pytest.fixture(scope="session")
def sphere_C(sphere_dimer):
    from ptmeta.capacitance import capacitance_matrix

    return capacitance_matrix(sphere_dimer)


@pytest.fixture(scope="session")
def disk_dimer():
    """Disks of radius 0.15, gap 0.5, a = 2e-4, b = 1e-4."""
    cfg = DimerConfig(ResonatorShape("disk", 0.15), 0.5, MaterialParams(2e-4, 1e-4))
    return build_pt_dimer(cfg)


@pytest.fixture(scope="session")
def chain():
    return LatticeConfig(1.0, 2)


@pytest.fixture(scope="session")
def screen(disk_dimer, chain):
    from ptmeta.metascreen import screen_model

    return screen_model(disk_dimer, chain)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
