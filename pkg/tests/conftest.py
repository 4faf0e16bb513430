import pytest

import acceptance_report

from latticeplan.lattice import LatticeSpec, build_lattice, build_primitive_library
from latticeplan.steering import Configuration, SteeringConfig


def pytest_terminal_summary(terminalreporter):
    if acceptance_report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_report.LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def cfg():
    return SteeringConfig(min_turn_radius=5.0)


@pytest.fixture
def cfg_small():
    """Tight turns relative to grid spacing keep tiny-lattice motions short."""
    return SteeringConfig(min_turn_radius=0.5)


@pytest.fixture
def tiny_lattice():
    """3x3 grid, 8 headings, 2 starts; the smallest interesting multi-start case."""
    return build_lattice(LatticeSpec(alpha=1.0, beta=1.0, n0=1, n1=1, n2=3))


@pytest.fixture
def tiny_library(tiny_lattice, cfg_small):
    return build_primitive_library(tiny_lattice, cfg_small)


def make_config(x, y, theta, higher=()):
    return Configuration(x, y, theta, tuple(higher))
