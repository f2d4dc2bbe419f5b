import math

import numpy as np
import pytest

from magorbit.dynamics import MagneticSystem, flat_torus_system, sphere_system
from magorbit.geometry import (TrigMetric, TrigPoly, TrigTwoForm, cosine_field_t2, flat_torus)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def variable_t2():
    return flat_torus_system(2, cosine_field_t2(), name="t2-variable")


@pytest.fixture
def constant_t2():
    return flat_torus_system(2, TrigTwoForm.block([1.0]), name="t2-constant")


@pytest.fixture
def round_s2():
    return sphere_system((1.0, 0.3))


def wavy_metric_t2():
    """Non-flat, non-diagonal metric on T2 (positive definite)."""
    return TrigMetric(2, {
        (0, 0): TrigPoly(2, [((0, 0), 1.0, 0.0), ((1, 0), 0.2, 0.1)]),
        (1, 1): TrigPoly(2, [((0, 0), 1.3, 0.0), ((0, 1), 0.0, 0.25)]),
        (0, 1): TrigPoly(2, [((1, 1), 0.15, 0.05)]),
    })


def catalog_systems():
    """One representative magnetic system per catalog manifold (plus a quartic variant)."""
    t3_sigma = TrigTwoForm(3, {
        (0, 1): TrigPoly(3, [((0, 0, 0), 1.0, 0.0), ((1, 0, 0), 0.2, 0.0)]),
        (1, 2): TrigPoly(3, [((0, 1, 1), 0.3, 0.1)]),
    }, symplectic=False)
    t4_sigma = TrigTwoForm(4, {
        (0, 1): TrigPoly(4, [((0, 0, 0, 0), 1.0, 0.0), ((1, 0, 0, 0), 0.2, 0.0)]),
        (2, 3): TrigPoly(4, [((0, 0, 0, 0), 1.5, 0.0), ((0, 0, 1, 0), 0.0, 0.3)]),
        (0, 2): TrigPoly(4, [((0, 0, 0, 0), 0.4, 0.0)]),
    })
    return [
        MagneticSystem(flat_torus(2), wavy_metric_t2(), cosine_field_t2(), name="T2-wavy"),
        MagneticSystem(flat_torus(2), wavy_metric_t2(), cosine_field_t2(), kappa=0.7, name="T2-quartic"),
        flat_torus_system(3, t3_sigma, name="T3"),
        flat_torus_system(4, t4_sigma, name="T4"),
        sphere_system((1.0, 0.3, -0.2), name="S2"),
    ]
