import numpy as np
import pytest
from hypothesis import settings

from cpschwarz.band import build_band
from cpschwarz.geometry import make_surface
from cpschwarz.operators import RHS_PRESETS, assemble_operators, sample_rhs
from cpschwarz.partition import partition_band

settings.register_profile("repo", deadline=None, max_examples=60)
settings.load_profile("repo")


class Problem:
    def __init__(self, kind, dx, c=1.0, degree=2):
        self.surface = make_surface(kind, radius=1.0)
        self.band = build_band(self.surface, dx, degree)
        self.ops = assemble_operators(self.band, c)
        self.A = self.ops.helmholtz
        self.E = self.ops.extension
        self.c = c
        self.f = sample_rhs(self.band, RHS_PRESETS[f"eigen-{kind}"](c))


@pytest.fixture(scope="session")
def circle():
    return Problem("circle", 0.1)


@pytest.fixture(scope="session")
def sphere_coarse():
    return Problem("sphere", 0.2)


@pytest.fixture(scope="session")
def sphere():
    return Problem("sphere", 0.1)


@pytest.fixture(scope="session")
def circle_part8(circle):
    return partition_band(circle.band, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report -------------------------------------------------------

ACCEPTANCE = {}


def record(cid, passed, detail=""):
    ACCEPTANCE[cid] = (bool(passed), detail)
    return bool(passed)


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE[cid]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}")
