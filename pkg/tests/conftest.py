from __future__ import annotations

import functools
import os

import pytest
from hypothesis import HealthCheck, settings

from dirac_forge.dirac_chain import classify, stabilize
from dirac_forge.mechmodel import legendre
from dirac_forge.modelfile import bundled, load

settings.register_profile(
    "dirac-forge",
    max_examples=200,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dirac-forge"))

# criterion number -> (ok, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@functools.lru_cache(maxsize=None)
def model_file(name: str):
    return load(bundled(name))


@functools.lru_cache(maxsize=None)
def analyzed(name: str):
    """Classified Hamiltonian system after the consistency chain."""
    hs = legendre(model_file(name).model)
    rep = stabilize(hs)
    return classify(rep.system), rep


@pytest.fixture
def toy():
    return model_file("toy")


@pytest.fixture
def spin():
    return model_file("spin")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
