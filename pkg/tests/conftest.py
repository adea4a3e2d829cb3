"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import time

import pytest

from borelsum.config import DEFAULTS
from borelsum.problem_model import canonical_spec
from borelsum.root_geometry import build_good_covering
from borelsum.verifier import flatness_probe

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def record(n: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(passed), detail)
    print(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def spec():
    return canonical_spec()


@pytest.fixture(scope="session")
def plan(spec):
    return build_good_covering(spec, DEFAULTS["sectors"], DEFAULTS["r_T"],
                               kappa_fraction=DEFAULTS["kappa_fraction"])


@pytest.fixture(scope="session")
def flatness_reports(spec, plan):
    """Flatness probes for every cyclic pair, with the time each one took."""
    out = []
    for p in range(plan.count):
        t0 = time.perf_counter()
        rep = flatness_probe(plan, p, spec, n_eps=DEFAULTS["flat_n_eps"], ratio=DEFAULTS["flat_ratio"],
                             h_scale=DEFAULTS["flat_h_scale"], floor_rel=DEFAULTS["flat_floor_rel"])
        out.append((rep, time.perf_counter() - t0))
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
