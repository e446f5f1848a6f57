import math

import numpy as np
import pytest

from sketchtrack.array_model import ArrayGeometry, build_grid
from sketchtrack.selftest import crandn, random_instance  # noqa: F401  (re-exported helpers)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ula16():
    return ArrayGeometry.ula(16, math.pi / 3)


@pytest.fixture(scope="session")
def grid16(ula16):
    return build_grid(ula16, 32)


def rel_err(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b)))


# --- acceptance reporting -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    """Queue one pass/fail line; printed in the terminal summary and echoed to stdout."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# --- shared transition experiment ----------------------------------------------

TRANSITION_SEED = 3


@pytest.fixture(scope="session")
def transition():
    """Default transition experiment: 20 seeds for each window size T in {50, 100, 200}."""
    from dataclasses import replace

    from sketchtrack.experiments import ExperimentConfig, run_tracking

    cfg = ExperimentConfig(experiment="Tracking", samplers=["binary"], trials=20,
                           seed=TRANSITION_SEED)
    cfg = replace(cfg, tracking=replace(cfg.tracking, log_kkt=False))
    import time

    t0 = time.perf_counter()
    traces = run_tracking(cfg)
    return cfg, traces, time.perf_counter() - t0
