import re
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from memgym.backend import scripted_world  # noqa: E402
from memgym.genesis import generate_blueprint, synthetic_pool  # noqa: E402
from memgym.model import GenConfig  # noqa: E402

_ACCEPTANCE: dict[str, str] = {}
_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or "test_acceptance" not in report.nodeid:
        return
    key = f"{int(m.group(1)):>2} {m.group(2)}"
    if report.when == "call" or report.outcome != "passed":
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        if _ACCEPTANCE.get(key) not in ("FAIL",):
            _ACCEPTANCE[key] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {key}: {_ACCEPTANCE[key]}")


@pytest.fixture(scope="session")
def base_cfg():
    return GenConfig.preset("base")


@pytest.fixture(scope="session")
def blueprints20(base_cfg):
    """Twenty scripted base-config blueprints, with the wall time spent generating them."""
    start = time.perf_counter()
    bps = [generate_blueprint(r, base_cfg, scripted_world(7), seed=7) for r in synthetic_pool(20, 7)]
    return bps, time.perf_counter() - start


@pytest.fixture(scope="session")
def blueprint(blueprints20):
    return blueprints20[0][0]
