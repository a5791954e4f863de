import pytest

from folspec.models import (
    build_carriere_model,
    build_circle_fibration_model,
    build_hopf_de_rham_model,
    build_hopf_spinor_model,
    build_torus_base_model,
    exp_of,
    fourier_mode,
)

# Filled by the acceptance tests, printed once at the end of the session.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    ran = {int(rep.nodeid.split("criterion_")[1].split("_")[0])
           for outcome in ("passed", "failed", "error")
           for rep in terminalreporter.stats.get(outcome, [])
           if "test_acceptance.py::test_criterion_" in getattr(rep, "nodeid", "")}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ran):
        terminalreporter.write_line(ACCEPTANCE_LINES.get(n, f"[FAIL] {n}. did not complete"))


@pytest.fixture(scope="session")
def carriere():
    return build_carriere_model()


@pytest.fixture(scope="session")
def carriere_small():
    return build_carriere_model(truncation=8)


@pytest.fixture(scope="session")
def circle():
    return build_circle_fibration_model(truncation=16)


@pytest.fixture(scope="session")
def circle_weighted():
    return build_circle_fibration_model(fiber_volume=exp_of(fourier_mode(1, "s")),
                                        truncation=16)


@pytest.fixture(scope="session")
def hopf():
    return build_hopf_de_rham_model(truncation=6)


@pytest.fixture(scope="session")
def torus():
    return build_torus_base_model(truncation=4)


@pytest.fixture(scope="session")
def spinor():
    return build_hopf_spinor_model()
