import math
import time

import numpy as np
import pytest

from pseudosimple.dynamics import IntegratorConfig, compute_connections, integrate
from pseudosimple.fields import (CoeffsD3, GLParametrization, PlanarParams, d3_cubic, d3_tilde_cubic, gl23_cubic,
                                 planar_d3)
from pseudosimple.planar_d3 import transit

# one line per acceptance criterion, printed after the run
CRITERIA: dict[str, str] = {}


def record(key: str, passed: bool, detail: str, seconds: float | None = None) -> None:
    t = "" if seconds is None else f" [{seconds:.1f} s]"
    CRITERIA[key] = f"{key} {'PASS' if passed else 'FAIL'}: {detail}{t}"


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: int(k[1:])):
        terminalreporter.write_line(CRITERIA[key])


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


@pytest.fixture(scope="session")
def warm():
    """Compile (or load from cache) every numba kernel once, outside any timed region."""
    d3 = d3_cubic(CoeffsD3.reference())
    for spec in (d3, gl23_cubic(GLParametrization(0.8, 0.001))):
        integrate(spec, 0.1 * np.ones(4), IntegratorConfig(t_max=1.0))
    transit(PlanarParams(0.1, 1.0), 0.5, 0.3)
    compute_connections(d3)
    return True


@pytest.fixture(scope="session")
def d3_spec():
    return d3_cubic(CoeffsD3.reference())


@pytest.fixture(scope="session")
def tilde_spec():
    return d3_tilde_cubic(CoeffsD3.reference_tilde())


@pytest.fixture(scope="session")
def gl_spec():
    return gl23_cubic(GLParametrization(0.8, 0.001))


@pytest.fixture(scope="session")
def planar_spec():
    return planar_d3(PlanarParams(0.1, 1.0))


@pytest.fixture(scope="session")
def d3_geometry(d3_spec, warm):
    return compute_connections(d3_spec)


@pytest.fixture(scope="session")
def tilde_geometry(tilde_spec, warm):
    return compute_connections(tilde_spec)


@pytest.fixture(scope="session")
def gl_geometry(gl_spec, warm):
    return compute_connections(gl_spec)


@pytest.fixture(scope="session")
def d3_start():
    """A start just off xi1 and off every invariant subspace."""
    return np.array([-math.sqrt(0.3) + 0.01, 0.003, 0.02, 0.005])
