import math

import pytest

from kgeodesic.profile import ConeParams, build_smoothed_cone, build_sphere, build_torus
from kgeodesic.surface import SurfaceOfRevolution

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def cone_surface(n, belt=0.02, cap=0.05, fillet="quintic"):
    return SurfaceOfRevolution.from_profile(build_smoothed_cone(ConeParams(n=n, belt=belt, cap=cap, fillet=fillet)))


@pytest.fixture(scope="session")
def sphere():
    return SurfaceOfRevolution.from_profile(build_sphere())


@pytest.fixture(scope="session")
def m2_10():
    return cone_surface(10)


@pytest.fixture(scope="session")
def m2_20():
    return cone_surface(20)


@pytest.fixture(scope="session")
def torus():
    return SurfaceOfRevolution.from_profile(build_torus(3.0, 0.5))


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"acceptance criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


HALF_PI = 0.5 * math.pi
