import json

import pytest

from poledyn import MapSpec, PrecisionPolicy


@pytest.fixture
def graham():
    return MapSpec.graham()


@pytest.fixture
def two_pole():
    return MapSpec(("1", "1"), ("-1", "1"))


@pytest.fixture
def p256():
    return PrecisionPolicy.bigfloat(256)


@pytest.fixture
def exact():
    return PrecisionPolicy.rational()


@pytest.fixture
def graham_file(tmp_path):
    path = tmp_path / "graham.json"
    path.write_text(json.dumps({"alphas": ["1"], "betas": ["0"]}))
    return path


_ACCEPTANCE = []


@pytest.fixture
def record(request):
    """Record one acceptance line; printed again in the terminal summary."""
    def _record(number, name, ok, detail, seconds):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} | {detail} | {seconds:.1f}s"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
