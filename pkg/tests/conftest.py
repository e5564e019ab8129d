import pytest

from distcftp.graph import build_graph, generate

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def k2():
    return build_graph(2, [(0, 1)])


@pytest.fixture
def p3():
    return generate("path", {"n": 3})


@pytest.fixture
def c4():
    return generate("cycle", {"n": 4})


@pytest.fixture
def c5():
    return generate("cycle", {"n": 5})
