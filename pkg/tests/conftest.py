import pytest

_RESULTS = pytest.StashKey[dict]()


class _Criterion:
    def __init__(self, results: dict, number: int, title: str):
        self.results, self.number, self.title = results, number, title
        self.done = False

    def check(self, ok: bool, detail: str) -> None:
        self.done = True
        self.results[self.number] = (ok, self.title, detail)
        print(_line(self.number, ok, self.title, detail))
        assert ok, f"criterion {self.number} ({self.title}): {detail}"


def _line(number, ok, title, detail) -> str:
    return f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, title)`` returns a recorder whose ``check(ok, detail)`` logs one line."""
    results = request.config.stash[_RESULTS]
    made = []

    def make(number: int, title: str) -> _Criterion:
        c = _Criterion(results, number, title)
        made.append(c)
        return c

    yield make
    for c in made:
        if not c.done:
            results[c.number] = (False, c.title, "did not finish (see traceback)")


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(_line(number, *results[number]))
