import pytest
from hypothesis import HealthCheck, settings


settings.register_profile("covertnet", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("covertnet")


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one part of an acceptance criterion: acceptance(num, ok, detail)."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(num: int, ok: bool, detail: str) -> None:
        store.setdefault(num, []).append((bool(ok), detail))

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(store):
        parts = store[num]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {verdict}  " + "; ".join(d for _, d in parts))
