import functools
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from brinkmann.catalog import build  # noqa: E402


@functools.lru_cache(maxsize=None)
def _cached(name, params_json):
    return build(name, json.loads(params_json))


def spacetime(name, **params):
    """Catalog entry, built once per parameter set for the whole session."""
    return _cached(name, json.dumps(params, sort_keys=True))


@pytest.fixture
def cat():
    return spacetime


ACCEPTANCE = {}


def record(number, ok, detail):
    """Log one acceptance-criterion outcome for the end-of-run summary."""
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
