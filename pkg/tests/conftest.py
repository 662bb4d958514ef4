"""
Shared test configuration: quiet logger, src/ on the path, common fixtures.
This conftest.py runs before any test file collection.
"""

import sys
import os
import json
import unittest.mock as mock
import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))


# --- Quiet logger: tests assert on return values, not log output ---
class _MockLogger:
    def info(self, *a, **kw): pass
    def debug(self, *a, **kw): pass
    def warning(self, *a, **kw): pass
    def error(self, *a, **kw): pass
    def bind(self, **kw): return self


_mock_logger_mod = mock.MagicMock()
_mock_logger_mod.get_logger = lambda name: _MockLogger()
sys.modules['logger'] = _mock_logger_mod


from polarize import CodeGeometry  # noqa: E402
from codesets import build_partition  # noqa: E402


@pytest.fixture
def geometry_k2():
    return CodeGeometry(k=2, beta=0.25)


@pytest.fixture
def worked_partition():
    """n=4: G_amp={0,1,2}, G_phase_E={0}, G_phase_E'={0,1}."""
    return build_partition({0, 1, 2}, {0}, {0, 1}, 4)


@pytest.fixture
def conjugation_partition():
    return build_partition({0, 1, 2, 5}, {0, 3, 6}, {0, 3, 6}, 8)


@pytest.fixture
def perfect_partition():
    return build_partition(range(8), range(8), range(8), 8)


@pytest.fixture
def base_config():
    """Minimal analyze config as a plain dict."""
    return {
        "channel": {"family": "erasure", "epsilon": 0.5, "degrading": {"kind": "conjugation"}},
        "geometry": {"k": 10, "beta": 0.3},
        "eta": 0.5,
        "output": {"dir": "out", "timing": False},
    }


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict (or raw text) to a file and return its path."""
    def _write(payload, name="config.json"):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload, indent=2))
        return str(path)
    return _write
