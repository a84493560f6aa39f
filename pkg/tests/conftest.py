import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402


@pytest.fixture(scope="session")
def ta_exp_exp():
    """Symbolic peak age of the transmission-aware policy, exp-exp."""
    return functools.lru_cache(None)(oracles.ta_exp_exp_sym())
