from __future__ import annotations

import pytest

from scribebench.synth import default_atlas


@pytest.fixture(scope="session")
def atlas():
    return default_atlas()
