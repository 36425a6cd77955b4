import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from jsqtail.model import normalize


@pytest.fixture(scope="session")
def params2():
    """Homogeneous 2-server reference instance, traffic intensity 2/3."""
    return normalize(0.4, (0.3, 0.3))


@pytest.fixture(scope="session")
def params3():
    """Heterogeneous 3-server reference instance, traffic intensity 2/3."""
    return normalize(0.4, (0.25, 0.20, 0.15))
