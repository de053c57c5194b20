import os
import sys
from pathlib import Path

import pytest

build_pkg = os.environ.get("PTOMO_PYTHON_PATH")
if build_pkg:
    sys.path.insert(0, build_pkg)


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("PTOMO_CLI")
    if not path or not Path(path).exists():
        pytest.skip("PTOMO_CLI not set")
    return path
