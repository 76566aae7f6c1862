from __future__ import annotations

import pytest

from sharedflock import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT compilation happens once here instead of skewing the first timed test.
    kernels.warmup()
