"""Shared fixtures for the codesign test suites."""

import os
import tempfile

import pytest

# Keep log files out of the source tree; must be set before any codesign import
os.environ.setdefault("CODESIGN_LOG_DIR", os.path.join(tempfile.gettempdir(), "codesign_test_logs"))

from codesign.explorer.bundle_arch.enumeration import enumerate_bundles  # noqa: E402
from codesign.explorer.dnn_model.device import PYNQ_Z1  # noqa: E402
from codesign.explorer.ip_catalog.characterization import load_characterization  # noqa: E402
from codesign.explorer.ip_catalog.core_types import QuantScheme, TileShape  # noqa: E402
from codesign.explorer.ip_catalog.templates import builtin_templates  # noqa: E402
from tests.helpers import make_bundle  # noqa: E402


@pytest.fixture
def char():
    return load_characterization()


@pytest.fixture
def device():
    return PYNQ_Z1


@pytest.fixture
def tile():
    return TileShape(8, 8, 8)


@pytest.fixture
def quant():
    return QuantScheme()


@pytest.fixture
def bundles():
    return enumerate_bundles(builtin_templates())


@pytest.fixture
def conv_bundle():
    """conv3x3 + normalization + activation at pf=4, 8-bit."""
    return make_bundle("conv3x3", "normalization", "activation", pf=4)
