import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from app.config import use_settings
from app.data.systems import write_system
from app.devices import reset_device_library
from app.linsys.generator import generate_sdd
from app.linsys.reference import demo_system
from app.linsys.system import LinearSystem


@pytest.fixture(autouse=True)
def default_settings():
    yield
    use_settings(None)
    reset_device_library()


@pytest.fixture
def demo():
    """Five-unknown SPD system that is not diagonally dominant, with its solution"""
    return demo_system()


@pytest.fixture
def two_by_two():
    return LinearSystem(np.array([[5.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0]), "two-by-two")


@pytest.fixture
def sdd():
    return generate_sdd(6, seed=11)


@pytest.fixture
def system_file(tmp_path):
    """Write a system as a JSON document and return the path"""
    def write(system, name="system.json", x_true=None):
        path = str(tmp_path / name)
        write_system(system, path, x_true=x_true)
        return path
    return write
