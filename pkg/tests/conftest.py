"""Shared fixtures: the default calibration table, regenerated when absent."""

import pathlib

import pytest

from d2dsim.ldpc import curves

CACHE_DIR = pathlib.Path(__file__).parent / "_calibration_cache"
DEFAULT_CAL = CACHE_DIR / "calibration_default.txt"


def regenerate_default_calibration(path=DEFAULT_CAL):
    """Full default-grid calibration; ~80 s with the compiled decoder."""
    table = curves.calibrate()
    CACHE_DIR.mkdir(exist_ok=True)
    table.save(path)
    return table


@pytest.fixture(scope="session")
def default_table():
    if not DEFAULT_CAL.exists():
        return regenerate_default_calibration()
    return curves.CalibrationTable.load(DEFAULT_CAL)
