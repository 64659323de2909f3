"""Shared fixture loading for the test suite."""

from __future__ import annotations

import pathlib

import pytest

from qsubspace.integrals import parse_fcidump

FIXTURE_DIR = pathlib.Path(__file__).resolve().parent / "fixtures"

# every committed integral fixture; regenerate with scripts/make_fixtures.py
FIXTURE_NAMES = [
    "he_minimal",
    "h2_sto3g",
    "h2_stretched",
    "heh_like",
    "h3_plus",
    "h4_toy",
]

# two-electron systems in a canonical mean-field basis
TWO_ELECTRON_NAMES = ["h2_sto3g", "h2_stretched", "heh_like", "h3_plus"]


def fixture_path(name: str) -> pathlib.Path:
    return FIXTURE_DIR / f"{name}.fcidump"


def load_integrals(name: str):
    return parse_fcidump(fixture_path(name).read_text())


@pytest.fixture(scope="session")
def h2():
    return load_integrals("h2_sto3g")


@pytest.fixture(scope="session")
def h2_stretched():
    return load_integrals("h2_stretched")


@pytest.fixture(scope="session")
def heh():
    return load_integrals("heh_like")


@pytest.fixture(scope="session")
def h3_plus():
    return load_integrals("h3_plus")


@pytest.fixture(scope="session")
def h4_toy():
    return load_integrals("h4_toy")
