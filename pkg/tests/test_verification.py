"""Tests for the verification suites that run in seconds."""

import pytest

from src.controllers.verification import (
    SUITES,
    disco_equivalence,
    equivariance,
    gradcheck,
    resolution,
    run_suite,
)
from src.utils.constants import VERIFY_SUITES


def failures(result):
    return [check.line() for check in result.failures()]


class TestSuites:
    """Desk-size runs of every fast suite."""

    def test_registry_matches_cli_choices(self):
        assert sorted(SUITES) == sorted(VERIFY_SUITES)

    def test_disco_equivalence(self):
        result = run_suite("disco-equivalence")
        assert result.passed, failures(result)
        assert len(result.checks) == 9

    def test_disco_equivalence_rows(self):
        result = disco_equivalence(sizes=(8,))
        assert [row[1] for row in result.rows] == ["circulant", "sparse_vs_dense", "taps_vs_basis"]

    def test_equivariance(self):
        result = equivariance(n=8, nlat=8, nlon=16)
        assert result.passed, failures(result)
        assert [row[0] for row in result.rows] == ["disco-torus", "spectral-torus", "disco-sphere"]

    def test_gradcheck(self):
        result = gradcheck()
        assert result.passed, failures(result)
        names = [row[0] for row in result.rows]
        assert names == [
            "differential", "disco-planar", "disco-1d", "disco-spherical", "spectral", "pointwise", "model",
        ]

    def test_gradcheck_sample_size(self):
        result = gradcheck(max_entries=4)
        assert result.passed, failures(result)
        checked = {row[0]: row[2] for row in result.rows}
        assert checked["differential"] == 8
        assert checked["pointwise"] == 4 + 3 + 4
        assert all("up to 4 sampled entries per array" in check.detail for check in result.checks)

    def test_gradcheck_options_pass_through_registry(self):
        result = run_suite("gradcheck", max_entries=2)
        assert result.passed, failures(result)
        assert {row[0]: row[2] for row in result.rows}["disco-1d"] == 4

    def test_resolution(self):
        result = resolution()
        assert result.passed, failures(result)

    def test_unknown_suite(self):
        with pytest.raises(KeyError):
            run_suite("everything")
