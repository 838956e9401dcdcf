"""
Tests for the finite-difference gradient suite.
"""

import numpy as np
import pytest

from lung_diffusion.core import Rng
from lung_diffusion.gradsuite import jitter, run_suite, suite_entries
from lung_diffusion.nn import ParamSet

LAYER_FRAGMENTS = {"linear", "conv", "groupnorm", "silu", "residual-block", "cross-attention", "perceptual-loss"}


class TestSuiteEntries:
    """Tests for the fragment list."""

    def test_layer_fragments_present(self):
        names = {name for name, _, _ in suite_entries(include_models=False)}
        assert LAYER_FRAGMENTS <= names
        assert "vae" not in names and "unet" not in names

    def test_models_included_by_default(self):
        names = [name for name, _, _ in suite_entries()]
        assert names[-2:] == ["vae", "unet"]

    def test_names_unique(self):
        names = [name for name, _, _ in suite_entries(include_models=False)]
        assert len(names) == len(set(names))


class TestJitter:
    """Tests for parameter jitter."""

    def test_moves_every_parameter(self):
        params = ParamSet()
        params.add("w", np.zeros((3, 3)))
        params.add("b", np.zeros(3))
        jitter(params, Rng(0), scale=0.5)
        assert np.all(params["w"] != 0) and np.all(params["b"] != 0)

    def test_seeded(self):
        a, b = ParamSet(), ParamSet()
        for p in (a, b):
            p.add("w", np.zeros(4))
            jitter(p, Rng(3))
        assert np.array_equal(a["w"], b["w"])


class TestRunSuite:
    """Tests for running the suite."""

    def test_layer_suite_passes(self):
        reports = run_suite(seed=0, max_entries=6, include_models=False)
        failed = [(r.fragment, r.max_rel_error) for r in reports if not r.passed]
        assert failed == []

    def test_reports_every_fragment(self):
        seen = []
        reports = run_suite(seed=1, max_entries=2, include_models=False, on_report=lambda r: seen.append(r.fragment))
        assert seen == [r.fragment for r in reports]
        assert all(r.checks for r in reports)

    def test_impossible_tolerance_reports_failures(self):
        reports = run_suite(seed=0, tolerance=0.0, max_entries=2, include_models=False)
        assert not any(r.passed for r in reports)

    @pytest.mark.slow
    def test_models_pass(self):
        reports = run_suite(seed=0, max_entries=8)
        assert {r.fragment: r.passed for r in reports if r.fragment in ("vae", "unet")} == {"vae": True, "unet": True}
