import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimask import (
    InvalidThresholds,
    Stage1Thresholds,
    stage1_candidates,
    stage1_salience,
)
from trimask.salience import salience_percent, stage1_salience_arrays

from .conftest import make_patch

DEFAULTS = Stage1Thresholds()


class TestStage1Salience:
    def test_equal_l1_norms(self):
        s = stage1_salience(make_patch(f2d=(1.0, -1.0), f3d=(1.0, 1.0)))
        assert s.m2d == pytest.approx(0.5, abs=1e-15)
        assert s.m3d == pytest.approx(0.5, abs=1e-15)
        assert not s.degenerate

    def test_hand_computed_ratio(self):
        # L1 norms 3 and 1 -> shares 3/4 and 1/4
        s = stage1_salience(make_patch(f2d=(3.0, 0.0), f3d=(1.0, 0.0)))
        assert s.m2d == pytest.approx(0.75, abs=1e-15)
        assert s.m3d == pytest.approx(0.25, abs=1e-15)

    def test_zero_denominator_convention(self):
        s = stage1_salience(make_patch(f2d=(0.0, 0.0), f3d=(0.0, 0.0)))
        assert (s.m2d, s.m3d) == (0.5, 0.5)
        assert s.degenerate

    @settings(max_examples=200, deadline=None)
    @given(
        f2d=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8),
        f3d=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8),
    )
    def test_shares_sum_to_one(self, f2d, f3d):
        n = max(len(f2d), len(f3d))
        f2d = f2d + [0.0] * (n - len(f2d))
        f3d = f3d + [0.0] * (n - len(f3d))
        s = stage1_salience(make_patch(f2d=f2d, f3d=f3d))
        assert 0.0 <= s.m2d <= 1.0
        assert 0.0 <= s.m3d <= 1.0
        assert s.m2d + s.m3d == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(
        scale=st.floats(1e-3, 1e3),
        seed=st.integers(0, 1000),
    )
    def test_scale_invariance(self, scale, seed):
        rng = np.random.default_rng(seed)
        f2d = rng.normal(size=4)
        f3d = rng.normal(size=4)
        base = stage1_salience(make_patch(f2d=f2d, f3d=f3d))
        scaled = stage1_salience(make_patch(f2d=f2d * scale, f3d=f3d * scale))
        assert scaled.m2d == pytest.approx(base.m2d, abs=1e-12)
        assert scaled.m3d == pytest.approx(base.m3d, abs=1e-12)

    def test_arrays_agree_with_scalar(self):
        rng = np.random.default_rng(3)
        f2d = rng.normal(size=(5, 4))
        f3d = rng.normal(size=(5, 4))
        f2d[2] = 0.0
        f3d[2] = 0.0
        m2d, m3d, deg = stage1_salience_arrays(f2d, f3d)
        for p in range(5):
            s = stage1_salience(make_patch(f2d=f2d[p], f3d=f3d[p]))
            assert m2d[p] == s.m2d
            assert m3d[p] == s.m3d
            assert deg[p] == s.degenerate


class TestThresholds:
    def test_inverted_thresholds_rejected(self):
        with pytest.raises(InvalidThresholds):
            Stage1Thresholds(tau2d=0.3, tau3d=0.2)

    def test_equal_thresholds_rejected(self):
        with pytest.raises(InvalidThresholds):
            Stage1Thresholds(tau2d=0.2, tau3d=0.2)

    def test_bounds_must_be_in_unit_interval(self):
        with pytest.raises(InvalidThresholds):
            Stage1Thresholds(tau2d=0.0, tau3d=0.2)


class TestCandidates:
    def test_low_share_keeps_2d_only(self):
        assert str(stage1_candidates(0.05, DEFAULTS)) == "{2D}"

    def test_boundary_is_inclusive_to_dual_retention(self):
        assert str(stage1_candidates(0.08, DEFAULTS)) == "{2D,3D}"
        assert str(stage1_candidates(0.20, DEFAULTS)) == "{2D,3D}"

    def test_high_share_keeps_3d_only(self):
        assert str(stage1_candidates(0.5, DEFAULTS)) == "{3D}"

    @settings(max_examples=300, deadline=None)
    @given(m=st.floats(0.0, 1.0), tau2d=st.floats(0.01, 0.98), width=st.floats(0.001, 0.5))
    def test_partition_exactly_one_branch(self, m, tau2d, width):
        tau3d = min(tau2d + width, 0.99)
        if tau3d <= tau2d:
            return
        c = stage1_candidates(m, Stage1Thresholds(tau2d=tau2d, tau3d=tau3d))
        assert not c.empty
        branches = [m < tau2d, tau2d <= m <= tau3d, m > tau3d]
        assert sum(branches) == 1

    def test_monotone_band_sequence(self):
        # Sweeping m from 0 to 1 must pass {2D} -> {2D,3D} -> {3D} with two transitions.
        seen = [str(stage1_candidates(m, DEFAULTS)) for m in np.linspace(0.0, 1.0, 2001)]
        transitions = [(a, b) for a, b in zip(seen, seen[1:]) if a != b]
        assert transitions == [("{2D}", "{2D,3D}"), ("{2D,3D}", "{3D}")]


def test_episode_average_matches_manual_mean(tiny_trace):
    mean2d, mean3d = salience_percent(tiny_trace.steps)
    per_patch = [
        stage1_salience(p).m2d for step in tiny_trace.steps for p in step.patches
    ]
    assert mean2d == pytest.approx(np.mean(per_patch), abs=1e-15)
    assert mean2d + mean3d == pytest.approx(1.0, abs=1e-12)
