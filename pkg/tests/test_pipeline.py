import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimask import (
    RateOutOfRange,
    RetentionMask,
    RunConfig,
    StateMismatch,
    PrunerState,
    apply_budget,
    bg_keep_draws,
    load_masks,
    mask_flip_count,
    prune_episode,
    prune_step,
    save_masks,
)
from trimask.trace import EpisodeTrace, StepObservation

from .conftest import make_trace


def repeated_trace(num_steps, num_patches=6, rng_seed=0):
    """Identical observation repeated num_steps times."""
    base = make_trace(num_steps=1, num_patches=num_patches, rng_seed=rng_seed)
    steps = [
        StepObservation(step_index=t, patches=base.steps[0].patches)
        for t in range(1, num_steps + 1)
    ]
    return EpisodeTrace(episode_id="rep", num_patches=num_patches, steps=steps)


class TestPruneStep:
    def test_cold_start_masks_all_ones(self):
        trace = make_trace(num_steps=1, num_patches=4)
        state = PrunerState(num_patches=4, seed=0)
        mask, stats, report = prune_step(state, trace.steps[0], RunConfig(seed=0))
        assert mask.mask2d.tolist() == [True] * 4
        assert mask.mask3d.tolist() == [True] * 4
        assert stats.pr2d == 0.0 and stats.pr3d == 0.0
        assert stats.conflicts_resolved == 0
        # raw indicators were still recorded
        assert state.t_seen == 1

    def test_step_order_enforced(self):
        trace = make_trace(num_steps=2, num_patches=4)
        state = PrunerState(num_patches=4, seed=0)
        with pytest.raises(StateMismatch):
            prune_step(state, trace.steps[1], RunConfig(seed=0))

    def test_patch_count_enforced(self):
        trace = make_trace(num_steps=1, num_patches=4)
        state = PrunerState(num_patches=5, seed=0)
        with pytest.raises(StateMismatch):
            prune_step(state, trace.steps[0], RunConfig(seed=0))

    def test_stats_match_mask_counts(self):
        trace = make_trace(num_steps=3, num_patches=8, rng_seed=2)
        state = PrunerState(num_patches=8, seed=1)
        config = RunConfig(seed=1)
        for obs in trace.steps:
            mask, stats, _ = prune_step(state, obs, config)
            assert stats.pr2d == 1.0 - mask.mask2d.sum() / 8
            assert stats.pr3d == 1.0 - mask.mask3d.sum() / 8
            assert stats.retained_total == mask.retained_total
            if obs.step_index > 1:
                assert stats.n_obj + stats.n_rob + stats.n_bg == 8


class TestPruneEpisode:
    def test_single_step_episode_is_cold_start_only(self):
        trace = make_trace(num_steps=1, num_patches=4)
        results = prune_episode(trace, RunConfig(seed=0))
        assert len(results) == 1
        assert results[0][0].mask2d.all() and results[0][0].mask3d.all()

    def test_determinism_bit_identical(self, tmp_path):
        trace = make_trace(num_steps=5, num_patches=9, rng_seed=3)
        config = RunConfig(seed=11)
        a = prune_episode(trace, config)
        b = prune_episode(trace, config)
        save_masks(trace.episode_id, trace.num_patches, a, tmp_path / "a.jsonl")
        save_masks(trace.episode_id, trace.num_patches, b, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_different_seeds_differ_in_bg_draws(self):
        # With enough BG patches the keep draws almost surely differ somewhere.
        trace = repeated_trace(num_steps=6, num_patches=12, rng_seed=4)
        masks_a = [np.concatenate([m.mask2d, m.mask3d]) for m, _ in prune_episode(trace, RunConfig(seed=0))]
        masks_b = [np.concatenate([m.mask2d, m.mask3d]) for m, _ in prune_episode(trace, RunConfig(seed=999))]
        assert any(not np.array_equal(a, b) for a, b in zip(masks_a, masks_b))

    def test_repeated_observation_masks_stabilize_outside_bg(self):
        config = RunConfig(seed=5, k=3)
        trace = repeated_trace(num_steps=8, num_patches=9, rng_seed=6)
        results = prune_episode(trace, config)
        # identify BG patches from the stats histogram step >= 2: instead re-run
        # clustering indirectly by comparing masks across late steps on non-BG
        # patches, which must be constant (smoothed indicators are constant).
        late = [m for m, _ in results[config.k:]]
        changed = np.zeros(9, dtype=bool)
        for a, b in zip(late, late[1:]):
            changed |= a.mask2d != b.mask2d
            changed |= a.mask3d != b.mask3d
        # constant-input smoothing is a fixed point, so only BG draws may flip
        draws = [
            bg_keep_draws(5, t, 9, config.bg_keep_prob)
            for t in range(config.k + 1, len(results) + 1)
        ]
        bg_varies = np.zeros(9, dtype=bool)
        for a, b in zip(draws, draws[1:]):
            bg_varies |= a != b
        assert not np.any(changed & ~bg_varies)


class TestConflictResolution:
    def test_intersection_and_fallback_paths(self):
        from .conftest import handcrafted_trace

        trace = handcrafted_trace(num_steps=2)
        config = RunConfig(seed=0, bg_keep_prob=0.0, k=3, beta=0.5)
        results = prune_episode(trace, config)
        mask, stats = results[1]
        assert mask.mask2d.tolist() == [True, True, True, True, False, False]
        assert mask.mask3d.tolist() == [True, False, True, False, False, False]
        assert stats.conflicts_resolved == 1
        assert (stats.n_obj, stats.n_rob, stats.n_bg) == (2, 2, 2)


class TestMonotoneContainment:
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 5000), widen=st.floats(0.01, 0.05))
    def test_wider_band_never_shrinks_masks(self, seed, widen):
        trace = make_trace(num_steps=4, num_patches=8, rng_seed=seed)
        narrow = RunConfig(seed=3, tau2d=0.10, tau3d=0.18)
        wide = RunConfig(seed=3, tau2d=0.10 - widen, tau3d=0.18 + widen)
        res_n = prune_episode(trace, narrow)
        res_w = prune_episode(trace, wide)
        for (mn, _), (mw, _) in zip(res_n, res_w):
            assert np.all(mw.mask2d >= mn.mask2d)
            assert np.all(mw.mask3d >= mn.mask3d)


class TestBudget:
    def mask(self, mask2d, mask3d, t=2):
        return RetentionMask(t, np.asarray(mask2d, bool), np.asarray(mask3d, bool))

    def test_already_past_budget_unchanged(self):
        m = self.mask([True, False], [False, False])  # prunes 3 of 4 = 75%
        out = apply_budget(m, np.arange(4.0), 0.5)
        assert out is m

    def test_exact_cut_from_full_mask(self):
        m = self.mask([True, True], [True, True])
        scores = np.array([0.9, 0.1, 0.8, 0.2])  # lowest: idx 1 (2D), idx 3 (3D)
        out = apply_budget(m, scores, 0.5)
        assert out.mask2d.tolist() == [True, False]
        assert out.mask3d.tolist() == [True, False]

    def test_zero_rate_never_changes(self):
        m = self.mask([True, False, True], [False, True, True])
        out = apply_budget(m, np.arange(6.0), 0.0)
        assert out is m

    def test_rate_out_of_range(self):
        m = self.mask([True], [True])
        with pytest.raises(RateOutOfRange):
            apply_budget(m, np.arange(2.0), 1.0)
        with pytest.raises(RateOutOfRange):
            apply_budget(m, np.arange(2.0), -0.1)

    def test_never_readds_pruned_tokens(self):
        m = self.mask([False, True, True], [True, False, True])
        out = apply_budget(m, np.arange(6.0)[::-1].copy(), 0.5)
        flat_before = np.concatenate([m.mask2d, m.mask3d])
        flat_after = np.concatenate([out.mask2d, out.mask3d])
        assert np.all(flat_after <= flat_before)

    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(0, 10_000), p=st.integers(1, 16), r=st.floats(0.0, 0.99))
    def test_exact_pruned_count(self, seed, p, r):
        rng = np.random.default_rng(seed)
        m = self.mask(rng.random(p) < 0.7, rng.random(p) < 0.7)
        scores = rng.random(2 * p)
        out = apply_budget(m, scores, r)
        pruned_before = 2 * p - m.retained_total
        target = int(np.ceil(r * 2 * p))
        assert 2 * p - out.retained_total == max(pruned_before, target)

    def test_episode_budget_reflected_in_stats(self):
        trace = make_trace(num_steps=4, num_patches=8, rng_seed=9)
        results = prune_episode(trace, RunConfig(seed=2, budget=0.5))
        for mask, stats in results:
            assert 16 - mask.retained_total >= np.ceil(0.5 * 16)
            assert stats.retained_total == mask.retained_total


class TestMasksIo:
    def test_round_trip(self, tmp_path):
        trace = make_trace(num_steps=3, num_patches=4, rng_seed=1)
        results = prune_episode(trace, RunConfig(seed=0))
        path = tmp_path / "masks.jsonl"
        save_masks(trace.episode_id, 4, results, path)
        loaded = load_masks(path)
        assert loaded.episode_id == trace.episode_id
        assert loaded.num_patches == 4
        for (mask, stats), lm, pr2, pr3, c in zip(
            results, loaded.masks, loaded.pr2d, loaded.pr3d, loaded.conflicts
        ):
            assert np.array_equal(mask.mask2d, lm.mask2d)
            assert np.array_equal(mask.mask3d, lm.mask3d)
            assert pr2 == stats.pr2d and pr3 == stats.pr3d
            assert c == stats.conflicts_resolved

    def test_flip_count(self):
        masks = [
            RetentionMask(1, np.array([True, True]), np.array([True, True])),
            RetentionMask(2, np.array([True, False]), np.array([False, True])),
            RetentionMask(3, np.array([True, False]), np.array([False, True])),
        ]
        assert mask_flip_count(masks) == 2


class TestBgDraws:
    def test_independent_of_patch_order(self):
        a = bg_keep_draws(7, 3, 10, 0.5)
        b = bg_keep_draws(7, 3, 10, 0.5)
        assert np.array_equal(a, b)

    def test_prefix_stability_across_steps(self):
        # step draws are keyed by (seed, step): recomputing any prefix matches
        for t in (2, 3, 9):
            assert np.array_equal(bg_keep_draws(1, t, 6, 0.3), bg_keep_draws(1, t, 6, 0.3))
        assert not np.array_equal(bg_keep_draws(1, 2, 64, 0.5), bg_keep_draws(1, 3, 64, 0.5))

    def test_extreme_probabilities(self):
        assert not bg_keep_draws(0, 2, 32, 0.0).any()
        assert bg_keep_draws(0, 2, 32, 1.0).all()
