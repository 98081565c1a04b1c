import dataclasses
import math

import numpy as np
import pytest

from trimask import (
    CostModel,
    DriftSpec,
    GroundTruth,
    InvalidSpec,
    RegionSpec,
    RetentionMask,
    ScenarioSpec,
    SemanticLabel,
    cluster_semantics,
    comprehensive_scores,
    default_spec,
    drifting_spec,
    generate_episode,
    load_trace,
    predict_speedup,
    save_trace,
)
from trimask.pipeline import measure_step
from trimask.trace import stack_step

LABEL_CODE = {"obj": SemanticLabel.OBJ, "rob": SemanticLabel.ROB, "bg": SemanticLabel.BG}


def flat_spec(**overrides):
    base = dict(
        episode_id="flat",
        num_patches=8,
        num_steps=2,
        feat_dim=6,
        attn_dim=6,
        obj=RegionSpec(frac=0.25, attn_level=10.0, m_s1_3d=0.5, ortho_frac=0.5),
        rob=RegionSpec(frac=0.25, attn_level=1.0, m_s1_3d=0.5, ortho_frac=0.5),
        bg=RegionSpec(frac=0.50, attn_level=0.1, m_s1_3d=0.5, ortho_frac=0.5),
        noise_sigma=0.0,
        seed=0,
    )
    base.update(overrides)
    return ScenarioSpec(**base)


class TestSpecValidation:
    def test_fractions_must_sum_to_one(self):
        with pytest.raises(InvalidSpec):
            flat_spec(bg=RegionSpec(frac=0.6, attn_level=0.1, m_s1_3d=0.5, ortho_frac=0.5))

    def test_levels_must_be_ordered(self):
        with pytest.raises(InvalidSpec):
            flat_spec(rob=RegionSpec(frac=0.25, attn_level=20.0, m_s1_3d=0.5, ortho_frac=0.5))

    def test_negative_noise_rejected(self):
        with pytest.raises(InvalidSpec):
            flat_spec(noise_sigma=-0.1)

    def test_bad_drift_kind_rejected(self):
        with pytest.raises(InvalidSpec):
            DriftSpec(kind="quadratic")

    def test_from_dict_rejects_unknown_fields(self):
        data = flat_spec().to_dict()
        data["bogus"] = 1
        with pytest.raises(InvalidSpec):
            ScenarioSpec.from_dict(data)

    def test_dict_round_trip(self):
        spec = drifting_spec(seed=3)
        again = ScenarioSpec.from_dict(spec.to_dict())
        assert again == spec


class TestGeneration:
    def test_zero_noise_recovers_planted_labels(self):
        spec = flat_spec(
            num_patches=8,
            obj=RegionSpec(frac=0.25, attn_level=10.0, m_s1_3d=0.5, ortho_frac=0.5),
            rob=RegionSpec(frac=0.25, attn_level=1.0, m_s1_3d=0.5, ortho_frac=0.5),
            bg=RegionSpec(frac=0.50, attn_level=0.1, m_s1_3d=0.5, ortho_frac=0.5),
        )
        trace, truth = generate_episode(spec)
        arrays = stack_step(trace.steps[0])
        scores = comprehensive_scores(arrays["a2d"], arrays["a3d"])
        result = cluster_semantics(scores)
        expected = [int(LABEL_CODE[lab]) for lab in truth.labels]
        assert result.labels.tolist() == expected

    def test_planted_feature_share_surfaces_exactly(self):
        spec = flat_spec()
        trace, truth = generate_episode(spec)
        for t, step in enumerate(trace.steps):
            report = measure_step(step)
            assert np.allclose(report.m_s1_3d, truth.m_s1_3d[t], atol=1e-9)

    def test_planted_attention_shares_surface_exactly(self):
        spec = flat_spec(
            obj=RegionSpec(frac=0.25, attn_level=10.0, m_s1_3d=0.5, ortho_frac=0.7, attn_3d_share=0.4),
            rob=RegionSpec(frac=0.25, attn_level=1.0, m_s1_3d=0.5, ortho_frac=0.2, attn_3d_share=0.5),
            bg=RegionSpec(frac=0.50, attn_level=0.1, m_s1_3d=0.5, ortho_frac=0.0, attn_3d_share=0.6),
        )
        trace, truth = generate_episode(spec)
        regions = {"obj": spec.obj, "rob": spec.rob, "bg": spec.bg}
        for t, step in enumerate(trace.steps):
            report = measure_step(step)
            for p, lab in enumerate(truth.labels):
                g = regions[lab].attn_3d_share
                assert report.m_s2_2d[p] == pytest.approx(1.0 - g, abs=1e-9)
                assert report.m_s2_3d[p] == pytest.approx(truth.ortho_frac[t, p] * g, abs=1e-9)

    def test_fully_parallel_a3d_has_zero_orthogonal_share(self):
        spec = flat_spec(
            obj=RegionSpec(frac=0.25, attn_level=10.0, m_s1_3d=0.5, ortho_frac=0.0),
            rob=RegionSpec(frac=0.25, attn_level=1.0, m_s1_3d=0.5, ortho_frac=0.0),
            bg=RegionSpec(frac=0.50, attn_level=0.1, m_s1_3d=0.5, ortho_frac=0.0),
        )
        trace, _ = generate_episode(spec)
        report = measure_step(trace.steps[0])
        assert np.allclose(report.m_s2_3d, 0.0, atol=1e-9)

    def test_generation_is_deterministic(self):
        a, _ = generate_episode(default_spec(seed=5, num_patches=16, num_steps=3))
        b, _ = generate_episode(default_spec(seed=5, num_patches=16, num_steps=3))
        for sa, sb in zip(a.steps, b.steps):
            for pa, pb in zip(sa.patches, sb.patches):
                assert np.array_equal(pa.f2d, pb.f2d)
                assert np.array_equal(pa.a3d, pb.a3d)

    def test_generated_trace_round_trips(self, tmp_path):
        trace, _ = generate_episode(default_spec(seed=1, num_patches=12, num_steps=2))
        path = tmp_path / "t.jsonl"
        save_trace(trace, path)
        loaded = load_trace(path)
        assert loaded.num_patches == 12
        assert loaded.num_steps == 2

    def test_drift_moves_planted_values(self):
        spec = dataclasses.replace(
            flat_spec(num_steps=6), drift=DriftSpec(kind="sine", amplitude=0.2, period=4.0)
        )
        _, truth = generate_episode(spec)
        assert truth.m_s1_3d.std() > 0.01

    def test_ground_truth_round_trip(self, tmp_path):
        _, truth = generate_episode(flat_spec())
        path = tmp_path / "gt.json"
        truth.save(path)
        loaded = GroundTruth.load(path)
        assert loaded.labels == truth.labels
        assert np.array_equal(loaded.m_s1_3d, truth.m_s1_3d)
        assert np.array_equal(loaded.ortho_frac, truth.ortho_frac)


def ones_mask(t, p):
    return RetentionMask(t, np.ones(p, bool), np.ones(p, bool))


def half_mask(t, p):
    m = np.zeros(p, bool)
    m[: p // 2] = True
    return RetentionMask(t, m.copy(), m.copy())


class TestCostModel:
    def test_identity_speedup_without_method_cost(self):
        model = CostModel(c_method=0.0)
        masks = [ones_mask(t, 8) for t in range(1, 4)]
        assert predict_speedup(masks, model, 16) == pytest.approx(1.0, abs=1e-12)

    def test_pure_quadratic_half_retention(self):
        model = CostModel(c_fix=0.0, c_lin=0.0, c_attn=1.0, c_method=0.0)
        masks = [half_mask(t, 8) for t in range(1, 4)]  # 8 of 16 tokens per step
        assert predict_speedup(masks, model, 16) == pytest.approx(4.0, abs=1e-12)

    def test_monotone_in_retained_count(self):
        model = CostModel()
        speedups = []
        for keep in (16, 12, 8, 4):
            m = np.zeros(8, bool)
            m2 = np.zeros(8, bool)
            m[: keep // 2] = True
            m2[: keep - keep // 2] = True
            speedups.append(predict_speedup([RetentionMask(1, m, m2)], model, 16))
        assert all(a <= b for a, b in zip(speedups, speedups[1:]))

    def test_empty_episode(self):
        assert predict_speedup([], CostModel(), 16) == 1.0

    def test_default_calibration_anchors(self):
        model = CostModel()
        assert model.step_cost(512) == pytest.approx(2.533, abs=1e-9)
        assert model.c_method == pytest.approx(0.061, abs=1e-12)

    def test_negative_coefficients_rejected(self):
        with pytest.raises(Exception):
            CostModel(c_fix=-1.0)

    def test_zero_cost_degenerate(self):
        model = CostModel(c_fix=0.0, c_lin=0.0, c_attn=1.0, c_method=0.0)
        empty = RetentionMask(1, np.zeros(4, bool), np.zeros(4, bool))
        assert predict_speedup([empty], model, 8) == math.inf
