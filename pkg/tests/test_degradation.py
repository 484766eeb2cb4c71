import numpy as np
import pytest

from src.core.errors import ContractViolation
from src.services.degradation.schemas.degradation import (
    LEVEL_TABLE,
    DegradationSettings,
    occlusion_mask,
    parse_levels,
)
from src.services.degradation.service import (
    add_artifacts,
    degrade_artifacts_only,
    degrade_at_level,
    expand_level,
    format_record,
    gaussian_noise,
    poisson_noise,
    salt_pepper,
    speckle_noise,
)
from src.services.losses.service import mse

SEEDS = range(10)


def constant(value, size=256, channels=1):
    return np.full((channels, size, size), value, dtype=np.float32)


class TestGaussian:
    def test_zero_variance_is_identity(self, frame):
        np.testing.assert_array_equal(gaussian_noise(frame, 0.0, 1), frame)

    def test_seeded(self, frame):
        np.testing.assert_array_equal(gaussian_noise(frame, 0.02, 5), gaussian_noise(frame, 0.02, 5))
        assert not np.array_equal(gaussian_noise(frame, 0.02, 5), gaussian_noise(frame, 0.02, 6))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_moments(self, seed):
        img = constant(0.5)
        delta = (gaussian_noise(img, 0.01, seed) - img).astype(np.float64)
        # sigma 0.1 around 0.5: clipping happens past 5 sigma
        assert abs(delta.mean()) < 0.003
        assert abs(delta.var() - 0.01) < 0.15 * 0.01

    def test_negative_variance(self, frame):
        with pytest.raises(ContractViolation):
            gaussian_noise(frame, -0.1, 0)


class TestSpeckle:
    def test_zero_variance_is_identity(self, frame):
        np.testing.assert_array_equal(speckle_noise(frame, 0.0, 1), frame)

    def test_black_stays_black(self):
        assert not speckle_noise(constant(0.0, 32), 0.5, 2).any()

    @pytest.mark.parametrize("seed", SEEDS)
    def test_std(self, seed):
        img = constant(0.5)
        delta = (speckle_noise(img, 0.04, seed) - img).astype(np.float64)
        assert abs(delta.std() - 0.1) < 0.15 * 0.1

    def test_negative_variance(self, frame):
        with pytest.raises(ContractViolation):
            speckle_noise(frame, -1.0, 0)


class TestSaltPepper:
    def test_zero_amount_is_identity(self, frame):
        np.testing.assert_array_equal(salt_pepper(frame, 0.0, 1), frame)

    def test_full_amount_is_binary(self, frame):
        out = salt_pepper(frame, 1.0, 3)
        assert np.isin(out, [0.0, 1.0]).all()

    @pytest.mark.parametrize("seed", SEEDS)
    def test_counts(self, seed):
        img = constant(0.5, 128, channels=3)
        out = salt_pepper(img, 0.3, seed)
        changed = (out != img).any(axis=0)
        assert 0.27 <= changed.mean() <= 0.33
        salt = (out[0] == 1.0).sum() / changed.sum()
        assert 0.4 <= salt <= 0.6
        # one mask shared by all channels
        assert ((out == img).all(axis=0) | (out != img).all(axis=0)).all()

    def test_amount_out_of_range(self, frame):
        with pytest.raises(ContractViolation):
            salt_pepper(frame, 1.5, 0)


class TestPoisson:
    def test_black_stays_black(self):
        assert not poisson_noise(constant(0.0, 32), 255, 0).any()

    @pytest.mark.parametrize("seed", SEEDS)
    def test_moments(self, seed):
        out = poisson_noise(constant(0.5), 255, seed).astype(np.float64)
        assert abs(out.mean() - 0.5) < 0.01
        assert abs(out.var() - 0.5 / 255) < 0.2 * 0.5 / 255

    def test_seeded(self, frame):
        np.testing.assert_array_equal(poisson_noise(frame, 255, 9), poisson_noise(frame, 255, 9))

    def test_peak_must_be_positive(self, frame):
        with pytest.raises(ContractViolation):
            poisson_noise(frame, 0, 0)


class TestArtifacts:
    def test_zero_count(self, frame):
        out, placements = add_artifacts(frame, 0, 1)
        np.testing.assert_array_equal(out, frame)
        assert placements == []

    def test_placements_inside_and_filled(self):
        img = np.random.default_rng(0).uniform(0.2, 1.0, size=(3, 64, 48)).astype(np.float32)
        out, placements = add_artifacts(img, 5, seed=4)
        assert len(placements) == 5
        mask = occlusion_mask(placements, 64, 48)
        for p in placements:
            assert p.inside(64, 48)
            assert (out[(slice(None),) + p.window] == 0.0).all()
        np.testing.assert_array_equal(out[:, ~mask], img[:, ~mask])
        # the blanked pixels are exactly the placement union
        np.testing.assert_array_equal((out == 0.0).all(axis=0), mask)

    def test_line_groups_span_the_frame(self):
        _, placements = add_artifacts(constant(0.5, 64), 40, seed=2)
        lines = [p for p in placements if p.kind == "line_group"]
        assert lines
        for p in lines:
            assert 1 <= p.thickness <= 3
            if p.orientation == "horizontal":
                assert p.width == 64 and p.height == p.thickness
            else:
                assert p.height == 64 and p.width == p.thickness

    def test_occluded_area(self):
        side = np.array([0.04, 0.12]) * 256
        blank_area = side.mean() ** 2
        line_area = 2 * 256
        expected = 20 * (0.5 * blank_area + 0.5 * line_area) / 256 ** 2
        fractions = [occlusion_mask(add_artifacts(constant(0.5), 20, s)[1], 256, 256).mean() for s in SEEDS]
        assert 0.5 * expected <= np.mean(fractions) <= 2 * expected

    def test_negative_count(self, frame):
        with pytest.raises(ContractViolation):
            add_artifacts(frame, -1, 0)


class TestLevels:
    @pytest.mark.parametrize(
        "level,amount,table_variance,count_range",
        [(1, 0.1, 1, (1, 13)), (2, 0.2, 4, (13, 25)), (3, 0.3, 9, (25, 37)), (4, 0.4, 16, (37, 49))],
    )
    def test_table_rows(self, level, amount, table_variance, count_range):
        spec = expand_level(level, seed=11)
        assert spec.salt_pepper_amount == amount
        assert spec.table_variance == table_variance
        assert spec.gaussian_variance == pytest.approx(table_variance * 0.01)
        assert spec.speckle_variance == spec.gaussian_variance
        assert spec.poisson_enabled
        assert spec.artifact_count_range == count_range
        assert count_range[0] <= spec.artifact_count <= count_range[1]
        assert len(spec.noise_kinds) == 1

    def test_level_zero_is_identity(self, frame):
        out, spec, placements = degrade_at_level(frame, 0, seed=5)
        np.testing.assert_array_equal(out, frame)
        assert spec.salt_pepper_amount == 0 and spec.gaussian_variance == 0
        assert spec.artifact_count_range == (0, 0)
        assert not spec.poisson_enabled and not spec.noise_kinds
        assert placements == []

    def test_variance_scale_knob(self):
        spec = expand_level(3, 0, DegradationSettings(variance_scale=1.0 / 255 ** 2))
        assert spec.gaussian_variance == pytest.approx(9 / 255 ** 2)

    def test_reproducible(self, frame):
        a, spec_a, placements_a = degrade_at_level(frame, 2, seed=8)
        b, spec_b, placements_b = degrade_at_level(frame, 2, seed=8)
        np.testing.assert_array_equal(a, b)
        assert spec_a == spec_b and placements_a == placements_b

    def test_output_range(self, frame):
        for level in LEVEL_TABLE:
            out = degrade_at_level(frame, level, seed=level)[0]
            assert out.dtype == np.float32
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_same_noise_kind_across_levels(self):
        kinds = {expand_level(level, seed=21).noise_kinds for level in (1, 2, 3, 4)}
        assert len(kinds) == 1

    def test_stacked_noises(self):
        settings = DegradationSettings(stack_noises=True)
        for seed in range(20):
            kinds = expand_level(2, seed, settings).noise_kinds
            assert 1 <= len(kinds) <= 4
            assert list(kinds) == sorted(kinds, key=("gaussian", "speckle", "salt_pepper", "poisson").index)

    def test_mse_increases_with_level(self, frame):
        means = [np.mean([mse(degrade_at_level(frame, lv, s)[0], frame) for s in range(50)]) for lv in (1, 2, 3, 4)]
        assert all(a < b for a, b in zip(means, means[1:]))

    def test_unknown_level(self, frame):
        with pytest.raises(ContractViolation):
            degrade_at_level(frame, 5, 0)

    def test_artifacts_only_keeps_other_pixels(self, frame):
        out, spec, placements = degrade_artifacts_only(frame, 2, seed=3)
        assert spec.noise_kinds == ()
        assert 13 <= len(placements) <= 25
        mask = occlusion_mask(placements, *frame.shape[1:])
        np.testing.assert_array_equal(out[:, ~mask], frame[:, ~mask])
        assert (out[:, mask] == 0.0).all()


def test_record_line(frame):
    _, spec, placements = degrade_at_level(frame, 1, seed=2)
    fields = format_record("000001.png", spec, placements).split("\t")
    assert fields[:3] == ["000001.png", "1", "2"]
    assert fields[3] in ("gaussian", "speckle", "salt_pepper", "poisson")
    assert "amount=0.1" in fields[4]
    assert len(fields[5].split(";")) == len(placements)


def test_parse_levels():
    assert parse_levels("0,1, 4") == (0, 1, 4)
    with pytest.raises(ContractViolation):
        parse_levels("1,7")
    with pytest.raises(ContractViolation):
        parse_levels("a")
