import numpy as np
import pytest

from src.core.errors import (
    ChecksumError,
    ContractViolation,
    ManifestMismatchError,
    TruncatedPayloadError,
    WeightFormatError,
)
from src.core.gradcheck import ARCH_SAMPLES_PER_LAYER, _layer_sample_counts, run_checks
from src.services.architectures.schemas.architectures import SKIP_EDGES, ArchitectureConfig
from src.services.architectures.service import BUILDERS, build_model, restore_frame
from src.services.architectures.weights import MAGIC, load_weights, read_header, save_weights


def small(kind: str, size: int = 16) -> ArchitectureConfig:
    return ArchitectureConfig(kind=kind, base_channels=4, input_size=(size, size))


def expected_parameter_count(kind: str, base: int, channels: int = 3, kernel: int = 3) -> int:
    def separable(c_in: int, c_out: int, batchnorm: bool = True) -> int:
        return kernel * kernel * c_in + c_out * c_in + (2 * c_out if batchnorm else c_out)

    w1, w2, w3, w4 = base, 2 * base, 4 * base, 8 * base
    skips = kind in ("SCAE", "STAE")
    temporal = kind == "STAE"
    total = (
        separable(channels, w1)
        + separable(w1, w2)
        + separable(w2 + (w2 if temporal else 0), w3)
        + separable(w3, w4)
        + separable(w4, w3)
        + separable(w3 + (w3 if skips else 0), w2)
        + separable(w2 + (w1 if skips else 0), w1)
        + separable(w1, channels, batchnorm=False)
    )
    if temporal:
        total += separable(channels, w1) + separable(w1, w2)
    return total


@pytest.fixture
def frames():
    rng = np.random.default_rng(11)
    return rng.uniform(size=(2, 3, 16, 16)).astype(np.float32), rng.uniform(size=(2, 3, 16, 16)).astype(np.float32)


class TestShapes:
    @pytest.mark.parametrize("kind", ["AE", "SCAE", "STAE"])
    def test_output_matches_input(self, kind, frames):
        current, previous = frames
        out = build_model(small(kind), seed=0).forward(current, previous)
        assert out.shape == current.shape
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_single_frame_restore(self, frames):
        current, previous = frames
        restored = restore_frame(build_model(small("STAE"), seed=0), current[0], previous[0])
        assert restored.shape == (3, 16, 16)
        assert restored.dtype == np.float32

    def test_spatial_size_must_divide_by_eight(self):
        with pytest.raises(ContractViolation):
            small("AE", size=12)
        model = build_model(small("AE"), seed=0)
        with pytest.raises(ContractViolation):
            model.forward(np.zeros((1, 3, 20, 20), dtype=np.float32))

    def test_wrong_channel_count(self):
        with pytest.raises(ContractViolation):
            build_model(small("AE"), seed=0).forward(np.zeros((1, 1, 16, 16), dtype=np.float32))

    def test_unknown_kind(self):
        with pytest.raises(ContractViolation):
            ArchitectureConfig(kind="UNET")


class TestTemporalInput:
    def test_stae_reads_previous_frame(self, frames):
        current, previous = frames
        model = build_model(small("STAE"), seed=1)
        a = model.forward(current, previous).data
        b = model.forward(current, 1.0 - previous).data
        assert np.abs(a - b).max() > 1e-4

    @pytest.mark.parametrize("kind", ["AE", "SCAE"])
    def test_spatial_models_ignore_previous(self, kind, frames):
        current, previous = frames
        model = build_model(small(kind), seed=1)
        assert not model.uses_previous
        a = model.forward(current, previous).data
        b = model.forward(current, 1.0 - previous).data
        np.testing.assert_array_equal(a, b)

    def test_stae_without_previous(self, frames):
        with pytest.raises(ContractViolation):
            build_model(small("STAE"), seed=0).forward(frames[0])


class TestSkipEdges:
    @pytest.mark.parametrize("edge", SKIP_EDGES)
    def test_disabling_a_skip_changes_output(self, edge, frames):
        model = build_model(small("SCAE"), seed=2)
        full = model.forward(frames[0]).data
        cut = model.forward(frames[0], disabled_edges=[edge]).data
        assert np.abs(full - cut).max() > 1e-6

    def test_ae_has_no_skip_parameters(self):
        ae = build_model(small("AE"), seed=0)
        scae = build_model(small("SCAE"), seed=0)
        assert ae.params["D2.pointwise"].shape[1] < scae.params["D2.pointwise"].shape[1]
        assert ae.params["D3.pointwise"].shape[1] < scae.params["D3.pointwise"].shape[1]


class TestParameters:
    def test_names_are_stable(self):
        names = list(build_model(small("SCAE"), seed=0).params)
        assert names == list(build_model(small("SCAE"), seed=9).params)
        assert names[:4] == ["E1.depthwise", "E1.pointwise", "E1.gamma", "E1.beta"]
        assert "D4.bias" in names and "D4.gamma" not in names

    def test_stae_has_previous_branch(self):
        names = build_model(small("STAE"), seed=0).params
        assert {"P1.depthwise", "P2.pointwise"} <= set(names)

    def test_seeded_init_is_deterministic(self):
        a = build_model(small("AE"), seed=5).state_arrays()
        b = build_model(small("AE"), seed=5).state_arrays()
        c = build_model(small("AE"), seed=6).state_arrays()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])
        assert any(not np.array_equal(a[n], c[n]) for n in a if n.endswith("depthwise"))

    def test_init_fills(self):
        model = build_model(small("AE"), seed=0)
        np.testing.assert_array_equal(model.params["E1.gamma"].data, 1.0)
        np.testing.assert_array_equal(model.params["E1.beta"].data, 0.0)
        np.testing.assert_array_equal(model.params["D4.bias"].data, 0.0)

    @pytest.mark.parametrize("kind,count", [("AE", 2366), ("SCAE", 2690), ("STAE", 3021)])
    def test_parameter_count_small(self, kind, count):
        assert build_model(small(kind), seed=0).parameter_count() == count
        assert expected_parameter_count(kind, base=4) == count

    @pytest.mark.parametrize("kind", ["AE", "SCAE", "STAE"])
    @pytest.mark.parametrize("base", [1, 8, 32])
    def test_parameter_count_formula(self, kind, base):
        model = BUILDERS[kind](ArchitectureConfig(kind=kind, base_channels=base))
        assert model.parameter_count() == expected_parameter_count(kind, base)

    def test_kernel_variance_follows_fan_in(self):
        model = build_model(ArchitectureConfig(kind="STAE", base_channels=32), seed=0)
        checked = 0
        for name, tensor in model.params.items():
            if tensor.size < 1000:
                continue
            if name.endswith(".depthwise"):
                fan_in = tensor.shape[1] * tensor.shape[2]
            elif name.endswith(".pointwise"):
                fan_in = tensor.shape[1]
            else:
                continue
            expected = 2.0 / fan_in
            assert 0.8 * expected <= float(np.var(tensor.data)) <= 1.2 * expected, name
            checked += 1
        assert checked >= 10

    @pytest.mark.parametrize("kind", ["AE", "SCAE", "STAE"])
    def test_zero_kernels_give_constant_output(self, kind, frames):
        current, previous = frames
        model = build_model(small(kind), seed=0)
        for name, tensor in model.params.items():
            if name.endswith((".depthwise", ".pointwise")):
                tensor.assign_(np.zeros(tensor.shape, dtype=tensor.dtype))
        np.testing.assert_allclose(model.forward(current, previous).data, 0.5, atol=1e-7)

        model.params["D4.bias"].assign_(np.array([-1.0, 0.0, 2.0], dtype=np.float32))
        out = model.forward(current, previous).data
        expected = 1.0 / (1.0 + np.exp(-np.array([-1.0, 0.0, 2.0])))
        np.testing.assert_allclose(out, np.broadcast_to(expected[None, :, None, None], out.shape), atol=1e-6)


class TestGradients:
    @pytest.mark.parametrize("kind", ["AE", "SCAE", "STAE"])
    def test_whole_model_matches_finite_differences(self, kind):
        # the command-line default step is clamped to the whole-model step
        (result,) = run_checks([kind.lower()], epsilon=1e-3)
        assert result.passed, f"{kind}: {result.max_error:.3e} >= {result.tolerance}"

    @pytest.mark.parametrize(
        "sizes,counts",
        [
            ((36, 12, 4, 4), (6, 6, 4, 4)),
            ((36, 12, 3), (8, 9, 3)),
            ((5, 5), (5, 5)),
            ((1000, 1000, 1000), (7, 7, 6)),
        ],
    )
    def test_layer_sample_spread(self, sizes, counts):
        assert tuple(_layer_sample_counts(sizes, ARCH_SAMPLES_PER_LAYER)) == counts


class TestWeightFile:
    @pytest.mark.parametrize("kind", ["AE", "SCAE", "STAE"])
    def test_round_trip_is_bitwise(self, kind, tmp_path, frames):
        model = build_model(small(kind), seed=3)
        model.batchnorm["E2"].running_mean[...] = 0.25
        path = save_weights(model, tmp_path / f"{kind}.dgw", loss_mode="combined")
        loaded = load_weights(path)
        assert loaded.kind == kind
        assert loaded.loss_mode == "combined"
        original, restored = model.state_arrays(), loaded.state_arrays()
        assert list(original) == list(restored)
        for name in original:
            np.testing.assert_array_equal(original[name], restored[name])
        current, previous = frames
        np.testing.assert_array_equal(model.forward(current, previous).data, loaded.forward(current, previous).data)

    def test_header_describes_model(self, tmp_path):
        path = save_weights(build_model(small("SCAE"), seed=0), tmp_path / "m.dgw")
        blob = path.read_bytes()
        assert blob[:4] == MAGIC
        header = read_header(blob)
        assert header["kind"] == "SCAE"
        assert header["tensors"][0]["offset"] == 0

    def test_flipped_payload_byte(self, tmp_path):
        path = save_weights(build_model(small("AE"), seed=0), tmp_path / "m.dgw")
        blob = bytearray(path.read_bytes())
        blob[read_header(bytes(blob))["_payload_start"] + 5] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            load_weights(path)

    def test_truncated_file(self, tmp_path):
        path = save_weights(build_model(small("AE"), seed=0), tmp_path / "m.dgw")
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(TruncatedPayloadError):
            load_weights(path)

    def test_bad_magic(self, tmp_path):
        path = save_weights(build_model(small("AE"), seed=0), tmp_path / "m.dgw")
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(WeightFormatError):
            load_weights(path)

    def test_expected_architecture_mismatch(self, tmp_path):
        path = save_weights(build_model(small("AE"), seed=0), tmp_path / "m.dgw")
        with pytest.raises(ManifestMismatchError):
            load_weights(path, expected=small("SCAE"))
        assert load_weights(path, expected=small("AE", size=32)).kind == "AE"

    def test_errors_are_contract_violations(self, tmp_path):
        path = tmp_path / "empty.dgw"
        path.write_bytes(b"")
        with pytest.raises(ContractViolation):
            load_weights(path)
