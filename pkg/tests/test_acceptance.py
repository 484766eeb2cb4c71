"""Desk-scale runs: train every architecture on the synthetic corpus and score a held-out sequence."""

import pytest

from src.services.data.synthetic import generate_synthetic_sequence
from src.services.evaluation.methods import IdentityMethod, ModelMethod
from src.services.evaluation.service import evaluate, occlusion_report, segmentation_gaps
from src.services.evaluation.tools import fit_segmenter
from src.services.training.schemas.training import TrainConfig
from src.services.training.service import train, training_sequences

pytestmark = pytest.mark.slow

ARCHS = ("AE", "SCAE", "STAE")


@pytest.fixture(scope="module")
def corpus():
    return training_sequences(TrainConfig(seed=0, size=64, synthetic_sequences=8, synthetic_frames=24))


@pytest.fixture(scope="module")
def held_out():
    return [generate_synthetic_sequence(seed=9001, frame_count=24, size=64, source="held_out")]


@pytest.fixture(scope="module")
def models(corpus):
    trained = {}
    for arch in ARCHS:
        cfg = TrainConfig(arch=arch, epochs=30, size=64, levels=(2,), clean_ratio=0.25, seed=0)
        trained[arch] = train(cfg, corpus).model
    return trained


@pytest.fixture(scope="module")
def level2_ssim(models, held_out):
    scores = {"Unguarded": evaluate(IdentityMethod(), held_out, levels=(2,), threads=1)[0].ssim}
    for arch, model in models.items():
        scores[arch] = evaluate(ModelMethod(model), held_out, levels=(2,), threads=1)[0].ssim
    return scores


@pytest.mark.parametrize("arch", ARCHS)
def test_restoration_beats_degraded_input(arch, level2_ssim):
    assert level2_ssim[arch] >= level2_ssim["Unguarded"] + 0.05


def test_temporal_model_ranks_first(level2_ssim):
    assert level2_ssim["STAE"] >= level2_ssim["SCAE"] - 0.01
    assert level2_ssim["SCAE"] >= level2_ssim["AE"] - 0.01


def test_report_rows_per_method(models, held_out):
    rows = evaluate(ModelMethod(models["STAE"]), held_out, threads=1)
    assert [r.level_label for r in rows] == ["0", "1", "2", "3", "4", "avg"]


def test_occlusion_side_by_side(models, held_out):
    rows = [occlusion_report(ModelMethod(models[a]), held_out, level=2, threads=1) for a in ("SCAE", "STAE")]
    assert [r.method for r in rows] == ["SCAE(MSE+SSIM)", "STAE(MSE+SSIM)"]
    assert all(r.occluded_mse >= 0.0 for r in rows)


def test_segmentation_recovery(models, corpus, held_out):
    prototypes = fit_segmenter(corpus)
    reference = evaluate(IdentityMethod(), held_out, levels=(0, 3), prototypes=prototypes, threads=1)
    assert reference[0].pixel_acc - reference[1].pixel_acc >= 0.05
    restored = evaluate(ModelMethod(models["STAE"]), held_out, levels=(0, 3), prototypes=prototypes, threads=1)
    level3 = [g for g in segmentation_gaps(restored, reference) if g.noise_level == 3][0]
    assert level3.pixel_acc_recovered >= 0.3
