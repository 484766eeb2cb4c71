import csv
import math

import numpy as np
import pytest

from src.core.errors import ContractViolation
from src.services.architectures.schemas.architectures import ArchitectureConfig
from src.services.architectures.service import build_model
from src.services.data.schemas.data import FrameSequence
from src.services.data.segmenter import fit_prototypes
from src.services.evaluation.methods import FilterMethod, IdentityMethod, ModelMethod
from src.services.evaluation.report import (
    read_report,
    render_csv,
    render_markdown,
    write_gap_report,
    write_occlusion_report,
    write_report,
)
from src.services.evaluation.schemas.evaluation import REPORT_COLUMNS, MetricRow, OcclusionRow, SegmentationGap
from src.services.evaluation.service import (
    average_row,
    evaluate,
    level_dir,
    occlusion_report,
    segmentation_gaps,
)
from src.services.filters.schemas.filters import FilterSettings
from src.utils.image_io import read_rgb, write_labels


@pytest.fixture
def prototypes(sequences):
    return fit_prototypes([f for s in sequences for f in s.frames], [lab for s in sequences for lab in s.labels])


class TestEvaluate:
    def test_identity_at_level_zero_is_perfect(self, sequences):
        rows = evaluate(IdentityMethod(), sequences, levels=(0,), threads=1)
        level0 = rows[0]
        assert level0.noise_level == 0
        assert level0.n == 8
        assert level0.mse == 0.0
        assert level0.psnr == math.inf
        assert level0.ssim == pytest.approx(1.0, abs=1e-6)
        assert math.isnan(level0.pixel_acc)

    def test_one_row_per_level_plus_average(self, sequences):
        rows = evaluate(IdentityMethod(), sequences, levels=(1, 2, 3), threads=1)
        assert [r.noise_level for r in rows] == [1, 2, 3, None]
        avg = rows[-1]
        assert avg.is_average
        assert avg.mse == pytest.approx(np.mean([r.mse for r in rows[:3]]))
        assert avg.ssim == pytest.approx(np.mean([r.ssim for r in rows[:3]]))
        assert avg.n == 24

    def test_identity_degrades_with_level(self, sequences):
        rows = evaluate(IdentityMethod(), sequences, levels=(0, 1, 2, 3, 4), threads=1)
        errors = [r.mse for r in rows[:5]]
        assert all(a < b for a, b in zip(errors, errors[1:]))

    def test_independent_of_thread_count(self, sequences):
        method = FilterMethod("median", FilterSettings())
        serial = evaluate(method, sequences, levels=(2,), threads=1)
        pooled = evaluate(method, sequences, levels=(2,), threads=4)
        assert serial[0].mse == pooled[0].mse
        assert serial[0].ssim == pooled[0].ssim

    def test_seed_changes_attack(self, sequences):
        a = evaluate(IdentityMethod(), sequences, levels=(2,), seed=0, threads=1)[0]
        b = evaluate(IdentityMethod(), sequences, levels=(2,), seed=1, threads=1)[0]
        assert a.mse != b.mse

    def test_segmentation_with_prototypes(self, sequences, prototypes):
        row = evaluate(IdentityMethod(), sequences, levels=(0,), prototypes=prototypes, threads=1)[0]
        assert 0.0 <= row.pixel_acc <= 1.0
        assert 0.0 <= row.mean_iou <= 1.0

    def test_external_predictions(self, sequences, tmp_path):
        for seq in sequences:
            for name, labels in zip(seq.frame_names, seq.labels):
                write_labels(level_dir(tmp_path, 0, seq) / name, labels)
        row = evaluate(IdentityMethod(), sequences, levels=(0,), external_preds=tmp_path, threads=1)[0]
        assert row.pixel_acc == 1.0
        assert row.mean_iou == 1.0

    def test_missing_external_prediction(self, sequences, tmp_path):
        with pytest.raises(ContractViolation):
            evaluate(IdentityMethod(), sequences, levels=(0,), external_preds=tmp_path, threads=1)

    def test_labels_required_for_segmentation(self, sequences, prototypes):
        unlabelled = [FrameSequence(frames=s.frames, source=s.source) for s in sequences]
        with pytest.raises(ContractViolation):
            evaluate(IdentityMethod(), unlabelled, levels=(0,), prototypes=prototypes, threads=1)

    def test_temporal_model_needs_sequences(self, sequences):
        model = build_model(ArchitectureConfig(kind="STAE", base_channels=4, input_size=(32, 32)), seed=0)
        singles = [FrameSequence(frames=s.frames[:1], source=s.source) for s in sequences]
        with pytest.raises(ContractViolation):
            evaluate(ModelMethod(model), singles, levels=(0,), threads=1)

    def test_model_method_runs(self, sequences):
        model = build_model(ArchitectureConfig(kind="STAE", base_channels=4, input_size=(32, 32)), seed=0)
        model.loss_mode = "combined"
        method = ModelMethod(model)
        assert method.name == "STAE(MSE+SSIM)"
        rows = evaluate(method, sequences, levels=(1,), threads=1)
        assert math.isfinite(rows[0].mse)

    def test_empty_dataset(self):
        with pytest.raises(ContractViolation):
            evaluate(IdentityMethod(), [], levels=(0,))

    def test_dump_images(self, sequences, tmp_path):
        evaluate(IdentityMethod(), sequences, levels=(0,), dump_dir=tmp_path, threads=1)
        seq = sequences[0]
        dumped = read_rgb(level_dir(tmp_path, 0, seq) / seq.frame_names[0])
        np.testing.assert_allclose(dumped, seq.frames[0], atol=1 / 255)


def test_average_row_requires_rows():
    with pytest.raises(ContractViolation):
        average_row("x", [])


class TestOcclusion:
    def test_identity_leaves_unoccluded_pixels(self, sequences):
        row = occlusion_report(IdentityMethod(), sequences, level=2, threads=1)
        assert row.unoccluded_mse == 0.0
        assert row.occluded_mse > 0.0
        assert 0.0 < row.occluded_fraction < 1.0
        assert row.n == 8

    def test_level_zero_places_nothing(self, sequences):
        with pytest.raises(ContractViolation):
            occlusion_report(IdentityMethod(), sequences, level=0, threads=1)

    def test_report_file(self, sequences, tmp_path):
        row = occlusion_report(IdentityMethod(), sequences, level=1, threads=1)
        path = write_occlusion_report([row], tmp_path / "occ.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "method,noise_level,n,occluded_mse,unoccluded_mse,occluded_fraction"
        assert lines[1].startswith("Unguarded,1,8,")

    def test_report_quotes_method_names(self, tmp_path):
        row = OcclusionRow("Median, k=5", 2, 3, 0.125, 0.0, 0.25)
        with write_occlusion_report([row], tmp_path / "occ.csv").open(newline="") as f:
            (loaded,) = list(csv.DictReader(f))
        assert loaded["method"] == "Median, k=5"
        assert float(loaded["occluded_mse"]) == 0.125
        assert loaded["n"] == "3"


def _row(method, level, mse, pixel_acc=float("nan"), mean_iou=float("nan")):
    return MetricRow(method, level, 4, mse, -10 * math.log10(mse) if mse else math.inf, 0.5, pixel_acc, mean_iou)


class TestReport:
    def test_csv_round_trip(self, tmp_path):
        rows = [_row("Unguarded", 0, 0.0), _row("Unguarded", 1, 0.0123456789, 0.9, 0.7)]
        rows.append(average_row("Unguarded", rows))
        loaded = read_report(write_report(rows, tmp_path / "r.csv"))
        assert len(loaded) == 3
        assert loaded[1].mse == rows[1].mse
        assert loaded[0].psnr == math.inf
        assert math.isnan(loaded[0].pixel_acc)
        assert loaded[2].noise_level is None

    def test_empty_report_is_header_only(self):
        assert render_csv([]) == ",".join(REPORT_COLUMNS) + "\n"

    def test_markdown_table(self):
        rows = [_row("Unguarded", 1, 0.02), _row("Median Filtering", 1, 0.01, 0.8, 0.5)]
        lines = render_markdown(rows).splitlines()
        assert len(lines) == 7
        assert lines[0] == "| Metric | Unguarded | Median Filtering |"
        assert lines[2].startswith("| MSE | 0.0200 | 0.0100 |")
        assert lines[5] == "| Pixel Accuracy | - | 0.8000 |"

    def test_markdown_prefers_average(self):
        rows = [_row("A", 1, 0.04), _row("A", None, 0.03)]
        assert "| MSE | 0.0300 |" in render_markdown(rows)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ContractViolation):
            write_report([], tmp_path / "r.txt", "html")

    def test_read_rejects_foreign_csv(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ContractViolation):
            read_report(path)


class TestSegmentationGaps:
    def test_gap_and_recovery(self, tmp_path):
        reference = [_row("Unguarded", 0, 0.0, 0.9, 0.8), _row("Unguarded", 2, 0.05, 0.5, 0.4)]
        method = [_row("SCAE", 0, 0.001, 0.9, 0.8), _row("SCAE", 2, 0.01, 0.8, 0.6)]
        gaps = segmentation_gaps(method, reference)
        level2 = gaps[1]
        assert level2.pixel_acc_gap == pytest.approx(0.1)
        assert level2.pixel_acc_relative_gap == pytest.approx(0.1 / 0.9)
        assert level2.pixel_acc_recovered == pytest.approx(0.75)
        assert level2.mean_iou_recovered == pytest.approx(0.5)
        assert math.isnan(gaps[0].pixel_acc_recovered)
        lines = write_gap_report(gaps, tmp_path / "gaps.csv").read_text().splitlines()
        assert lines[0].startswith("method,noise_level,pixel_acc_gap")
        assert len(lines) == 3

    def test_gap_report_quotes_method_names(self, tmp_path):
        gap = SegmentationGap("SCAE, tuned", 3, 0.1, 0.125, 0.2, 0.25, 0.5, float("nan"))
        with write_gap_report([gap], tmp_path / "gaps.csv").open(newline="") as f:
            (loaded,) = list(csv.DictReader(f))
        assert loaded["method"] == "SCAE, tuned"
        assert loaded["noise_level"] == "3"
        assert float(loaded["pixel_acc_recovered"]) == 0.5
        assert loaded["mean_iou_recovered"] == "nan"

    def test_needs_clean_reference(self):
        with pytest.raises(ContractViolation):
            segmentation_gaps([_row("A", 2, 0.1)], [_row("Unguarded", 2, 0.1)])
