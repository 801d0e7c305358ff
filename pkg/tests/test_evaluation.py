import pytest

from qfselect import evaluation, feasibility, jpeg, ranks, selection
from qfselect.errors import CoverageMismatchError, NoDataError, QfSelectError
from qfselect.model import TrainConfig
from qfselect.selection import SelectionResult


def fake_selection(image_id, nbytes, qf=50):
    return SelectionResult(
        image_id=image_id, chosen_qf=qf, strategy=f"fixed:{qf}",
        fallback_used=False, compressed_bytes=nbytes, feasibility=None,
    )


class FakeRecord:
    def __init__(self, image_id, original_bytes):
        self.image_id = image_id
        self.original_bytes = original_bytes


class FakeManifest:
    def __init__(self, records):
        self.records = records


class TestCompressionRatio:
    def test_ratio_of_sums(self):
        man = FakeManifest([FakeRecord("a", 1000), FakeRecord("b", 1000)])
        sels = [fake_selection("a", 100), fake_selection("b", 100)]
        assert evaluation.compression_ratio(man, sels) == pytest.approx(10.0)

    def test_identity(self):
        man = FakeManifest([FakeRecord("a", 500)])
        assert evaluation.compression_ratio(man, [fake_selection("a", 500)]) == 1.0

    def test_missing_image_rejected(self):
        man = FakeManifest([FakeRecord("a", 10), FakeRecord("b", 10)])
        with pytest.raises(CoverageMismatchError):
            evaluation.compression_ratio(man, [fake_selection("a", 5)])

    def test_duplicate_rejected(self):
        man = FakeManifest([FakeRecord("a", 10)])
        with pytest.raises(CoverageMismatchError):
            evaluation.compression_ratio(
                man, [fake_selection("a", 5), fake_selection("a", 6)]
            )


class TestTopkAccuracy:
    def test_example_counts(self):
        assert evaluation.topk_accuracy([1, 2, 6, 1], 5) == pytest.approx(0.75)

    def test_all_rank_one(self):
        assert evaluation.topk_accuracy([1, 1, 1], 1) == 1.0

    def test_invalid_k(self):
        with pytest.raises(QfSelectError):
            evaluation.topk_accuracy([1], 0)

    def test_matches_direct_rescoring_of_outputs(self, pipeline, tmp_path):
        subset = FakeManifest(pipeline.manifest.records[:16])
        subset.num_classes = pipeline.manifest.num_classes
        out = tmp_path / "rescore"
        sels = selection.compress_manifest(
            pipeline.manifest, selection.STRATEGY_ORACLE, pipeline.pruned,
            rank_table=pipeline.rank_table, out_dir=out,
        )
        from_table = evaluation.accuracy_at_selection(
            pipeline.manifest, sels, pipeline.rank_table, 1
        )
        direct_ranks = []
        for record in pipeline.manifest.records:
            decoded = jpeg.decode((out / f"{record.image_id}.jpg").read_bytes())
            direct_ranks.append(
                ranks.rank_of(pipeline.classifier, decoded, record.gt_label)
            )
        assert from_table == pytest.approx(evaluation.topk_accuracy(direct_ranks, 1))


class TestBaselineCurve:
    def test_nine_points_and_cr_monotone(self, pipeline):
        points = evaluation.baseline_curve(
            pipeline.manifest, feasibility.DEFAULT_QF_SET, pipeline.rank_table
        )
        assert len(points) == 9
        crs = [p.cr for p in points]
        assert all(a >= b for a, b in zip(crs, crs[1:]))
        assert all(p.top1 <= p.top5 for p in points)

    def test_singleton_matches_direct_fixed_evaluation(self, pipeline):
        [point] = evaluation.baseline_curve(pipeline.manifest, (50,), pipeline.rank_table)
        sels = selection.compress_manifest(
            pipeline.manifest, selection.strategy_fixed(50), (50,)
        )
        assert point.cr == pytest.approx(
            evaluation.compression_ratio(pipeline.manifest, sels)
        )
        assert point.top1 == pytest.approx(
            evaluation.accuracy_at_selection(pipeline.manifest, sels, pipeline.rank_table, 1)
        )


class TestAdaptiveCurve:
    def test_grid_cardinality_and_sorting(self, pipeline):
        grid = evaluation.SweepGrid(pr_values=(0.3, 0.5), dt_values=(0.5, 0.9))
        points = evaluation.adaptive_curve(
            pipeline.manifest, pipeline.raw_features, pipeline.pruned,
            pipeline.rank_table, grid, TrainConfig(epochs=40, seed=42),
        )
        assert len(points) == 4
        crs = [p.cr for p in points]
        assert crs == sorted(crs)
        assert {(p.pr, p.dt) for p in points} == {(0.3, 0.5), (0.3, 0.9), (0.5, 0.5), (0.5, 0.9)}

    def test_duplicate_grid_pairs_dropped_with_warning(self):
        grid = evaluation.SweepGrid(pr_values=(0.5, 0.5), dt_values=(0.5,))
        with pytest.warns(UserWarning):
            pairs = grid.pairs()
        assert pairs == [(0.5, 0.5)]

    def test_grid_validation(self):
        with pytest.raises(QfSelectError):
            evaluation.SweepGrid(pr_values=(), dt_values=(0.5,))
        with pytest.raises(QfSelectError):
            evaluation.SweepGrid(pr_values=(0.5,), dt_values=(1.5,))


class TestOracleVsBaselineInvariant:
    def test_oracle_accuracy_bound(self, pipeline):
        point = evaluation.oracle_point(
            pipeline.manifest, pipeline.pruned, pipeline.rank_table
        )
        sels = selection.compress_manifest(
            pipeline.manifest, selection.STRATEGY_ORACLE, pipeline.pruned,
            rank_table=pipeline.rank_table,
        )
        fallback_fraction = sum(1 for s in sels if s.fallback_used) / len(sels)
        for k, acc in ((1, point.top1), (5, point.top5)):
            orig = evaluation.original_accuracy(pipeline.manifest, pipeline.rank_table, k)
            assert acc >= orig - fallback_fraction - 1e-12


class TestReport:
    def make_points(self):
        baseline = [
            evaluation.RaPoint(cr=5.0 - q / 100, top1=0.5, top5=0.9,
                               strategy=f"fixed:{q}", qf=q)
            for q in range(10, 100, 10)
        ]
        adaptive = [
            evaluation.RaPoint(cr=4.0 + i / 10, top1=0.6 + i / 100, top5=0.95,
                               strategy="learned", pr=0.2 + i / 100, dt=0.5)
            for i in range(30)
        ]
        return baseline, adaptive

    def test_csv_row_count(self):
        baseline, adaptive = self.make_points()
        text = evaluation.points_to_csv(baseline + adaptive)
        assert len(text.strip().splitlines()) == 1 + 39

    def test_csv_roundtrip_exact(self):
        baseline, adaptive = self.make_points()
        points = baseline + adaptive
        again = evaluation.points_from_csv(evaluation.points_to_csv(points))
        assert again == points

    def test_emission_is_deterministic(self, tmp_path):
        baseline, adaptive = self.make_points()
        for name in ("a", "b"):
            evaluation.emit_report(
                adaptive, baseline, tmp_path / f"{name}.csv", tmp_path / f"{name}.svg"
            )
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
        assert (tmp_path / "a.svg").read_text().startswith("<svg")

    def test_empty_points_rejected(self, tmp_path):
        with pytest.raises(NoDataError):
            evaluation.points_to_csv([])
        with pytest.raises(NoDataError):
            evaluation.points_to_svg([], [])

    def test_top_ordering_enforced(self):
        with pytest.raises(QfSelectError):
            evaluation.RaPoint(cr=1.0, top1=0.9, top5=0.5, strategy="x")
        with pytest.raises(QfSelectError):
            evaluation.RaPoint(cr=-1.0, top1=0.5, top5=0.9, strategy="x")
