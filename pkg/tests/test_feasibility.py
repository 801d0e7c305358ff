import numpy as np
import pytest

from qfselect import feasibility, jpeg, metrics
from qfselect.dataset import load_image
from qfselect.errors import MissingRankError, QfSelectError
from qfselect.ranks import RankTable


def small_manifest(pipeline, n=10):
    records = pipeline.manifest.records[:n]
    return type(pipeline.manifest)(num_classes=pipeline.manifest.num_classes, records=records)


class TestCalibrate:
    def test_tiny_threshold_keeps_everything(self, pipeline):
        man = small_manifest(pipeline, 4)
        rep = feasibility.calibrate(man, qf_set=(10, 50), threshold=1e-12)
        assert all(rate == 1.0 for rate in rep.per_qf_hit_rate.values())
        assert rep.pruned_set == (10, 50)

    def test_hit_rates_match_bruteforce_recount(self, pipeline):
        man = small_manifest(pipeline, 10)
        qfs = (10, 40, 90)
        threshold = 0.95
        rep = feasibility.calibrate(man, qf_set=qfs, threshold=threshold)
        for i, qf in enumerate(qfs):
            count = 0
            for record in man.records:
                img = load_image(record)
                value = metrics.ms_ssim(img, jpeg.decode(jpeg.encode(img, qf)))
                count += 1 if value >= threshold else 0
            assert rep.per_qf_hit_rate[qf] == pytest.approx(count / len(man))

    def test_inclusive_boundaries(self, pipeline):
        man = small_manifest(pipeline, 10)
        values = []
        for record in man.records:
            img = load_image(record)
            values.append(metrics.ms_ssim(img, jpeg.decode(jpeg.encode(img, 10))))
        ordered = sorted(values, reverse=True)
        # threshold exactly at the 9th-best value: >= keeps at least 9 of 10
        rep = feasibility.calibrate(man, qf_set=(10,), threshold=ordered[8],
                                    hit_rate_floor=0.9)
        assert rep.per_qf_hit_rate[10] >= 0.9
        assert rep.pruned_set == (10,)

    def test_pruning_antitone_in_floor(self, pipeline):
        man = small_manifest(pipeline, 12)
        previous = None
        for floor in (0.5, 0.7, 0.9, 1.0):
            rep = feasibility.calibrate(
                man, qf_set=(10, 30, 50, 70, 90), threshold=0.995, hit_rate_floor=floor
            )
            current = set(rep.pruned_set)
            if previous is not None:
                assert current.issubset(previous)
            previous = current

    def test_hit_rates_antitone_in_threshold(self, pipeline):
        man = small_manifest(pipeline, 8)
        r_low = feasibility.calibrate(man, qf_set=(10, 50), threshold=0.8)
        r_high = feasibility.calibrate(man, qf_set=(10, 50), threshold=0.99)
        for qf in (10, 50):
            assert r_high.per_qf_hit_rate[qf] <= r_low.per_qf_hit_rate[qf]

    def test_empty_pruned_set_is_reported_not_raised(self, pipeline):
        man = small_manifest(pipeline, 4)
        rep = feasibility.calibrate(man, qf_set=(10,), threshold=1.0, hit_rate_floor=1.0)
        assert rep.pruned_set == ()

    def test_report_json_roundtrip(self, pipeline):
        man = small_manifest(pipeline, 4)
        rep = feasibility.calibrate(man, qf_set=(10, 50), threshold=0.8)
        again = feasibility.CalibrationReport.from_json(rep.to_json())
        assert again == rep

    def test_invalid_parameters(self, pipeline):
        man = small_manifest(pipeline, 2)
        with pytest.raises(QfSelectError):
            feasibility.calibrate(man, threshold=0.0)
        with pytest.raises(QfSelectError):
            feasibility.calibrate(man, hit_rate_floor=1.5)
        with pytest.raises(QfSelectError):
            feasibility.validate_qf_set((20, 10))

    def test_parallel_matches_serial(self, pipeline):
        man = small_manifest(pipeline, 8)
        serial = feasibility.calibrate(man, qf_set=(10, 50), threshold=0.9, parallel=1)
        threaded = feasibility.calibrate(man, qf_set=(10, 50), threshold=0.9, parallel=4)
        assert serial == threaded


def table_from(rows):
    return RankTable(entries=dict(rows))


class TestLabelImage:
    def test_reference_rank_semantics(self):
        # orig rank 2; qf60 and qf40 hold rank 2; qf10 improves it to 1
        table = table_from(
            {
                ("x", "orig"): 2,
                ("x", "qf60"): 2,
                ("x", "qf40"): 2,
                ("x", "qf10"): 1,
            }
        )
        rec = feasibility.label_image("x", table, (10, 40, 60))
        assert rec.q == (1, 1, 1)

    def test_strict_degradation_is_infeasible(self):
        table = table_from({("x", "orig"): 1, ("x", "qf10"): 3})
        assert feasibility.label_image("x", table, (10,)).q == (0,)

    def test_all_rank_one_all_feasible(self):
        table = table_from({("x", "orig"): 1, ("x", "qf10"): 1, ("x", "qf90"): 1})
        assert feasibility.label_image("x", table, (10, 90)).q == (1, 1)

    def test_missing_entries_raise(self):
        table = table_from({("x", "orig"): 1})
        with pytest.raises(MissingRankError):
            feasibility.label_image("x", table, (10,))

    def test_labels_never_consult_msssim(self, monkeypatch):
        def boom(*args, **kwargs):
            raise AssertionError("labeling must not evaluate MS-SSIM")

        monkeypatch.setattr(metrics, "ms_ssim", boom)
        table = table_from({("x", "orig"): 2, ("x", "qf10"): 1})
        assert feasibility.label_image("x", table, (10,)).q == (1,)


class TestBuildTrainingSet:
    def test_empty_pruned_set_gives_empty_vectors(self, pipeline):
        man = small_manifest(pipeline, 3)
        records = feasibility.build_training_set(man, pipeline.rank_table, ())
        assert all(rec.q == () for rec in records)

    def test_matches_per_image_labeling(self, pipeline):
        man = small_manifest(pipeline, 3)
        records = feasibility.build_training_set(man, pipeline.rank_table, pipeline.pruned)
        for record, rec in zip(man.records, records):
            assert rec == feasibility.label_image(
                record.image_id, pipeline.rank_table, pipeline.pruned
            )

    def test_marginal_positive_rates_match_independent_script(self, pipeline):
        records = feasibility.build_training_set(
            pipeline.manifest, pipeline.rank_table, pipeline.pruned
        )
        matrix = np.array([rec.q for rec in records])
        for j, qf in enumerate(pipeline.pruned):
            count = 0
            for record in pipeline.manifest.records:
                orig = pipeline.rank_table.rank(record.image_id, "orig")
                at_qf = pipeline.rank_table.rank(record.image_id, f"qf{qf}")
                count += 1 if at_qf <= orig else 0
            assert matrix[:, j].sum() == count

    def test_jsonl_roundtrip(self, pipeline, tmp_path):
        records = feasibility.build_training_set(
            small_manifest(pipeline, 5), pipeline.rank_table, pipeline.pruned
        )
        feasibility.save_feasibility(records, tmp_path / "labels.jsonl")
        again = feasibility.load_feasibility(tmp_path / "labels.jsonl")
        assert again == records
