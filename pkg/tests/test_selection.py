import copy

import numpy as np
import pytest

from qfselect import selection
from qfselect.dataset import load_image
from qfselect.errors import NoCandidateQfError, QfSelectError
from qfselect.ranks import RankTable

FULL_SET = (10, 20, 30, 40, 50, 60, 70, 80, 90)


class TestSelectQf:
    def test_all_feasible_picks_smallest(self):
        assert selection.select_qf((1,) * 9, FULL_SET) == (10, False)

    def test_reference_vector_over_three_qfs(self):
        # feasibility (1,1,1) over {10,40,60}: the least feasible QF wins
        assert selection.select_qf((1, 1, 1), (10, 40, 60)) == (10, False)

    def test_none_feasible_falls_back_to_max(self):
        assert selection.select_qf((0,) * 9, FULL_SET) == (90, True)

    def test_only_highest_feasible(self):
        y = (0,) * 8 + (1,)
        assert selection.select_qf(y, FULL_SET) == (90, False)

    def test_empty_set_rejected(self):
        with pytest.raises(NoCandidateQfError):
            selection.select_qf((), ())

    def test_length_mismatch_rejected(self):
        with pytest.raises(QfSelectError):
            selection.select_qf((1, 0), (10, 20, 30))


class TestCompressFixed:
    def test_fixed_strategy_uses_one_qf(self, pipeline, tmp_path):
        results = selection.compress_manifest(
            pipeline.manifest, selection.strategy_fixed(50), (50,),
            out_dir=tmp_path / "out",
        )
        assert len(results) == len(pipeline.manifest)
        assert all(r.chosen_qf == 50 and not r.fallback_used for r in results)
        sample = results[0]
        data = (tmp_path / "out" / f"{sample.image_id}.jpg").read_bytes()
        assert data[:2] == b"\xff\xd8" and data[-2:] == b"\xff\xd9"
        assert len(data) == sample.compressed_bytes


class TestCompressOracle:
    def test_matches_bruteforce_least_feasible(self, pipeline):
        results = selection.compress_manifest(
            pipeline.manifest, selection.STRATEGY_ORACLE, pipeline.pruned,
            rank_table=pipeline.rank_table,
        )
        table = pipeline.rank_table
        for record, result in zip(pipeline.manifest.records, results):
            orig = table.rank(record.image_id, "orig")
            feasible = [
                qf for qf in pipeline.pruned
                if table.rank(record.image_id, f"qf{qf}") <= orig
            ]
            if feasible:
                assert result.chosen_qf == min(feasible)
                assert not result.fallback_used
            else:
                assert result.chosen_qf == max(pipeline.pruned)
                assert result.fallback_used

    def test_rank_guarantee_holds_corpus_wide(self, pipeline):
        results = selection.compress_manifest(
            pipeline.manifest, selection.STRATEGY_ORACLE, pipeline.pruned,
            rank_table=pipeline.rank_table,
        )
        for record, result in zip(pipeline.manifest.records, results):
            if result.fallback_used:
                continue
            orig = pipeline.rank_table.rank(record.image_id, "orig")
            chosen = pipeline.rank_table.rank(record.image_id, f"qf{result.chosen_qf}")
            assert chosen <= orig

    def test_dominates_any_feasible_fixed_qf(self, pipeline):
        results = selection.compress_manifest(
            pipeline.manifest, selection.STRATEGY_ORACLE, pipeline.pruned,
            rank_table=pipeline.rank_table,
        )
        for record, result in zip(pipeline.manifest.records, results):
            orig = pipeline.rank_table.rank(record.image_id, "orig")
            for qf in pipeline.pruned:
                if pipeline.rank_table.rank(record.image_id, f"qf{qf}") <= orig:
                    assert result.chosen_qf <= qf

    def test_single_feasible_at_maximum(self):
        table = RankTable(entries={("x", "orig"): 1, ("x", "qf10"): 2, ("x", "qf90"): 1})

        class Record:
            image_id = "x"

        img = np.full((16, 16, 3), 90, np.uint8)
        result = selection.compress_adaptive(
            Record(), selection.STRATEGY_ORACLE, (10, 90), rank_table=table, img=img
        )
        assert result.chosen_qf == 90
        assert not result.fallback_used

    def test_missing_rank_entries_rejected(self, pipeline):
        table = RankTable(entries={})
        with pytest.raises(Exception):
            selection.compress_manifest(
                pipeline.manifest, selection.STRATEGY_ORACLE, pipeline.pruned,
                rank_table=table,
            )


class TestCompressLearned:
    def test_choices_nondecreasing_in_dt(self, pipeline, trained_model):
        low = copy.deepcopy(trained_model)
        high = copy.deepcopy(trained_model)
        for h in low.heads:
            h.dt = 0.5
        for h in high.heads:
            h.dt = 0.9
        subset = pipeline.manifest.records[:20]
        for record in subset:
            img = load_image(record)
            r_low = selection.compress_adaptive(
                record, selection.STRATEGY_LEARNED, pipeline.pruned, model=low, img=img
            )
            r_high = selection.compress_adaptive(
                record, selection.STRATEGY_LEARNED, pipeline.pruned, model=high, img=img
            )
            assert r_high.chosen_qf >= r_low.chosen_qf

    def test_model_set_mismatch_rejected(self, pipeline, trained_model):
        with pytest.raises(QfSelectError):
            selection.compress_adaptive(
                pipeline.manifest.records[0],
                selection.STRATEGY_LEARNED,
                (10, 20),
                model=trained_model,
            )

    def test_deterministic(self, pipeline, trained_model):
        record = pipeline.manifest.records[0]
        a = selection.compress_adaptive(
            record, selection.STRATEGY_LEARNED, pipeline.pruned, model=trained_model
        )
        b = selection.compress_adaptive(
            record, selection.STRATEGY_LEARNED, pipeline.pruned, model=trained_model
        )
        assert a == b


class TestSelectionLog:
    def test_roundtrip(self, pipeline, tmp_path):
        results = selection.compress_manifest(
            pipeline.manifest, selection.strategy_fixed(30), (30,)
        )[:5]
        path = tmp_path / "log.jsonl"
        selection.save_selection_log(results, path)
        loaded = selection.load_selection_log(path)
        for orig, back in zip(results, loaded):
            assert back.image_id == orig.image_id
            assert back.chosen_qf == orig.chosen_qf
            assert back.compressed_bytes == orig.compressed_bytes
            assert back.strategy == orig.strategy
            assert back.fallback_used == orig.fallback_used
