"""End-to-end extraction jobs: split protocol, determinism, size arithmetic,
and the handoff to the engine that consumes the files."""

import json
import shutil
import struct

import pytest
from clipq.config import Hyperparams, RunConfig
from clipq.ops import run_build, run_eval, run_train
from clipq.store import read_features

from imgfeat.errors import ImageReadError
from imgfeat.jobs import ExtractionJob, run_extraction


class TestSizeArithmetic:
    def test_hundred_images_two_views(self, hundred_root, tmp_path):
        job = ExtractionJob(dataset=hundred_root, split="train", out=tmp_path / "t.features",
                            seed=0, dim=768)
        summary = run_extraction(job)
        expected = 29 + 100 * (8 + 1 + 2 * 768 * 4)
        assert summary.items == 100 and summary.views == 2 and summary.d_in == 768
        assert summary.file_bytes == expected
        assert summary.out.stat().st_size == expected

        fs = read_features(summary.out)
        assert fs.features.shape == (100, 2, 768)
        assert fs.vocab == 2


class TestDeterminism:
    def test_fixed_seed_byte_identical(self, image_root, tmp_path):
        def once(name, seed):
            job = ExtractionJob(dataset=image_root, split="train", out=tmp_path / name,
                                seed=seed, dim=8)
            return run_extraction(job).out.read_bytes()

        assert once("a.features", seed=5) == once("b.features", seed=5)
        assert once("c.features", seed=6) != once("a2.features", seed=5)

    def test_center_splits_ignore_seed(self, image_root, tmp_path):
        outs = []
        for name, split, seed in (("q0", "query", 0), ("q9", "query", 9), ("db", "database", 0)):
            job = ExtractionJob(dataset=image_root, split=split, out=tmp_path / f"{name}.features",
                                seed=seed, dim=8)
            outs.append(run_extraction(job).out.read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestSplitProtocol:
    def test_pairs_multiply_training_views(self, flat_root, tmp_path):
        job = ExtractionJob(dataset=flat_root, split="train", out=tmp_path / "p.features",
                            seed=0, dim=4, pairs=3)
        summary = run_extraction(job)
        assert summary.views == 6
        header = summary.out.read_bytes()[:29]
        magic, version, n, v, d_in, vocab, flags = struct.unpack("<4sIQBIII", header)
        assert (magic, version, n, v, d_in, vocab, flags) == (b"FPQ1", 1, 5, 6, 4, 0, 0)

    def test_pairs_do_not_apply_to_center_splits(self, flat_root, tmp_path):
        job = ExtractionJob(dataset=flat_root, split="database", out=tmp_path / "d.features",
                            seed=0, dim=4, pairs=3)
        assert run_extraction(job).views == 1

    def test_job_validation(self, flat_root, tmp_path):
        with pytest.raises(ValueError, match="split"):
            ExtractionJob(dataset=flat_root, split="test", out=tmp_path / "x")
        with pytest.raises(ValueError, match="pairs"):
            ExtractionJob(dataset=flat_root, split="train", out=tmp_path / "x", pairs=0)
        with pytest.raises(ValueError, match="batch_views"):
            ExtractionJob(dataset=flat_root, split="train", out=tmp_path / "x", batch_views=0)

    def test_small_view_batches_change_nothing(self, image_root, tmp_path):
        def once(name, batch_views):
            job = ExtractionJob(dataset=image_root, split="train", out=tmp_path / name,
                                seed=3, dim=8, batch_views=batch_views)
            return run_extraction(job).out.read_bytes()

        assert once("big.features", 256) == once("tiny.features", 3)


class TestFailureHandling:
    def test_unreadable_image_aborts_without_output(self, flat_root, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(flat_root, broken)
        (broken / "zzz_junk.png").write_bytes(b"not a png")
        out = tmp_path / "never.features"
        with pytest.raises(ImageReadError):
            run_extraction(ExtractionJob(dataset=broken, split="query", out=out, dim=4))
        assert not out.exists()
        assert not list(tmp_path.glob("*.tmp"))


class TestEngineHandoff:
    def test_extracted_files_train_and_evaluate(self, colored_root, tmp_path):
        for split, name in (("train", "train"), ("database", "database"), ("query", "query")):
            job = ExtractionJob(dataset=colored_root, split=split,
                                out=tmp_path / f"{name}.features", seed=0, dim=16)
            run_extraction(job)
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({
            "name": "colored-folders",
            "train": "train.features",
            "query": "query.features",
            "database": "database.features",
            "r_at": 8,
        }))

        run = RunConfig(
            hyper=Hyperparams(m=2, k=16, batch_size=8, max_epochs=3, eta=2, seed=1),
            manifest=manifest,
            out=tmp_path / "run",
        )
        run_train(run)
        run_build(run)
        doc = run_eval(run)

        # color separation is strong enough that even this tiny run beats chance
        assert 0.6 <= doc["mean_ap"] <= 1.0
        assert (tmp_path / "run" / "metrics.json").exists()
