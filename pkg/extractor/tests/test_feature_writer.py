"""Writer output against the documented byte layout.

Layout checks are built from the contract with bare `struct` calls; the
engine's reader (the consumer of record) then gets the same files and must
accept them without a single warning.
"""

import struct
import warnings

import numpy as np
import pytest
from clipq.store import read_features

from imgfeat.featurefile import MAGIC, VERSION, file_size, label_bytes, write_features

HEADER = struct.Struct("<4sIQBIII")


class TestByteLayout:
    def test_exact_bytes_two_items(self, tmp_path):
        views = np.array([[[1.0, -2.0]], [[0.5, 3.25]]], dtype=np.float32)
        path = write_features(tmp_path / "two.features", [7, 9], [0, 2], views, 3)

        expected = bytearray(HEADER.pack(MAGIC, VERSION, 2, 1, 2, 3, 0))
        expected += struct.pack("<Q", 7) + b"\x01" + views[0].tobytes()
        expected += struct.pack("<Q", 9) + b"\x04" + views[1].tobytes()
        assert path.read_bytes() == bytes(expected)

    @pytest.mark.parametrize("n,v,d,vocab", [(1, 1, 1, 0), (3, 2, 5, 9), (4, 6, 2, 16)])
    def test_size_formula_matches_disk(self, tmp_path, n, v, d, vocab):
        rng = np.random.default_rng(n * 100 + v)
        views = rng.standard_normal((n, v, d)).astype(np.float32)
        cats = [i % vocab if vocab else None for i in range(n)]
        path = write_features(tmp_path / "f.features", range(n), cats, views, vocab)
        assert path.stat().st_size == file_size(n, v, d, vocab)
        assert file_size(n, v, d, vocab) == 29 + n * (8 + (vocab + 7) // 8 + 4 * v * d)

    def test_label_bytes_hand_cases(self):
        assert label_bytes(0, 1) == b"\x01"
        assert label_bytes(8, 9) == b"\x00\x01"
        assert label_bytes(None, 9) == b"\x00\x00"
        assert label_bytes(None, 0) == b""
        with pytest.raises(ValueError, match="outside"):
            label_bytes(9, 9)


class TestEngineConformance:
    def test_reader_accepts_without_warnings(self, tmp_path):
        rng = np.random.default_rng(0)
        views = rng.standard_normal((6, 2, 4)).astype(np.float32)
        cats = [0, 4, 2, 2, 1, 3]
        path = write_features(tmp_path / "c.features", [10, 11, 12, 13, 14, 15], cats, views, 5)

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fs = read_features(path)

        assert fs.n_items == 6 and fs.n_views == 2 and fs.vocab == 5
        assert np.array_equal(fs.item_ids, np.arange(10, 16, dtype=np.uint64))
        assert np.array_equal(fs.features, views)
        for row, cat in enumerate(cats):
            assert fs.label_set(row).as_int() == 1 << cat

    def test_unlabeled_file_roundtrips(self, tmp_path):
        views = np.ones((3, 1, 2), dtype=np.float32)
        path = write_features(tmp_path / "u.features", [0, 1, 2], [None] * 3, views, 0)
        fs = read_features(path)
        assert fs.vocab == 0
        assert fs.labels.shape == (3, 0)


class TestWriterValidation:
    def good(self):
        return [5], [0], np.zeros((1, 1, 3), dtype=np.float32), 2

    def test_rejects_nonfinite(self, tmp_path):
        ids, cats, views, vocab = self.good()
        views[0, 0, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            write_features(tmp_path / "x.features", ids, cats, views, vocab)
        assert list(tmp_path.iterdir()) == []

    def test_rejects_duplicate_ids(self, tmp_path):
        views = np.zeros((2, 1, 3), dtype=np.float32)
        with pytest.raises(ValueError, match="unique"):
            write_features(tmp_path / "x.features", [5, 5], [0, 1], views, 2)

    def test_rejects_count_mismatch(self, tmp_path):
        views = np.zeros((2, 1, 3), dtype=np.float32)
        with pytest.raises(ValueError, match="item count"):
            write_features(tmp_path / "x.features", [5], [0, 1], views, 2)

    def test_rejects_bad_rank_and_widths(self, tmp_path):
        with pytest.raises(ValueError, match="shape"):
            write_features(tmp_path / "x.features", [5], [0], np.zeros((1, 3)), 2)
        with pytest.raises(ValueError, match="at least one view"):
            write_features(tmp_path / "x.features", [5], [0], np.zeros((1, 0, 3)), 2)
        with pytest.raises(ValueError, match="single byte"):
            write_features(tmp_path / "x.features", [5], [0], np.zeros((1, 256, 1)), 2)

    def test_rejects_oversized_id(self, tmp_path):
        views = np.zeros((1, 1, 3), dtype=np.float32)
        with pytest.raises(ValueError, match="64-bit"):
            write_features(tmp_path / "x.features", [1 << 64], [0], views, 2)

    def test_no_temp_file_left_behind(self, tmp_path):
        ids, cats, views, vocab = self.good()
        path = write_features(tmp_path / "ok.features", ids, cats, views, vocab)
        assert [p.name for p in tmp_path.iterdir()] == [path.name]
