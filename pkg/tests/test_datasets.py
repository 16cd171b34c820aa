import json

import numpy as np
import pytest

from ebsgd.datasets import DataError, csv_stream, read_labeled_csv, read_matrix_csv


def write(path, text):
    path.write_text(text)
    return path


def test_toy_split_is_reproducible(tmp_path):
    f = write(tmp_path / "toy.csv", "a,b,y\n1,2,0\n3,4,1\n5,6,0\n7,8,1\n")
    s1 = csv_stream(f, "y", split=0.5, seed=3)
    s2 = csv_stream(f, "y", split=0.5, seed=3)
    assert len(s1.train_y) == 2 and len(s1.test_y) == 2
    np.testing.assert_array_equal(s1.train_x, s2.train_x)
    assert sorted(np.concatenate([s1.train_index, s1.test_index])) == [0, 1, 2, 3]
    s1.write_manifest(tmp_path / "m.json")
    assert json.load(open(tmp_path / "m.json"))["n_train"] == 2


def test_named_column_errors(tmp_path):
    f = write(tmp_path / "t.csv", "a,b,y\n1,2,0\n3,4,1\n")
    with pytest.raises(DataError, match="'label'"):
        csv_stream(f, "label")
    with pytest.raises(DataError, match="'c'"):
        csv_stream(f, "y", ["a", "c"])


def test_malformed_rows_are_skipped_and_counted(tmp_path):
    f = write(tmp_path / "t.csv", "a,b,y\n1,2,0\n3,x,1\n5,6,1\n7,8,0\n")
    s = csv_stream(f, "y", seed=0)
    assert s.n_skipped == 1 and s.skipped[0][0] == 3
    assert len(s.train_y) + len(s.test_y) == 3


def test_non_binary_response(tmp_path):
    f = write(tmp_path / "t.csv", "a,y\n1,0\n2,2\n")
    with pytest.raises(DataError, match="line 3"):
        csv_stream(f, "y")
    t = read_labeled_csv(f, "y", binary=False, intercept=True)
    assert t.x.shape == (2, 2) and t.columns[0] == "(intercept)"


def test_read_matrix_csv(tmp_path):
    f = write(tmp_path / "m.csv", "u,v\n1,2\n3,4\n")
    np.testing.assert_array_equal(read_matrix_csv(f), [[1, 2], [3, 4]])
    g = write(tmp_path / "n.csv", "1\n2\nthree\n")
    with pytest.raises(DataError):
        read_matrix_csv(g)
    with pytest.raises(DataError):
        read_matrix_csv(tmp_path / "missing.csv")
