import numpy as np
import pytest

from robustree.dataset import (Column, Dataset, load_dataset, load_schema, read_table,
                               save_dataset, save_schema)
from robustree.errors import InvalidInputError


COLS = (Column("temp"), Column("steps", "discrete"), Column("solvent", "categorical", ("water", "ethanol")))


def test_round_trip(tmp_path):
    ds = Dataset.from_rows(COLS, [[1.5, 3, "water"], [2.0, 4, "ethanol"]], [0.1, 0.2], target_name="yield")
    save_dataset(tmp_path / "d.csv", ds)
    save_schema(tmp_path / "s.json", COLS, "yield")
    back = load_dataset(tmp_path / "d.csv", tmp_path / "s.json")
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    assert back.decode() == [[1.5, 3, "water"], [2.0, 4, "ethanol"]]


def test_validation():
    with pytest.raises(InvalidInputError):
        Dataset.from_rows(COLS, [[1.0, 2.5, "water"]], [0.0])
    with pytest.raises(InvalidInputError):
        Dataset.from_rows(COLS, [[1.0, 2, "oil"]], [0.0])
    with pytest.raises(InvalidInputError):
        Dataset.from_rows(COLS, [[1.0, 2]], [0.0])
    with pytest.raises(InvalidInputError):
        Column("c", "categorical")
    with pytest.raises(InvalidInputError):
        Column("c", "ordinal")


def test_missing_schema_names_path(tmp_path):
    with pytest.raises(InvalidInputError, match="nope.json"):
        load_schema(tmp_path / "nope.json")


def test_missing_columns(tmp_path):
    (tmp_path / "d.csv").write_text("temp,f\n1,2\n")
    with pytest.raises(InvalidInputError, match="missing columns"):
        read_table(tmp_path / "d.csv", COLS, "f")
