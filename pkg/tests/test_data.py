import os
from pathlib import Path

import numpy as np
import pytest

from feats.data import PanelDataset, load_panel_csv, load_uea_ts, save_panel_csv
from feats.datagen import GeneratorSpec, generate
from feats.errors import DataError, UnsupportedFeatureError

DATA = Path(__file__).parent / "data"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


X_2x1x3 = """sample_id,series_id,time,value
a,0,0,1.0
a,0,1,2.0
a,0,2,3.5
b,0,2,-1e-3
b,0,1,0
b,0,0,+4
"""


class TestPanelCsv:
    def test_small_grid(self, tmp_path):
        px = write(tmp_path, "X.csv", X_2x1x3)
        py = write(tmp_path, "y.csv", "sample_id,target\nb,2.5\na,-1\n")
        ds = load_panel_csv(px, py)
        assert ds.X.shape == (2, 1, 3)
        np.testing.assert_array_equal(ds.X[:, 0], [[1.0, 2.0, 3.5], [4.0, 0.0, -1e-3]])
        np.testing.assert_array_equal(ds.y, [-1.0, 2.5])
        assert ds.meta["sample_ids"] == ["a", "b"]

    def test_weights_and_covariates(self, tmp_path):
        px = write(tmp_path, "X.csv", X_2x1x3)
        py = write(tmp_path, "y.csv", "sample_id,target,weight\na,1,2\nb,0,0.5\n")
        pz = write(tmp_path, "Z.csv", "sample_id,covariate_id,value\na,0,1\na,1,2\nb,1,4\nb,0,3\n")
        ds = load_panel_csv(px, py, pz)
        np.testing.assert_array_equal(ds.weights, [2.0, 0.5])
        np.testing.assert_array_equal(ds.Z, [[1, 2], [3, 4]])

    def test_duplicate_key(self, tmp_path):
        px = write(tmp_path, "X.csv", X_2x1x3 + "a,0,1,9\n")
        with pytest.raises(DataError, match="duplicate"):
            load_panel_csv(px)

    def test_missing_cell_is_located(self, tmp_path):
        px = write(tmp_path, "X.csv", X_2x1x3.replace("b,0,1,0\n", ""))
        with pytest.raises(DataError, match=r"sample=b, series=0, time=1"):
            load_panel_csv(px)

    def test_non_numeric_reports_line(self, tmp_path):
        px = write(tmp_path, "X.csv", X_2x1x3.replace("3.5", "3.5x"))
        with pytest.raises(DataError, match=r":4:"):
            load_panel_csv(px)

    @pytest.mark.parametrize("value", ["nan", "inf", ""])
    def test_non_finite_values_rejected(self, tmp_path, value):
        px = write(tmp_path, "X.csv", X_2x1x3.replace("3.5", value))
        with pytest.raises(DataError):
            load_panel_csv(px)

    def test_bad_header(self, tmp_path):
        px = write(tmp_path, "X.csv", X_2x1x3.replace("value", "val"))
        with pytest.raises(DataError, match="header"):
            load_panel_csv(px)

    def test_missing_target(self, tmp_path):
        px = write(tmp_path, "X.csv", X_2x1x3)
        py = write(tmp_path, "y.csv", "sample_id,target\na,1\n")
        with pytest.raises(DataError, match="missing target for sample b"):
            load_panel_csv(px, py)

    def test_non_positive_weight(self, tmp_path):
        px = write(tmp_path, "X.csv", X_2x1x3)
        py = write(tmp_path, "y.csv", "sample_id,target,weight\na,1,0\nb,0,1\n")
        with pytest.raises(DataError, match="weights"):
            load_panel_csv(px, py)

    def test_round_trip_with_generator_is_bitwise(self, tmp_path):
        g = generate(GeneratorSpec("sim332", 7, 0, seed=3))
        paths = save_panel_csv(g.train, tmp_path)
        back = load_panel_csv(paths["X"], paths["y"], paths["Z"])
        assert np.array_equal(back.X, g.train.X)
        assert np.array_equal(back.Z, g.train.Z)
        assert np.array_equal(back.y, g.train.y)

    def test_dataset_validation(self):
        with pytest.raises(DataError):
            PanelDataset(np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(DataError):
            PanelDataset(np.zeros((2, 1, 3)), np.zeros(3))
        with pytest.raises(DataError):
            PanelDataset(np.zeros((2, 1, 3)), np.zeros(2), split="holdout")


TS_FIXTURE = """# comment line
@problemName Tiny
@timeStamps false
@missing false
@univariate false
@dimensions 2
@equalLength true
@seriesLength 3
@classLabel true up down
@data
1,2,3:4,5,6:down
-1.5,0,2e1:7,8,9:up
"""


class TestUeaTs:
    def test_fixture_exact(self, tmp_path):
        ds = load_uea_ts(write(tmp_path, "t.ts", TS_FIXTURE))
        expected = np.array([[[1, 2, 3], [4, 5, 6]], [[-1.5, 0, 20], [7, 8, 9]]], float)
        assert np.array_equal(ds.X, expected)
        np.testing.assert_array_equal(ds.y, [1, 0])  # index order follows the @classLabel line
        assert ds.class_labels == ["up", "down"]
        assert ds.meta["problem_name"] == "Tiny"

    def test_unequal_length(self, tmp_path):
        text = TS_FIXTURE.replace("1,2,3:4,5,6", "1,2:4,5,6").replace("@equalLength true", "@equalLength false")
        with pytest.raises(UnsupportedFeatureError):
            load_uea_ts(write(tmp_path, "t.ts", text))

    def test_ragged_without_header_flag(self, tmp_path):
        with pytest.raises(UnsupportedFeatureError):
            load_uea_ts(write(tmp_path, "t.ts", TS_FIXTURE.replace("1,2,3:4,5,6", "1,2:4,5")))

    def test_unknown_label(self, tmp_path):
        with pytest.raises(DataError, match="unknown class label"):
            load_uea_ts(write(tmp_path, "t.ts", TS_FIXTURE.replace(":up", ":sideways")))

    def test_missing_values(self, tmp_path):
        with pytest.raises(DataError, match="missing"):
            load_uea_ts(write(tmp_path, "t.ts", TS_FIXTURE.replace("1,2,3", "1,?,3")))

    def test_timestamps(self, tmp_path):
        with pytest.raises(UnsupportedFeatureError):
            load_uea_ts(write(tmp_path, "t.ts", TS_FIXTURE.replace("@timeStamps false", "@timeStamps true")))

    def test_dimension_mismatch(self, tmp_path):
        with pytest.raises(DataError, match="dimensions"):
            load_uea_ts(write(tmp_path, "t.ts", TS_FIXTURE.replace("1,2,3:4,5,6:down", "1,2,3:down")))

    def test_basic_motions(self):
        tr = load_uea_ts(DATA / "BasicMotions" / "BasicMotions_TRAIN.ts")
        te = load_uea_ts(DATA / "BasicMotions" / "BasicMotions_TEST.ts")
        assert tr.X.shape == (40, 6, 100) and te.X.shape == (40, 6, 100)
        assert len(tr.class_labels) == 4 and set(np.unique(tr.y)) == {0, 1, 2, 3}

    @pytest.mark.skipif(not os.environ.get("FEATS_UEA_DIR"), reason="set FEATS_UEA_DIR to a directory with PenDigits")
    def test_pen_digits(self):
        base = Path(os.environ["FEATS_UEA_DIR"]) / "PenDigits"
        tr = load_uea_ts(base / "PenDigits_TRAIN.ts")
        assert tr.X.shape == (7494, 2, 8) and len(tr.class_labels) == 10
