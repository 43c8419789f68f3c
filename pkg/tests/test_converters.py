import logging
import math

import numpy as np
import pandas as pd

from twisted_noon.converters import HomConverter, ScanConverter


def _check_list_equal(a, b):
    assert sorted(a) == sorted(b)


def test_scan_default():
    sc = ScanConverter()
    _check_list_equal(ScanConverter.all_metrics, sc.convert_cols)


def test_hom_default():
    hc = HomConverter()
    _check_list_equal(HomConverter.all_metrics, hc.convert_cols)


def test_user_input():
    expected = ["delay_fs", "sigma_fs"]
    hc = HomConverter(expected)
    _check_list_equal(expected, hc.convert_cols)


def test_warn_invalid_col(caplog):
    foo = "foo"
    with caplog.at_level(logging.WARNING):
        sc = ScanConverter([foo])
    assert foo not in sc.convert_cols
    assert "foo" in caplog.text


def test_convert_angles():
    df = pd.DataFrame({"angle_deg": [0.0, 90.0, 180.0], "mean": [1.0, 2.0, 3.0]})
    converted = ScanConverter().convert_metrics(df)
    assert list(converted.columns) == ["angle_rad", "mean"]
    assert np.allclose(converted["angle_rad"], [0.0, math.pi / 2, math.pi])
    # the input frame is left alone
    assert list(df.columns) == ["angle_deg", "mean"]
    assert df["angle_deg"].iloc[1] == 90.0


def test_convert_delays():
    df = pd.DataFrame({"delay_fs": [-500.0, 0.0, 1500.0], "mean": [9.0, 0.0, 9.0]})
    converted = HomConverter().convert_metrics(df)
    assert list(converted.columns) == ["delay_ps", "mean"]
    assert np.allclose(converted["delay_ps"], [-0.5, 0.0, 1.5])


def test_missing_cols_ignored():
    df = pd.DataFrame({"mean": [1.0]})
    converted = HomConverter().convert_metrics(df)
    assert list(converted.columns) == ["mean"]
