import math

import numpy as np
import pytest

from pdsla.data_io import apply_tcodes, load_csv, write_fredmd_csv
from pdsla.errors import MissingDataUnderFailPolicy, NonPositiveUnderLog, ParseError, UsageError
from pdsla.panel import Panel
from pdsla.simulate import macro_fixture


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_plain_csv(tmp_path):
    path = _write(tmp_path, "a,b\n1,2\n3,4.5\n-1,0\n")
    panel = load_csv(path)
    assert panel.names == ("a", "b")
    np.testing.assert_array_equal(panel.values, [[1, 2], [3, 4.5], [-1, 0]])
    assert panel.dates is None and panel.tcodes is None


def test_fredmd_layout(tmp_path):
    path = _write(tmp_path, "sasdate,IP,UNRATE\nTransform:,5,2\n1/1/1960,10,5.1\n2/1/1960,11,5.3\n3/1/1960,12,5.2\n,,\n")
    panel = load_csv(path, fredmd_mode=True)
    assert panel.tcodes == (5, 2)
    assert panel.dates == ("1/1/1960", "2/1/1960", "3/1/1960")
    np.testing.assert_array_equal(panel.values[:, 0], [10, 11, 12])  # raw levels, codes not applied


def test_missing_data_policies(tmp_path):
    text = "date,a,b\nd1,1,1\nd2,2,\nd3,3,3\nd4,4,4\nd5,,5\n"
    path = _write(tmp_path, text)
    dropped = load_csv(path, date_column="date", na_policy="drop_rows")
    assert dropped.T == 3 and dropped.dates == ("d1", "d3", "d4")
    span = load_csv(path, date_column="date")
    assert span.T == 2 and span.dates == ("d3", "d4")
    with pytest.raises(MissingDataUnderFailPolicy):
        load_csv(path, date_column="date", na_policy="fail")
    with pytest.raises(UsageError):
        load_csv(path, na_policy="interpolate")


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, "a,b\n1,x\n"))
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, "a,b\n1,2\n"), date_column="when")
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, "a,b\n1,2\n"), columns=["c"])
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_column_subset(tmp_path):
    panel = load_csv(_write(tmp_path, "a,b,c\n1,2,3\n4,5,6\n"), columns=["c", "a"])
    assert panel.names == ("c", "a")
    np.testing.assert_array_equal(panel.values, [[3, 1], [6, 4]])


def test_tcode_examples():
    x = Panel(np.array([1.0, math.e, math.e**2]), ["x"])
    np.testing.assert_array_equal(apply_tcodes(x, [1]).values, x.values)
    np.testing.assert_allclose(apply_tcodes(x, [5]).values[:, 0], [1.0, 1.0], atol=1e-14)
    rng = np.random.default_rng(0)
    y = rng.normal(size=30).cumsum() + 4
    d = apply_tcodes(Panel(y, ["y"]), [2]).values[:, 0]
    np.testing.assert_allclose(np.concatenate([[y[0]], y[0] + np.cumsum(d)]), y, atol=1e-12)


def test_all_tcodes_against_direct_formulas():
    rng = np.random.default_rng(1)
    x = np.exp(rng.normal(size=12).cumsum() * 0.1) + 1
    out = {c: apply_tcodes(Panel(x, ["x"]), [c]).values[:, 0] for c in range(1, 8)}
    np.testing.assert_allclose(out[3], x[2:] - 2 * x[1:-1] + x[:-2])
    np.testing.assert_allclose(out[4], np.log(x))
    lx = np.log(x)
    np.testing.assert_allclose(out[6], lx[2:] - 2 * lx[1:-1] + lx[:-2])
    g = x[1:] / x[:-1] - 1
    np.testing.assert_allclose(out[7], g[1:] - g[:-1])


def test_tcodes_trim_to_common_span_and_keep_order():
    rng = np.random.default_rng(2)
    vals = np.abs(rng.normal(size=(10, 3))) + 1
    panel = Panel(vals, ["a", "b", "c"], [f"t{i}" for i in range(10)])
    out = apply_tcodes(panel, [1, 6, 2])
    assert out.names == ("a", "b", "c") and out.T == 8
    assert out.dates[0] == "t2"
    np.testing.assert_array_equal(out.values[:, 0], vals[2:, 0])
    np.testing.assert_allclose(out.values[:, 2], np.diff(vals[:, 2])[1:])


def test_tcode_errors():
    panel = Panel(np.array([[1.0, -1.0], [2.0, 3.0]]), ["a", "b"])
    with pytest.raises(NonPositiveUnderLog):
        apply_tcodes(panel, [1, 5])
    with pytest.raises(UsageError):
        apply_tcodes(panel, [1, 8])
    with pytest.raises(UsageError):
        apply_tcodes(panel, [1])
    with pytest.raises(UsageError):
        apply_tcodes(panel)


def test_fredmd_roundtrip(tmp_path):
    panel = macro_fixture(4, K=6, T=30)
    path = tmp_path / "fx.csv"
    write_fredmd_csv(panel, path)
    back = load_csv(path, fredmd_mode=True)
    np.testing.assert_array_equal(back.values, panel.values)
    assert back.names == panel.names and back.tcodes == panel.tcodes and back.dates == panel.dates
