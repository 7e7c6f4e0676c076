import io
import math

import numpy as np
import pytest

from assayrisk.datasets import read_dataset
from assayrisk.errors import DatasetFormatError, UnbalancedDesignError
from assayrisk.serialize import format_float, to_csv, to_json
from assayrisk.tolerance import estimate_components

HEADER = "series_id,replicate,level,rel_error_pct\n"


def parse(text):
    return read_dataset(io.StringIO(text))


class TestReadDataset:
    def test_relative_errors(self):
        data = parse(HEADER + "a,1,100,-2\na,2,100,0\nb,1,100,2\nb,2,100,4\n")
        ds = data[100.0]
        np.testing.assert_array_equal(ds.values, [[-2, 0], [2, 4]])

    def test_pairs(self):
        text = "series_id,replicate,level,nominal,measured\n" + "".join(
            f"{s},{r},5,200,{m}\n" for s, r, m in [("a", 1, 196), ("a", 2, 200), ("b", 1, 204), ("b", 2, 208)]
        )
        np.testing.assert_allclose(parse(text)[5.0].values, [[-2, 0], [2, 4]], rtol=1e-12)

    def test_levels_sorted(self):
        rows = [f"{s},{r},{lv},1.{r}{s}\n" for lv in (300, 10) for s in (1, 2) for r in (1, 2)]
        assert list(parse(HEADER + "".join(rows))) == [10.0, 300.0]

    def test_row_order_irrelevant(self):
        a = parse(HEADER + "a,1,1,1\na,2,1,2\nb,1,1,5\nb,2,1,3\n")[1.0]
        b = parse(HEADER + "b,2,1,3\na,2,1,2\nb,1,1,5\na,1,1,1\n")[1.0]
        # series keep first-seen order; the estimates do not depend on it
        assert estimate_components(a) == estimate_components(b)
        assert b.series_ids == ("b", "a")

    @pytest.mark.parametrize(
        "text, message",
        [
            ("series_id,level,rel_error_pct\na,1,2\n", "missing required column"),
            ("series_id,replicate,level,rel_error_pct,nominal,measured\na,1,1,1,1,1\n", "exactly one"),
            ("series_id,replicate,level\na,1,1\n", "exactly one"),
            ("series_id,replicate,level,nominal\na,1,1,1\n", "exactly one"),
            (HEADER + "a,1,100,\n", "missing value"),
            (HEADER + "a,1.5,100,2\n", "integer"),
            (HEADER + "a,1,100,1,5\n", "more cells"),
            (HEADER + "a,1,100,x\n", "not a number"),
            (HEADER + "a,1,100,nan\n", "finite"),
            (HEADER + "a,1,-3,1\n", "positive"),
            (HEADER, "no rows"),
            ("series_id,replicate,level,nominal,measured\na,1,1,0,1\n", "nominal"),
        ],
    )
    def test_format_errors(self, text, message):
        with pytest.raises(DatasetFormatError, match=message):
            parse(text)

    def test_unbalanced(self):
        with pytest.raises(UnbalancedDesignError):
            parse(HEADER + "a,1,1,1\na,2,1,2\nb,1,1,5\n")

    def test_path_and_bad_encoding(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_bytes(b"series_id,replicate,level,rel_error_pct\n\xff,1,1,1\n")
        with pytest.raises(DatasetFormatError, match="UTF-8"):
            read_dataset(path)


class TestSerialize:
    @pytest.mark.parametrize("x", [0.1, 1 / 3, 0.7990911211430955, 1e-300, -2.5e10, 5e-324])
    def test_float_round_trip(self, x):
        assert float(format_float(x)) == x

    def test_integral_floats(self):
        assert format_float(1.0) == "1"
        assert format_float(-0.0) == "-0"

    def test_csv(self):
        text = to_csv(("a", "b", "c", "d"), [(1.5, None, True, "x"), (2, 0.1, False, "y")])
        assert text == "a,b,c,d\n1.5,,true,x\n2,0.10000000000000001,false,y\n"

    def test_json_canonical(self):
        doc = {"z": 1.0, "a": [0.1, None, math.inf], "n": {"k": True}}
        text = to_json(doc)
        # insertion order is kept, not sorted
        assert text.index('"z"') < text.index('"a"')
        assert "null" in text and "Infinity" not in text
        assert to_json(doc) == text
        assert text.endswith("\n")
