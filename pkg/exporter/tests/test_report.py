"""Similarity report ordering, formatting and file round trips."""

import numpy as np
import pytest

from fakes import FakeEncoder
from opembed import (
    DescriptionRow,
    OperatorDescriptionSet,
    ValidationError,
    export_table,
    format_report_csv,
    report_from_file,
    similarity_report,
)


def test_orthogonal_entries_give_zero_cosines():
    entries = {n: np.eye(3, dtype=np.float32)[i] for i, n in enumerate("abc")}
    rows = similarity_report(entries)
    assert [(a, b) for a, b, _ in rows] == [("a", "b"), ("a", "c"), ("b", "c")]
    assert all(c == 0.0 for _, _, c in rows)


def test_duplicate_vectors_sort_first_with_cosine_one():
    v = np.array([1.0, 2.0, 3.0], dtype=np.float32)
    entries = {
        "twin1": v,
        "twin2": v.copy(),
        "other": np.array([3.0, -1.0, 0.5], dtype=np.float32),
    }
    rows = similarity_report(entries)
    assert rows[0][:2] == ("twin1", "twin2")
    assert rows[0][2] == pytest.approx(1.0)
    assert all(c < 1.0 for _, _, c in rows[1:])


def test_descending_order_with_known_angles():
    entries = {
        "east": np.array([1.0, 0.0]),
        "ne": np.array([1.0, 1.0]),
        "north": np.array([0.0, 1.0]),
        "west": np.array([-1.0, 0.0]),
    }
    rows = similarity_report(entries)
    cosines = [c for _, _, c in rows]
    assert cosines == sorted(cosines, reverse=True)
    assert rows[0][:2] in {("east", "ne"), ("ne", "north")}
    assert rows[-1][:2] == ("east", "west")
    assert rows[-1][2] == pytest.approx(-1.0)


def test_report_needs_three_entries():
    entries = {n: np.array([1.0, float(i)]) for i, n in enumerate("ab")}
    with pytest.raises(ValidationError, match="at least 3"):
        similarity_report(entries)


def test_csv_format_is_exact():
    entries = {
        "a": np.array([1.0, 0.0], dtype=np.float32),
        "b": np.array([1.0, 0.0], dtype=np.float32),
        "c": np.array([0.0, 1.0], dtype=np.float32),
    }
    text = format_report_csv(similarity_report(entries))
    assert text == "op_a,op_b,cosine\na,b,1.0\na,c,0.0\nb,c,0.0\n"


def test_report_from_exported_file(tmp_path):
    d = OperatorDescriptionSet(
        tuple(
            DescriptionRow(f"op{i}", f"sentence number {i}", "m", "l")
            for i in range(4)
        )
    )
    out = tmp_path / "table.json"
    export_table(d, FakeEncoder(dim=16), "short", out)
    rows = report_from_file(out)
    assert len(rows) == 6
    assert all(-1.0 <= c <= 1.0 for _, _, c in rows)
    # deterministic: same file, same report
    assert rows == report_from_file(out)
