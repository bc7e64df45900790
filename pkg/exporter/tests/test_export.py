"""Export behavior: determinism, file contract, PCA reduction."""

import numpy as np
import pytest

from fakes import FakeEncoder
from opembed import (
    DescriptionRow,
    OperatorDescriptionSet,
    ValidationError,
    default_descriptions,
    export_table,
    read_table,
)


def small_set() -> OperatorDescriptionSet:
    return OperatorDescriptionSet(
        (
            DescriptionRow("conv", "a convolution", "m", "l"),
            DescriptionRow("pool", "a pooling layer", "m", "l"),
            DescriptionRow("skip", "a shortcut", "m", "l"),
        )
    )


def test_export_writes_loadable_table(tmp_path):
    out = tmp_path / "table.json"
    summary = export_table(small_set(), FakeEncoder(dim=8), "short", out)
    assert summary == {
        "out_path": str(out),
        "dim": 8,
        "entry_count": 3,
        "model_name": "fake-encoder",
        "revision": "0",
        "sentence_length_class": "short",
    }
    dim, entries, meta = read_table(out)
    assert dim == 8
    # row order of the description set is preserved
    assert list(entries) == ["conv", "pool", "skip"]
    assert all(v.dtype == np.float32 and v.shape == (8,) for v in entries.values())
    assert meta["model_name"] == "fake-encoder"
    assert meta["revision"] == "0"
    assert meta["sentence_length_class"] == "short"
    assert meta["sentences"] == {
        "conv": "a convolution",
        "pool": "a pooling layer",
        "skip": "a shortcut",
    }
    assert "pca_from" not in meta


def test_two_invocations_are_byte_identical(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    export_table(small_set(), FakeEncoder(dim=8), "short", a)
    export_table(small_set(), FakeEncoder(dim=8), "short", b)
    assert a.read_bytes() == b.read_bytes()


def test_vectors_follow_the_sentence_not_the_name(tmp_path):
    # same sentences under different names give the same vectors, and a
    # different length class changes them
    renamed = OperatorDescriptionSet(
        (
            DescriptionRow("c2", "a convolution", "m", "l"),
            DescriptionRow("p2", "a pooling layer", "m", "l"),
            DescriptionRow("s2", "a shortcut", "m", "l"),
        )
    )
    export_table(small_set(), FakeEncoder(dim=8), "short", tmp_path / "x.json")
    export_table(renamed, FakeEncoder(dim=8), "short", tmp_path / "y.json")
    _, ex, _ = read_table(tmp_path / "x.json")
    _, ey, _ = read_table(tmp_path / "y.json")
    assert np.array_equal(ex["conv"], ey["c2"])
    assert np.array_equal(ex["pool"], ey["p2"])
    export_table(small_set(), FakeEncoder(dim=8), "medium", tmp_path / "z.json")
    _, ez, _ = read_table(tmp_path / "z.json")
    assert not np.array_equal(ex["conv"], ez["conv"])


def test_table_loads_in_the_consumer_package(tmp_path):
    cellnas = pytest.importorskip("cellnas")
    out = tmp_path / "table.json"
    export_table(default_descriptions(), FakeEncoder(dim=12), "short", out)
    table = cellnas.load_table(out)
    assert table.dim == 12
    assert set(table.names) >= {"none", "nor_conv_3x3", "input", "output"}
    # same bytes in, same fingerprint out
    export_table(default_descriptions(), FakeEncoder(dim=12), "short", tmp_path / "b.json")
    other = cellnas.load_table(tmp_path / "b.json")
    assert cellnas.table_fingerprint(table) == cellnas.table_fingerprint(other)
    assert table == other


def test_pca_reduces_dim_and_records_source(tmp_path):
    out = tmp_path / "reduced.json"
    summary = export_table(
        default_descriptions(), FakeEncoder(dim=12), "short", out, pca_k=5
    )
    assert summary["dim"] == 5
    dim, entries, meta = read_table(out)
    assert dim == 5
    assert meta["pca_from"] == 12
    assert all(v.shape == (5,) for v in entries.values())


def test_pca_past_data_rank_pads_with_zeros(tmp_path):
    # 3 sentences span at most 2 components; the rest must be exact zeros
    out = tmp_path / "padded.json"
    export_table(small_set(), FakeEncoder(dim=8), "short", out, pca_k=6)
    dim, entries, _ = read_table(out)
    assert dim == 6
    for vec in entries.values():
        assert np.all(vec[3:] == 0.0)


def test_pca_validation(tmp_path):
    out = tmp_path / "t.json"
    with pytest.raises(ValidationError, match="k must be in"):
        export_table(small_set(), FakeEncoder(dim=8), "short", out, pca_k=9)
    with pytest.raises(ValidationError, match="k must be in"):
        export_table(small_set(), FakeEncoder(dim=8), "short", out, pca_k=0)
    single = OperatorDescriptionSet((DescriptionRow("only", "one", "m", "l"),))
    with pytest.raises(ValidationError, match="at least 2"):
        export_table(single, FakeEncoder(dim=8), "short", out, pca_k=1)


def test_export_rejects_bad_inputs(tmp_path):
    out = tmp_path / "t.json"
    gappy = OperatorDescriptionSet(
        (
            DescriptionRow("a", "has short", "", "l"),
            DescriptionRow("b", "also short", "m", "l"),
            DescriptionRow("c", "third", "m", "l"),
        )
    )
    with pytest.raises(ValidationError, match="empty medium"):
        export_table(gappy, FakeEncoder(dim=8), "medium", out)
    with pytest.raises(ValidationError, match="revision"):
        export_table(small_set(), FakeEncoder(dim=8), "short", out, revision="r1")

    class WrongShape(FakeEncoder):
        def encode(self, sentences):
            return np.zeros((1, self.dim), dtype=np.float32)

    with pytest.raises(ValidationError, match="shape"):
        export_table(small_set(), WrongShape(dim=8), "short", out)

    class ZeroVectors(FakeEncoder):
        def encode(self, sentences):
            return np.zeros((len(sentences), self.dim), dtype=np.float32)

    with pytest.raises(ValidationError, match="all-zero"):
        export_table(small_set(), ZeroVectors(dim=8), "short", out)
