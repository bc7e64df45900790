"""Operator description sets: names paired with sentences of three lengths.

The bundled default covers the standard cell-search operator vocabulary
plus the reserved ``input``/``output`` structural nodes, so tables exported
from it work on expanded cell graphs out of the box.  Sentences are kept
verbatim; no casing or whitespace normalization is applied before encoding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

from .errors import ValidationError

LENGTH_CLASSES = ("short", "medium", "long")
CSV_HEADER = ("op_name", "short", "medium", "long")


@dataclass(frozen=True)
class DescriptionRow:
    """One operator with its short, medium and long descriptive sentences."""

    op_name: str
    short: str
    medium: str
    long: str

    def __post_init__(self):
        if not self.op_name or self.op_name != self.op_name.strip():
            raise ValidationError(
                f"op_name must be nonempty without surrounding whitespace, "
                f"got {self.op_name!r}"
            )

    def sentence(self, length_class: str) -> str:
        if length_class not in LENGTH_CLASSES:
            raise ValidationError(
                f"length class must be one of {LENGTH_CLASSES}, got {length_class!r}"
            )
        return getattr(self, length_class)


@dataclass(frozen=True)
class OperatorDescriptionSet:
    """Ordered, name-unique collection of description rows."""

    rows: tuple[DescriptionRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if not self.rows:
            raise ValidationError("description set has no rows")
        seen = set()
        for row in self.rows:
            if row.op_name in seen:
                raise ValidationError(f"duplicate op_name {row.op_name!r}")
            seen.add(row.op_name)

    @property
    def op_names(self) -> tuple[str, ...]:
        return tuple(row.op_name for row in self.rows)

    def sentences(self, length_class: str) -> dict[str, str]:
        """op_name -> sentence for one length class; empty sentences error.

        Emptiness is checked here rather than at construction because a row
        only needs the class that is actually selected for export.
        """
        out = {}
        for row in self.rows:
            text = row.sentence(length_class)
            if not text.strip():
                raise ValidationError(
                    f"operator {row.op_name!r} has an empty {length_class} sentence"
                )
            out[row.op_name] = text
        return out


def read_descriptions(path) -> OperatorDescriptionSet:
    """Parse a descriptions CSV with the exact header op_name,short,medium,long."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValidationError(f"descriptions file {path} is empty") from None
            if tuple(header) != CSV_HEADER:
                raise ValidationError(
                    f"descriptions header must be {','.join(CSV_HEADER)}, "
                    f"got {','.join(header)}"
                )
            rows = []
            for lineno, cells in enumerate(reader, start=2):
                if not cells:
                    continue
                if len(cells) != len(CSV_HEADER):
                    raise ValidationError(
                        f"{path} line {lineno}: expected {len(CSV_HEADER)} "
                        f"columns, got {len(cells)}"
                    )
                rows.append(DescriptionRow(*cells))
    except OSError as exc:
        raise ValidationError(f"cannot read descriptions {path}: {exc}") from exc
    return OperatorDescriptionSet(tuple(rows))


def write_descriptions(descriptions: OperatorDescriptionSet, path) -> None:
    """Inverse of :func:`read_descriptions`; round-trips exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in descriptions.rows:
            writer.writerow([row.op_name, row.short, row.medium, row.long])


def default_descriptions() -> OperatorDescriptionSet:
    """The bundled description set (standard operators + input/output nodes)."""
    ref = resources.files("opembed").joinpath("data/descriptions.csv")
    with resources.as_file(ref) as path:
        return read_descriptions(path)
