"""Operator-embedding exporter.

Encodes short natural-language descriptions of network operators with a
pretrained sentence model (mean-pooled token vectors) and writes the
Embedding Table JSON consumed by the search package.  The file is the only
interface between the two sides.
"""

from .descriptions import (
    CSV_HEADER,
    LENGTH_CLASSES,
    DescriptionRow,
    OperatorDescriptionSet,
    default_descriptions,
    read_descriptions,
    write_descriptions,
)
from .encode import DEFAULT_MODEL_ID, TransformerEncoder
from .errors import ModelError, OpembedError, ValidationError
from .export import export_table
from .report import (
    REPORT_HEADER,
    format_report_csv,
    report_from_file,
    similarity_report,
)
from .table import cosine, pca_project, read_table, write_table

__all__ = [
    "CSV_HEADER",
    "DEFAULT_MODEL_ID",
    "LENGTH_CLASSES",
    "REPORT_HEADER",
    "DescriptionRow",
    "ModelError",
    "OpembedError",
    "OperatorDescriptionSet",
    "TransformerEncoder",
    "ValidationError",
    "cosine",
    "default_descriptions",
    "export_table",
    "format_report_csv",
    "pca_project",
    "read_descriptions",
    "read_table",
    "report_from_file",
    "similarity_report",
    "write_descriptions",
    "write_table",
]
