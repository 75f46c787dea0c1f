"""Offline tool that runs a pretrained transformer encoder over a sentence
compression dataset and writes the last four hidden layers per token into
the TCF1 binary feature format consumed by the training package."""

from .dataset import DatasetExample, load_examples, tokenize
from .extract import ExtractionJob, extract
from .tcf import TcfHeader, read_header, write_records
from .verify import VerifyReport, verify

__version__ = "0.1.0"

__all__ = [
    "DatasetExample",
    "ExtractionJob",
    "TcfHeader",
    "VerifyReport",
    "extract",
    "load_examples",
    "read_header",
    "tokenize",
    "verify",
    "write_records",
]
