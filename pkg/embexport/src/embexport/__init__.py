"""Batch-export entity sentences to EMBV vector files via pluggable providers."""

from .errors import ExportConfigError, ExportDataError
from .export import ExportJob, export_vectors
from .providers import HashProvider, SentenceModelProvider, resolve_provider
from .sentences import SentenceRecord, read_sentences, sentence_from_values
from .writer import EmbvWriter

__version__ = "1.0.0"

__all__ = [
    "EmbvWriter",
    "ExportConfigError",
    "ExportDataError",
    "ExportJob",
    "HashProvider",
    "SentenceModelProvider",
    "SentenceRecord",
    "export_vectors",
    "read_sentences",
    "resolve_provider",
    "sentence_from_values",
]
