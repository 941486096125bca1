"""The export job: CSV in, EMBV out, batched through a provider."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ExportConfigError, ExportDataError
from .providers import resolve_provider
from .sentences import read_sentences
from .writer import EmbvWriter


@dataclass(frozen=True)
class ExportJob:
    input_path: Path
    id_column: str
    model: str
    batch_size: int
    output_path: Path

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ExportConfigError(
                f"batch size must be at least 1, got {self.batch_size}"
            )


def export_vectors(job: ExportJob, provider=None) -> int:
    """Embed every row of the job's CSV and write one EMBV file.

    Returns the number of records written. The provider argument exists for
    tests; normally it is resolved from the job's model identifier. Any
    failure (load, inference, dimension drift, filesystem) leaves no output
    file behind.
    """
    records = read_sentences(job.input_path, job.id_column)
    if provider is None:
        provider = resolve_provider(job.model)

    with EmbvWriter(job.output_path, provider.dim, len(records)) as writer:
        for start in range(0, len(records), job.batch_size):
            chunk = records[start : start + job.batch_size]
            vectors = np.asarray(provider.embed([r.sentence for r in chunk]))
            if vectors.ndim != 2 or vectors.shape != (len(chunk), provider.dim):
                raise ExportDataError(
                    f"provider {provider.tag} returned shape {vectors.shape} "
                    f"for a batch of {len(chunk)} (expected ({len(chunk)}, "
                    f"{provider.dim}))"
                )
            writer.write_batch([r.entity_id for r in chunk], vectors)
    return len(records)
