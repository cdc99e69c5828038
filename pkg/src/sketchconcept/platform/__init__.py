"""Persistence, configuration, CLI, and the HTTP service."""

from .archive import (
    ArchiveError,
    load_base_archive,
    load_concept_archive,
    read_blob_archive,
    save_base_archive,
    save_concept_archive,
    write_blob_archive,
)
from .config import ablation_flags, load_config, pretrain_config, stage_config
from .jobs import ConceptBusyError, Job, JobRunner
from .store import STORE_ENV, ConceptStore, default_store_root
from .wire import image_from_b64, image_to_b64, rle_decode, rle_encode, strokes_from_wire

__all__ = [
    "ArchiveError", "load_base_archive", "load_concept_archive", "read_blob_archive",
    "save_base_archive", "save_concept_archive", "write_blob_archive",
    "ablation_flags", "load_config", "pretrain_config", "stage_config",
    "ConceptBusyError", "Job", "JobRunner",
    "STORE_ENV", "ConceptStore", "default_store_root",
    "image_from_b64", "image_to_b64", "rle_decode", "rle_encode", "strokes_from_wire",
]
