"""Directory-backed, content-addressed concept registry."""

from __future__ import annotations

import json
import os
import zipfile
from pathlib import Path

from ..backbone.model import BaseModel
from ..trainer import Concept
from .archive import ArchiveError, load_concept_archive, save_concept_archive

STORE_ENV = "SKETCHCONCEPT_STORE"


def default_store_root() -> Path:
    return Path(os.environ.get(STORE_ENV, "store"))


class ConceptStore:
    """Concept archives under <root>/concepts, content hash in the filename.

    Archives are write-once: saving identical content is a no-op, and nothing
    is ever rewritten in place, so concurrent services cannot corrupt them.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.concept_dir = self.root / "concepts"
        self.concept_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, concept_id: str) -> Path:
        return self.concept_dir / f"{concept_id}.zip"

    def save(self, concept: Concept, name: str | None = None) -> str:
        name = name or concept.class_name
        tmp = self.concept_dir / f".tmp-{os.getpid()}-{name}.zip"
        digest = save_concept_archive(concept, tmp)
        concept_id = f"{name}-{digest[:12]}"
        final = self._path(concept_id)
        if final.exists():
            tmp.unlink()
        else:
            os.replace(tmp, final)
        return concept_id

    def load(self, concept_id: str, base: BaseModel | None = None) -> Concept:
        path = self._path(concept_id)
        if not path.exists():
            raise KeyError(f"unknown concept id {concept_id!r}")
        return load_concept_archive(path, base)

    def list(self) -> list[dict]:
        out = []
        for path in sorted(self.concept_dir.glob("*.zip")):
            try:
                with zipfile.ZipFile(path) as zf:
                    manifest = json.loads(zf.read("manifest.json"))
            except (zipfile.BadZipFile, KeyError, json.JSONDecodeError):
                continue
            out.append(
                {
                    "id": path.stem,
                    "class_name": manifest.get("class_name"),
                    "flags": manifest.get("flags"),
                    "base_hash": manifest.get("training", {}).get("base_hash", "")[:12],
                }
            )
        return out
