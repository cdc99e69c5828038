"""Versioned archives for base models and concepts.

An archive is a zip holding manifest.json plus one little-endian float32
.npy blob per named parameter. Zip entries carry a fixed timestamp so the
same content always produces the same bytes; every blob is integrity-checked
against the manifest on load.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from ..backbone.model import BaseModel
from ..backbone.schedule import NoiseSchedule
from ..backbone.text import Vocabulary
from ..backbone.unet import DenoisingNetwork
from ..adapters import SketchEncoder
from ..losses import ConceptToken
from ..trainer import AblationFlags, Concept

ARCHIVE_VERSION = 1
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


class ArchiveError(ValueError):
    pass


def _np_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr))
    return buf.getvalue()


def content_hash(manifest: dict, arrays: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(manifest, sort_keys=True).encode())
    for name in sorted(arrays):
        h.update(name.encode())
        h.update(arrays[name].tobytes())
    return h.hexdigest()


def write_blob_archive(path: Path | str, manifest: dict, arrays: dict[str, np.ndarray]) -> str:
    manifest = dict(manifest)
    manifest["archive_version"] = ARCHIVE_VERSION
    manifest["blob_sha256"] = {
        name: hashlib.sha256(arr.tobytes()).hexdigest() for name, arr in arrays.items()
    }
    digest = content_hash(manifest, arrays)
    manifest["content_hash"] = digest
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        def put(name: str, data: bytes) -> None:
            info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, data)

        put("manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode())
        for name in sorted(arrays):
            put(f"blobs/{name}.npy", _np_bytes(arrays[name]))
    return digest


def read_blob_archive(path: Path | str) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise ArchiveError(f"archive {path} does not exist")
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            arrays: dict[str, np.ndarray] = {}
            for name, digest in manifest.get("blob_sha256", {}).items():
                raw = zf.read(f"blobs/{name}.npy")
                arr = np.load(io.BytesIO(raw))
                if hashlib.sha256(arr.tobytes()).hexdigest() != digest:
                    raise ArchiveError(f"blob {name!r} failed its integrity check")
                arrays[name] = arr
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"corrupt archive {path}: {exc}") from exc
    expect = manifest.get("content_hash")
    stripped = {k: v for k, v in manifest.items() if k != "content_hash"}
    if expect and content_hash(stripped, arrays) != expect:
        raise ArchiveError(f"archive {path} content hash mismatch")
    return manifest, arrays


def _module_arrays(prefix: str, module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.{name}": p.detach().cpu().numpy().astype("<f4")
        for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0])
    }


def _load_module(prefix: str, module: torch.nn.Module, arrays: dict[str, np.ndarray]) -> None:
    state = {}
    for name, _ in module.named_parameters():
        key = f"{prefix}.{name}"
        if key not in arrays:
            raise ArchiveError(f"archive is missing parameter {key!r}")
        state[name] = torch.from_numpy(arrays[key].copy())
    module.load_state_dict(state, strict=True)


def save_base_archive(base: BaseModel, path: Path | str) -> str:
    net = base.denoiser
    manifest = {
        "kind": "base_model",
        "vocab": list(base.vocab.words),
        "betas": [float(b) for b in base.schedule.betas],
        "net": {
            "widths": list(net.widths),
            "text_dim": net.text_dim,
            "time_dim": net.time_dim,
            "heads": net.enc_attn[0].heads,
            "max_tokens": net.max_tokens,
        },
        "training": base.manifest,
        "base_hash": base.content_hash(),
    }
    arrays = {}
    arrays.update(_module_arrays("denoiser", base.denoiser))
    arrays.update(_module_arrays("table", base.table))
    arrays.update(_module_arrays("sketch_encoder", base.sketch_encoder))
    return write_blob_archive(path, manifest, arrays)


def load_base_archive(path: Path | str) -> BaseModel:
    manifest, arrays = read_blob_archive(path)
    if manifest.get("kind") != "base_model":
        raise ArchiveError(f"{path} is not a base model archive")
    cfg = manifest["net"]
    denoiser = DenoisingNetwork(
        widths=tuple(cfg["widths"]), text_dim=cfg["text_dim"], time_dim=cfg["time_dim"],
        heads=cfg["heads"], max_tokens=cfg["max_tokens"],
    )
    vocab = Vocabulary(words=tuple(manifest["vocab"]))
    table = torch.nn.Embedding(len(vocab), cfg["text_dim"])
    encoder = SketchEncoder(widths=tuple(cfg["widths"]))
    _load_module("denoiser", denoiser, arrays)
    _load_module("table", table, arrays)
    _load_module("sketch_encoder", encoder, arrays)
    betas = np.asarray(manifest["betas"], np.float64)
    schedule = NoiseSchedule(betas=betas, alpha_bars=np.cumprod(1.0 - betas))
    base = BaseModel(
        denoiser=denoiser, table=table, schedule=schedule, sketch_encoder=encoder,
        vocab=vocab, manifest=manifest.get("training", {}),
    )
    base.freeze()
    if base.content_hash() != manifest["base_hash"]:
        raise ArchiveError("reconstructed base model does not match its recorded hash")
    return base


def save_concept_archive(concept: Concept, path: Path | str) -> str:
    manifest = {
        "kind": "concept",
        "class_name": concept.class_name,
        "flags": concept.flags.__dict__,
        "training": concept.manifest,
        "has_detail_encoder": concept.f_d is not None,
        "widths": list(concept.f_c.widths),
    }
    arrays = {"token.v": concept.token.v.detach().cpu().numpy().astype("<f4")}
    arrays.update(_module_arrays("f_c", concept.f_c))
    if concept.f_d is not None:
        arrays.update(_module_arrays("f_d", concept.f_d))
    return write_blob_archive(path, manifest, arrays)


def load_concept_archive(path: Path | str, base: BaseModel | None = None) -> Concept:
    manifest, arrays = read_blob_archive(path)
    if manifest.get("kind") != "concept":
        raise ArchiveError(f"{path} is not a concept archive")
    flags = AblationFlags(**manifest["flags"])
    widths = tuple(manifest["widths"])
    f_c = SketchEncoder(widths=widths)
    _load_module("f_c", f_c, arrays)
    f_d = None
    if manifest["has_detail_encoder"]:
        f_d = SketchEncoder(widths=widths)
        _load_module("f_d", f_d, arrays)
    for enc in (f_c, f_d):
        if enc is not None:
            enc.eval()
            for p in enc.parameters():
                p.requires_grad_(False)
    concept = Concept(
        token=ConceptToken(
            v=torch.from_numpy(arrays["token.v"].copy()),
            class_name=manifest["class_name"],
            trainable=False,
        ),
        f_c=f_c,
        f_d=f_d,
        class_name=manifest["class_name"],
        flags=flags,
        manifest=manifest.get("training", {}),
    )
    if base is not None and concept.base_hash and concept.base_hash != base.content_hash():
        raise ArchiveError(
            f"concept was trained against base {concept.base_hash[:12]}, "
            f"got {base.content_hash()[:12]}"
        )
    return concept
