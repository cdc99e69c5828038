"""JSON-over-HTTP service exposing training and generation.

Long jobs are asynchronous: POST /jobs returns 202 with an id to poll.
Generation jobs against the 64x64 desk model complete in seconds. The
OpenAPI description is served at /openapi.json as usual for FastAPI.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel as Schema
from pydantic import Field, ValidationError

from .. import __version__
from ..backbone.model import BaseModel, PretrainConfig, pretrain_base
from ..evalharness import run_benchmark
from ..inference import generate, local_edit
from ..sketchrep.dataset import TrainingPair, save_image
from ..sketchrep.masks import MaskError, auto_mask
from ..sketchrep.strokes import rasterize
from ..sketchrep.synthetic import SIZE, build_pretrain_corpus
from ..trainer import StageConfig, train_concept
from .archive import save_base_archive
from .config import DESK_DEFAULTS, ablation_flags, stage_config
from .jobs import ConceptBusyError, JobRunner
from .store import ConceptStore
from .wire import image_from_b64, rle_decode, strokes_from_wire


class StrokeWire(Schema):
    kind: Literal["contour", "detail"]
    width: int = 1
    points: list[list[float]] = Field(min_length=2)


class RleWire(Schema):
    shape: list[int] = Field(min_length=2, max_length=2)
    runs: list[int] = Field(default_factory=list)


class GeneratePayload(Schema):
    concept_id: str
    strokes: list[StrokeWire]
    mask: RleWire | None = None
    prompt: str
    seed: int = 0
    steps: int = 50


class EditPayload(Schema):
    concept_id: str
    image_png: str
    strokes: list[StrokeWire]
    blend_mask: RleWire
    mask: RleWire | None = None
    prompt: str = "a photo of a [v]"
    seed: int = 0
    steps: int = 50


class TrainPairPayload(Schema):
    image_png: str
    strokes: list[StrokeWire]
    mask: RleWire | None = None


class TrainPayload(Schema):
    name: str
    class_name: str
    pairs: list[TrainPairPayload] = Field(min_length=1)
    stage1: dict = Field(default_factory=dict)
    stage2: dict = Field(default_factory=dict)
    flags: str = ""
    seed: int = 0


class PretrainPayload(Schema):
    steps: int = 500
    batch_size: int = 8
    corpus_size: int = 64
    seed: int = 0


class BenchmarkPayload(Schema):
    manifest: dict
    variants: list[str] | None = None


class JobRequest(Schema):
    kind: Literal["pretrain", "train_concept", "generate", "edit", "benchmark"]
    payload: dict


class EchoPayload(Schema):
    strokes: list[StrokeWire]
    height: int = SIZE
    width: int = SIZE


_PAYLOAD_SCHEMAS = {
    "generate": GeneratePayload,
    "edit": EditPayload,
    "train_concept": TrainPayload,
    "pretrain": PretrainPayload,
    "benchmark": BenchmarkPayload,
}


def _wire_strokes(items: list[StrokeWire]):
    return strokes_from_wire([s.model_dump() for s in items])


def _decode_mask(wire: RleWire | None, sketch) -> np.ndarray:
    if wire is not None:
        return rle_decode(wire.model_dump())
    try:
        return auto_mask(sketch)
    except MaskError as exc:
        raise HTTPException(400, f"cannot derive mask automatically: {exc}") from exc


def create_app(base: BaseModel, store: ConceptStore, workers: int = 2) -> FastAPI:
    app = FastAPI(title="sketchconcept", version=__version__)
    artifacts = store.root / "artifacts"
    runner = JobRunner(records_dir=store.root / "jobs", workers=workers)
    app.state.runner = runner
    app.state.base = base
    app.state.store = store

    def _generate_job(payload: GeneratePayload) -> dict:
        concept = store.load(payload.concept_id, base)
        sketch = rasterize(_wire_strokes(payload.strokes), SIZE, SIZE)
        mask = _decode_mask(payload.mask, sketch)
        t0 = time.time()
        image = generate(base, concept, sketch, mask, payload.prompt, payload.seed, payload.steps)
        out = artifacts / "generate"
        out.mkdir(parents=True, exist_ok=True)
        name = f"{payload.concept_id}-s{payload.seed}-{abs(hash(payload.prompt)) % 10**8}.png"
        save_image(out / name, image)
        return {
            "image": str(out / name),
            "seconds": time.time() - t0,
            "concept_hash": concept.base_hash[:12],
        }

    def _edit_job(payload: EditPayload) -> dict:
        concept = store.load(payload.concept_id, base)
        original = image_from_b64(payload.image_png)
        if original.shape[:2] != (SIZE, SIZE):
            raise HTTPException(400, f"image must be {SIZE}x{SIZE}")
        sketch = rasterize(_wire_strokes(payload.strokes), SIZE, SIZE)
        mask = _decode_mask(payload.mask, sketch)
        blend = rle_decode(payload.blend_mask.model_dump())
        t0 = time.time()
        image = local_edit(
            base, concept, original, sketch, blend, payload.prompt, payload.seed,
            payload.steps, m=mask,
        )
        out = artifacts / "edit"
        out.mkdir(parents=True, exist_ok=True)
        name = f"{payload.concept_id}-s{payload.seed}.png"
        save_image(out / name, image)
        return {"image": str(out / name), "seconds": time.time() - t0}

    def _train_job(payload: TrainPayload) -> dict:
        pairs = []
        for wire in payload.pairs:
            image = image_from_b64(wire.image_png)
            if image.shape[:2] != (SIZE, SIZE):
                raise ValueError(f"training images must be {SIZE}x{SIZE}")
            sketch = rasterize(_wire_strokes(wire.strokes), SIZE, SIZE)
            mask = rle_decode(wire.mask.model_dump()) if wire.mask else auto_mask(sketch)
            pairs.append(TrainingPair(image, sketch, mask, payload.class_name, payload.name))
        cfg = {"stage1": {**DESK_DEFAULTS["stage1"], **payload.stage1},
               "stage2": {**DESK_DEFAULTS["stage2"], **payload.stage2}}
        cfg1 = stage_config(cfg, "stage1", seed=payload.seed)
        cfg2 = stage_config(cfg, "stage2", seed=payload.seed)
        flags = ablation_flags({}, payload.flags)
        concept = train_concept(base, pairs, cfg1, cfg2, flags)
        concept_id = store.save(concept, name=payload.name)
        return {"concept_id": concept_id}

    def _pretrain_job(payload: PretrainPayload) -> dict:
        rng = np.random.default_rng(payload.seed)
        corpus = build_pretrain_corpus(payload.corpus_size, rng)
        cfg = PretrainConfig(
            steps=payload.steps, batch_size=payload.batch_size, seed=payload.seed
        )
        new_base = pretrain_base(corpus, cfg)
        out = store.root / "bases"
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"base-{new_base.content_hash()[:12]}.zip"
        save_base_archive(new_base, path)
        return {"base": str(path), "base_hash": new_base.content_hash()}

    def _benchmark_job(payload: BenchmarkPayload) -> dict:
        out = artifacts / "benchmark"
        report = run_benchmark(payload.manifest, payload.variants, out_dir=out)
        return {"report": str(out / "report.json"), "tables": report.aggregate()}

    @app.get("/health")
    def health() -> dict:
        return {"version": __version__, "base_hash": base.content_hash()}

    @app.get("/concepts")
    def concepts() -> list[dict]:
        return store.list()

    @app.post("/echo/sketch")
    def echo_sketch(payload: EchoPayload) -> dict:
        sketch = rasterize(_wire_strokes(payload.strokes), payload.height, payload.width)
        return {
            "s_c_ink": int(sketch.s_c.sum()),
            "s_d_ink": int(sketch.s_d.sum()),
            "height": payload.height,
            "width": payload.width,
        }

    @app.post("/jobs", status_code=202)
    def submit_job(request: JobRequest) -> dict:
        schema = _PAYLOAD_SCHEMAS[request.kind]
        try:
            payload = schema(**request.payload)
        except ValidationError as exc:
            raise HTTPException(400, f"invalid {request.kind} payload: {exc}") from exc
        fn = {
            "generate": lambda: _generate_job(payload),
            "edit": lambda: _edit_job(payload),
            "train_concept": lambda: _train_job(payload),
            "pretrain": lambda: _pretrain_job(payload),
            "benchmark": lambda: _benchmark_job(payload),
        }[request.kind]
        lock = payload.name if request.kind == "train_concept" else None
        try:
            job = runner.submit(request.kind, request.payload, fn, concept_lock=lock)
        except ConceptBusyError as exc:
            raise HTTPException(409, str(exc)) from exc
        return {"id": job.id, "status": job.status}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str) -> dict:
        job = runner.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return job.public()

    @app.get("/jobs/{job_id}/result")
    def job_result(job_id: str):
        job = runner.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        if job.status == "failed":
            raise HTTPException(409, f"job failed: {job.error}")
        if job.status != "done":
            raise HTTPException(409, f"job is {job.status}")
        if job.kind in ("generate", "edit"):
            data = Path(job.result["image"]).read_bytes()
            return Response(content=data, media_type="image/png")
        return job.result

    return app


def serve(host: str, port: int, store: ConceptStore, base: BaseModel) -> None:
    import uvicorn

    uvicorn.run(create_app(base, store), host=host, port=port, log_level="warning")
