"""Shared fixtures: the desk base model and trained concept variants.

Heavy artifacts (pretrained base, trained concepts) are deterministic given
their configs, so they are cached under tests/.cache keyed by config; a cold
cache rebuilds everything (~1-2 h on one CPU core), a warm one loads in
seconds.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
import torch

torch.set_num_threads(1)

from sketchconcept.backbone import BaseModel, PretrainConfig, pretrain_base
from sketchconcept.platform.archive import (
    load_base_archive,
    load_concept_archive,
    save_base_archive,
    save_concept_archive,
)
from sketchconcept.sketchrep import (
    ConceptData,
    SyntheticConceptSpec,
    build_pretrain_corpus,
    synth_concept,
)
from sketchconcept.trainer import AblationFlags, Concept, StageConfig, train_concept

CACHE = Path(__file__).parent / ".cache"

# the desk-scale base every heavy test shares
DESK_PRETRAIN = PretrainConfig(steps=10000, batch_size=8, lr=2e-3, seed=0)
DESK_CORPUS_SIZE = 256
DESK_CORPUS_SEED = 0

# concept-training settings used by the acceptance orderings
STAGE1_STEPS = 160
STAGE2_STEPS = 160
STAGE_BATCH = 3
STAGE1_LR = 2e-2
STAGE2_LR = 2e-3

# the benchmark world: three striped concepts with distinct shapes/colors
CONCEPT_SPECS = {
    "c0": SyntheticConceptSpec(
        shape="star", texture="striped", orientation_deg=30.0,
        fill_color=(0.80, 0.15, 0.15), color_word="red",
    ),
    "c1": SyntheticConceptSpec(
        shape="hexagon", texture="striped", orientation_deg=0.0,
        fill_color=(0.18, 0.30, 0.78), color_word="blue",
    ),
    "c2": SyntheticConceptSpec(
        shape="blob", texture="striped", orientation_deg=60.0,
        fill_color=(0.18, 0.62, 0.22), color_word="green",
    ),
}
CONCEPT_PAIRS = {"c0": 2, "c1": 2, "c2": 1}
SEEDS = (0, 1, 2, 3, 4)


def desk_base_path() -> Path:
    return CACHE / f"base-{DESK_PRETRAIN.key()}-{DESK_CORPUS_SIZE}-{DESK_CORPUS_SEED}.zip"


def build_desk_base() -> BaseModel:
    path = desk_base_path()
    if path.exists():
        return load_base_archive(path)
    corpus = build_pretrain_corpus(DESK_CORPUS_SIZE, np.random.default_rng(DESK_CORPUS_SEED))
    base = pretrain_base(corpus, DESK_PRETRAIN)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_base_archive(base, path)
    return base


@pytest.fixture(scope="session")
def desk_base() -> BaseModel:
    return build_desk_base()


def concept_data(concept_id: str) -> ConceptData:
    spec = CONCEPT_SPECS[concept_id]
    rng = np.random.default_rng([11, int(concept_id[1:])])
    return synth_concept(spec, CONCEPT_PAIRS[concept_id], 4, rng, concept_id)


@pytest.fixture(scope="session")
def concept_datasets() -> dict[str, ConceptData]:
    return {cid: concept_data(cid) for cid in CONCEPT_SPECS}


def variant_flags(name: str) -> AblationFlags:
    return AblationFlags.parse("" if name == "full" else name)


def _variant_key(base: BaseModel, concept_id: str, variant: str, seed: int) -> str:
    payload = json.dumps(
        {
            "base": base.content_hash(),
            "concept": concept_id,
            "variant": variant,
            "seed": seed,
            "s1": STAGE1_STEPS,
            "s2": STAGE2_STEPS,
            "batch": STAGE_BATCH,
            "lr1": STAGE1_LR,
            "lr2": STAGE2_LR,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def train_variant(
    base: BaseModel, data: ConceptData, concept_id: str, variant: str, seed: int
) -> Concept:
    key = _variant_key(base, concept_id, variant, seed)
    path = CACHE / "concepts" / f"{concept_id}-{variant}-s{seed}-{key}.zip"
    if path.exists():
        return load_concept_archive(path, base)
    cfg1 = StageConfig(steps=STAGE1_STEPS, batch_size=STAGE_BATCH, lr=STAGE1_LR, seed=seed)
    cfg2 = StageConfig(steps=STAGE2_STEPS, batch_size=STAGE_BATCH, lr=STAGE2_LR, seed=seed)
    concept = train_concept(base, data.pairs, cfg1, cfg2, variant_flags(variant))
    path.parent.mkdir(parents=True, exist_ok=True)
    save_concept_archive(concept, path)
    return concept


@pytest.fixture(scope="session")
def trained_variants(desk_base, concept_datasets):
    """{variant: {(concept_id, seed): Concept}} for the ordering criteria."""

    def lazy(variant: str, concept_id: str, seed: int) -> Concept:
        return train_variant(
            desk_base, concept_datasets[concept_id], concept_id, variant, seed
        )

    return lazy
