"""Command-line interface.

Every command takes a JSON config plus --seed, writes its artifacts under
--out, and exits nonzero with a message on any error. Fixed seeds reproduce
byte-identical artifacts (sidecar timing fields aside).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from ..backbone.model import pretrain_base
from ..evalharness import run_benchmark
from ..inference import (
    concept_transfer,
    generate,
    local_edit,
    multi_generate,
    style_variation,
)
from ..losses import LossTrace
from ..sketchrep.dataset import (
    load_concept_dir,
    load_image,
    load_mask,
    save_concept_dir,
    save_image,
)
from ..sketchrep.masks import auto_mask
from ..sketchrep.strokes import rasterize, strokes_from_json
from ..sketchrep.synthetic import (
    FILL_COLORS,
    SIZE,
    SyntheticConceptSpec,
    build_pretrain_corpus,
    synth_concept,
)
from ..trainer import train_concept
from .archive import load_base_archive, save_base_archive
from .config import ablation_flags, load_config, pretrain_config, stage_config
from .store import ConceptStore, default_store_root

DEFAULT_DATASET = [
    {"id": "c0", "shape": "star", "texture": "striped", "orientation_deg": 30.0,
     "color": "red", "n_pairs": 2, "n_edits": 3},
    {"id": "c1", "shape": "hexagon", "texture": "striped", "orientation_deg": 0.0,
     "color": "blue", "n_pairs": 2, "n_edits": 3},
    {"id": "c2", "shape": "blob", "texture": "striped", "orientation_deg": 60.0,
     "color": "green", "n_pairs": 1, "n_edits": 3},
]


def write_sidecar(path: Path, request: dict, seed: int, concept_hashes: dict, seconds: float) -> None:
    payload = {
        "request": request,
        "seed": seed,
        "concept_hashes": concept_hashes,
        "timings": {"seconds": seconds},
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _store(args) -> ConceptStore:
    root = Path(args.store) if args.store else default_store_root()
    return ConceptStore(root)


def _load_sketch(path: str):
    return rasterize(strokes_from_json(Path(path).read_text()), SIZE, SIZE)


def _mask_for(sketch, path: str | None):
    if path:
        return load_mask(Path(path))
    return auto_mask(sketch)


def cmd_pretrain(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    pcfg = pretrain_config(cfg, seed=args.seed)
    corpus_size = int(cfg["pretrain"].get("corpus_size", 256))
    corpus = build_pretrain_corpus(corpus_size, np.random.default_rng(pcfg.seed))
    t0 = time.time()
    base = pretrain_base(corpus, pcfg)
    path = out / "base.zip"
    save_base_archive(base, path)
    curve = base.manifest["loss_curve"]
    (out / "pretrain_loss.csv").write_text(
        "step,loss\n" + "\n".join(f"{i},{v:.8g}" for i, v in enumerate(curve)) + "\n"
    )
    write_sidecar(
        out / "pretrain.json",
        {"command": "pretrain", "config": cfg["pretrain"], "corpus_size": corpus_size},
        pcfg.seed, {"base": base.content_hash()}, time.time() - t0,
    )
    print(f"base model -> {path} (hash {base.content_hash()[:12]})")
    return 0


def cmd_synth_data(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    specs = cfg.get("dataset", {}).get("concepts", DEFAULT_DATASET)
    seed = args.seed
    index = []
    for entry in specs:
        spec = SyntheticConceptSpec(
            shape=entry["shape"],
            texture=entry.get("texture", "striped"),
            orientation_deg=float(entry.get("orientation_deg", 0.0)),
            fill_color=FILL_COLORS[entry.get("color", "red")],
            color_word=entry.get("color", "red"),
        )
        rng = np.random.default_rng([seed, len(index)])
        data = synth_concept(
            spec, int(entry.get("n_pairs", 2)), int(entry.get("n_edits", 3)), rng,
            concept_id=entry["id"],
        )
        save_concept_dir(out, data)
        index.append({"id": entry["id"], "class_name": data.class_name,
                      "n_pairs": len(data.pairs), "n_edits": len(data.edits)})
    (out / "dataset.json").write_text(json.dumps({"seed": seed, "concepts": index},
                                                 indent=2, sort_keys=True))
    print(f"dataset with {len(index)} concepts -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    base = load_base_archive(args.base)
    store = _store(args)
    data = load_concept_dir(Path(args.pairs))
    cfg1 = stage_config(cfg, "stage1", seed=args.seed)
    cfg2 = stage_config(cfg, "stage2", seed=args.seed)
    flags = ablation_flags(cfg, args.ablate)
    t0 = time.time()
    concept = train_concept(base, data.pairs, cfg1, cfg2, flags)
    name = args.concept or data.concept_id
    concept_id = store.save(concept, name=name)
    for stage in ("stage1", "stage2"):
        rows = concept.manifest.get(f"{stage}_loss", [])
        (out / f"{name}_{stage}_loss.csv").write_text(
            "\n".join(",".join(r) for r in rows) + "\n" if rows else ""
        )
    write_sidecar(
        out / f"{name}_train.json",
        {"command": "train", "pairs": str(args.pairs), "ablate": args.ablate,
         "stage1": cfg["stage1"], "stage2": cfg["stage2"]},
        args.seed,
        {"base": base.content_hash(), "concept": concept_id},
        time.time() - t0,
    )
    print(f"concept -> {concept_id}")
    return 0


def _finish_image(args, out: Path, name: str, image, request: dict, hashes: dict,
                  seconds: float) -> int:
    png = out / f"{name}.png"
    save_image(png, image)
    write_sidecar(out / f"{name}.json", request, args.seed, hashes, seconds)
    print(f"image -> {png}")
    return 0


def cmd_generate(args) -> int:
    out = _out_dir(args)
    base = load_base_archive(args.base)
    concept = _store(args).load(args.concept, base)
    sketch = _load_sketch(args.sketch)
    mask = _mask_for(sketch, args.mask)
    t0 = time.time()
    image = generate(base, concept, sketch, mask, args.prompt, args.seed, args.steps)
    return _finish_image(
        args, out, args.name, image,
        {"command": "generate", "concept": args.concept, "prompt": args.prompt,
         "sketch": args.sketch, "steps": args.steps},
        {"base": base.content_hash(), "concept": concept.base_hash}, time.time() - t0,
    )


def cmd_edit(args) -> int:
    out = _out_dir(args)
    base = load_base_archive(args.base)
    concept = _store(args).load(args.concept, base)
    original = load_image(Path(args.image))
    sketch = _load_sketch(args.sketch)
    mask = _mask_for(sketch, args.mask)
    blend = load_mask(Path(args.blend_mask))
    t0 = time.time()
    image = local_edit(base, concept, original, sketch, blend, args.prompt, args.seed,
                       args.steps, m=mask)
    return _finish_image(
        args, out, args.name, image,
        {"command": "edit", "concept": args.concept, "prompt": args.prompt,
         "image": args.image, "sketch": args.sketch, "steps": args.steps},
        {"base": base.content_hash()}, time.time() - t0,
    )


def cmd_transfer(args) -> int:
    out = _out_dir(args)
    base = load_base_archive(args.base)
    store = _store(args)
    target = store.load(args.target, base)
    source = store.load(args.source, base)
    original = load_image(Path(args.image))
    sketch = _load_sketch(args.sketch)
    blend = load_mask(Path(args.blend_mask))
    t0 = time.time()
    image = concept_transfer(base, target, source, original, blend, sketch, args.seed,
                             steps=args.steps)
    return _finish_image(
        args, out, args.name, image,
        {"command": "transfer", "target": args.target, "source": args.source,
         "image": args.image, "sketch": args.sketch, "steps": args.steps},
        {"base": base.content_hash()}, time.time() - t0,
    )


def cmd_multi(args) -> int:
    out = _out_dir(args)
    base = load_base_archive(args.base)
    store = _store(args)
    ids = args.concepts.split(",")
    sketch_paths = args.sketches.split(",")
    mask_paths = args.masks.split(",") if args.masks else [None] * len(ids)
    if not (len(ids) == len(sketch_paths) == len(mask_paths)):
        raise ValueError("need one sketch (and mask) per concept")
    concepts = [store.load(i, base) for i in ids]
    sketches = [_load_sketch(p) for p in sketch_paths]
    masks = [_mask_for(s, p) for s, p in zip(sketches, mask_paths)]
    t0 = time.time()
    image = multi_generate(base, concepts, sketches, masks, args.seed, args.steps)
    return _finish_image(
        args, out, args.name, image,
        {"command": "multi", "concepts": ids, "sketches": sketch_paths, "steps": args.steps},
        {"base": base.content_hash()}, time.time() - t0,
    )


def cmd_style(args) -> int:
    out = _out_dir(args)
    base = load_base_archive(args.base)
    concept = _store(args).load(args.concept, base)
    sketch = _load_sketch(args.sketch)
    mask = _mask_for(sketch, args.mask)
    t0 = time.time()
    image = style_variation(base, concept, sketch, args.prompt, args.seed, args.steps, m=mask)
    return _finish_image(
        args, out, args.name, image,
        {"command": "style", "concept": args.concept, "prompt": args.prompt,
         "sketch": args.sketch, "steps": args.steps},
        {"base": base.content_hash()}, time.time() - t0,
    )


def cmd_bench(args) -> int:
    out = _out_dir(args)
    manifest = json.loads(Path(args.manifest).read_text())
    variants = args.variants.split(",") if args.variants else None
    report = run_benchmark(manifest, variants, out_dir=out)
    tables = report.aggregate()
    print(json.dumps(tables, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    base = load_base_archive(args.base)
    serve(args.host, args.port, _store(args), base)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchconcept")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        if out:
            p.add_argument("--out", default="out")

    p = sub.add_parser("pretrain", help="pretrain the base model on a synthetic corpus")
    common(p)
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("synth-data", help="generate a synthetic concept dataset")
    common(p)
    p.set_defaults(fn=cmd_synth_data)

    p = sub.add_parser("train", help="two-stage concept optimization")
    common(p)
    p.add_argument("--base", required=True)
    p.add_argument("--store", default=None)
    p.add_argument("--pairs", required=True, help="concept dataset directory")
    p.add_argument("--concept", default=None, help="store name (defaults to directory name)")
    p.add_argument("--ablate", default="", help="comma-separated ablation flags")
    p.set_defaults(fn=cmd_train)

    for name, fn in (("generate", cmd_generate), ("style", cmd_style)):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--base", required=True)
        p.add_argument("--store", default=None)
        p.add_argument("--concept", required=True)
        p.add_argument("--sketch", required=True, help="stroke JSON file")
        p.add_argument("--mask", default=None, help="mask PNG (defaults to auto)")
        p.add_argument("--prompt", required=True)
        p.add_argument("--steps", type=int, default=50)
        p.add_argument("--name", default=name)
        p.set_defaults(fn=fn)

    p = sub.add_parser("edit", help="local edit via latent blending")
    common(p)
    p.add_argument("--base", required=True)
    p.add_argument("--store", default=None)
    p.add_argument("--concept", required=True)
    p.add_argument("--image", required=True, help="original PNG")
    p.add_argument("--sketch", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--blend-mask", required=True, help="blend region PNG")
    p.add_argument("--prompt", default="a photo of a [v]")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--name", default="edit")
    p.set_defaults(fn=cmd_edit)

    p = sub.add_parser("transfer", help="concept transfer into a masked region")
    common(p)
    p.add_argument("--base", required=True)
    p.add_argument("--store", default=None)
    p.add_argument("--target", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--sketch", required=True)
    p.add_argument("--blend-mask", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--name", default="transfer")
    p.set_defaults(fn=cmd_transfer)

    p = sub.add_parser("multi", help="plug-and-play multi-concept generation")
    common(p)
    p.add_argument("--base", required=True)
    p.add_argument("--store", default=None)
    p.add_argument("--concepts", required=True, help="comma-separated concept ids")
    p.add_argument("--sketches", required=True, help="comma-separated stroke JSON files")
    p.add_argument("--masks", default=None, help="comma-separated mask PNGs")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--name", default="multi")
    p.set_defaults(fn=cmd_multi)

    p = sub.add_parser("bench", help="run the metric benchmark over trained variants")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--variants", default=None, help="comma-separated variant names")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    common(p, out=False)
    p.add_argument("--base", required=True)
    p.add_argument("--store", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # CLI contract: nonzero exit with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
