"""Command-line surface: validate, compile, gen, eval, verify.

Every command is deterministic given its arguments; `gen` refuses to run
without an explicit --seed.  Exit codes: 0 success, 1 verification
failure, 2 usage or spec error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .compiler import (
    COMPILER_VERSION,
    compile_classifier,
    compile_shallow_classifier,
)
from .datagen import (
    GenConfig,
    export_pgm,
    gen_dataset,
    ingest_tiles,
    load_dataset,
    save_dataset,
)
from .errors import DimensionError, FileFormatError, GenerationError, SpecError
from .idx import read_idx
from .model import Feature, ImageClassSpec, ImageSpec, load_spec, spec_digest
from .pgm import read_pgm
from .rng import SplitMix64, derive_seed
from .scores import image_score, image_score_sum
from .tensor import forward_batch, network_forward
from .verify import run_verification
from .weights import load_weights, save_weights

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilenet",
        description="Compile framed-tile image-class specs into exact network weights; "
        "generate and verify datasets.",
    )
    parser.add_argument("--version", action="version", version=f"tilenet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a spec file and print a summary")
    p.add_argument("spec")

    p = sub.add_parser("compile", help="compile a spec into a weight file")
    p.add_argument("spec")
    p.add_argument("--mode", choices=("deep", "shallow"), default="deep")
    p.add_argument("--out", "-o", required=True, help="output weight file (JSON)")

    p = sub.add_parser("gen", help="generate a labeled dataset from a spec")
    p.add_argument("spec")
    p.add_argument("--n", type=int, required=True, help="samples per class")
    p.add_argument("--seed", type=int, required=True,
                   help="explicit RNG seed (there is no hidden default)")
    p.add_argument("--out", "-o", required=True, help="output dataset file")
    p.add_argument("--paste-mode", choices=("rectangle", "support_only"),
                   default="rectangle")
    p.add_argument("--noise", type=float, default=0.0,
                   help="per-pixel paste noise amplitude on support")
    p.add_argument("--background", default="uniform",
                   help="'uniform' or 'constant:V' with V in [0,1]")
    p.add_argument("--strict", action="store_true",
                   help="also reject samples containing any other class's feature")
    p.add_argument("--tiles", default=None, metavar="IMG.idx:LBL.idx:K",
                   help="replace each class's features with one feature of K tiles "
                   "ingested from an IDX archive (class i uses IDX label i-1)")
    p.add_argument("--tile-epsilon", type=float, default=None,
                   help="tolerance for tiles ingested via --tiles")
    p.add_argument("--export-pgm", default=None, metavar="DIR",
                   help="also dump samples as 8-bit PGM files plus manifest.csv")

    p = sub.add_parser("eval", help="run a weight file over a dataset or one image")
    p.add_argument("--weights", "-w", required=True)
    p.add_argument("--data", default=None, help="dataset file")
    p.add_argument("--image", default=None, help="single PGM image")
    p.add_argument("--dump-scores", action="store_true")
    p.add_argument("--check-oracle", default=None, metavar="SPEC",
                   help="also compare scores against the detector-score oracle")

    p = sub.add_parser("verify", help="run the verification harness for a spec")
    p.add_argument("spec")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--weights", default=None,
                   help="audit this weight file instead of a fresh compile")
    p.add_argument("--seed", type=int, default=2024)
    return parser


def cmd_validate(args) -> int:
    try:
        spec = load_spec(args.spec)
    except SpecError as exc:
        for line in exc.diagnostics:
            print(f"error: {line}")
        return EXIT_USAGE
    m, n = spec.canvas
    total_s = sum(img.s for img in spec.images)
    total_c = sum(img.c for img in spec.images)
    print(
        f"{spec.num_classes} classes, r_max={spec.r_max}, "
        f"Σs={total_s}, Σc={total_c}, canvas {m}x{n}"
    )
    return EXIT_OK


def _print_report(artifact) -> None:
    rep = artifact.report
    filters_ok = "OK" if rep.conv_filters <= rep.bound_filters else "EXCEEDED"
    neurons_ok = "OK" if rep.fc_neurons <= rep.bound_neurons else "EXCEEDED"
    print(f"kind: {artifact.kind}")
    print(f"conv_filters: {rep.conv_filters} (bound {rep.bound_filters}) {filters_ok}")
    print(f"fc_layers: {rep.fc_layers} (bound {rep.bound_layers})")
    print(f"fc_neurons: {rep.fc_neurons} (bound {rep.bound_neurons}) {neurons_ok}")
    print(f"zero_weight_fraction: {rep.zero_weight_fraction:.6f}")


def cmd_compile(args) -> int:
    spec = load_spec(args.spec)
    if args.mode == "deep":
        artifact = compile_classifier(spec)
    else:
        artifact = compile_shallow_classifier(spec)
    _print_report(artifact)
    for ci, img in enumerate(spec.images):
        for fi, feat in enumerate(img.features):
            for ti, tile in enumerate(feat.tiles):
                distinct = int(np.unique(tile.support_values).size)
                exact = 4 * (distinct + 1)
                bound = 4 * (tile.support_size + 1)
                ok = "OK" if exact <= bound else "EXCEEDED"
                print(
                    f"tile {img.name}/f{fi}/t{ti}: filters 4(d+1)={exact} "
                    f"(bound 4(|supp|+1)={bound}) {ok}"
                )
    save_weights(artifact.network, args.out, artifact.kind, artifact.spec_digest,
                 COMPILER_VERSION)
    print(f"wrote: {args.out}")
    return EXIT_OK


def _parse_background(text: str) -> tuple:
    if text == "uniform":
        return "uniform_random", 0.0
    if text.startswith("constant:"):
        return "constant", float(text.split(":", 1)[1])
    raise SpecError(f"unknown background '{text}' (use 'uniform' or 'constant:V')")


def _ingest_spec(spec: ImageClassSpec, tiles_arg: str, epsilon, seed: int) -> ImageClassSpec:
    """Rebuild each class as one feature of K tiles ingested from IDX files."""
    if epsilon is None:
        raise SpecError("--tiles requires --tile-epsilon")
    try:
        images_path, labels_path, k_text = tiles_arg.rsplit(":", 2)
        k = int(k_text)
    except ValueError:
        raise SpecError(f"--tiles must look like IMG.idx:LBL.idx:K, got '{tiles_arg}'") from None
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    rng = SplitMix64(derive_seed(seed, 0xD1CE))
    rebuilt = []
    for ci, img in enumerate(spec.images):
        tiles = ingest_tiles(images, labels, ci, k, epsilon, rng)
        rebuilt.append(ImageSpec((Feature(tuple(tiles)),), img.name))
    return ImageClassSpec(spec.canvas, tuple(rebuilt))


def cmd_gen(args) -> int:
    spec = load_spec(args.spec)
    if args.tiles is not None:
        spec = _ingest_spec(spec, args.tiles, args.tile_epsilon, args.seed)
    background, background_value = _parse_background(args.background)
    config = GenConfig(
        spec,
        samples_per_class=args.n,
        seed=args.seed,
        paste_mode=args.paste_mode,
        noise_amplitude=args.noise,
        background=background,
        background_value=background_value,
        strict=args.strict,
    )
    dataset = gen_dataset(config)
    save_dataset(dataset, args.out)
    total = len(dataset.samples)
    rate = dataset.rejected / (dataset.rejected + total)
    print(
        f"generated {total} samples ({args.n} per class x {spec.num_classes} classes), "
        f"resampled {dataset.rejected} (rejection rate {rate:.3f})"
    )
    print(f"spec digest: {dataset.spec_digest}")
    if args.export_pgm:
        names = export_pgm(dataset, args.export_pgm)
        print(f"exported {len(names)} PGM files to {args.export_pgm}")
    print(f"wrote: {args.out}")
    return EXIT_OK


def _oracle_scores(spec: ImageClassSpec, kind: str, xs: np.ndarray) -> np.ndarray:
    scorer = image_score_sum if kind == "classifier_shallow" else image_score
    return np.array([[scorer(x, img) for img in spec.images] for x in xs])


def cmd_eval(args) -> int:
    net, meta = load_weights(args.weights)
    if (args.data is None) == (args.image is None):
        raise SpecError("eval needs exactly one of --data or --image")
    if args.image is not None:
        x = read_pgm(args.image).astype(np.float64) / 255.0
        scores = network_forward(x, net)
        label = int(np.argmax(scores)) + 1
        print(f"scores: {np.array2string(scores, precision=9)}")
        print(f"label: {label}")
        xs = x[None]
        labels = None
    else:
        dataset = load_dataset(args.data)
        if meta["spec_digest"] and dataset.spec_digest != meta["spec_digest"]:
            print("warning: dataset and weights carry different spec digests")
        xs = np.stack([s.astype(np.float64) for s, _ in dataset.samples])
        labels = np.array([lab for _, lab in dataset.samples])
        outputs = forward_batch(xs, net)
        predictions = np.argmax(outputs, axis=1) + 1
        if args.dump_scores:
            for i, (lab, pred) in enumerate(zip(labels, predictions)):
                row = np.array2string(outputs[i], precision=9)
                print(f"{i}\tlabel={lab}\tpred={pred}\tscores={row}")
        correct = int((predictions == labels).sum())
        print(f"accuracy: {correct / len(labels):.6f} ({correct}/{len(labels)})")
    if args.check_oracle:
        spec = load_spec(args.check_oracle)
        got = forward_batch(xs, net)
        want = _oracle_scores(spec, meta["kind"] or "classifier_deep", xs)
        deviation = float(np.abs(got - want).max())
        print(f"oracle check: max |output - score| = {deviation:.3g}")
        if deviation > 1e-6:
            print("oracle check FAILED (tolerance 1e-6)")
            return EXIT_VERIFY
        print("oracle check passed (tolerance 1e-6)")
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = load_spec(args.spec)
    net = None
    kind = "classifier_deep"
    if args.weights:
        net, meta = load_weights(args.weights)
        kind = meta["kind"] or kind
        if meta["spec_digest"] and meta["spec_digest"] != spec_digest(spec):
            print("warning: weight file was compiled from a different spec")
    results = run_verification(spec, level=args.level, seed=args.seed,
                               net=net, net_kind=kind)
    failed = 0
    for res in results:
        print(f"{res.status} {res.name} ({res.seconds:.2f}s): {res.detail}")
        if not res.passed and not res.skipped:
            failed += 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "compile": cmd_compile,
        "gen": cmd_gen,
        "eval": cmd_eval,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except SpecError as exc:
        for line in exc.diagnostics:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_USAGE
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DimensionError, GenerationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
