"""Command-line interface: gen, annotate, train, infer, eval, report.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .data import codecs, records as rec
from .data.annotate import annotate_scene, encode_tags, read_tags
from .data.mesh import Mesh
from .data.synth import MAX_OBJECTS, DistortionConfig, generate_scene
from .errors import GenerationError, GlassDepthError
from .geometry import CameraIntrinsics
from .nn import config as train_config
from .nn import train as training
from .pipeline import (
    CHECKPOINT_NAMES, VARIANTS, Networks, PipelineConfig, depth_table, evaluate, infer,
    load_network, normal_table,
)

log = logging.getLogger("glassdepth")

USAGE_ERROR = 1
DATA_ERROR = 2
GEN_RETRIES = 20


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _scene_seed(seed, index, attempt):
    return int(np.random.SeedSequence([seed, index, attempt]).generate_state(1)[0])


def cmd_gen(args):
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if not 1 <= args.objects <= MAX_OBJECTS:
        raise UsageError(f"--objects must be in 1..{MAX_OBJECTS}")
    intr = CameraIntrinsics.from_fov(args.width, args.height)
    n_test = int(round(args.count * args.test_fraction))
    os.makedirs(os.path.join(args.out, "tags"), exist_ok=True)
    os.makedirs(os.path.join(args.out, "background"), exist_ok=True)
    records = []
    for i in range(args.count):
        rng = np.random.default_rng([args.seed, i])
        n_objects = int(rng.integers(1, args.objects + 1))
        for attempt in range(GEN_RETRIES):
            s = _scene_seed(args.seed, i, attempt)
            try:
                scene = generate_scene(s, n_objects, intr, DistortionConfig(seed=s))
                break
            except GenerationError as exc:
                log.warning("scene %d attempt %d: %s", i, attempt, exc)
        else:
            raise GenerationError(f"scene {i}: placement failed {GEN_RETRIES} times")
        record_id = f"r{i:04d}"
        split = "test" if i >= args.count - n_test else "train"
        records.append(scene.record(record_id, split))
        codecs.write_depth(os.path.join(args.out, "background", f"{record_id}.pfm"),
                           scene.background)
        tags_doc = json.loads(encode_tags(intr, scene.tags, f"../background/{record_id}.pfm"))
        tags_doc["record_id"] = record_id
        with open(os.path.join(args.out, "tags", f"{record_id}.json"), "w", encoding="utf-8",
                  newline="\n") as fh:
            fh.write(json.dumps(tags_doc, indent=1) + "\n")
    rec.save_dataset(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _mesh_library(mesh_dir, object_ids, record_id=None):
    meshes = {}
    for k in object_ids:
        candidates = [f"{record_id}_{k}.obj"] if record_id else []
        candidates.append(f"{k}.obj")
        for name in candidates:
            path = os.path.join(mesh_dir, name)
            if os.path.isfile(path):
                meshes[k] = Mesh.load(path, k)
                break
    return meshes


def cmd_annotate(args):
    intr, tags, background_path = read_tags(args.tags)
    with open(args.tags, "r", encoding="utf-8") as fh:
        record_id = json.load(fh).get("record_id")
    background = None
    if background_path is not None:
        # relative paths are resolved against the tags file's directory
        background = codecs.read_depth(os.path.join(os.path.dirname(os.path.abspath(args.tags)),
                                                    background_path))
    meshes = _mesh_library(args.meshes, sorted({t.object_id for t in tags}), record_id)
    record = annotate_scene(tags, meshes, intr, background, record_id=record_id or "annotated")
    os.makedirs(args.out, exist_ok=True)
    codecs.write_depth(os.path.join(args.out, "gt.pfm"), record.gt_depth)
    codecs.write_mask(os.path.join(args.out, "mask.pgm"), record.mask)
    doc = {"id": record.record_id, "intrinsics": intr.to_dict(),
           "objects": [{"id": k, "pose": record.poses[k].to_dict()} for k in record.object_ids]}
    with open(os.path.join(args.out, "poses.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, indent=1) + "\n")
    print(f"annotated {len(record.poses)} objects into {args.out}")
    return 0


def _stage_name(stage):
    return os.path.splitext(CHECKPOINT_NAMES["joint" if stage == "dc" else stage])[0]


def cmd_train(args):
    cfg = train_config.load(args.config, args.stage) if args.config \
        else train_config.TrainConfig.defaults(args.stage)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    train_set = rec.load_dataset(args.data, "train")
    val_set = rec.load_dataset(args.data, "val")
    if not train_set:
        raise GlassDepthError(f"no training records in {args.data}")

    def progress(epoch, train_loss, monitored, lr):
        log.info("epoch %d loss %.6f monitored %.6f lr %g", epoch, train_loss, monitored, lr)

    if args.stage == "pcc":
        result = training.train_pcc(train_set, cfg, val_set, progress)
    else:
        pcc_net = None
        if args.stage == "dc":
            pcc_net = load_network(args.pcc or os.path.join(args.out, CHECKPOINT_NAMES["pcc"]))
        result = training.train_dc(train_set, cfg, pcc_net, val_set, progress)
    ckpt = training.save_outputs(args.out, _stage_name(args.stage), result, cfg)
    print(f"trained {args.stage} for {result.epochs_run} epochs -> {ckpt}")
    return 0


def _pipeline(args):
    cfg = PipelineConfig(variant=args.variant, checkpoint_dir=args.checkpoints,
                         mode=getattr(args, "mode", "only-valid"), seed=args.seed)
    cfg.check()
    return cfg


def cmd_infer(args):
    cfg = _pipeline(args)
    nets = Networks.load(cfg)
    split = None if args.record else args.split
    records = rec.load_dataset(args.data, split, load_meshes=False)
    if args.record:
        records = [r for r in records if r.record_id == args.record]
        if not records:
            raise GlassDepthError(f"record {args.record!r} not in {args.data}")
    mask = codecs.read_mask(args.mask) if args.mask else None
    os.makedirs(args.out, exist_ok=True)
    for record in records:
        result = infer(record, cfg, nets, mask)
        codecs.write_depth(os.path.join(args.out, f"{record.record_id}.pfm"), result.depth)
        codecs.write_depth(os.path.join(args.out, f"{record.record_id}_pcc.pfm"),
                           result.pcc_depth)
    print(f"wrote {len(records)} predictions to {args.out}")
    return 0


def cmd_eval(args):
    records = rec.load_dataset(args.data, args.split, load_meshes=False)
    if not records:
        raise GlassDepthError(f"split {args.split!r} of {args.data} is empty")
    if args.pred:
        cfg = PipelineConfig(variant=args.variant, mode=args.mode, seed=args.seed)

        def predict(record):
            return codecs.read_depth(os.path.join(args.pred, f"{record.record_id}.pfm"))
    else:
        cfg = _pipeline(args)
        nets = Networks.load(cfg)

        def predict(record):
            return infer(record, cfg, nets).depth
    results, groups = evaluate(records, predict, cfg)
    os.makedirs(args.report, exist_ok=True)
    for name, text in (("depth.csv", depth_table(results, groups)),
                       ("normals.csv", normal_table(results, groups))):
        with open(os.path.join(args.report, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    failed = sum(r.error is not None for r in results)
    print(f"evaluated {len(results)} records ({failed} failed) -> {args.report}")
    return 0


def cmd_report(args):
    """Stack the group rows of several depth/normal CSVs under a label column."""
    labels = args.labels or [os.path.basename(os.path.dirname(os.path.abspath(p))) or p
                             for p in args.inputs]
    if len(labels) != len(args.inputs):
        raise UsageError("--labels must match --inputs in number")
    header, rows = None, []
    for label, path in zip(labels, args.inputs):
        try:
            with open(path, "r", encoding="utf-8", newline="") as fh:
                table = list(csv.reader(fh))
        except FileNotFoundError:
            raise FileNotFoundError(f"missing file: {path}") from None
        if not table:
            raise GlassDepthError(f"empty report {path}")
        if header is None:
            header = table[0]
        elif table[0] != header:
            raise GlassDepthError(f"{path}: columns differ from {args.inputs[0]}")
        rows += [[label] + row for row in table[1:] if not row[0].startswith("record:")]
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["variant"] + header)
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def build_parser():
    parser = _Parser(prog="glassdepth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--objects", type=int, default=MAX_OBJECTS,
                   help="maximum objects per scene (each scene draws 1..N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("annotate", help="render GT depth and masks from tag poses")
    p.add_argument("--tags", required=True)
    p.add_argument("--meshes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="train one stage")
    p.add_argument("--stage", choices=("pcc", "dc", "dc-only"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--pcc", help="frozen PCC checkpoint for --stage dc (default OUT/pcc.ckpt)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="run the pipeline on records")
    p.add_argument("--data", required=True)
    p.add_argument("--record", help="record id (default: every record of --split)")
    p.add_argument("--split", default="test")
    p.add_argument("--variant", choices=VARIANTS, default="joint")
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask", help="external instance mask (PGM) replacing the record's")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="evaluate a split")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--variant", choices=VARIANTS, default="joint")
    p.add_argument("--mode", choices=("only-valid", "all"), default="only-valid")
    p.add_argument("--report", required=True, help="output directory for CSV tables")
    p.add_argument("--checkpoints")
    p.add_argument("--pred", help="directory of precomputed <id>.pfm predictions")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="merge report CSVs into one table")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--labels", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE_ERROR
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "eval" and not args.pred and not args.checkpoints:
        args.checkpoints = "."
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"glassdepth: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (GlassDepthError, OSError, ValueError) as exc:
        print(f"glassdepth: error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
