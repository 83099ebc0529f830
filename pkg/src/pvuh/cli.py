"""Command-line pipeline: gen, flow-gt, pretrain, finetune, eval,
inspect, export-ply, params.

Exit code 0 on success; any named failure prints one ``error: ...`` line
on stderr and exits 1.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .data import prepare_dataset, split_dataset, subsample_fraction
from .errors import CheckpointError, DataError, PvuhError
from .geom import PointSequence
from .io import (Manifest, ManifestEntry, RunConfig, export_ply, file_digest,
                 load_checkpoint, read_sequence, save_checkpoint, write_sequence)
from .io.manifest import MANIFEST_NAME
from .metrics import MetricsReport
from .model import count_params, param_breakdown
from .synthgen import make_mesh_sequence, make_sequence, nn_flow_baseline
from .synthgen.flow import attach_flow
from .synthgen.generate import add_flow_ground_truth
from .train import evaluate, export_weights, finetune, pretrain


def _write_curve(path: Path, curve) -> None:
    lines = ["step,lr,loss"] + [f"{s},{lr:.8g},{loss:.8g}" for s, lr, loss in curve]
    path.write_text("\n".join(lines) + "\n")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.override("train.seed", args.seed)
        cfg.override("data.seed", args.seed)
    return cfg


def _load_dataset(data_dir: str) -> tuple[list[PointSequence], Manifest]:
    manifest = Manifest.load(data_dir)
    sequences = []
    for e in manifest.entries:
        seq = read_sequence(Path(data_dir) / e.file)
        seq.meta.motion_class = e.motion_class
        seq.meta.actor_id = e.gen_index
        sequences.append(seq)
    return sequences, manifest


def _prepared_splits(cfg: RunConfig, data_dir: str):
    sequences, manifest = _load_dataset(data_dir)
    classes = list(cfg["data.classes"])
    train_frac = cfg["data.train_fraction"]
    train, test = split_dataset(sequences, (train_frac, 1 - train_frac),
                                seed=cfg["data.seed"])
    npp = cfg["model.n_patch_points"]
    return (prepare_dataset(train, classes, n_patch_points=npp),
            prepare_dataset(test, classes, n_patch_points=npp), manifest)


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out or cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    params = cfg.gen_params()
    classes = cfg["data.classes"]
    per_class = cfg["data.sequences_per_class"]
    master_seed = cfg["data.seed"]

    entries = []
    index = 0
    for cls in classes:
        for _ in range(per_class):
            seq = make_sequence(cls, master_seed, index, params)
            name = f"seq_{index:05d}.pvuh"
            write_sequence(out / name, seq)
            entries.append(ManifestEntry(file=name, motion_class=cls,
                                         gen_index=index,
                                         digest=file_digest(out / name)))
            index += 1
            if index % 25 == 0:
                print(f"generated {index}/{per_class * len(classes)}")
    manifest = Manifest(master_seed=master_seed, classes=tuple(classes),
                        entries=entries)
    manifest.save(out)
    counts = ", ".join(f"{c}={n}" for c, n in manifest.class_counts().items())
    print(f"wrote {len(entries)} sequences to {out} ({counts})")
    print(f"dataset digest {manifest.digest()}")
    return 0


def cmd_flow_gt(args) -> int:
    cfg = _load_config(args)
    data_dir = Path(args.data)
    manifest = Manifest.load(data_dir)
    params = cfg.gen_params()
    threshold = args.threshold if args.threshold is not None \
        else cfg["data.flow_threshold"]

    new_entries = []
    for e in manifest.entries:
        seq = read_sequence(data_dir / e.file)
        if args.method == "gt":
            mesh = make_mesh_sequence(e.motion_class, manifest.master_seed,
                                      e.gen_index, params)
            add_flow_ground_truth(seq, mesh, threshold)
        else:
            for t in range(len(seq) - 1):
                attach_flow(seq.frames[t],
                            nn_flow_baseline(seq.frames[t], seq.frames[t + 1]))
            last = seq.frames[-1]
            last.flow = np.zeros((last.n_points, 3))
            last.flow_valid = np.zeros(last.n_points, dtype=bool)
        write_sequence(data_dir / e.file, seq)
        new_entries.append(ManifestEntry(file=e.file, motion_class=e.motion_class,
                                         gen_index=e.gen_index,
                                         digest=file_digest(data_dir / e.file)))
    Manifest(master_seed=manifest.master_seed, classes=manifest.classes,
             entries=new_entries).save(data_dir)
    print(f"rewrote flow channels ({args.method}) for {len(new_entries)} sequences")
    return 0


def cmd_pretrain(args) -> int:
    cfg = _load_config(args)
    train_set, _, _ = _prepared_splits(cfg, args.data)
    model_cfg = cfg.model_config()
    train_cfg = cfg.train_config("pretrain")
    out = Path(args.out or (Path(cfg["paths.out"]) / "pretrain.pvuc"))
    out.parent.mkdir(parents=True, exist_ok=True)

    def snapshot(epoch, model, opt):
        save_checkpoint(out, "pretrain", model_cfg, export_weights(model),
                        {"step": opt.step_count,
                         "m": opt.m, "v": opt.v})

    result = pretrain(train_set, model_cfg, train_cfg,
                      r_t=cfg["mask.r_t"], r_s=cfg["mask.r_s"],
                      on_epoch=lambda e, l: print(f"epoch {e}: loss {l:.6f}"),
                      snapshot_fn=snapshot)
    _write_curve(out.with_suffix(".curve.csv"), result.curve)
    print(f"wrote checkpoint {out}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _load_config(args)
    train_set, test_set, _ = _prepared_splits(cfg, args.data)
    if args.fraction is not None:
        train_set = subsample_fraction(train_set, args.fraction,
                                       seed=cfg["data.seed"])
    model_cfg = cfg.model_config()
    train_cfg = cfg.train_config("finetune")

    pretrained = None
    if args.ckpt:
        ckpt = load_checkpoint(args.ckpt)
        if ckpt.stage != "pretrain":
            raise CheckpointError(f"expected a pretrain checkpoint, got {ckpt.stage}")
        pretrained = ckpt.weights
    out = Path(args.out or (Path(cfg["paths.out"]) / "finetune.pvuc"))
    out.parent.mkdir(parents=True, exist_ok=True)

    def log(epoch, loss, report):
        score = f"mAcc {report.macc:.4f}" if report.macc is not None \
            else f"MPJPE {report.mpjpe_mm:.2f}mm"
        print(f"epoch {epoch}: loss {loss:.6f} | test {score}")

    result = finetune(train_set, test_set, model_cfg, train_cfg,
                      pretrained=pretrained, on_epoch=log)
    save_checkpoint(out, "finetune", model_cfg, export_weights(result.model))
    _write_curve(out.with_suffix(".curve.csv"), result.curve)
    report_path = out.with_suffix(".metrics.txt")
    report_path.write_text(result.final_report.to_document())
    print(f"wrote checkpoint {out} and report {report_path}")
    return 0


def cmd_eval(args) -> int:
    from .train import load_weights
    from .model import FinetuneModel

    cfg = _load_config(args)
    _, test_set, _ = _prepared_splits(cfg, args.data)
    model_cfg = cfg.model_config()
    ckpt = load_checkpoint(args.ckpt)
    if ckpt.stage != "finetune":
        raise CheckpointError(f"expected a finetune checkpoint, got {ckpt.stage}")
    ckpt.verify_config(model_cfg)
    model = FinetuneModel(model_cfg, seed=0)
    load_weights(model, ckpt.weights)
    report = evaluate(model, test_set, model_cfg,
                      batch_size=cfg["train.batch_size"])
    report.stage = "eval"
    doc = report.to_document()
    if args.out:
        Path(args.out).write_text(doc)
    print(doc, end="")
    return 0


def cmd_inspect(args) -> int:
    seq = read_sequence(args.path)
    f0 = seq.frames[0]
    print(f"frames (L) = {len(seq)}")
    print(f"points (N) = {f0.n_points}")
    print(f"frame_rate = {seq.meta.frame_rate}")
    print(f"channels = labels:{f0.part_labels is not None} "
          f"flow:{f0.flow is not None} vertex_ids:{f0.vertex_ids is not None} "
          f"joints:{seq.meta.joint_gt is not None}")
    pts = seq.all_points()
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    print(f"bbox = [{lo[0]:.3f},{lo[1]:.3f},{lo[2]:.3f}] .. "
          f"[{hi[0]:.3f},{hi[1]:.3f},{hi[2]:.3f}]")
    if f0.part_labels is not None:
        hist = np.bincount(np.concatenate(
            [f.part_labels for f in seq.frames]).astype(int), minlength=10)
        print("label histogram =", " ".join(f"{p}:{c}" for p, c in enumerate(hist)))
    if f0.flow is not None:
        valid = np.mean([f.flow_valid.mean() for f in seq.frames[:-1]]) \
            if len(seq) > 1 else 0.0
        print(f"flow validity = {valid:.3f}")
    if seq.meta.joint_gt is not None:
        print(f"joints (J) = {seq.meta.joint_gt.shape[1]}")
    return 0


def cmd_export_ply(args) -> int:
    seq = read_sequence(args.path)
    if not 0 <= args.frame < len(seq):
        raise DataError(f"frame {args.frame} out of range 0..{len(seq) - 1}")
    export_ply(args.out, seq.frames[args.frame], color_by=args.color_by)
    print(f"wrote {args.out}")
    return 0


def cmd_params(args) -> int:
    cfg = _load_config(args)
    model_cfg = cfg.model_config()
    pre = count_params(model_cfg, "pretrain")
    fin = count_params(model_cfg, "finetune")
    print(f"pretrain (self-learning) parameters: {pre} ({pre / 1e6:.2f}M)")
    print(f"finetune parameters: {fin} ({fin / 1e6:.2f}M)")
    for stage in ("pretrain", "finetune"):
        parts = param_breakdown(model_cfg, stage)
        detail = ", ".join(f"{k}={v}" for k, v in sorted(parts.items()))
        print(f"  {stage}: {detail}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pvuh",
                                description="human point-cloud-video pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("gen", cmd_gen, help="generate a labeled synthetic dataset")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)

    sp = add("flow-gt", cmd_flow_gt, help="add/replace flow channels")
    sp.add_argument("--config", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--method", choices=("gt", "nn"), default="gt")
    sp.add_argument("--threshold", type=float)

    sp = add("pretrain", cmd_pretrain, help="masked-reconstruction self-learning")
    sp.add_argument("--config", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)

    sp = add("finetune", cmd_finetune, help="supervised head training")
    sp.add_argument("--config", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--ckpt", help="pretrain checkpoint (omit for from-scratch)")
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--fraction", type=float,
                    help="stratified train subsample for the semi-supervised study")

    sp = add("eval", cmd_eval, help="evaluate a finetune checkpoint")
    sp.add_argument("--config", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out")

    sp = add("inspect", cmd_inspect, help="print container header and stats")
    sp.add_argument("--path", required=True)

    sp = add("export-ply", cmd_export_ply, help="write one frame as ASCII PLY")
    sp.add_argument("--path", required=True)
    sp.add_argument("--frame", type=int, default=0)
    sp.add_argument("--color-by", choices=("part", "flow-magnitude", "none"),
                    default="part")
    sp.add_argument("--out", required=True)

    sp = add("params", cmd_params, help="parameter counts per stage")
    sp.add_argument("--config", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (PvuhError, ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
