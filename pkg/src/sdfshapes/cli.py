"""Command-line pipeline: sample, train, reconstruct, interpolate, generate,
evaluate.  All file outputs are written atomically (temp file + rename)."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import cohort as cohort_mod
from .checkpoint_io import load_checkpoint, save_checkpoint
from .config import RunSettings, parse_config
from .errors import SdfShapesError
from .field import Architecture
from .mesh import (SurfaceSampleSet, load_mesh, load_sample_set,
                   normalize_unit_ball, sample_surface, save_mesh,
                   save_sample_set)
from .isosurface import reconstruct_shape
from .training import TrainConfig, train

MESH_EXTENSIONS = (".obj", ".ply")


def _atomic(write_fn, path):
    tmp = str(path) + ".tmp"
    write_fn(tmp)
    os.replace(tmp, path)


def _load_settings(config_path) -> RunSettings:
    if config_path is None:
        return parse_config("")
    with open(config_path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _cmd_sample(args) -> int:
    files = sorted(f for f in os.listdir(args.input_dir)
                   if f.lower().endswith(MESH_EXTENSIONS))
    if not files:
        raise SdfShapesError(f"no OBJ/PLY meshes in {args.input_dir}")
    out = SurfaceSampleSet(seed=args.seed)
    for k, name in enumerate(files):
        mesh = load_mesh(os.path.join(args.input_dir, name))
        mesh, _ = normalize_unit_ball(mesh)
        s = sample_surface(mesh, args.points, (args.seed, k))
        out.points.append(s.points[0])
        out.normals.append(s.normals[0])
    out.validate()
    _atomic(lambda p: save_sample_set(out, p), args.out)
    print(f"sampled {len(files)} shapes x {args.points} points -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    samples = load_sample_set(args.samples)
    settings = _load_settings(args.config)
    initial = load_checkpoint(args.resume) if args.resume else None
    arch = initial.arch if initial is not None else settings.arch
    metrics = args.metrics or (str(args.out) + ".metrics.csv")
    ck = train(settings.train, samples, arch=arch, initial=initial,
               metrics=metrics, log=sys.stderr if args.verbose else None)
    _atomic(lambda p: save_checkpoint(ck, p), args.out)
    print(f"trained {ck.epochs_completed} epochs over {samples.shape_count} "
          f"shapes -> {args.out}")
    return 0


def _cmd_reconstruct(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    if not 0 <= args.shape_index < len(ck.codes):
        raise SdfShapesError(f"shape index {args.shape_index} outside "
                             f"[0, {len(ck.codes)})")
    mesh = reconstruct_shape(ck, ck.codes[args.shape_index], args.resolution,
                             workers=args.workers)
    _atomic(lambda p: save_mesh(mesh, p), args.out)
    print(f"reconstructed shape {args.shape_index}: {len(mesh.vertices)} "
          f"vertices, {len(mesh.faces)} faces -> {args.out}")
    return 0


def _cmd_interpolate(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    indices = tuple(int(t) for t in args.indices.split(","))
    alphas = np.array([float(t) for t in args.alphas.split(",")])
    weights = cohort_mod.CombinationWeights(indices, alphas)
    z = cohort_mod.combine_codes(ck.codes, weights)
    mesh = reconstruct_shape(ck, z, args.resolution, workers=args.workers)
    _atomic(lambda p: save_mesh(mesh, p), args.out)
    print(f"interpolated {indices} with {alphas.tolist()} -> {args.out}")
    return 0


def _cmd_generate(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    os.makedirs(args.out_dir, exist_ok=True)
    _, manifest = cohort_mod.generate_cohort(
        ck, args.num, args.interp_count, args.seed, args.resolution,
        out_dir=args.out_dir)
    manifest_path = os.path.join(args.out_dir, "manifest.csv")
    _atomic(manifest.to_csv, manifest_path)
    print(f"generated {args.num} shapes (m={args.interp_count}) in {args.out_dir}")
    return 0


def _cmd_evaluate_recon(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    samples = load_sample_set(args.samples)
    report = cohort_mod.reconstruction_report(
        ck, samples, args.resolution, args.eval_points, args.seed)
    report.to_csv(args.out)
    s = report.summary()
    print(f"reconstruction chamfer over {s['count']} shapes: "
          f"mean {s['mean']:.3e}, max {s['max']:.3e} -> {args.out}")
    return 0


def _cmd_evaluate_pairwise(args) -> int:
    files = sorted(f for f in os.listdir(args.mesh_dir)
                   if f.lower().endswith(MESH_EXTENSIONS))
    meshes = [load_mesh(os.path.join(args.mesh_dir, f)) for f in files]
    report = cohort_mod.pairwise_report(meshes, args.eval_points, args.seed)
    report.to_csv(args.out)
    s = report.summary()
    print(f"pairwise chamfer over {s['count']} pairs: mean {s['mean']:.3e}, "
          f"std {s['std']:.3e} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sdfshapes",
        description="Latent-conditioned neural signed distance fields: "
                    "train on mesh surface samples, reconstruct and generate shapes.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="sample normalized mesh surfaces")
    sp.add_argument("--input-dir", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--points", type=int, default=500000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=_cmd_sample)

    tp = sub.add_parser("train", help="train the field network")
    tp.add_argument("--samples", required=True)
    tp.add_argument("--config", default=None)
    tp.add_argument("--out", required=True)
    tp.add_argument("--resume", default=None)
    tp.add_argument("--deterministic", action="store_true",
                    help="single-threaded reproducible mode (always on; kept "
                         "as an explicit switch)")
    tp.add_argument("--metrics", default=None)
    tp.add_argument("--verbose", action="store_true")
    tp.set_defaults(fn=_cmd_train)

    rp = sub.add_parser("reconstruct", help="mesh one training shape")
    rp.add_argument("--checkpoint", required=True)
    rp.add_argument("--shape-index", type=int, required=True)
    rp.add_argument("--resolution", type=int, default=256)
    rp.add_argument("--workers", type=int, default=1)
    rp.add_argument("--out", required=True)
    rp.set_defaults(fn=_cmd_reconstruct)

    ip = sub.add_parser("interpolate", help="mesh a convex code combination")
    ip.add_argument("--checkpoint", required=True)
    ip.add_argument("--indices", required=True, help="comma-separated row indices")
    ip.add_argument("--alphas", required=True, help="comma-separated weights")
    ip.add_argument("--resolution", type=int, default=256)
    ip.add_argument("--workers", type=int, default=1)
    ip.add_argument("--out", required=True)
    ip.set_defaults(fn=_cmd_interpolate)

    gp = sub.add_parser("generate", help="generate a synthetic cohort")
    gp.add_argument("--checkpoint", required=True)
    gp.add_argument("--num", type=int, required=True)
    gp.add_argument("--interp-count", type=int, required=True)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--resolution", type=int, default=256)
    gp.add_argument("--out-dir", required=True)
    gp.set_defaults(fn=_cmd_generate)

    ep = sub.add_parser("evaluate", help="Chamfer-distance reports")
    esub = ep.add_subparsers(dest="evaluate_command", required=True)
    erp = esub.add_parser("recon", help="per-shape reconstruction distances")
    erp.add_argument("--checkpoint", required=True)
    erp.add_argument("--samples", required=True)
    erp.add_argument("--resolution", type=int, default=256)
    erp.add_argument("--eval-points", type=int, default=30000)
    erp.add_argument("--seed", type=int, default=0)
    erp.add_argument("--out", required=True)
    erp.set_defaults(fn=_cmd_evaluate_recon)
    epp = esub.add_parser("pairwise", help="pairwise distances over a mesh set")
    epp.add_argument("--mesh-dir", required=True)
    epp.add_argument("--eval-points", type=int, default=30000)
    epp.add_argument("--seed", type=int, default=0)
    epp.add_argument("--out", required=True)
    epp.set_defaults(fn=_cmd_evaluate_pairwise)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SdfShapesError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
