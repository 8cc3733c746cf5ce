"""Novel-shape generation by convex code combination and Chamfer reports."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DuplicateIndex,
    EmptySet,
    IndexOutOfRange,
    InterpCountTooLarge,
    InvalidCount,
    NotConvex,
    ShapeMismatch,
    TooFewMeshes,
)
from .isosurface import DEFAULT_HALFWIDTH, reconstruct_shape
from .mesh import SurfaceSampleSet, TriangleMesh, sample_surface, save_mesh

DEFAULT_EVAL_POINTS = 30000
HISTOGRAM_BINS = 20


@dataclass
class CombinationWeights:
    """Convex weights over distinct codebook rows."""

    indices: tuple
    alphas: np.ndarray

    def __post_init__(self):
        self.indices = tuple(int(i) for i in self.indices)
        self.alphas = np.asarray(self.alphas, dtype=np.float64).ravel()

    def validate(self, code_count: int):
        if len(self.indices) != len(self.alphas):
            raise ShapeMismatch("indices and alphas must align")
        if len(set(self.indices)) != len(self.indices):
            raise DuplicateIndex(f"duplicate index in {self.indices}")
        for i in self.indices:
            if not 0 <= i < code_count:
                raise IndexOutOfRange(f"index {i} outside [0, {code_count})")
        if (self.alphas < 0).any():
            raise NotConvex("negative combination weight")
        if abs(self.alphas.sum() - 1.0) > 1e-9:
            raise NotConvex(f"weights sum to {self.alphas.sum()!r}, not 1")
        return self


@dataclass
class CohortEntry:
    shape_id: int
    weights: CombinationWeights
    mesh_path: str
    seed: int


@dataclass
class CohortManifest:
    entries: list = dc_field(default_factory=list)
    interp_count: int = 0
    resolution: int = 0
    seed: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["shape_id", "seed", "indices", "alphas", "mesh_path"])
            for e in self.entries:
                w.writerow([e.shape_id, e.seed,
                            ";".join(str(i) for i in e.weights.indices),
                            ";".join(repr(float(a)) for a in e.weights.alphas),
                            e.mesh_path])

    @classmethod
    def from_csv(cls, path) -> "CohortManifest":
        manifest = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        for row in rows[1:]:
            shape_id, seed, indices, alphas, mesh_path = row
            manifest.entries.append(CohortEntry(
                shape_id=int(shape_id), seed=int(seed),
                weights=CombinationWeights(
                    tuple(int(t) for t in indices.split(";")),
                    np.array([float(t) for t in alphas.split(";")])),
                mesh_path=mesh_path))
        return manifest


def combine_codes(codebook: np.ndarray, weights: CombinationWeights) -> np.ndarray:
    """Convex combination of codebook rows, summed in canonical index order
    so permuting the (index, alpha) pairs cannot change the result."""
    codebook = np.asarray(codebook, dtype=np.float64)
    weights.validate(len(codebook))
    order = np.argsort(weights.indices)
    z = np.zeros(codebook.shape[1], dtype=np.float64)
    for j in order:
        z += weights.alphas[j] * codebook[weights.indices[j]]
    return z


def generate_cohort(checkpoint, count: int, interp_count: int, seed: int,
                    resolution: int, out_dir=None,
                    halfwidth: float = DEFAULT_HALFWIDTH):
    """Generate shapes from random convex combinations of learned codes.

    For each shape, interp_count distinct rows are drawn uniformly and the
    weights come from the flat Dirichlet (normalized unit-exponential draws).
    """
    n = len(checkpoint.codes)
    if interp_count > n:
        raise InterpCountTooLarge(f"cannot interpolate {interp_count} of {n} codes")
    if interp_count < 1 or count < 1:
        raise InvalidCount("count and interp_count must be >= 1")
    rng = np.random.default_rng(seed)
    meshes = []
    manifest = CohortManifest(interp_count=interp_count,
                              resolution=resolution, seed=seed)
    for i in range(count):
        idx = rng.choice(n, size=interp_count, replace=False)
        draws = rng.standard_exponential(interp_count)
        weights = CombinationWeights(tuple(int(j) for j in idx), draws / draws.sum())
        z = combine_codes(checkpoint.codes, weights)
        mesh = reconstruct_shape(checkpoint, z, resolution, halfwidth)
        path = ""
        if out_dir is not None:
            path = os.path.join(str(out_dir), f"shape_{i:03d}.obj")
            save_mesh(mesh, path)
        meshes.append(mesh)
        manifest.entries.append(CohortEntry(i, weights, path, seed))
    return meshes, manifest


def chamfer_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric squared-distance Chamfer: mean nearest-neighbor squared
    distance from each set to the other, summed."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise EmptySet("chamfer distance needs nonempty point sets")
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(np.mean(d_ab ** 2) + np.mean(d_ba ** 2))


@dataclass
class DistanceReport:
    """Labeled Chamfer distances with recomputable summary statistics."""

    labels: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()

    def summary(self) -> dict:
        v = self.values
        return {"count": len(v), "mean": float(v.mean()), "std": float(v.std()),
                "min": float(v.min()), "max": float(v.max())}

    def histogram(self, bins: int = HISTOGRAM_BINS):
        v = self.values
        counts, edges = np.histogram(v, bins=bins, range=(v.min(), v.max()))
        return edges, counts

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "chamfer_sq"])
            for label, val in zip(self.labels, self.values):
                w.writerow([label, repr(float(val))])
        s = self.summary()
        edges, counts = self.histogram()
        with open(_summary_path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["count", "mean", "std", "min", "max"])
            w.writerow([s["count"], repr(s["mean"]), repr(s["std"]),
                        repr(s["min"]), repr(s["max"])])
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])

    @classmethod
    def from_csv(cls, path) -> "DistanceReport":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        labels = [r[0] for r in rows[1:]]
        values = np.array([float(r[1]) for r in rows[1:]])
        return cls(labels, values)


def _summary_path(path) -> str:
    base, ext = os.path.splitext(str(path))
    return base + ".summary" + (ext or ".csv")


def reconstruction_report(checkpoint, samples: SurfaceSampleSet,
                          resolution: int, eval_points: int = DEFAULT_EVAL_POINTS,
                          seed: int = 0,
                          halfwidth: float = DEFAULT_HALFWIDTH) -> DistanceReport:
    """Chamfer distance between each training shape's samples and its
    reconstruction from the learned code."""
    n = len(checkpoint.codes)
    if samples.shape_count != n:
        raise ShapeMismatch(f"{samples.shape_count} sample shapes vs {n} codes")
    labels, values = [], []
    for k in range(n):
        mesh = reconstruct_shape(checkpoint, checkpoint.codes[k], resolution, halfwidth)
        rec = sample_surface(mesh, eval_points, (seed, k, 1)).points[0]
        gt = samples.points[k]
        if len(gt) > eval_points:
            rng = np.random.default_rng([seed, k, 0])
            gt = gt[rng.choice(len(gt), size=eval_points, replace=False)]
        labels.append(str(k))
        values.append(chamfer_distance(gt, rec))
    return DistanceReport(labels, np.array(values))


def pairwise_report(meshes, eval_points: int = DEFAULT_EVAL_POINTS,
                    seed: int = 0) -> DistanceReport:
    """Chamfer distance for every unordered mesh pair; each mesh is sampled
    once and its point set reused across all of its pairs."""
    if len(meshes) < 2:
        raise TooFewMeshes("pairwise report needs at least 2 meshes")
    clouds = [sample_surface(m, eval_points, (seed, i)).points[0]
              for i, m in enumerate(meshes)]
    labels, values = [], []
    for i in range(len(meshes)):
        for j in range(i + 1, len(meshes)):
            labels.append(f"{i}-{j}")
            values.append(chamfer_distance(clouds[i], clouds[j]))
    return DistanceReport(labels, np.array(values))
