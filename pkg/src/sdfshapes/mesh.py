"""Triangle meshes: OBJ/PLY ingestion, unit-ball normalization, surface sampling.

Meshes are plain indexed vertex/face arrays.  Sampling is area-weighted with
flat per-face normals taken from the stored winding, which is well-defined
even for non-watertight inputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DegenerateMesh,
    EmptySurfaceSet,
    IndexOutOfRange,
    InvalidCount,
    MeshParseError,
    TruncatedFile,
    UnsupportedVersion,
    ZeroArea,
)

SAMPLESET_MAGIC = b"NSDS"
SAMPLESET_VERSION = 1


@dataclass
class TriangleMesh:
    """Indexed triangle surface.

    vertices: (V, 3) float64, faces: (F, 3) int64.  Every face index must be
    a valid vertex index and no face may repeat a vertex.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)

    def validate(self):
        if len(self.faces):
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise IndexOutOfRange(
                    f"face index out of range (have {len(self.vertices)} vertices)"
                )
            f = self.faces
            if ((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])).any():
                raise MeshParseError("face references the same vertex twice")
        return self

    def face_normals_and_areas(self):
        """Unit face normals (winding order) and triangle areas.

        Degenerate faces get a zero normal and zero area.
        """
        v = self.vertices
        f = self.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        norms = np.linalg.norm(cross, axis=1)
        areas = 0.5 * norms
        normals = np.zeros_like(cross)
        ok = norms > 0
        normals[ok] = cross[ok] / norms[ok, None]
        return normals, areas

    def area(self) -> float:
        return float(self.face_normals_and_areas()[1].sum())


@dataclass
class NormalizationTransform:
    """Affine map v' = scale * (v - center) taking a mesh into the unit ball."""

    center: np.ndarray
    scale: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * (np.asarray(points, dtype=np.float64) - self.center)

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + self.center


@dataclass
class SurfaceSampleSet:
    """Per-shape surface point and unit-normal samples.

    points[k] and normals[k] are aligned (N_k, 3) arrays.  The seed records
    how the samples were drawn; it is not part of the on-disk container.
    """

    points: list = field(default_factory=list)
    normals: list = field(default_factory=list)
    seed: int = 0

    @property
    def shape_count(self) -> int:
        return len(self.points)

    def validate(self, unit_ball: bool = True):
        if not self.points:
            raise EmptySurfaceSet("sample set has no shapes")
        for k, (p, n) in enumerate(zip(self.points, self.normals)):
            if len(p) != len(n):
                raise InvalidCount(f"shape {k}: {len(p)} points vs {len(n)} normals")
            nrm = np.linalg.norm(n, axis=1)
            if np.abs(nrm - 1.0).max() > 1e-9:
                raise InvalidCount(f"shape {k}: non-unit normals")
            if unit_ball and np.linalg.norm(p, axis=1).max() > 1.0 + 1e-6:
                raise InvalidCount(f"shape {k}: points outside the unit ball")
        return self


def load_mesh(path, fmt: str | None = None) -> TriangleMesh:
    """Load an ASCII OBJ or ASCII PLY mesh.

    Quadrilaterals (and larger polygons) are fan-triangulated at their first
    vertex.  Vertex order is preserved from the file.
    """
    path = str(path)
    if fmt is None:
        fmt = "ply" if path.lower().endswith(".ply") else "obj"
    fmt = fmt.lower()
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "obj":
        mesh = _parse_obj(text)
    elif fmt == "ply":
        mesh = _parse_ply(text)
    else:
        raise MeshParseError(f"unsupported format {fmt!r}")
    return mesh.validate()


def _parse_obj(text: str) -> TriangleMesh:
    vertices = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshParseError("vertex line needs 3 coordinates", lineno)
            try:
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError:
                raise MeshParseError(f"bad vertex coordinate in {line!r}", lineno)
        elif tag == "f":
            if len(parts) < 4:
                raise MeshParseError("face line needs at least 3 indices", lineno)
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                try:
                    i = int(head)
                except ValueError:
                    raise MeshParseError(f"bad face index {token!r}", lineno)
                if i < 0:
                    i = len(vertices) + i  # OBJ relative indexing
                else:
                    i = i - 1
                idx.append(i)
            for a, b in zip(idx[1:], idx[2:]):
                faces.append([idx[0], a, b])
        # every other record type (vn, vt, o, g, s, mtllib, ...) is ignored
    mesh = TriangleMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 3))
    _check_face_range(mesh)
    return mesh


def _parse_ply(text: str) -> TriangleMesh:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshParseError("missing 'ply' header", 1)
    n_vertices = n_faces = 0
    vertex_props = []
    in_vertex_element = False
    body_start = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] != "ascii":
                raise MeshParseError("only ascii PLY is supported", lineno)
        elif parts[0] == "element":
            in_vertex_element = parts[1] == "vertex"
            if parts[1] == "vertex":
                n_vertices = int(parts[2])
            elif parts[1] == "face":
                n_faces = int(parts[2])
        elif parts[0] == "property" and in_vertex_element:
            vertex_props.append(parts[-1])
        elif parts[0] == "end_header":
            body_start = lineno
            break
    if body_start is None:
        raise MeshParseError("missing end_header")
    try:
        ix, iy, iz = (vertex_props.index(c) for c in ("x", "y", "z"))
    except ValueError:
        raise MeshParseError("vertex element lacks x/y/z properties")
    body = lines[body_start:]
    if len(body) < n_vertices + n_faces:
        raise MeshParseError("file ends before all elements are read")
    vertices = np.empty((n_vertices, 3), dtype=np.float64)
    for i in range(n_vertices):
        parts = body[i].split()
        try:
            vertices[i] = (float(parts[ix]), float(parts[iy]), float(parts[iz]))
        except (ValueError, IndexError):
            raise MeshParseError(f"bad vertex row {body[i]!r}", body_start + 1 + i)
    faces = []
    for i in range(n_faces):
        lineno = body_start + 1 + n_vertices + i
        parts = body[n_vertices + i].split()
        try:
            cnt = int(parts[0])
            idx = [int(t) for t in parts[1:1 + cnt]]
        except (ValueError, IndexError):
            raise MeshParseError(f"bad face row {body[n_vertices + i]!r}", lineno)
        if cnt < 3 or len(idx) != cnt:
            raise MeshParseError("face needs at least 3 indices", lineno)
        for a, b in zip(idx[1:], idx[2:]):
            faces.append([idx[0], a, b])
    mesh = TriangleMesh(vertices, np.array(faces, dtype=np.int64).reshape(-1, 3))
    _check_face_range(mesh)
    return mesh


def _check_face_range(mesh: TriangleMesh):
    if len(mesh.faces) and (mesh.faces.min() < 0 or mesh.faces.max() >= len(mesh.vertices)):
        raise IndexOutOfRange(
            f"face references vertex outside [0, {len(mesh.vertices)})"
        )


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write an ASCII OBJ with 1-based face indices, 9 significant digits."""
    mesh.validate()
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def normalize_unit_ball(mesh: TriangleMesh):
    """Center at the vertex centroid and scale the farthest vertex to radius 1."""
    if len(mesh.vertices) == 0:
        raise DegenerateMesh("mesh has no vertices")
    center = mesh.vertices.mean(axis=0)
    radii = np.linalg.norm(mesh.vertices - center, axis=1)
    rmax = radii.max()
    if rmax == 0.0:
        raise DegenerateMesh("all vertices coincide")
    transform = NormalizationTransform(center=center, scale=1.0 / rmax)
    out = TriangleMesh(transform.apply(mesh.vertices), mesh.faces.copy())
    return out, transform


def sample_surface(mesh: TriangleMesh, count: int, seed: int) -> SurfaceSampleSet:
    """Area-weighted surface sampling with flat per-face normals.

    Triangles are chosen by cumulative-area inverse sampling and points are
    placed by the square-root barycentric map, which is uniform on each
    triangle.  Zero-area triangles never get samples.
    """
    if count < 1:
        raise InvalidCount(f"sample count must be >= 1, got {count}")
    normals, areas = mesh.face_normals_and_areas()
    total = areas.sum()
    if total <= 0.0:
        raise ZeroArea("mesh has no positive-area triangles")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(areas)
    face_idx = np.searchsorted(cum, rng.random(count) * total, side="right")
    face_idx = np.minimum(face_idx, len(areas) - 1)
    u = rng.random(count)
    v = rng.random(count)
    su = np.sqrt(u)
    bary = np.stack([1.0 - su, su * (1.0 - v), su * v], axis=1)
    tri = mesh.vertices[mesh.faces[face_idx]]  # (count, 3, 3)
    points = np.einsum("nij,ni->nj", tri, bary)
    return SurfaceSampleSet(points=[points], normals=[normals[face_idx]], seed=seed)


def save_sample_set(samples: SurfaceSampleSet, path) -> None:
    """Binary container: magic, version, shape count, then per shape the
    sample count followed by interleaved point/normal triples (LE float64)."""
    with open(path, "wb") as fh:
        fh.write(SAMPLESET_MAGIC)
        fh.write(struct.pack("<I", SAMPLESET_VERSION))
        fh.write(struct.pack("<I", samples.shape_count))
        for p, n in zip(samples.points, samples.normals):
            fh.write(struct.pack("<Q", len(p)))
            interleaved = np.hstack([p, n]).astype("<f8")
            fh.write(interleaved.tobytes())


def load_sample_set(path) -> SurfaceSampleSet:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != SAMPLESET_MAGIC:
        raise BadMagic(f"not a sample-set file: magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != SAMPLESET_VERSION:
        raise UnsupportedVersion(f"sample-set version {version}")
    (n_shapes,) = struct.unpack_from("<I", data, 8)
    off = 12
    points, normals = [], []
    for _ in range(n_shapes):
        if off + 8 > len(data):
            raise TruncatedFile("sample-set ends inside a shape header")
        (n,) = struct.unpack_from("<Q", data, off)
        off += 8
        nbytes = n * 6 * 8
        if off + nbytes > len(data):
            raise TruncatedFile("sample-set ends inside sample data")
        block = np.frombuffer(data, dtype="<f8", count=n * 6, offset=off).reshape(n, 6)
        points.append(block[:, :3].astype(np.float64))
        normals.append(block[:, 3:].astype(np.float64))
        off += nbytes
    return SurfaceSampleSet(points=points, normals=normals)
