"""Grid evaluation and marching-cubes extraction against analytic oracles."""

import numpy as np
import pytest

from sdfshapes.errors import (BadMagic, DimensionMismatch, InvalidResolution,
                              NonFiniteValue, TruncatedFile,
                              UnsupportedVersion)
from sdfshapes.field import FieldParams, forward
from sdfshapes.isosurface import (ScalarGrid, eval_grid, load_grid,
                                  marching_cubes, reconstruct_shape, save_grid)

from conftest import random_params, tiny_arch, tiny_checkpoint


def sphere_grid(R, radius=0.6, half=1.0):
    c = np.linspace(-half, half, R)
    x, y, z = np.meshgrid(c, c, c, indexing="ij")
    vals = np.sqrt(x * x + y * y + z * z) - radius
    return ScalarGrid(R, np.full(3, -half), np.full(3, half), vals)


def euler_characteristic(mesh):
    V = len(mesh.vertices)
    F = len(mesh.faces)
    edges = np.sort(np.concatenate([mesh.faces[:, [0, 1]], mesh.faces[:, [1, 2]],
                                    mesh.faces[:, [0, 2]]]), axis=1)
    E = len(np.unique(edges, axis=0))
    return V - E + F


def signed_volume(mesh):
    tri = mesh.vertices[mesh.faces]
    return float(np.einsum("ij,ij->i", tri[:, 0],
                           np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


# ---------------------------------------------------------------- ScalarGrid

def test_grid_axis_coords_exact():
    g = ScalarGrid(3, np.full(3, -1.0), np.full(3, 1.0), np.zeros((3, 3, 3)))
    assert np.array_equal(g.axis_coords(0), [-1.0, 0.0, 1.0])
    assert np.array_equal(g.spacing, [1.0, 1.0, 1.0])


def test_grid_validation():
    with pytest.raises(InvalidResolution):
        ScalarGrid(1, np.zeros(3), np.ones(3), np.zeros((1, 1, 1)))
    with pytest.raises(DimensionMismatch):
        ScalarGrid(3, np.zeros(3), np.ones(3), np.zeros((3, 3, 2)))


# ----------------------------------------------------------------- eval_grid

def test_eval_grid_constant_network():
    arch = tiny_arch()
    p = FieldParams(arch, [np.zeros((dout, din)) for din, dout in arch.layer_dims()],
                    [np.zeros(dout) for _, dout in arch.layer_dims()])
    p.biases[-1][:] = 0.4
    g = eval_grid(p, np.zeros(4), 5, halfwidth=1.0)
    assert (g.values == g.values.flat[0]).all()


def test_eval_grid_matches_direct_forward_bitwise():
    arch = tiny_arch(width=16)
    p = random_params(arch, 4)
    z = np.random.default_rng(0).normal(size=4) * 0.3
    g = eval_grid(p, z, 7, halfwidth=1.1)
    cx = g.axis_coords(0)
    for (i, j, k) in [(0, 0, 0), (3, 1, 6), (6, 6, 6), (2, 5, 4)]:
        direct = forward(p, z, np.array([[cx[i], cx[j], cx[k]]]))[0]
        assert g.values[i, j, k] == direct


def test_eval_grid_chunk_and_worker_invariance_bitwise():
    arch = tiny_arch(width=16)
    p = random_params(arch, 6)
    z = np.zeros(4)
    base = eval_grid(p, z, 17, workers=1, slab_chunk=1)
    for workers, chunk in [(1, 5), (3, 2), (4, 7)]:
        other = eval_grid(p, z, 17, workers=workers, slab_chunk=chunk)
        assert np.array_equal(base.values, other.values)


def test_eval_grid_resolution_error():
    p = random_params(tiny_arch(), 0)
    with pytest.raises(InvalidResolution):
        eval_grid(p, np.zeros(4), 1)


# ------------------------------------------------------------ marching_cubes

def test_mc_all_positive_empty():
    g = ScalarGrid(4, np.zeros(3), np.ones(3), np.ones((4, 4, 4)))
    m = marching_cubes(g)
    assert len(m.vertices) == 0 and len(m.faces) == 0


def test_mc_single_cell_one_triangle_at_midpoints():
    vals = np.ones((2, 2, 2))
    vals[0, 0, 0] = -1.0
    g = ScalarGrid(2, np.zeros(3), np.ones(3), vals)
    m = marching_cubes(g, iso=0.0)
    assert len(m.faces) == 1
    expected = {(0.5, 0.0, 0.0), (0.0, 0.5, 0.0), (0.0, 0.0, 0.5)}
    got = {tuple(v) for v in m.vertices}
    assert got == expected


def test_mc_sphere_euler_and_radius_bound():
    R = 64
    g = sphere_grid(R, 0.6)
    m = marching_cubes(g).validate()
    assert euler_characteristic(m) == 2
    cell_diag = np.linalg.norm(g.spacing)
    radii = np.linalg.norm(m.vertices, axis=1)
    assert np.abs(radii - 0.6).max() <= 2 * cell_diag


def test_mc_sphere_genus_zero_at_small_resolutions():
    for R in (16, 24, 33):
        m = marching_cubes(sphere_grid(R, 0.6))
        assert euler_characteristic(m) == 2


def test_mc_outward_winding():
    m = marching_cubes(sphere_grid(48, 0.6))
    vol = signed_volume(m)
    assert abs(vol - 4.0 / 3.0 * np.pi * 0.6 ** 3) < 0.02
    assert vol > 0  # normals point toward increasing field values


def test_mc_vertices_interpolate_to_iso():
    iso = 0.13
    g = sphere_grid(24, 0.55)
    m = marching_cubes(g, iso=iso)
    # every vertex must sit on a grid edge where linear interpolation of the
    # two endpoint values reproduces the iso level
    sp = g.spacing
    rel = (m.vertices - g.lower) / sp
    snapped = np.rint(rel)
    on_axis = np.abs(rel - snapped) > 1e-12
    assert (on_axis.sum(axis=1) == 1).all()  # exactly one fractional coordinate
    cx = g.axis_coords(0)
    for vert, off in zip(m.vertices, on_axis):
        axis = int(np.nonzero(off)[0][0])
        lo_idx = np.floor((vert - g.lower) / sp + 1e-12).astype(int)
        hi_idx = lo_idx.copy()
        hi_idx[axis] += 1
        v0 = g.values[tuple(lo_idx)]
        v1 = g.values[tuple(hi_idx)]
        t = (vert[axis] - cx[lo_idx[axis]]) / sp[axis]
        assert v0 < iso <= v1 or v1 < iso <= v0
        assert abs((v0 + t * (v1 - v0)) - iso) < 1e-9


def test_mc_no_degenerate_or_unreferenced():
    m = marching_cubes(sphere_grid(32, 0.6))
    f = m.faces
    assert ((f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2])).all()
    assert set(np.unique(f)) == set(range(len(m.vertices)))


def test_mc_rejects_non_finite():
    vals = np.ones((3, 3, 3))
    vals[1, 1, 1] = np.nan
    with pytest.raises(NonFiniteValue):
        marching_cubes(ScalarGrid(3, np.zeros(3), np.ones(3), vals))


# -------------------------------------------------------- reconstruct_shape

def test_reconstruct_matches_explicit_composition_bitwise():
    ck = tiny_checkpoint()
    direct = reconstruct_shape(ck, ck.codes[0], 20)
    grid = eval_grid(ck.params, ck.codes[0], 20, 1.1)
    ref = marching_cubes(grid, 0.0)
    assert np.array_equal(direct.vertices, ref.vertices)
    assert np.array_equal(direct.faces, ref.faces)


def test_reconstruct_untrained_geometric_init_is_sphere_like():
    ck = tiny_checkpoint()
    m = reconstruct_shape(ck, ck.codes[0], 32)
    assert len(m.faces) > 0
    radii = np.linalg.norm(m.vertices, axis=1)
    assert 0.2 < radii.mean() < 0.8


def test_reconstruct_errors():
    ck = tiny_checkpoint()
    with pytest.raises(InvalidResolution):
        reconstruct_shape(ck, ck.codes[0], 1)
    with pytest.raises(DimensionMismatch):
        reconstruct_shape(ck, np.zeros(9), 16)


# ----------------------------------------------------------- grid container

def test_grid_roundtrip_bitwise(tmp_path):
    g = sphere_grid(9, 0.5)
    p = tmp_path / "g.nsdg"
    save_grid(g, p)
    back = load_grid(p)
    assert back.resolution == 9
    assert np.array_equal(back.lower, g.lower)
    assert np.array_equal(back.upper, g.upper)
    assert np.array_equal(back.values, g.values)


def test_grid_bad_magic_and_version(tmp_path):
    p = tmp_path / "bad.nsdg"
    p.write_bytes(b"ZZZZ" + b"\x00" * 20)
    with pytest.raises(BadMagic):
        load_grid(p)
    import struct
    p.write_bytes(b"NSDG" + struct.pack("<II", 7, 2))
    with pytest.raises(UnsupportedVersion):
        load_grid(p)


def test_grid_truncated(tmp_path):
    g = sphere_grid(5, 0.5)
    p = tmp_path / "g.nsdg"
    save_grid(g, p)
    data = p.read_bytes()
    p2 = tmp_path / "cut.nsdg"
    p2.write_bytes(data[:-16])
    with pytest.raises(TruncatedFile):
        load_grid(p2)
