"""Field network evaluation, spatial gradients, and exact loss gradients.

All gradient checks are against central finite differences of the scalar
loss / field value, which is an independent oracle for the hand-written
tangent + reverse sweeps.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdfshapes.errors import DimensionMismatch
from sdfshapes.field import (Architecture, FieldParams, forward, init_params,
                             loss_gradients, shape_loss, softplus,
                             spatial_gradient)

from conftest import linear_field, random_params, tiny_arch


def _random_batch(rng, n):
    pts = rng.uniform(-0.9, 0.9, (n, 3))
    nrm = rng.normal(size=(n, 3))
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return pts, nrm


# ------------------------------------------------------------- Architecture

def test_architecture_defaults_and_dims():
    a = Architecture()
    assert (a.layer_count, a.hidden_width, a.latent_dim, a.skip_layer) == (8, 512, 256, 4)
    dims = a.layer_dims()
    assert dims[0] == (259, 512)
    assert dims[4] == (512 + 259, 512)  # widened by the skip concatenation
    assert dims[7] == (512, 1)


def test_architecture_validation():
    with pytest.raises(DimensionMismatch):
        Architecture(layer_count=0)
    with pytest.raises(DimensionMismatch):
        Architecture(skip_layer=0)
    with pytest.raises(DimensionMismatch):
        Architecture(layer_count=4, skip_layer=4)
    with pytest.raises(DimensionMismatch):
        Architecture(softplus_beta=0.0)
    with pytest.raises(DimensionMismatch):
        Architecture(latent_dim=0)


def test_params_flatten_roundtrip():
    arch = tiny_arch()
    p = random_params(arch, 0)
    q = FieldParams.from_flat(arch, p.flatten())
    for W, W2 in zip(p.weights, q.weights):
        assert np.array_equal(W, W2)
    for b, b2 in zip(p.biases, q.biases):
        assert np.array_equal(b, b2)


# -------------------------------------------------------------- init_params

def test_geometric_init_sign_flip_across_surface():
    arch = tiny_arch(latent_dim=8, width=64, layers=8, skip=4)
    p = init_params(arch, 0, "geometric")
    z = np.zeros(8)
    inner = forward(p, z, np.array([[0.0, 0.0, 0.0]]))[0]
    outer = forward(p, z, np.array([[0.0, 0.0, 0.99]]))[0]
    assert inner < 0 < outer  # negative inside, approximately a 0.5 sphere


def test_geometric_init_ignores_latent_at_start():
    arch = tiny_arch(latent_dim=6, width=32, layers=4, skip=2)
    p = init_params(arch, 1, "geometric")
    xs = np.random.default_rng(0).uniform(-1, 1, (10, 3))
    a = forward(p, np.zeros(6), xs)
    b = forward(p, np.full(6, 0.7), xs)
    assert np.array_equal(a, b)


def test_init_determinism():
    arch = tiny_arch()
    for scheme in ("geometric", "xavier"):
        p = init_params(arch, 42, scheme)
        q = init_params(arch, 42, scheme)
        for W, W2 in zip(p.weights, q.weights):
            assert np.array_equal(W, W2)


def test_xavier_zero_biases_finite_weights():
    p = init_params(tiny_arch(), 3, "xavier")
    for W, b in zip(p.weights, p.biases):
        assert np.isfinite(W).all()
        assert (b == 0).all()


# ------------------------------------------------------------------ forward

def test_forward_constant_network():
    arch = tiny_arch()
    weights = [np.zeros((dout, din)) for din, dout in arch.layer_dims()]
    biases = [np.zeros(dout) for _, dout in arch.layer_dims()]
    biases[-1][:] = 0.3
    p = FieldParams(arch, weights, biases)
    xs = np.random.default_rng(0).uniform(-1, 1, (7, 3))
    # zero weights: hidden constants propagate through softplus, final bias adds
    beta = arch.softplus_beta
    const = 0.0
    assert np.allclose(forward(p, np.zeros(4), xs), 0.3)
    assert softplus(np.array([const]), beta)[0] >= 0


def test_forward_one_layer_constant_exact():
    arch = Architecture(layer_count=1, hidden_width=1, latent_dim=1, skip_layer=1)
    p = FieldParams(arch, [np.zeros((1, 4))], [np.array([0.3])])
    out = forward(p, np.zeros(1), np.array([[1.0, 2.0, 3.0]]))
    assert out[0] == 0.3


def test_forward_linear_degenerate():
    p = linear_field((1.0, 0.0, 0.0))
    out = forward(p, np.zeros(1), np.array([[0.2, 0.5, -0.1]]))
    assert out[0] == 0.2


def test_forward_batch_equals_per_point_bitwise():
    arch = tiny_arch()
    p = random_params(arch, 5)
    z = np.random.default_rng(1).normal(size=4) * 0.3
    xs = np.random.default_rng(2).uniform(-1, 1, (9, 3))
    batch = forward(p, z, xs)
    singles = np.array([forward(p, z, xs[i:i + 1])[0] for i in range(9)])
    assert np.array_equal(batch, singles)


def test_forward_chunking_invariance_bitwise():
    arch = tiny_arch(width=16)
    p = random_params(arch, 7)
    z = np.zeros(4)
    xs = np.random.default_rng(3).uniform(-1, 1, (2500, 3))
    whole = forward(p, z, xs)
    parts = np.concatenate([forward(p, z, xs[:700]), forward(p, z, xs[700:1500]),
                            forward(p, z, xs[1500:])])
    assert np.array_equal(whole, parts)


def test_forward_dimension_errors():
    p = random_params(tiny_arch(), 0)
    with pytest.raises(DimensionMismatch):
        forward(p, np.zeros(3), np.zeros((2, 3)))  # wrong latent dim
    with pytest.raises(DimensionMismatch):
        forward(p, np.zeros(4), np.zeros((0, 3)))  # empty batch


def test_skip_noop_matches_plain_mlp():
    # zeroing the re-injection columns makes the skip a no-op; the network
    # must then agree with an ordinary MLP evaluated by an independent loop
    arch = tiny_arch(latent_dim=4, width=8, layers=4, skip=2)
    p = random_params(arch, 9)
    p.weights[2][:, arch.hidden_width:] = 0.0
    z = np.random.default_rng(4).normal(size=4) * 0.2
    xs = np.random.default_rng(5).uniform(-1, 1, (6, 3))
    got = forward(p, z, xs)

    beta = arch.softplus_beta
    c = np.hstack([np.tile(z, (6, 1)), xs])
    h = c
    ref_weights = list(p.weights)
    ref_weights[2] = p.weights[2][:, :arch.hidden_width]
    for j, (W, b) in enumerate(zip(ref_weights, p.biases)):
        a = h @ W.T + b
        h = softplus(a, beta) if j < arch.layer_count - 1 else a
    assert np.allclose(got, h[:, 0], rtol=0, atol=1e-12)


# --------------------------------------------------------- spatial_gradient

def test_gradient_zero_weights():
    arch = tiny_arch()
    p = FieldParams(arch, [np.zeros((dout, din)) for din, dout in arch.layer_dims()],
                    [np.zeros(dout) for _, dout in arch.layer_dims()])
    g = spatial_gradient(p, np.zeros(4), np.random.default_rng(0).uniform(-1, 1, (5, 3)))
    assert (g == 0).all()


def test_gradient_linear_degenerate():
    w = np.array([0.3, -1.2, 0.5])
    p = linear_field(w, b=0.7)
    g = spatial_gradient(p, np.zeros(1), np.random.default_rng(1).uniform(-1, 1, (8, 3)))
    assert np.allclose(g, w, rtol=0, atol=0)


def _fd_spatial(params, z, x, h=1e-5):
    g = np.zeros(3)
    for a in range(3):
        xp, xm = x.copy(), x.copy()
        xp[a] += h
        xm[a] -= h
        g[a] = (forward(params, z, xp[None])[0] - forward(params, z, xm[None])[0]) / (2 * h)
    return g


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_spatial_gradient_matches_fd_property(seed):
    rng = np.random.default_rng(seed)
    arch = tiny_arch(latent_dim=4, width=8, layers=3, skip=1)
    p = random_params(arch, rng.integers(2**31))
    z = rng.normal(size=4) * 0.3
    x = rng.uniform(-0.9, 0.9, 3)
    ana = spatial_gradient(p, z, x[None])[0]
    fd = _fd_spatial(p, z, x)
    assert np.allclose(ana, fd, rtol=1e-6, atol=1e-8)


# --------------------------------------------------------------- shape_loss

def test_shape_loss_exact_plane_zero():
    # f(x) = x_0 with surface points at x_0 = 0 exactly: every term vanishes
    p = linear_field((1.0, 0.0, 0.0))
    z = np.zeros(1)
    rng = np.random.default_rng(0)
    pts = np.column_stack([np.zeros(20), rng.uniform(-1, 1, (20, 2))])
    nrm = np.tile((1.0, 0.0, 0.0), (20, 1))
    off = rng.uniform(-1, 1, (15, 3))
    bd = shape_loss(p, z, pts, nrm, off, tau=0.5, lam=1e-4)
    assert bd.total == 0.0


def test_shape_loss_zero_network_unit_total():
    arch = tiny_arch()
    p = FieldParams(arch, [np.zeros((dout, din)) for din, dout in arch.layer_dims()],
                    [np.zeros(dout) for _, dout in arch.layer_dims()])
    bd = shape_loss(p, np.zeros(4), np.array([[0.1, 0.2, 0.3]]),
                    np.array([[1.0, 0.0, 0.0]]), None, tau=0.5, lam=0.0)
    assert bd.total == 1.0
    assert bd.eikonal_term == 0.0  # empty off-surface batch


def test_shape_loss_code_term_arithmetic():
    p = linear_field((1.0, 0.0, 0.0), latent_dim=2)
    z = np.array([2.0, 0.0])  # ||z|| = 2, field ignores z
    pts = np.column_stack([np.zeros(5), np.arange(5.0)[:, None] * [[0.1, 0.2]]])
    nrm = np.tile((1.0, 0.0, 0.0), (5, 1))
    bd = shape_loss(p, z, pts, nrm, None, tau=0.5, lam=1e-4)
    assert abs(bd.total - 2e-4) < 1e-18
    assert bd.code_reg_term == 2.0


def test_shape_loss_squared_code_reg_switch():
    p = linear_field((1.0, 0.0, 0.0), latent_dim=2)
    z = np.array([0.0, 3.0])
    pts = np.array([[0.0, 0.1, 0.2]])
    nrm = np.array([[1.0, 0.0, 0.0]])
    bd = shape_loss(p, z, pts, nrm, None, 0.5, 1e-4, squared_code_reg=True)
    assert bd.code_reg_term == 9.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_shape_loss_total_identity_and_nonnegativity(seed):
    rng = np.random.default_rng(seed)
    arch = tiny_arch()
    p = random_params(arch, rng.integers(2**31))
    z = rng.normal(size=4) * 0.5
    pts, nrm = _random_batch(rng, 8)
    off = rng.uniform(-1.1, 1.1, (6, 3))
    tau = float(rng.uniform(0, 2))
    lam = float(rng.uniform(0, 1e-2))
    bd = shape_loss(p, z, pts, nrm, off, tau, lam)
    for term in (bd.surface_term, bd.normal_term, bd.eikonal_term, bd.code_reg_term):
        assert term >= 0
    ident = bd.surface_term + bd.normal_term + tau * bd.eikonal_term + lam * bd.code_reg_term
    assert abs(bd.total - ident) < 1e-12


# ----------------------------------------------------------- loss_gradients

def _fd_loss_grads(params, z, pts, nrm, off, tau, lam, coords, h=1e-5):
    """Central differences of shape_loss over selected flat-parameter coords
    and all latent coordinates."""
    arch = params.arch
    flat = params.flatten()

    def at(fl):
        return shape_loss(FieldParams.from_flat(arch, fl), z, pts, nrm, off,
                          tau, lam).total

    fd_p = {}
    for i in coords:
        fp, fm = flat.copy(), flat.copy()
        fp[i] += h
        fm[i] -= h
        fd_p[i] = (at(fp) - at(fm)) / (2 * h)
    fd_z = np.zeros_like(z)
    for i in range(len(z)):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        fd_z[i] = (shape_loss(params, zp, pts, nrm, off, tau, lam).total
                   - shape_loss(params, zm, pts, nrm, off, tau, lam).total) / (2 * h)
    return fd_p, fd_z


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_loss_gradients_match_fd_property(seed):
    rng = np.random.default_rng(seed)
    arch = tiny_arch(latent_dim=4, width=8, layers=3, skip=1)
    p = random_params(arch, rng.integers(2**31))
    z = rng.normal(size=4) * 0.4
    pts, nrm = _random_batch(rng, 16)
    off = rng.uniform(-1.1, 1.1, (16, 3))
    wg, bg, zg, _ = loss_gradients(p, z, pts, nrm, off, 0.5, 1e-4)
    ana = np.concatenate([a.ravel() for pair in zip(wg, bg) for a in pair])
    coords = rng.choice(ana.size, size=12, replace=False)
    fd_p, fd_z = _fd_loss_grads(p, z, pts, nrm, off, 0.5, 1e-4, coords)
    for i, fd in fd_p.items():
        assert np.isclose(ana[i], fd, rtol=1e-4, atol=1e-8)
    assert np.allclose(zg, fd_z, rtol=1e-4, atol=1e-8)


def test_loss_gradients_stationary_at_exact_plane():
    p = linear_field((1.0, 0.0, 0.0))
    z = np.zeros(1)
    rng = np.random.default_rng(0)
    pts = np.column_stack([np.zeros(10), rng.uniform(-1, 1, (10, 2))])
    nrm = np.tile((1.0, 0.0, 0.0), (10, 1))
    off = rng.uniform(-1, 1, (10, 3))
    wg, bg, zg, bd = loss_gradients(p, z, pts, nrm, off, 0.5, 1e-4)
    assert bd.total == 0.0
    assert all((W == 0).all() for W in wg)
    assert all((b == 0).all() for b in bg)
    assert (zg == 0).all()


def test_loss_gradients_affine_in_tau():
    rng = np.random.default_rng(8)
    arch = tiny_arch()
    p = random_params(arch, 8)
    z = rng.normal(size=4) * 0.3
    pts, nrm = _random_batch(rng, 6)
    off = rng.uniform(-1, 1, (6, 3))

    def flat_grad(tau):
        wg, bg, zg, _ = loss_gradients(p, z, pts, nrm, off, tau, 1e-4)
        return np.concatenate([a.ravel() for pair in zip(wg, bg) for a in pair] + [zg])

    g0, g05, g1 = flat_grad(0.0), flat_grad(0.5), flat_grad(1.0)
    assert np.abs((g1 - g0) - 2.0 * (g05 - g0)).max() < 1e-12


def test_loss_gradients_breakdown_matches_shape_loss():
    rng = np.random.default_rng(12)
    arch = tiny_arch()
    p = random_params(arch, 12)
    z = rng.normal(size=4) * 0.3
    pts, nrm = _random_batch(rng, 5)
    off = rng.uniform(-1, 1, (4, 3))
    _, _, _, bd = loss_gradients(p, z, pts, nrm, off, 0.5, 1e-4)
    ref = shape_loss(p, z, pts, nrm, off, 0.5, 1e-4)
    assert bd.total == ref.total
    assert bd.surface_term == ref.surface_term
    assert bd.eikonal_term == ref.eikonal_term
