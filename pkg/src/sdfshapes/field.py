"""Latent-conditioned scalar field network and exact gradients of its loss.

The network is a fully connected auto-decoder: the latent code and query
point are concatenated, pushed through softplus layers, and re-injected via
a skip concatenation partway down.  All arithmetic is float64.

The training loss penalizes the field value and normal mismatch on surface
samples, deviation of the spatial gradient from unit norm off the surface,
and the latent code norm.  Because the loss contains the spatial gradient,
its parameter gradient needs second-order terms; these are computed exactly
with a tangent (forward-mode) pass through the network followed by a reverse
sweep over both the primal and tangent computations.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DimensionMismatch

# Row-wise results of a BLAS matmul depend on the batch size for small
# batches.  Public forward evaluation therefore always runs fixed-shape
# (zero-padded) blocks, which makes every per-point value identical no
# matter how callers batch or chunk their queries.
_BLOCK = 1024


@dataclass
class Architecture:
    """Layer layout of the field network."""

    layer_count: int = 8
    hidden_width: int = 512
    latent_dim: int = 256
    skip_layer: int = 4  # concatenation of (z, x) feeds the layer after this one
    softplus_beta: float = 100.0

    def __post_init__(self):
        if self.layer_count < 1:
            raise DimensionMismatch("layer_count must be >= 1")
        if self.skip_layer < 1:
            raise DimensionMismatch("skip_layer must be >= 1")
        # layer_count == 1 is a purely linear degenerate form used in tests;
        # the skip can never fire there, so the upper bound only applies otherwise
        if self.layer_count >= 2 and not self.skip_layer < self.layer_count:
            raise DimensionMismatch("skip_layer must be in [1, layer_count)")
        if self.softplus_beta <= 0:
            raise DimensionMismatch("softplus_beta must be positive")
        if self.latent_dim < 1:
            raise DimensionMismatch("latent_dim must be >= 1")

    @property
    def input_dim(self) -> int:
        return self.latent_dim + 3

    def layer_dims(self):
        """(in_dim, out_dim) per layer, accounting for the skip widening."""
        L, H = self.layer_count, self.hidden_width
        dims = []
        for j in range(L):
            din = self.input_dim if j == 0 else H
            if j == self.skip_layer:
                din = H + self.input_dim
            dout = 1 if j == L - 1 else H
            dims.append((din, dout))
        return dims


@dataclass
class FieldParams:
    """Weights and biases, one (out, in) matrix and (out,) bias per layer."""

    arch: Architecture
    weights: list
    biases: list

    def validate(self):
        dims = self.arch.layer_dims()
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise DimensionMismatch("layer count mismatch")
        for (din, dout), W, b in zip(dims, self.weights, self.biases):
            if W.shape != (dout, din) or b.shape != (dout,):
                raise DimensionMismatch(
                    f"expected {(dout, din)} / {(dout,)}, got {W.shape} / {b.shape}"
                )
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise DimensionMismatch("non-finite parameter entry")
        return self

    def copy(self) -> "FieldParams":
        return FieldParams(self.arch,
                           [W.copy() for W in self.weights],
                           [b.copy() for b in self.biases])

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases)
                               for a in pair])

    @classmethod
    def from_flat(cls, arch: Architecture, flat: np.ndarray) -> "FieldParams":
        weights, biases, off = [], [], 0
        for din, dout in arch.layer_dims():
            weights.append(flat[off:off + dout * din].reshape(dout, din).copy())
            off += dout * din
            biases.append(flat[off:off + dout].copy())
            off += dout
        if off != flat.size:
            raise DimensionMismatch("flat vector length mismatch")
        return cls(arch, weights, biases)


@dataclass
class LossBreakdown:
    """Per-term values of the shape loss; total is the weighted sum."""

    surface_term: float
    normal_term: float
    eikonal_term: float
    code_reg_term: float
    total: float
    tau: float
    lam: float


def softplus(t: np.ndarray, beta: float) -> np.ndarray:
    bt = beta * t
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(bt))) / beta


def softplus_d1(t: np.ndarray, beta: float) -> np.ndarray:
    # logistic sigmoid of beta*t, overflow-safe
    bt = beta * t
    out = np.empty_like(bt)
    pos = bt >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-bt[pos]))
    e = np.exp(bt[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus_d2(t: np.ndarray, beta: float) -> np.ndarray:
    s = softplus_d1(t, beta)
    return beta * s * (1.0 - s)


def init_params(arch: Architecture, seed: int, scheme: str = "geometric") -> FieldParams:
    """Initialize weights.

    "geometric" starts the field near the signed distance to a sphere of
    radius 0.5 (negative inside): hidden weights N(0, 2/out), final-layer
    weights tightly around sqrt(pi/in) with bias -0.5, and the columns that
    read the latent code (plus the skip re-injection) start at zero so the
    initial field depends on position only.  "xavier" is plain Glorot-normal
    with zero biases.
    """
    rng = np.random.default_rng(seed)
    dims = arch.layer_dims()
    L = arch.layer_count
    weights, biases = [], []
    for j, (din, dout) in enumerate(dims):
        if scheme == "xavier":
            W = rng.normal(0.0, np.sqrt(2.0 / (din + dout)), size=(dout, din))
            b = np.zeros(dout)
        elif scheme == "geometric":
            if j == L - 1:
                W = rng.normal(np.sqrt(np.pi) / np.sqrt(din), 1e-4, size=(dout, din))
                b = np.full(dout, -0.5)
            else:
                W = rng.normal(0.0, np.sqrt(2.0) / np.sqrt(dout), size=(dout, din))
                b = np.zeros(dout)
                if j == 0:
                    W[:, :arch.latent_dim] = 0.0
                if j == arch.skip_layer:
                    W[:, arch.hidden_width:] = 0.0
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        weights.append(W)
        biases.append(b)
    return FieldParams(arch, weights, biases).validate()


def _concat_input(arch: Architecture, z: np.ndarray, xs: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64).ravel()
    xs = np.asarray(xs, dtype=np.float64)
    if z.shape[0] != arch.latent_dim:
        raise DimensionMismatch(f"latent code has dim {z.shape[0]}, expected {arch.latent_dim}")
    if xs.ndim != 2 or xs.shape[1] != 3 or xs.shape[0] == 0:
        raise DimensionMismatch("points must be a nonempty (B, 3) array")
    c = np.empty((xs.shape[0], arch.latent_dim + 3), dtype=np.float64)
    c[:, :arch.latent_dim] = z
    c[:, arch.latent_dim:] = xs
    return c


def _eval_block(params: FieldParams, c: np.ndarray) -> np.ndarray:
    """Evaluate one fixed-shape block; c must already be zero-padded."""
    arch = params.arch
    beta = arch.softplus_beta
    h = c
    for j, (W, b) in enumerate(zip(params.weights, params.biases)):
        if j == arch.skip_layer:
            h = np.concatenate([h, c], axis=1)
        a = h @ W.T + b
        h = softplus(a, beta) if j < arch.layer_count - 1 else a
    return h[:, 0]


def forward(params: FieldParams, z: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Field values at a batch of points; output i depends only on input i."""
    c = _concat_input(params.arch, z, xs)
    n = c.shape[0]
    out = np.empty(n, dtype=np.float64)
    for s in range(0, n, _BLOCK):
        blk = c[s:s + _BLOCK]
        if blk.shape[0] < _BLOCK:
            padded = np.zeros((_BLOCK, c.shape[1]), dtype=np.float64)
            padded[:blk.shape[0]] = blk
            out[s:s + _BLOCK] = _eval_block(params, padded)[:blk.shape[0]]
        else:
            out[s:s + _BLOCK] = _eval_block(params, blk)
    return out


def _forward_trace(params: FieldParams, c: np.ndarray):
    """Forward pass keeping per-layer inputs and pre-activations."""
    arch = params.arch
    beta = arch.softplus_beta
    us, as_ = [], []
    h = c
    for j, (W, b) in enumerate(zip(params.weights, params.biases)):
        if j == arch.skip_layer:
            h = np.concatenate([h, c], axis=1)
        us.append(h)
        a = h @ W.T + b
        as_.append(a)
        h = softplus(a, beta) if j < arch.layer_count - 1 else a
    return us, as_, h[:, 0]


def _input_gradient(params: FieldParams, us, as_):
    """Reverse sweep: d(output)/d(concatenated input), per batch row."""
    arch = params.arch
    beta = arch.softplus_beta
    L = arch.layer_count
    H = arch.hidden_width
    B = us[0].shape[0]
    cbar = np.zeros((B, arch.input_dim), dtype=np.float64)
    if L == 1:
        cbar += params.weights[0][0]
        return cbar
    p = np.broadcast_to(params.weights[L - 1], (B, H)).copy()
    for j in range(L - 2, -1, -1):
        q = p * softplus_d1(as_[j], beta)
        r = q @ params.weights[j]
        if j == 0:
            cbar += r
        elif j == arch.skip_layer:
            p = r[:, :H]
            cbar += r[:, H:]
        else:
            p = r
    return cbar


def spatial_gradient(params: FieldParams, z: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Exact derivative of the field with respect to the query point."""
    c = _concat_input(params.arch, z, xs)
    us, as_, _ = _forward_trace(params, c)
    cbar = _input_gradient(params, us, as_)
    return cbar[:, params.arch.latent_dim:]


def _breakdown(y_s, g_s, normals, g_o, z, tau, lam, squared_code_reg):
    surface_term = float(np.mean(np.abs(y_s)))
    normal_term = float(np.mean(np.sum((g_s - normals) ** 2, axis=1)))
    if g_o is None or len(g_o) == 0:
        eikonal_term = 0.0
    else:
        eikonal_term = float(np.mean((np.linalg.norm(g_o, axis=1) - 1.0) ** 2))
    znorm = float(np.linalg.norm(z))
    code_reg_term = znorm ** 2 if squared_code_reg else znorm
    total = surface_term + normal_term + tau * eikonal_term + lam * code_reg_term
    return LossBreakdown(surface_term, normal_term, eikonal_term,
                         code_reg_term, total, tau, lam)


def shape_loss(params: FieldParams, z: np.ndarray,
               surface_points: np.ndarray, surface_normals: np.ndarray,
               offsurface_points: np.ndarray | None,
               tau: float, lam: float,
               squared_code_reg: bool = False) -> LossBreakdown:
    """Per-shape loss: |field| and gradient/normal mismatch on the surface,
    unit-gradient penalty off the surface, and the latent norm penalty."""
    surface_points = np.asarray(surface_points, dtype=np.float64)
    surface_normals = np.asarray(surface_normals, dtype=np.float64)
    if surface_points.shape != surface_normals.shape:
        raise DimensionMismatch("surface points and normals must align")
    c_s = _concat_input(params.arch, z, surface_points)
    us, as_, y_s = _forward_trace(params, c_s)
    g_s = _input_gradient(params, us, as_)[:, params.arch.latent_dim:]
    g_o = None
    if offsurface_points is not None and len(offsurface_points) > 0:
        c_o = _concat_input(params.arch, z, np.asarray(offsurface_points, dtype=np.float64))
        us_o, as_o, _ = _forward_trace(params, c_o)
        g_o = _input_gradient(params, us_o, as_o)[:, params.arch.latent_dim:]
    z = np.asarray(z, dtype=np.float64).ravel()
    return _breakdown(y_s, g_s, surface_normals, g_o, z, tau, lam, squared_code_reg)


def loss_gradients(params: FieldParams, z: np.ndarray,
                   surface_points: np.ndarray, surface_normals: np.ndarray,
                   offsurface_points: np.ndarray | None,
                   tau: float, lam: float,
                   squared_code_reg: bool = False):
    """Exact gradients of the total loss w.r.t. all parameters and the code.

    Returns (weight_grads, bias_grads, z_grad, LossBreakdown).  Subgradients
    at the kinks are zero: d|f|/df = 0 at f = 0 and d||z||/dz = 0 at z = 0.
    """
    arch = params.arch
    beta = arch.softplus_beta
    d = arch.latent_dim
    H = arch.hidden_width
    L = arch.layer_count
    z = np.asarray(z, dtype=np.float64).ravel()
    surface_points = np.asarray(surface_points, dtype=np.float64)
    surface_normals = np.asarray(surface_normals, dtype=np.float64)
    if surface_points.shape != surface_normals.shape:
        raise DimensionMismatch("surface points and normals must align")
    Ns = surface_points.shape[0]
    if offsurface_points is not None and len(offsurface_points) > 0:
        offsurface_points = np.asarray(offsurface_points, dtype=np.float64)
        pts = np.vstack([surface_points, offsurface_points])
        Mo = offsurface_points.shape[0]
    else:
        pts = surface_points
        Mo = 0
    B = pts.shape[0]

    c = _concat_input(arch, z, pts)
    us, as_, y = _forward_trace(params, c)
    phi1 = [softplus_d1(a, beta) for a in as_[:-1]]
    phi2 = [softplus_d2(a, beta) for a in as_[:-1]]

    # reverse sweep for the spatial gradient of every row
    g = _input_gradient(params, us, as_)[:, d:]

    y_s, g_s = y[:Ns], g[:Ns]
    g_o = g[Ns:] if Mo else None
    breakdown = _breakdown(y_s, g_s, surface_normals, g_o, z, tau, lam, squared_code_reg)

    # dL/dy and dL/dg, held fixed for the second-order sweep
    cy = np.zeros(B)
    cy[:Ns] = np.sign(y_s) / Ns
    v = np.zeros((B, 3))
    v[:Ns] = 2.0 * (g_s - surface_normals) / Ns
    if Mo:
        gn = np.linalg.norm(g_o, axis=1)
        safe = gn > 0
        coef = np.zeros(Mo)
        coef[safe] = tau * 2.0 * (gn[safe] - 1.0) / (gn[safe] * Mo)
        v[Ns:] = coef[:, None] * g_o

    # tangent pass: directional derivative of the field along v at the input
    cdot = np.zeros((B, arch.input_dim))
    cdot[:, d:] = v
    udots, adots = [], []
    hdot = cdot
    for j in range(L):
        if j == arch.skip_layer:
            hdot = np.concatenate([hdot, cdot], axis=1)
        udots.append(hdot)
        adot = hdot @ params.weights[j].T
        adots.append(adot)
        if j < L - 1:
            hdot = phi1[j] * adot

    # reverse sweep over primal + tangent computations
    w_grads = [np.zeros_like(W) for W in params.weights]
    b_grads = [np.zeros_like(b) for b in params.biases]
    cbar = np.zeros((B, arch.input_dim))
    abar = cy[:, None]
    adotbar = np.ones((B, 1))
    for j in range(L - 1, -1, -1):
        w_grads[j] = abar.T @ us[j] + adotbar.T @ udots[j]
        b_grads[j] = abar.sum(axis=0)
        ubar = abar @ params.weights[j]
        udotbar = adotbar @ params.weights[j]
        if j == 0:
            cbar += ubar
            break
        if j == arch.skip_layer:
            hbar = ubar[:, :H]
            cbar += ubar[:, H:]
            hdotbar = udotbar[:, :H]
        else:
            hbar = ubar
            hdotbar = udotbar
        abar = hbar * phi1[j - 1] + hdotbar * phi2[j - 1] * adots[j - 1]
        adotbar = hdotbar * phi1[j - 1]

    z_grad = cbar[:, :d].sum(axis=0)
    znorm = np.linalg.norm(z)
    if squared_code_reg:
        z_grad = z_grad + lam * 2.0 * z
    elif znorm > 0:
        z_grad = z_grad + lam * z / znorm
    return w_grads, b_grads, z_grad, breakdown
