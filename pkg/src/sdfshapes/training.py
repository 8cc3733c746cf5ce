"""Optimization loop: off-surface sampling, Adam, and the training schedule.

One Adam step is taken per shape-minibatch; every shape is visited exactly
once per epoch in a seeded shuffled order.  Network parameters and the
visited latent code row are updated jointly.  Training is single-threaded
and bitwise reproducible for a fixed seed.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ConfigMismatch,
    EmptySurfaceSet,
    InvalidCount,
    NonFiniteLoss,
    ShapeMismatch,
    TooFewPoints,
)
from .field import Architecture, FieldParams, init_params, loss_gradients
from .mesh import SurfaceSampleSet

METRICS_HEADER = "epoch,mean_total,mean_surface,mean_normal,mean_eikonal,mean_codereg,lr"


@dataclass
class TrainConfig:
    epochs: int = 5000
    initial_lr: float = 1e-3
    lr_halving_period: int = 500
    tau: float = 0.5
    lam: float = 1e-4
    latent_dim: int = 256
    code_init_std: float = 1e-2
    surface_batch_size: int = 16384
    offsurface_ratio: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    knn_k: int = 50
    uniform_halfwidth: float = 1.1
    seed: int = 0
    squared_code_reg: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidCount("epochs must be >= 0")
        for name in ("initial_lr", "lr_halving_period", "latent_dim", "code_init_std",
                     "surface_batch_size", "uniform_halfwidth", "knn_k"):
            if getattr(self, name) <= 0:
                raise InvalidCount(f"{name} must be positive")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise InvalidCount("adam betas must lie in [0, 1)")


@dataclass
class OptimizerState:
    """Adam moment accumulators congruent to the parameters and codebook."""

    m_weights: list
    v_weights: list
    m_biases: list
    v_biases: list
    m_codes: np.ndarray
    v_codes: np.ndarray
    step_params: int = 0
    step_codes: np.ndarray = None

    @classmethod
    def fresh(cls, params: FieldParams, codes: np.ndarray) -> "OptimizerState":
        return cls(
            m_weights=[np.zeros_like(W) for W in params.weights],
            v_weights=[np.zeros_like(W) for W in params.weights],
            m_biases=[np.zeros_like(b) for b in params.biases],
            v_biases=[np.zeros_like(b) for b in params.biases],
            m_codes=np.zeros_like(codes),
            v_codes=np.zeros_like(codes),
            step_params=0,
            step_codes=np.zeros(len(codes), dtype=np.int64),
        )


@dataclass
class Checkpoint:
    arch: Architecture
    params: FieldParams
    codes: np.ndarray
    config: TrainConfig
    epochs_completed: int
    seed: int
    optimizer: OptimizerState | None = None

    def validate(self):
        self.params.validate()
        if self.codes.ndim != 2 or self.codes.shape[1] != self.arch.latent_dim:
            raise ShapeMismatch("codebook width does not match the architecture")
        if not np.isfinite(self.codes).all():
            raise ShapeMismatch("non-finite codebook entry")
        return self


def local_sigmas(points: np.ndarray, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest neighbor (k capped at n-1)."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 2:
        raise TooFewPoints("need at least 2 points")
    if k < 1:
        raise InvalidCount("k must be >= 1")
    k = min(k, n - 1)
    dists, _ = cKDTree(points).query(points, k=k + 1)
    return np.ascontiguousarray(dists[:, k])


def _sample_off_surface(surface_points, sigmas, count, halfwidth, rng):
    n = len(surface_points)
    if n == 0:
        raise EmptySurfaceSet("no surface points to perturb")
    n_gauss = (count + 1) // 2
    n_unif = count // 2
    idx = rng.integers(0, n, size=n_gauss)
    noise = rng.standard_normal((n_gauss, 3)) * sigmas[idx][:, None]
    gauss = surface_points[idx] + noise
    unif = rng.uniform(-halfwidth, halfwidth, size=(n_unif, 3))
    return np.vstack([gauss, unif])


def sample_off_surface(surface_points: np.ndarray, sigmas: np.ndarray,
                       count: int, halfwidth: float, seed) -> np.ndarray:
    """Half the points are Gaussian perturbations of random surface points
    (per-point scale), half are uniform in the enclosing cube."""
    if count < 1:
        raise InvalidCount("count must be >= 1")
    surface_points = np.asarray(surface_points, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if len(sigmas) != len(surface_points):
        raise ShapeMismatch("sigmas must align with surface points")
    return _sample_off_surface(surface_points, sigmas, count, halfwidth,
                               np.random.default_rng(seed))


def learning_rate_at(epoch: int, config: TrainConfig) -> float:
    return config.initial_lr * 0.5 ** (epoch // config.lr_halving_period)


def adam_step(value, grad, m, v, step, lr,
              beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update, in place; step is the 1-based count for this tensor."""
    value = np.asarray(value)
    grad = np.asarray(grad)
    if value.shape != grad.shape or m.shape != value.shape or v.shape != value.shape:
        raise ShapeMismatch("value/grad/moment shapes disagree")
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** step)
    vhat = v / (1.0 - beta2 ** step)
    value -= lr * mhat / (np.sqrt(vhat) + eps)
    return value


def train(config: TrainConfig, samples: SurfaceSampleSet,
          arch: Architecture | None = None,
          initial: Checkpoint | None = None,
          metrics=None,
          log=None) -> Checkpoint:
    """Run the Adam loop over all shapes and return a checkpoint.

    config.epochs is the target epoch count; resuming from a checkpoint
    continues from its completed epoch.  metrics may be a path or an open
    text stream and receives one CSV row per epoch.
    """
    if samples.shape_count == 0:
        raise EmptySurfaceSet("no training shapes")
    if arch is None:
        arch = Architecture(latent_dim=config.latent_dim) if initial is None else initial.arch
    if arch.latent_dim != config.latent_dim:
        raise ConfigMismatch("config latent_dim does not match the architecture")
    n = samples.shape_count

    if initial is not None:
        if initial.arch != arch:
            raise ConfigMismatch("resume checkpoint architecture differs")
        if initial.codes.shape[0] != n:
            raise ConfigMismatch("resume checkpoint shape count differs")
        params = initial.params.copy()
        codes = initial.codes.copy()
        opt = initial.optimizer if initial.optimizer is not None \
            else OptimizerState.fresh(params, codes)
        start_epoch = initial.epochs_completed
    else:
        params = init_params(arch, config.seed, "geometric")
        init_rng = np.random.default_rng([config.seed, 0])
        codes = init_rng.normal(0.0, config.code_init_std, size=(n, config.latent_dim))
        opt = OptimizerState.fresh(params, codes)
        start_epoch = 0

    sigmas = [local_sigmas(p, config.knn_k) if len(p) >= 2 else np.zeros(len(p))
              for p in samples.points]
    B = config.surface_batch_size
    M = max(1, round(B * config.offsurface_ratio))

    close_metrics = False
    if isinstance(metrics, (str, bytes)) or hasattr(metrics, "__fspath__"):
        import os
        fresh = not (os.path.exists(metrics) and os.path.getsize(metrics) > 0)
        metrics = open(metrics, "a", encoding="utf-8")
        close_metrics = True
        if fresh:
            metrics.write(METRICS_HEADER + "\n")
    elif metrics is not None and metrics.tell() == 0:
        metrics.write(METRICS_HEADER + "\n")

    try:
        for epoch in range(start_epoch, config.epochs):
            rng = np.random.default_rng([config.seed, 1, epoch])
            lr = learning_rate_at(epoch, config)
            order = rng.permutation(n)
            sums = np.zeros(5)
            for k in order:
                pts = samples.points[k]
                nrm = samples.normals[k]
                idx = rng.integers(0, len(pts), size=min(B, len(pts)))
                off = _sample_off_surface(pts, sigmas[k], M,
                                          config.uniform_halfwidth, rng)
                wg, bg, zg, bd = loss_gradients(
                    params, codes[k], pts[idx], nrm[idx], off,
                    config.tau, config.lam, config.squared_code_reg)
                if not np.isfinite(bd.total):
                    raise NonFiniteLoss(
                        f"non-finite loss at epoch {epoch}, shape {k}: {bd}")
                opt.step_params += 1
                t = opt.step_params
                for j in range(arch.layer_count):
                    adam_step(params.weights[j], wg[j], opt.m_weights[j],
                              opt.v_weights[j], t, lr,
                              config.adam_beta1, config.adam_beta2, config.adam_eps)
                    adam_step(params.biases[j], bg[j], opt.m_biases[j],
                              opt.v_biases[j], t, lr,
                              config.adam_beta1, config.adam_beta2, config.adam_eps)
                opt.step_codes[k] += 1
                adam_step(codes[k], zg, opt.m_codes[k], opt.v_codes[k],
                          int(opt.step_codes[k]), lr,
                          config.adam_beta1, config.adam_beta2, config.adam_eps)
                sums += (bd.total, bd.surface_term, bd.normal_term,
                         bd.eikonal_term, bd.code_reg_term)
            means = [float(s) for s in sums / n]
            if metrics is not None:
                metrics.write(f"{epoch},{means[0]!r},{means[1]!r},{means[2]!r},"
                              f"{means[3]!r},{means[4]!r},{lr!r}\n")
            if log is not None and (epoch % 100 == 0 or epoch == config.epochs - 1):
                print(f"epoch {epoch}: mean loss {means[0]:.6f} (lr {lr:g})",
                      file=log, flush=True)
    finally:
        if close_metrics:
            metrics.close()

    return Checkpoint(arch=arch, params=params, codes=codes, config=config,
                      epochs_completed=config.epochs, seed=config.seed,
                      optimizer=opt).validate()
