"""Shared fixtures and small helpers for the test suite."""

import numpy as np
import pytest

from sdfshapes.field import Architecture, FieldParams, init_params
from sdfshapes.training import Checkpoint, TrainConfig


def tiny_arch(latent_dim=4, width=8, layers=3, skip=1):
    return Architecture(layer_count=layers, hidden_width=width,
                        latent_dim=latent_dim, skip_layer=skip,
                        softplus_beta=100.0)


def random_params(arch, seed):
    """Small random parameters so softplus stays in its curved regime."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for din, dout in arch.layer_dims():
        weights.append(rng.normal(0.0, 0.4 / np.sqrt(din), size=(dout, din)))
        biases.append(rng.normal(0.0, 0.05, size=dout))
    return FieldParams(arch, weights, biases).validate()


def linear_field(w, b=0.0, latent_dim=1):
    """Single-layer degenerate network computing f(z, x) = w . x + b."""
    arch = Architecture(layer_count=1, hidden_width=1,
                        latent_dim=latent_dim, skip_layer=1)
    W = np.zeros((1, latent_dim + 3))
    W[0, latent_dim:] = np.asarray(w, dtype=np.float64)
    return FieldParams(arch, [W], [np.array([float(b)])]).validate()


def tiny_checkpoint(n_codes=5, seed=3, latent_dim=4, width=32, epochs=0):
    """Untrained checkpoint whose geometric init is close to a radius-0.5
    sphere field, so reconstructions are nonempty without any training."""
    arch = Architecture(layer_count=3, hidden_width=width,
                        latent_dim=latent_dim, skip_layer=1)
    params = init_params(arch, seed, "geometric")
    codes = np.random.default_rng(seed).normal(0.0, 1e-2, (n_codes, latent_dim))
    cfg = TrainConfig(epochs=max(epochs, 0) or 1, latent_dim=latent_dim,
                      surface_batch_size=32, seed=seed)
    return Checkpoint(arch=arch, params=params, codes=codes, config=cfg,
                      epochs_completed=0, seed=seed).validate()


CUBE_OBJ = """\
# unit-radius cube, side 2
v -1 -1 -1
v 1 -1 -1
v 1 1 -1
v -1 1 -1
v -1 -1 1
v 1 -1 1
v 1 1 1
v -1 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


@pytest.fixture
def cube_obj_path(tmp_path):
    p = tmp_path / "cube.obj"
    p.write_text(CUBE_OBJ)
    return p
