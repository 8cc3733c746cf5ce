"""Bit-exact binary checkpoint container.

Single file, little-endian, float64 tensors.  Layout: magic, version,
architecture block, shape count, per-layer weight/bias tensors, the
codebook, a train-config echo, bookkeeping, and optionally the Adam state.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import BadMagic, ShapeInconsistency, TruncatedFile, UnsupportedVersion
from .field import Architecture, FieldParams
from .training import Checkpoint, OptimizerState, TrainConfig

CHECKPOINT_MAGIC = b"NSDF"
CHECKPOINT_VERSION = 1

_CONFIG_FMT = "<IdIddIdIddddIdQB"
_CONFIG_FIELDS = ("epochs", "initial_lr", "lr_halving_period", "tau", "lam",
                  "latent_dim", "code_init_std", "surface_batch_size",
                  "offsurface_ratio", "adam_beta1", "adam_beta2", "adam_eps",
                  "knn_k", "uniform_halfwidth", "seed", "squared_code_reg")


class _Writer:
    def __init__(self):
        self.chunks = []

    def pack(self, fmt, *vals):
        self.chunks.append(struct.pack(fmt, *vals))

    def tensor(self, arr):
        self.chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    def bytes(self) -> bytes:
        return b"".join(self.chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def unpack(self, fmt):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.data):
            raise TruncatedFile("checkpoint ends mid-record")
        vals = struct.unpack_from(fmt, self.data, self.off)
        self.off += size
        return vals

    def tensor(self, shape):
        count = int(np.prod(shape))
        size = count * 8
        if self.off + size > len(self.data):
            raise TruncatedFile("checkpoint ends inside a tensor")
        arr = np.frombuffer(self.data, dtype="<f8", count=count,
                            offset=self.off).reshape(shape).astype(np.float64)
        self.off += size
        return arr


def checkpoint_bytes(ck: Checkpoint) -> bytes:
    ck.validate()
    w = _Writer()
    w.chunks.append(CHECKPOINT_MAGIC)
    w.pack("<I", CHECKPOINT_VERSION)
    a = ck.arch
    w.pack("<IIIId", a.layer_count, a.hidden_width, a.latent_dim,
           a.skip_layer, a.softplus_beta)
    n = len(ck.codes)
    w.pack("<I", n)
    for W, b in zip(ck.params.weights, ck.params.biases):
        w.tensor(W)
        w.tensor(b)
    w.tensor(ck.codes)
    c = ck.config
    w.pack(_CONFIG_FMT, c.epochs, c.initial_lr, c.lr_halving_period, c.tau,
           c.lam, c.latent_dim, c.code_init_std, c.surface_batch_size,
           c.offsurface_ratio, c.adam_beta1, c.adam_beta2, c.adam_eps,
           c.knn_k, c.uniform_halfwidth, c.seed, int(c.squared_code_reg))
    w.pack("<IQ", ck.epochs_completed, ck.seed)
    opt = ck.optimizer
    w.pack("<B", 0 if opt is None else 1)
    if opt is not None:
        w.pack("<Q", opt.step_params)
        w.chunks.append(np.ascontiguousarray(opt.step_codes, dtype="<u8").tobytes())
        for mW, vW, mb, vb in zip(opt.m_weights, opt.v_weights,
                                  opt.m_biases, opt.v_biases):
            w.tensor(mW)
            w.tensor(vW)
            w.tensor(mb)
            w.tensor(vb)
        w.tensor(opt.m_codes)
        w.tensor(opt.v_codes)
    return w.bytes()


def save_checkpoint(ck: Checkpoint, path) -> None:
    data = checkpoint_bytes(ck)
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise BadMagic(f"not a checkpoint: magic {data[:4]!r}")
    r = _Reader(data)
    r.off = 4
    (version,) = r.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersion(f"checkpoint version {version}")
    layer_count, hidden_width, latent_dim, skip_layer, beta = r.unpack("<IIIId")
    arch = Architecture(layer_count, hidden_width, latent_dim, skip_layer, beta)
    (n,) = r.unpack("<I")
    weights, biases = [], []
    for din, dout in arch.layer_dims():
        weights.append(r.tensor((dout, din)))
        biases.append(r.tensor((dout,)))
    params = FieldParams(arch, weights, biases)
    codes = r.tensor((n, latent_dim))
    cfg_vals = r.unpack(_CONFIG_FMT)
    cfg_kwargs = dict(zip(_CONFIG_FIELDS, cfg_vals))
    cfg_kwargs["squared_code_reg"] = bool(cfg_kwargs["squared_code_reg"])
    config = TrainConfig(**cfg_kwargs)
    epochs_completed, seed = r.unpack("<IQ")
    (has_opt,) = r.unpack("<B")
    opt = None
    if has_opt:
        (step_params,) = r.unpack("<Q")
        size = n * 8
        if r.off + size > len(data):
            raise TruncatedFile("checkpoint ends inside step counts")
        step_codes = np.frombuffer(data, dtype="<u8", count=n,
                                   offset=r.off).astype(np.int64)
        r.off += size
        m_w, v_w, m_b, v_b = [], [], [], []
        for din, dout in arch.layer_dims():
            m_w.append(r.tensor((dout, din)))
            v_w.append(r.tensor((dout, din)))
            m_b.append(r.tensor((dout,)))
            v_b.append(r.tensor((dout,)))
        m_codes = r.tensor((n, latent_dim))
        v_codes = r.tensor((n, latent_dim))
        opt = OptimizerState(m_w, v_w, m_b, v_b, m_codes, v_codes,
                             step_params, step_codes)
    if r.off != len(data):
        raise ShapeInconsistency("trailing bytes after checkpoint payload")
    if config.latent_dim != latent_dim:
        raise ShapeInconsistency("config latent_dim disagrees with architecture")
    ck = Checkpoint(arch=arch, params=params, codes=codes, config=config,
                    epochs_completed=epochs_completed, seed=seed, optimizer=opt)
    return ck.validate()
