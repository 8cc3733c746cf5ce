"""Keyed text run configuration: `key = value` lines with `#` comments.

Every key has a documented default; unknown keys are rejected so typos
cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadValue, UnknownKey
from .field import Architecture
from .training import TrainConfig

DEFAULT_RESOLUTION = 256
DEFAULT_EVAL_POINTS = 30000
DEFAULT_SAMPLE_POINTS = 500000
DEFAULT_GRID_HALFWIDTH = 1.1


@dataclass
class RunSettings:
    """Training hyperparameters plus sampling and extraction settings."""

    train: TrainConfig
    arch: Architecture
    resolution: int = DEFAULT_RESOLUTION
    eval_points: int = DEFAULT_EVAL_POINTS
    sample_points: int = DEFAULT_SAMPLE_POINTS
    grid_halfwidth: float = DEFAULT_GRID_HALFWIDTH
    init_scheme: str = "geometric"


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(text)


# key -> (target section, attribute, parser)
_KEYS = {
    "epochs": ("train", "epochs", int),
    "initial_lr": ("train", "initial_lr", float),
    "lr_halving_period": ("train", "lr_halving_period", int),
    "tau": ("train", "tau", float),
    "lambda": ("train", "lam", float),
    "latent_dim": ("train", "latent_dim", int),
    "code_init_std": ("train", "code_init_std", float),
    "surface_batch_size": ("train", "surface_batch_size", int),
    "offsurface_ratio": ("train", "offsurface_ratio", float),
    "adam_beta1": ("train", "adam_beta1", float),
    "adam_beta2": ("train", "adam_beta2", float),
    "adam_eps": ("train", "adam_eps", float),
    "knn_k": ("train", "knn_k", int),
    "uniform_halfwidth": ("train", "uniform_halfwidth", float),
    "seed": ("train", "seed", int),
    "squared_code_reg": ("train", "squared_code_reg", _parse_bool),
    "layer_count": ("arch", "layer_count", int),
    "hidden_width": ("arch", "hidden_width", int),
    "skip_layer": ("arch", "skip_layer", int),
    "softplus_beta": ("arch", "softplus_beta", float),
    "resolution": ("top", "resolution", int),
    "eval_points": ("top", "eval_points", int),
    "sample_points": ("top", "sample_points", int),
    "grid_halfwidth": ("top", "grid_halfwidth", float),
    "init_scheme": ("top", "init_scheme", str),
}


def parse_config(text: str) -> RunSettings:
    """Parse configuration text; unspecified keys keep their defaults."""
    train_kwargs = {}
    arch_kwargs = {}
    top_kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadValue(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise UnknownKey(f"line {lineno}: unknown key {key!r}")
        section, attr, parser = _KEYS[key]
        try:
            parsed = parser(value)
        except ValueError:
            raise BadValue(f"line {lineno}: bad value {value!r} for key {key!r}")
        {"train": train_kwargs, "arch": arch_kwargs, "top": top_kwargs}[section][attr] = parsed
    train = TrainConfig(**train_kwargs)
    arch = Architecture(latent_dim=train.latent_dim, **arch_kwargs)
    if top_kwargs.get("init_scheme", "geometric") not in ("geometric", "xavier"):
        raise BadValue(f"init_scheme must be 'geometric' or 'xavier'")
    return RunSettings(train=train, arch=arch, **top_kwargs)


def render_config(settings: RunSettings) -> str:
    """Textual form of a settings object; parse_config inverts it exactly."""
    values = {
        "epochs": settings.train.epochs,
        "initial_lr": settings.train.initial_lr,
        "lr_halving_period": settings.train.lr_halving_period,
        "tau": settings.train.tau,
        "lambda": settings.train.lam,
        "latent_dim": settings.train.latent_dim,
        "code_init_std": settings.train.code_init_std,
        "surface_batch_size": settings.train.surface_batch_size,
        "offsurface_ratio": settings.train.offsurface_ratio,
        "adam_beta1": settings.train.adam_beta1,
        "adam_beta2": settings.train.adam_beta2,
        "adam_eps": settings.train.adam_eps,
        "knn_k": settings.train.knn_k,
        "uniform_halfwidth": settings.train.uniform_halfwidth,
        "seed": settings.train.seed,
        "squared_code_reg": settings.train.squared_code_reg,
        "layer_count": settings.arch.layer_count,
        "hidden_width": settings.arch.hidden_width,
        "skip_layer": settings.arch.skip_layer,
        "softplus_beta": settings.arch.softplus_beta,
        "resolution": settings.resolution,
        "eval_points": settings.eval_points,
        "sample_points": settings.sample_points,
        "grid_halfwidth": settings.grid_halfwidth,
        "init_scheme": settings.init_scheme,
    }
    lines = []
    for key, val in values.items():
        if isinstance(val, bool):
            lines.append(f"{key} = {'true' if val else 'false'}")
        elif isinstance(val, float):
            lines.append(f"{key} = {val!r}")
        else:
            lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"
