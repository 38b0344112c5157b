"""Run configuration: one JSON document wiring every component config.

Layout (all sections optional; defaults fill the gaps)::

    {
      "seed": 1234,
      "transform":     {"f_c": 900.0, "d_min": 0.5, "d_max": 80.0},
      "sparse_sampler": {"n_min": 1, "n_max": 10, ...},
      "pose_sampler":  {"n_frames": 10000, "z_min": 1.0, ...},
      "loss":          {"lambda_si": 0.5, "lambda_grad": 0.5, "grad_scales": 4},
      "paths":         {"mesh": "...", "out": "..."}
    }

Unknown keys are rejected at every level. Component seeds omitted from the
document are derived from the master seed with the tags in
:mod:`sparsedepth.seeding` so one 64-bit seed reproduces an entire run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError, InvalidInputError
from .geometry import TransformConfig
from .losses import LossConfig
from .render import PoseSamplerConfig
from .seeding import TAG_POSE_SAMPLER, TAG_SPARSE_SAMPLER, derive_seed
from .sparse import SamplerConfig

_SECTIONS = {
    "transform": TransformConfig,
    "sparse_sampler": SamplerConfig,
    "pose_sampler": PoseSamplerConfig,
    "loss": LossConfig,
}


@dataclass(frozen=True)
class RunConfig:
    seed: int
    transform: TransformConfig
    sparse_sampler: SamplerConfig
    pose_sampler: PoseSamplerConfig
    loss: LossConfig
    paths: dict[str, str]


def _build_section(name: str, cls, doc: dict, defaults: dict):
    allowed = {f.name for f in fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    try:
        return cls(**{**defaults, **doc})
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def load_run_config(path=None, seed_override: int | None = None) -> RunConfig:
    """Load a run config, filling defaults; flags beat file values.

    ``seed_override`` replaces the master seed; component seeds not pinned in
    the file are re-derived from it.
    """
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = set(doc) - (set(_SECTIONS) | {"seed", "paths"})
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    if seed_override is not None:
        seed = seed_override

    paths = doc.get("paths", {})
    if not isinstance(paths, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in paths.items()
    ):
        raise ConfigError("paths must be a string-to-string object")

    sections = {}
    for name, cls in _SECTIONS.items():
        sub = doc.get(name, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{name} must be a JSON object")
        defaults: dict = {}
        if name == "pose_sampler" and "seed" not in sub:
            defaults["seed"] = derive_seed(seed, TAG_POSE_SAMPLER)
        if name == "sparse_sampler" and "seed" not in sub:
            defaults["seed"] = derive_seed(seed, TAG_SPARSE_SAMPLER)
        sections[name] = _build_section(name, cls, sub, defaults)

    return RunConfig(
        seed=seed,
        transform=sections["transform"],
        sparse_sampler=sections["sparse_sampler"],
        pose_sampler=sections["pose_sampler"],
        loss=sections["loss"],
        paths=dict(paths),
    )
