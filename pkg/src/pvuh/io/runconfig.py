"""Run configuration: a flat namespaced key-value document.

Every key is declared in the registry with a type and default; an
unknown key is a hard error so typos never pass silently.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..errors import ConfigError
from ..model import ModelConfig, parse_layout
from ..synthgen import GenParams
from ..train import TrainConfig


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_strlist(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.split(",") if x.strip())


_PARSERS = {"int": int, "float": float, "bool": _parse_bool,
            "str": str, "strlist": _parse_strlist}

# key -> (type name, default)
REGISTRY: dict[str, tuple[str, Any]] = {
    "data.classes": ("strlist", ("walk", "wave", "squat")),
    "data.sequences_per_class": ("int", 87),
    "data.n_frames": ("int", 30),
    "data.n_points": ("int", 384),
    "data.frame_rate": ("float", 10.0),
    "data.seed": ("int", 0),
    "data.train_fraction": ("float", 0.8),
    "data.flow_threshold": ("float", 0.10),
    "data.height_min": ("float", 1.55),
    "data.height_max": ("float", 1.95),
    "data.lidar.beams": ("int", 48),
    "data.lidar.vertical_fov": ("float", 40.0),
    "data.lidar.horizontal_res": ("float", 0.30),
    "data.lidar.range_sigma": ("float", 0.008),
    "data.lidar.dropout": ("float", 0.02),
    "data.lidar.distance_min": ("float", 3.0),
    "data.lidar.distance_max": ("float", 6.0),
    "data.max_noise_objects": ("int", 2),
    "data.crop_prob": ("float", 0.5),
    "data.crop_max_fraction": ("float", 0.22),
    "mask.r_t": ("float", 0.8),
    "mask.r_s": ("float", 0.6),
    "model.token_dim": ("int", 384),
    "model.heads": ("int", 6),
    "model.encoder_layout": ("str", "s4,t4,s4"),
    "model.decoder_layout": ("str", "s4"),
    "model.mlp_ratio": ("int", 4),
    "model.n_patch_points": ("int", 48),
    "model.tokenizer_d1": ("int", 64),
    "model.tokenizer_d2": ("int", 128),
    "model.pe_hidden": ("int", 128),
    "model.head": ("str", "action"),
    "model.n_classes": ("int", 0),  # 0 = len(data.classes)
    "model.n_joints": ("int", 10),
    "train.epochs": ("int", 20),
    "train.batch_size": ("int", 16),
    "train.lr": ("float", 0.001),
    "train.weight_decay": ("float", 0.05),
    "train.schedule": ("str", "constant"),
    "train.seed": ("int", 0),
    "train.snapshot_every": ("int", 0),
    "paths.data": ("str", "data"),
    "paths.out": ("str", "out"),
}


@dataclass
class RunConfig:
    values: dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls(values={k: v for k, (_, v) in REGISTRY.items()})

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        cfg = cls.defaults()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', "
                                  f"got {raw!r}")
            key, val = (p.strip() for p in line.split("=", 1))
            if key not in REGISTRY:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            type_name, _ = REGISTRY[key]
            try:
                cfg.values[key] = _PARSERS[type_name](val)
            except ValueError as e:
                raise ConfigError(f"{source}:{lineno}: bad value for {key}: {e}")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        return cls.from_text(p.read_text(), source=str(p))

    def override(self, key: str, value) -> None:
        if key not in REGISTRY:
            raise ConfigError(f"unknown key {key!r}")
        type_name, _ = REGISTRY[key]
        self.values[key] = _PARSERS[type_name](str(value))

    def to_text(self) -> str:
        lines = []
        for key in REGISTRY:
            v = self.values[key]
            if isinstance(v, tuple):
                v = ",".join(v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    # -- typed views --------------------------------------------------------

    def gen_params(self) -> GenParams:
        v = self.values
        return GenParams(
            n_frames=v["data.n_frames"], n_points=v["data.n_points"],
            frame_rate=v["data.frame_rate"],
            height_range=(v["data.height_min"], v["data.height_max"]),
            distance_range=(v["data.lidar.distance_min"],
                            v["data.lidar.distance_max"]),
            beams=v["data.lidar.beams"],
            vertical_fov_deg=v["data.lidar.vertical_fov"],
            horizontal_res_deg=v["data.lidar.horizontal_res"],
            range_sigma=v["data.lidar.range_sigma"],
            dropout=v["data.lidar.dropout"],
            max_noise_objects=v["data.max_noise_objects"],
            crop_prob=v["data.crop_prob"],
            crop_max_fraction=v["data.crop_max_fraction"],
            flow_threshold=v["data.flow_threshold"],
        )

    def model_config(self, head: str | None = None) -> ModelConfig:
        v = self.values
        n_classes = v["model.n_classes"] or len(v["data.classes"])
        return ModelConfig(
            token_dim=v["model.token_dim"], n_heads=v["model.heads"],
            encoder_layout=parse_layout(v["model.encoder_layout"]),
            decoder_layout=parse_layout(v["model.decoder_layout"]),
            mlp_ratio=v["model.mlp_ratio"], n_frames=v["data.n_frames"],
            n_patch_points=v["model.n_patch_points"],
            tokenizer_dims=(v["model.tokenizer_d1"], v["model.tokenizer_d2"]),
            pe_hidden=v["model.pe_hidden"],
            head=head or v["model.head"], n_classes=n_classes,
            n_joints=v["model.n_joints"],
        )

    def train_config(self, stage: str) -> TrainConfig:
        v = self.values
        return TrainConfig(
            epochs=v["train.epochs"], batch_size=v["train.batch_size"],
            lr0=v["train.lr"], weight_decay=v["train.weight_decay"],
            schedule=v["train.schedule"], seed=v["train.seed"], stage=stage,
            snapshot_every=v["train.snapshot_every"],
        )
