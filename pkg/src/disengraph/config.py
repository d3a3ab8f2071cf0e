"""Training configuration and the flat key=value config file format.

Config files hold one ``name = value`` pair per line (``#`` comments); names
mirror TrainConfig fields exactly and unknown names are errors, so typos
never silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


class ConfigError(Exception):
    """Raised on unparsable or invalid configuration."""


@dataclass
class TrainConfig:
    # schedule
    epochs: int = 200
    patience: int = 50
    seed: int = 0
    # component plan
    components: int = 5          # first-layer component count
    component_step: int = 0      # per-layer decrease, in {0, 2, 4}
    layers: int = 2
    component_dim: int = 16
    skip_connections: bool = True
    # aggregation
    alpha: float = 0.5
    beta: float = 0.5
    assign_iters: int = 4
    neighbor_samples: int = 20
    input_dropout: float = 0.0
    # optimization
    lr: float = 0.01
    disc_lr: float = 0.001
    weight_decay: float = 5e-4
    # adversary
    adversary: bool = True
    adv_weight: float = 1.0      # lambda in the overall objective
    cls_weight: float = 1.0      # eta on the component-classification loss
    adv_batch: int = 256
    disc_hidden: int = 64
    disc_steps: int = 1
    saturating: bool = True
    # refinement
    refine: bool = False
    refine_start: int = 20
    gamma: float = 0.3
    tau: float = 0.0             # 0 calibrates tau from embedding distances
    coreset_size: int = 0        # 0 means max(n / 10, 64)
    knn_size: int = 10
    # evaluation
    eval_samples: int = 4

    def validate(self):
        checks = [
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.patience >= 1, "patience must be >= 1"),
            (self.components >= 1, "components must be >= 1"),
            (self.component_step in (0, 2, 4), "component_step must be one of 0, 2, 4"),
            (self.layers >= 1, "layers must be >= 1"),
            (self.component_dim >= 1, "component_dim must be >= 1"),
            (self.alpha >= 0 and self.beta >= 0, "alpha and beta must be >= 0"),
            (self.assign_iters >= 1, "assign_iters must be >= 1"),
            (self.neighbor_samples >= 1, "neighbor_samples must be >= 1"),
            (0.0 <= self.input_dropout < 1.0, "input_dropout must be in [0, 1)"),
            (self.lr > 0 and self.disc_lr > 0, "learning rates must be > 0"),
            (self.weight_decay >= 0, "weight_decay must be >= 0"),
            (self.adv_weight >= 0 and self.cls_weight >= 0, "adversarial weights must be >= 0"),
            (self.adv_batch >= 1, "adv_batch must be >= 1"),
            (self.disc_hidden >= 1, "disc_hidden must be >= 1"),
            (self.disc_steps >= 1, "disc_steps must be >= 1"),
            (self.refine_start >= 1, "refine_start must be >= 1"),
            (0.0 <= self.gamma <= 1.0, "gamma must be in [0, 1]"),
            (self.tau >= 0.0, "tau must be >= 0"),
            (self.coreset_size >= 0, "coreset_size must be >= 0"),
            (self.knn_size >= 1, "knn_size must be >= 1"),
            (self.eval_samples >= 1, "eval_samples must be >= 1"),
        ]
        last_components = self.components - self.component_step * (self.layers - 1)
        checks.append((last_components >= 1, "component plan reaches zero components"))
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def component_plan(self):
        return [self.components - self.component_step * l for l in range(self.layers)]

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def _parse_value(name, text):
    kind = _FIELDS[name]
    text = text.strip()
    try:
        if kind == "bool":
            if text.lower() in ("true", "1", "yes", "on"):
                return True
            if text.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for '{name}': {exc}") from exc
    raise ConfigError(f"unhandled field type for '{name}'")


def parse_config(text, base: TrainConfig | None = None) -> TrainConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'name = value'")
        name, _, raw = line.partition("=")
        name = name.strip()
        if name not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key '{name}'")
        if name in values:
            raise ConfigError(f"line {lineno}: duplicate config key '{name}'")
        values[name] = _parse_value(name, raw)
    cfg = (base or TrainConfig()).replace(**values)
    return cfg.validate()


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text, base=base)


def format_config(cfg: TrainConfig) -> str:
    lines = []
    for f in dataclasses.fields(TrainConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
