"""Run configuration: a strict JSON document merged over module defaults.

Sections mirror the owning modules (scene, augment, model, train, eval,
paths, seeds). Unknown keys anywhere are rejected with the offending key
path, and the effective (default-merged) config is echoed into every run
directory so a run can be reproduced from its artifacts alone.
"""

from __future__ import annotations

import json
from pathlib import Path


class ConfigError(Exception):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(message)


DEFAULTS: dict = {
    "scene": {
        "ambient_c": 20.0,
        "tau_s": 30.0,
        "noise_counts": 20.0,
    },
    "augment": {
        "n_total": 10000,
        "out_size": 128,
        "pad_factor": 1.5,
        "rotation_deg": [-45.0, 45.0],
        "perspective_scale": [0.0, 0.1],
        "crop_fraction": [0.44, 1.0],
        "brightness_delta": [-0.10, 0.10],
        "contrast_delta": [-0.10, 0.10],
        "disabled_stages": [],
    },
    "model": {
        "num_layers": 5,
        "latent_dim": 64,
        "input_size": 128,
    },
    "train": {
        "batch_size": 32,
        "epochs": 100,
        "learning_rate": 1e-3,
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "adam_eps": 1e-8,
    },
    "eval": {
        "score_method": "smoothed_max",
        "smooth_k": 5,
        "heater_currents_a": [0.15],
    },
    "paths": {
        "out_dir": "runs",
    },
    "seeds": {
        "scene": 101,
        "augment": 202,
        "init": 303,
        "shuffle": 404,
    },
}


def _merge(defaults: dict, override: dict, prefix: str = "") -> dict:
    merged = {}
    for key, default_value in defaults.items():
        if key in override:
            value = override[key]
            if isinstance(default_value, dict):
                if not isinstance(value, dict):
                    raise ConfigError(
                        prefix + key, f"config section '{prefix}{key}' must be an object"
                    )
                merged[key] = _merge(default_value, value, f"{prefix}{key}.")
            else:
                merged[key] = value
        else:
            merged[key] = default_value if not isinstance(default_value, dict) else _merge(
                default_value, {}, f"{prefix}{key}."
            )
    for key in override:
        if key not in defaults:
            raise ConfigError(prefix + key, f"unknown config key '{prefix}{key}'")
    return merged


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, merged with an optional JSON file, merged with overrides."""
    merged = json.loads(json.dumps(DEFAULTS))  # deep copy
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            user = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("<root>", f"config file {path} is not valid JSON: {e}")
        if not isinstance(user, dict):
            raise ConfigError("<root>", "config root must be a JSON object")
        merged = _merge(DEFAULTS, user)
    if overrides:
        merged = _merge(merged, overrides)
    return merged


def echo_config(config: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2, sort_keys=True)
        f.write("\n")
